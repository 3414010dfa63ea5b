#pragma once

// Scaled dot-product attention, multi-head self-attention and its windowed
// (W-MSA) / shifted-window (SW-MSA) variants with an optional global token.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "swcap/nn.hpp"
#include "swcap/tensor.hpp"

namespace swcap {

struct AttentionConfig {
  std::size_t d_model = 0;
  std::size_t heads = 1;

  std::size_t d_k() const { return heads == 0 ? 0 : d_model / heads; }
  void validate() const;
};

struct WindowSpec {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t window = 1;
  std::size_t shift = 0;

  std::size_t cells() const { return grid_h * grid_w; }
  std::size_t cells_per_window() const { return window * window; }
  std::size_t num_windows() const { return (grid_h / window) * (grid_w / window); }
  void validate() const;
};

// Additive bias for masked (query, key) pairs. exp() of it underflows to 0.
inline constexpr Real kMaskValue = Real(-1e9);

// Projections of one MSA: W_Q, W_K, W_V (no bias) and the output projection.
struct MsaWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  static MsaWeights create(std::size_t d_model, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Softmax(q k^T / sqrt(d_k) + mask) v over the last two axes; leading axes
// broadcast. When `weights_out` is given it receives the attention weights.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask = nullptr,
                 Tensor* weights_out = nullptr);

// queries [.., Lq, D], keys/values [.., Lk, D]. Heads take contiguous column
// slices of the projections; `weights_out` receives [.., h, Lq, Lk].
Tensor msa(const Tensor& queries, const Tensor& keys, const Tensor& values, const MsaWeights& w,
           const AttentionConfig& config, const Tensor* mask = nullptr, Tensor* weights_out = nullptr);

// [Lq, Lk] mask letting position i see keys 0..i.
Tensor causal_mask(std::size_t length);

// grid [H, W, D] -> [w, ws*ws, D]; windows row-major over the window lattice,
// cells row-major inside a window.
Tensor window_partition(const Tensor& grid, std::size_t window);
// windows [w, ws*ws, D] -> [H, W, D].
Tensor window_merge(const Tensor& windows, std::size_t grid_h, std::size_t grid_w);
// grid [H, W, D]; out[i, j] = grid[(i + dy) mod H, (j + dx) mod W].
Tensor cyclic_shift(const Tensor& grid, long dy, long dx);

// Row-major cell indices of the original grid in partition order after a
// cyclic shift by (-shift, -shift).
std::vector<std::size_t> window_cell_order(const WindowSpec& spec, std::size_t shift);

// Region label (in shifted coordinates) of each cell in partition order.
// Cells in one window may attend to each other only when labels agree.
std::vector<int> shifted_region_labels(const WindowSpec& spec, std::size_t shift);

// [w, n, n (+1)] additive mask for windowed attention. The optional extra key
// column is the global token, masked only when `mask_global` is set.
Tensor window_attention_mask(const WindowSpec& spec, std::size_t shift, bool with_global,
                             bool mask_global);

struct WindowAttentionOptions {
  // Forces the global token's key column to kMaskValue in every window.
  bool mask_global = false;
  // Receives the [w, h, n, n(+1)] attention weights in partition order.
  Tensor* weights_out = nullptr;
};

// grid [H_g*W_g, D] rows in row-major cell order; global [D] or undefined.
// The global token is appended to every window's keys/values, never to its
// queries. Output rows follow the input cell order.
Tensor w_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w, const AttentionConfig& config,
             const WindowSpec& spec, const WindowAttentionOptions& options = {});
Tensor sw_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w, const AttentionConfig& config,
              const WindowSpec& spec, const WindowAttentionOptions& options = {});
Tensor windowed_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w,
                    const AttentionConfig& config, const WindowSpec& spec, std::size_t shift,
                    const WindowAttentionOptions& options = {});

// Number of query-key scores computed by attention() on this thread.
std::uint64_t attention_score_count();
void reset_attention_score_count();

}  // namespace swcap
