#include "swcap/attention.hpp"

#include <cmath>

#include "swcap/ops.hpp"

namespace swcap {

namespace {

thread_local std::uint64_t t_score_count = 0;

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = i;
  return inv;
}

std::size_t window_from_cells(std::size_t n) {
  auto ws = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  if (ws * ws != n) throw DimensionError("window of " + std::to_string(n) + " cells is not square");
  return ws;
}

}  // namespace

void AttentionConfig::validate() const {
  if (d_model == 0) throw ConfigError("attention width D must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("head count h=" + std::to_string(heads) + " must divide D=" + std::to_string(d_model));
  }
}

void WindowSpec::validate() const {
  if (window == 0) throw ConfigError("window size ws must be positive");
  if (grid_h == 0 || grid_w == 0) throw ConfigError("grid extents must be positive");
  if (grid_h % window != 0 || grid_w % window != 0) {
    throw ConfigError("window size ws=" + std::to_string(window) + " does not divide grid " +
                      std::to_string(grid_h) + "x" + std::to_string(grid_w));
  }
  if (shift >= window) {
    throw ConfigError("shift size ss=" + std::to_string(shift) + " must be smaller than ws=" +
                      std::to_string(window));
  }
}

MsaWeights MsaWeights::create(std::size_t d_model, std::mt19937_64& rng) {
  MsaWeights w;
  w.query = Linear::create(d_model, d_model, false, rng);
  w.key = Linear::create(d_model, d_model, false, rng);
  w.value = Linear::create(d_model, d_model, false, rng);
  w.output = Linear::create(d_model, d_model, true, rng);
  return w;
}

void MsaWeights::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".w_q", out);
  key.collect(prefix + ".w_k", out);
  value.collect(prefix + ".w_v", out);
  output.collect(prefix + ".w_o", out);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask,
                 Tensor* weights_out) {
  if (q.ndim() < 2 || k.ndim() < 2 || v.ndim() < 2) {
    throw DimensionError("attention operands must have rank >= 2");
  }
  if (q.shape().back() != k.shape().back()) {
    throw DimensionError("attention key width mismatch: q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()));
  }
  if (k.shape()[k.ndim() - 2] != v.shape()[v.ndim() - 2]) {
    throw DimensionError("attention keys " + shape_str(k.shape()) + " and values " +
                         shape_str(v.shape()) + " differ in length");
  }
  const Real inv_sqrt_dk = Real(1) / std::sqrt(static_cast<Real>(q.shape().back()));
  Tensor scores = scale(matmul(q, transpose_last2(k)), inv_sqrt_dk);
  t_score_count += scores.numel();
  if (mask != nullptr) scores = add(scores, *mask);
  Tensor weights = softmax(scores, -1);
  if (weights_out != nullptr) *weights_out = weights;
  return matmul(weights, v);
}

Tensor msa(const Tensor& queries, const Tensor& keys, const Tensor& values, const MsaWeights& w,
           const AttentionConfig& config, const Tensor* mask, Tensor* weights_out) {
  config.validate();
  for (const Tensor* t : {&queries, &keys, &values}) {
    if (t->ndim() < 2 || t->shape().back() != config.d_model) {
      throw DimensionError("msa input " + shape_str(t->shape()) + " does not end in D=" +
                           std::to_string(config.d_model));
    }
  }
  Tensor q = split_heads(w.query(queries), config.heads);
  Tensor k = split_heads(w.key(keys), config.heads);
  Tensor v = split_heads(w.value(values), config.heads);
  Tensor heads = attention(q, k, v, mask, weights_out);
  return w.output(merge_heads(heads));
}

Tensor causal_mask(std::size_t length) {
  Tensor m = Tensor::zeros({length, length});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < length; ++i)
    for (std::size_t j = i + 1; j < length; ++j) d[i * length + j] = kMaskValue;
  return m;
}

std::vector<std::size_t> window_cell_order(const WindowSpec& spec, std::size_t shift) {
  const std::size_t ws = spec.window;
  std::vector<std::size_t> order;
  order.reserve(spec.cells());
  for (std::size_t wy = 0; wy < spec.grid_h / ws; ++wy)
    for (std::size_t wx = 0; wx < spec.grid_w / ws; ++wx)
      for (std::size_t a = 0; a < ws; ++a)
        for (std::size_t b = 0; b < ws; ++b) {
          const std::size_t r = (wy * ws + a + shift) % spec.grid_h;
          const std::size_t c = (wx * ws + b + shift) % spec.grid_w;
          order.push_back(r * spec.grid_w + c);
        }
  return order;
}

std::vector<int> shifted_region_labels(const WindowSpec& spec, std::size_t shift) {
  const std::size_t ws = spec.window;
  auto band = [&](std::size_t coord, std::size_t extent) {
    if (shift == 0 || coord < extent - ws) return 0;
    return coord < extent - shift ? 1 : 2;
  };
  std::vector<int> labels;
  labels.reserve(spec.cells());
  for (std::size_t wy = 0; wy < spec.grid_h / ws; ++wy)
    for (std::size_t wx = 0; wx < spec.grid_w / ws; ++wx)
      for (std::size_t a = 0; a < ws; ++a)
        for (std::size_t b = 0; b < ws; ++b)
          labels.push_back(band(wy * ws + a, spec.grid_h) * 3 + band(wx * ws + b, spec.grid_w));
  return labels;
}

Tensor window_attention_mask(const WindowSpec& spec, std::size_t shift, bool with_global,
                             bool mask_global) {
  const std::size_t nw = spec.num_windows();
  const std::size_t n = spec.cells_per_window();
  const std::size_t nk = n + (with_global ? 1 : 0);
  const auto labels = shifted_region_labels(spec, shift);
  Tensor mask = Tensor::zeros({nw, n, nk});
  auto d = mask.mutable_data();
  for (std::size_t w = 0; w < nw; ++w)
    for (std::size_t a = 0; a < n; ++a) {
      Real* row = d.data() + (w * n + a) * nk;
      for (std::size_t b = 0; b < n; ++b) {
        if (labels[w * n + a] != labels[w * n + b]) row[b] = kMaskValue;
      }
      if (with_global && mask_global) row[n] = kMaskValue;
    }
  return mask;
}

Tensor window_partition(const Tensor& grid, std::size_t window) {
  if (grid.ndim() != 3) throw DimensionError("window_partition needs [H, W, D], got " + shape_str(grid.shape()));
  WindowSpec spec{grid.dim(0), grid.dim(1), window, 0};
  spec.validate();
  const std::size_t d = grid.dim(2);
  Tensor rows = reshape(grid, {spec.cells(), d});
  return reshape(gather_rows(rows, window_cell_order(spec, 0)),
                 {spec.num_windows(), spec.cells_per_window(), d});
}

Tensor window_merge(const Tensor& windows, std::size_t grid_h, std::size_t grid_w) {
  if (windows.ndim() != 3) {
    throw DimensionError("window_merge needs [w, ws*ws, D], got " + shape_str(windows.shape()));
  }
  WindowSpec spec{grid_h, grid_w, window_from_cells(windows.dim(1)), 0};
  spec.validate();
  if (spec.num_windows() != windows.dim(0)) {
    throw DimensionError("window_merge: " + std::to_string(windows.dim(0)) + " windows for a " +
                         std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
  }
  const std::size_t d = windows.dim(2);
  Tensor rows = reshape(windows, {spec.cells(), d});
  return reshape(gather_rows(rows, inverse_permutation(window_cell_order(spec, 0))), {grid_h, grid_w, d});
}

Tensor cyclic_shift(const Tensor& grid, long dy, long dx) {
  if (grid.ndim() != 3) throw DimensionError("cyclic_shift needs [H, W, D], got " + shape_str(grid.shape()));
  const long h = static_cast<long>(grid.dim(0));
  const long w = static_cast<long>(grid.dim(1));
  std::vector<std::size_t> index;
  index.reserve(static_cast<std::size_t>(h * w));
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j) {
      const long r = ((i + dy) % h + h) % h;
      const long c = ((j + dx) % w + w) % w;
      index.push_back(static_cast<std::size_t>(r * w + c));
    }
  Tensor rows = reshape(grid, {grid.dim(0) * grid.dim(1), grid.dim(2)});
  return reshape(gather_rows(rows, index), grid.shape());
}

Tensor windowed_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w,
                    const AttentionConfig& config, const WindowSpec& spec, std::size_t shift,
                    const WindowAttentionOptions& options) {
  spec.validate();
  config.validate();
  if (shift >= spec.window) {
    throw ConfigError("shift size ss=" + std::to_string(shift) + " must be smaller than ws=" +
                      std::to_string(spec.window));
  }
  if (grid.ndim() != 2 || grid.dim(0) != spec.cells() || grid.dim(1) != config.d_model) {
    throw DimensionError("windowed attention expects grid [" + std::to_string(spec.cells()) + "," +
                         std::to_string(config.d_model) + "], got " + shape_str(grid.shape()));
  }
  const bool with_global = global.defined();
  if (with_global && global.numel() != config.d_model) {
    throw DimensionError("global token " + shape_str(global.shape()) + " does not match D=" +
                         std::to_string(config.d_model));
  }
  const std::size_t m = spec.cells();
  const std::size_t nw = spec.num_windows();
  const std::size_t n = spec.cells_per_window();
  const std::size_t d = config.d_model;

  const auto order = window_cell_order(spec, shift);
  Tensor queries = reshape(gather_rows(grid, order), {nw, n, d});

  Tensor keys;
  if (with_global) {
    std::vector<std::size_t> key_index;
    key_index.reserve(nw * (n + 1));
    for (std::size_t i = 0; i < nw; ++i) {
      key_index.insert(key_index.end(), order.begin() + i * n, order.begin() + (i + 1) * n);
      key_index.push_back(m);
    }
    Tensor stacked = stack_rows({grid, global});
    keys = reshape(gather_rows(stacked, key_index), {nw, n + 1, d});
  } else {
    keys = queries;
  }

  Tensor mask;
  if (shift > 0 || (with_global && options.mask_global)) {
    mask = window_attention_mask(spec, shift, with_global, options.mask_global);
    mask = reshape(mask, {nw, 1, n, keys.dim(1)});
  }
  Tensor out = msa(queries, keys, keys, w, config, mask.defined() ? &mask : nullptr, options.weights_out);
  return gather_rows(reshape(out, {m, d}), inverse_permutation(order));
}

Tensor w_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w, const AttentionConfig& config,
             const WindowSpec& spec, const WindowAttentionOptions& options) {
  return windowed_msa(grid, global, w, config, spec, 0, options);
}

Tensor sw_msa(const Tensor& grid, const Tensor& global, const MsaWeights& w, const AttentionConfig& config,
              const WindowSpec& spec, const WindowAttentionOptions& options) {
  return windowed_msa(grid, global, w, config, spec, spec.shift, options);
}

std::uint64_t attention_score_count() { return t_score_count; }
void reset_attention_score_count() { t_score_count = 0; }

}  // namespace swcap
