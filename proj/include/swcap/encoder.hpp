#pragma once

#include <random>
#include <vector>

#include "swcap/attention.hpp"
#include "swcap/backbone.hpp"
#include "swcap/model_config.hpp"
#include "swcap/nn.hpp"

namespace swcap {

// One refining block. The grid and global paths share `attn` and `ff`; each
// path has its own pair of LayerNorms.
struct RefiningBlockWeights {
  MsaWeights attn;
  FeedForward ff;
  LayerNormParams grid_attn_norm;
  LayerNormParams grid_ff_norm;
  LayerNormParams global_attn_norm;
  LayerNormParams global_ff_norm;

  static RefiningBlockWeights create(std::size_t d, std::size_t hidden, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct RefinedFeatures {
  Tensor grid;    // [m, D]
  Tensor global;  // [D]
};

struct RefineOptions {
  // Hides the global token from every attention, grid and global path alike.
  bool mask_global = false;
  DropoutContext dropout;
};

// Grid path: windowed MSA of the grid over its window plus v_g, then FF.
// Global path: full MSA of v_g over [V_G; v_g], then FF. Both post-norm and
// both read the block inputs.
RefinedFeatures refine_block(const Tensor& grid, const Tensor& global, const RefiningBlockWeights& w,
                             const AttentionConfig& config, const WindowSpec& spec, bool use_shift,
                             const RefineOptions& options = {});

class RefiningEncoder {
 public:
  static RefiningEncoder create(const ModelConfig& config, std::mt19937_64& rng);

  // Block 0 uses W-MSA, block 1 SW-MSA, alternating from there.
  RefinedFeatures refine(const Tensor& grid, const Tensor& global, const RefineOptions& options = {}) const;
  RefinedFeatures refine(const GridFeatures& features, const RefineOptions& options = {}) const {
    return refine(features.grid, features.global, options);
  }
  void collect(const std::string& prefix, ParameterList& out) const;

  const std::vector<RefiningBlockWeights>& blocks() const { return blocks_; }
  std::vector<RefiningBlockWeights>& blocks() { return blocks_; }

 private:
  AttentionConfig attention_;
  WindowSpec spec_;
  std::vector<RefiningBlockWeights> blocks_;
};

}  // namespace swcap
