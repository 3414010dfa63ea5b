#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"
#include "swcap/attention.hpp"

namespace swcap {

enum class InputKind { kPixels, kFeatures };

// Every architectural axis of the captioner as one value.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  // Refining encoder and decoder depth N.
  std::size_t blocks = 2;
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  std::size_t window = 2;
  std::size_t shift = 1;
  std::size_t vocab_size = 0;
  // Maximum generated tokens, EOS included.
  std::size_t max_len = 20;
  std::size_t ff_mult = 4;
  double dropout = 0.1;

  InputKind input = InputKind::kPixels;
  // Width of precomputed feature files; 0 means equal to d_model.
  std::size_t feature_dim = 0;

  // Toy backbone: patch embedding then alternating W-MSA / SW-MSA blocks.
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t channels = 3;
  std::size_t patch = 4;
  std::size_t backbone_blocks = 2;
  std::size_t backbone_window = 2;
  std::size_t backbone_shift = 1;
  bool freeze_backbone = false;

  AttentionConfig attention() const { return {d_model, heads}; }
  WindowSpec window_spec() const { return {grid_h, grid_w, window, shift}; }
  WindowSpec backbone_window_spec() const { return {grid_h, grid_w, backbone_window, backbone_shift}; }
  std::size_t cells() const { return grid_h * grid_w; }
  std::size_t input_feature_dim() const { return feature_dim == 0 ? d_model : feature_dim; }

  // Throws ConfigError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace swcap
