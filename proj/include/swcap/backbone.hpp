#pragma once

#include <filesystem>
#include <random>
#include <variant>
#include <vector>

#include "swcap/attention.hpp"
#include "swcap/model_config.hpp"
#include "swcap/nn.hpp"

namespace swcap {

// Pixels in [0, 1], stored height x width x channels row-major.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<Real> pixels;

  Real at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  void validate() const;
};

// V_G [m, D] in row-major cell order and the global feature v_g [D].
struct GridFeatures {
  Tensor grid;
  Tensor global;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  // Sets global to the mean of the grid rows.
  static GridFeatures from_grid(Tensor grid, std::size_t grid_h, std::size_t grid_w);
};

using ModelInput = std::variant<ImageTensor, GridFeatures>;

// Non-overlapping patch x patch tiles, each flattened in (dy, dx, channel)
// order, projected by `proj` [patch*patch*C, D]. Output [H/patch * W/patch, D].
Tensor patch_embed(const ImageTensor& image, const Linear& proj, std::size_t patch);

struct SwinBlockWeights {
  MsaWeights attn;
  FeedForward ff;
  LayerNormParams attn_norm;
  LayerNormParams ff_norm;

  static SwinBlockWeights create(std::size_t d, std::size_t hidden, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

class Backbone {
 public:
  static Backbone create(const ModelConfig& config, std::mt19937_64& rng);

  // Patch embedding followed by the configured windowed blocks; block 0 uses
  // W-MSA, block 1 SW-MSA, and so on.
  GridFeatures extract(const ImageTensor& image, const DropoutContext& dropout = {}) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  const Linear& projection() const { return proj_; }
  const std::vector<SwinBlockWeights>& blocks() const { return blocks_; }

 private:
  ModelConfig config_;
  Linear proj_;
  std::vector<SwinBlockWeights> blocks_;
};

// Feature file: magic "SWCFEAT\0", u32 version (1), u32 H_g, u32 W_g, u32 D,
// then H_g*W_g*D little-endian float64 in row-major cell order.
GridFeatures load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const GridFeatures& features);

// Raw image file: magic "SWCIMG\0\0", u32 version (1), u32 height, u32 width,
// u32 channels, then float64 pixels. Files starting with "P6" are read as
// binary portable pixmaps.
ImageTensor load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ImageTensor& image);
void save_ppm(const std::filesystem::path& path, const ImageTensor& image);

}  // namespace swcap
