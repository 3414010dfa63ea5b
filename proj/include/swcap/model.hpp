#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "swcap/backbone.hpp"
#include "swcap/decoder.hpp"
#include "swcap/encoder.hpp"
#include "swcap/model_config.hpp"

namespace swcap {

// Backbone (or feature projection), refining encoder and decoder.
class CaptionModel {
 public:
  static CaptionModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Every parameter in a fixed order with unique names.
  ParameterList parameters() const;
  // parameters() minus the backbone when freeze_backbone is set.
  ParameterList trainable_parameters() const;

  // Initial grid features before refinement.
  GridFeatures features(const ModelInput& input, const DropoutContext& dropout = {}) const;
  RefinedFeatures encode(const ModelInput& input, const DropoutContext& dropout = {},
                         bool mask_global = false) const;
  DecodeOutputs decode(std::span<const int> prefix, const RefinedFeatures& features,
                       const DropoutContext& dropout = {}, bool want_cross_weights = false) const;

  const Backbone& backbone() const { return backbone_; }
  const RefiningEncoder& encoder() const { return encoder_; }
  RefiningEncoder& encoder() { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  Decoder& decoder() { return decoder_; }

 private:
  ModelConfig config_;
  Backbone backbone_;
  std::optional<Linear> feature_proj_;
  RefiningEncoder encoder_;
  Decoder decoder_;
};

struct LoadedModel {
  CaptionModel model;
  std::vector<std::string> vocab;  // id -> token
  nlohmann::json header;
};

// Header: {"config": ModelConfig, "vocab": [token...], "meta": {...}}.
void save_model(const std::filesystem::path& path, const CaptionModel& model,
                const std::vector<std::string>& vocab, const nlohmann::json& meta = nlohmann::json::object());
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace swcap
