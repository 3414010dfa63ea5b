#include "swcap/model.hpp"

#include "swcap/checkpoint.hpp"
#include "swcap/ops.hpp"

namespace swcap {

CaptionModel CaptionModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  CaptionModel m;
  m.config_ = config;
  if (config.input == InputKind::kPixels) {
    m.backbone_ = Backbone::create(config, rng);
  } else if (config.input_feature_dim() != config.d_model) {
    m.feature_proj_ = Linear::create(config.input_feature_dim(), config.d_model, true, rng);
  }
  m.encoder_ = RefiningEncoder::create(config, rng);
  m.decoder_ = Decoder::create(config, rng);
  return m;
}

ParameterList CaptionModel::parameters() const {
  ParameterList out;
  if (config_.input == InputKind::kPixels) backbone_.collect("backbone", out);
  if (feature_proj_) feature_proj_->collect("feature_proj", out);
  encoder_.collect("encoder", out);
  decoder_.collect("decoder", out);
  check_unique_names(out);
  return out;
}

ParameterList CaptionModel::trainable_parameters() const {
  ParameterList all = parameters();
  if (!config_.freeze_backbone) return all;
  ParameterList out;
  for (auto& p : all) {
    if (p.name.rfind("backbone.", 0) != 0) out.push_back(std::move(p));
  }
  return out;
}

GridFeatures CaptionModel::features(const ModelInput& input, const DropoutContext& dropout) const {
  if (const auto* image = std::get_if<ImageTensor>(&input)) {
    if (config_.input != InputKind::kPixels) throw ConfigError("model expects feature files, got an image");
    if (config_.freeze_backbone) {
      NoGradGuard guard;
      auto f = backbone_.extract(*image, DropoutContext{});
      return GridFeatures::from_grid(f.grid.detach(), f.grid_h, f.grid_w);
    }
    return backbone_.extract(*image, dropout);
  }
  const auto& f = std::get<GridFeatures>(input);
  if (config_.input != InputKind::kFeatures) throw ConfigError("model expects images, got a feature file");
  if (f.grid_h != config_.grid_h || f.grid_w != config_.grid_w || f.grid.dim(1) != config_.input_feature_dim()) {
    throw DimensionError("feature grid " + std::to_string(f.grid_h) + "x" + std::to_string(f.grid_w) + "x" +
                         std::to_string(f.grid.dim(1)) + " does not match configured " +
                         std::to_string(config_.grid_h) + "x" + std::to_string(config_.grid_w) + "x" +
                         std::to_string(config_.input_feature_dim()));
  }
  if (!feature_proj_) return f;
  return GridFeatures::from_grid((*feature_proj_)(f.grid), f.grid_h, f.grid_w);
}

RefinedFeatures CaptionModel::encode(const ModelInput& input, const DropoutContext& dropout,
                                     bool mask_global) const {
  const GridFeatures f = features(input, dropout);
  RefineOptions opts;
  opts.mask_global = mask_global;
  opts.dropout = dropout;
  return encoder_.refine(f, opts);
}

DecodeOutputs CaptionModel::decode(std::span<const int> prefix, const RefinedFeatures& features,
                                   const DropoutContext& dropout, bool want_cross_weights) const {
  for (int id : prefix) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(config_.vocab_size));
    }
  }
  return decoder_.forward(prefix, features, dropout, want_cross_weights);
}

void save_model(const std::filesystem::path& path, const CaptionModel& model,
                const std::vector<std::string>& vocab, const nlohmann::json& meta) {
  if (vocab.size() != model.config().vocab_size) {
    throw ContractError("vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                        std::to_string(model.config().vocab_size));
  }
  nlohmann::json header = {{"config", model.config()}, {"vocab", vocab}, {"meta", meta}};
  write_archive(path, make_archive(header.dump(), model.parameters()));
}

LoadedModel load_model(const std::filesystem::path& path) {
  const CheckpointArchive archive = read_archive(path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(archive.header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header of '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!header.contains("config") || !header.contains("vocab")) {
    throw FormatError("checkpoint header of '" + path.string() + "' lacks config or vocab");
  }
  ModelConfig config;
  from_json(header.at("config"), config);
  auto vocab = header.at("vocab").get<std::vector<std::string>>();
  CaptionModel model = CaptionModel::create(config, 0);
  ParameterList params = model.parameters();
  restore_parameters(archive, params);
  return {std::move(model), std::move(vocab), std::move(header)};
}

}  // namespace swcap
