#include "swcap/model_config.hpp"

#include <set>

#include "swcap/error.hpp"

namespace swcap {

namespace {

void require_positive(std::size_t value, const char* field) {
  if (value == 0) throw ConfigError(std::string("model.") + field + " must be positive");
}

}  // namespace

void ModelConfig::validate() const {
  require_positive(d_model, "d_model");
  require_positive(heads, "heads");
  require_positive(blocks, "blocks");
  require_positive(grid_h, "grid_h");
  require_positive(grid_w, "grid_w");
  require_positive(window, "window");
  require_positive(max_len, "max_len");
  require_positive(ff_mult, "ff_mult");
  if (d_model % heads != 0) {
    throw ConfigError("model.heads (" + std::to_string(heads) + ") does not divide model.d_model (" +
                      std::to_string(d_model) + ")");
  }
  if (vocab_size != 0 && vocab_size <= 4) {
    throw ConfigError("model.vocab_size must exceed the 4 reserved ids, got " + std::to_string(vocab_size));
  }
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (grid_h % window != 0 || grid_w % window != 0) {
    throw ConfigError("model.window (" + std::to_string(window) + ") does not divide the " +
                      std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
  }
  if (shift >= window) {
    throw ConfigError("model.shift (" + std::to_string(shift) + ") must be smaller than model.window (" +
                      std::to_string(window) + ")");
  }
  if (input == InputKind::kPixels) {
    require_positive(patch, "patch");
    require_positive(channels, "channels");
    require_positive(backbone_window, "backbone_window");
    if (image_h % patch != 0 || image_w % patch != 0) {
      throw ConfigError("model.patch (" + std::to_string(patch) + ") does not divide the " +
                        std::to_string(image_h) + "x" + std::to_string(image_w) + " image");
    }
    if (image_h / patch != grid_h || image_w / patch != grid_w) {
      throw ConfigError("model.image_h/image_w over model.patch give a " + std::to_string(image_h / patch) + "x" +
                        std::to_string(image_w / patch) + " grid, expected model.grid_h x model.grid_w = " +
                        std::to_string(grid_h) + "x" + std::to_string(grid_w));
    }
    if (grid_h % backbone_window != 0 || grid_w % backbone_window != 0) {
      throw ConfigError("model.backbone_window (" + std::to_string(backbone_window) + ") does not divide the grid");
    }
    if (backbone_shift >= backbone_window) {
      throw ConfigError("model.backbone_shift must be smaller than model.backbone_window");
    }
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"heads", c.heads},
                     {"blocks", c.blocks},
                     {"grid_h", c.grid_h},
                     {"grid_w", c.grid_w},
                     {"window", c.window},
                     {"shift", c.shift},
                     {"vocab_size", c.vocab_size},
                     {"max_len", c.max_len},
                     {"ff_mult", c.ff_mult},
                     {"dropout", c.dropout},
                     {"input", c.input == InputKind::kPixels ? "pixels" : "features"},
                     {"feature_dim", c.feature_dim},
                     {"image_h", c.image_h},
                     {"image_w", c.image_w},
                     {"channels", c.channels},
                     {"patch", c.patch},
                     {"backbone_blocks", c.backbone_blocks},
                     {"backbone_window", c.backbone_window},
                     {"backbone_shift", c.backbone_shift},
                     {"freeze_backbone", c.freeze_backbone}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const std::set<std::string> known = {
      "d_model", "heads",    "blocks",  "grid_h", "grid_w",  "window",          "shift",
      "vocab_size", "max_len", "ff_mult", "dropout", "input", "feature_dim", "image_h",
      "image_w", "channels", "patch", "backbone_blocks", "backbone_window", "backbone_shift",
      "freeze_backbone"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model key 'model." + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("model.") + key + " has the wrong type");
    }
  };
  auto get_size = [&](const char* key, std::size_t& field) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(std::string("model.") + key + " must be a nonnegative integer");
    }
    field = v.get<std::size_t>();
  };
  get_size("d_model", c.d_model);
  get_size("heads", c.heads);
  get_size("blocks", c.blocks);
  get_size("grid_h", c.grid_h);
  get_size("grid_w", c.grid_w);
  get_size("window", c.window);
  get_size("shift", c.shift);
  get_size("vocab_size", c.vocab_size);
  get_size("max_len", c.max_len);
  get_size("ff_mult", c.ff_mult);
  get("dropout", c.dropout);
  if (j.contains("input")) {
    std::string kind;
    get("input", kind);
    if (kind == "pixels") {
      c.input = InputKind::kPixels;
    } else if (kind == "features") {
      c.input = InputKind::kFeatures;
    } else {
      throw ConfigError("model.input must be 'pixels' or 'features', got '" + kind + "'");
    }
  }
  get_size("feature_dim", c.feature_dim);
  get_size("image_h", c.image_h);
  get_size("image_w", c.image_w);
  get_size("channels", c.channels);
  get_size("patch", c.patch);
  get_size("backbone_blocks", c.backbone_blocks);
  get_size("backbone_window", c.backbone_window);
  get_size("backbone_shift", c.backbone_shift);
  get("freeze_backbone", c.freeze_backbone);
}

}  // namespace swcap
