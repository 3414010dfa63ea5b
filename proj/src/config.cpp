#include "swcap/config.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>

#include "swcap/checkpoint.hpp"

namespace swcap {

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (decode.beam == 0) throw ConfigError("decode.beam must be at least 1");
  if (data.min_count == 0) throw ConfigError("data.min_count must be at least 1");
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"profile", c.profile},
          {"model", c.model},
          {"train", c.train},
          {"data",
           {{"train", c.data.train},
            {"eval", c.data.eval},
            {"scst", c.data.scst},
            {"vocab_sources", c.data.vocab_sources},
            {"min_count", c.data.min_count}}},
          {"decode", {{"beam", c.decode.beam}, {"length_norm", to_string(c.decode.norm)}}},
          {"output", c.output}};
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("'" + section + "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, const std::string& section, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

void merge_into(nlohmann::json& base, const nlohmann::json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, "", {"profile", "model", "train", "data", "decode", "output"});
  RunConfig c;
  read_field(j, "profile", "config", c.profile);
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"train", "eval", "scst", "vocab_sources", "min_count"});
    read_field(d, "train", "data", c.data.train);
    read_field(d, "eval", "data", c.data.eval);
    read_field(d, "scst", "data", c.data.scst);
    read_field(d, "vocab_sources", "data", c.data.vocab_sources);
    read_field(d, "min_count", "data", c.data.min_count);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    reject_unknown(d, "decode", {"beam", "length_norm"});
    read_field(d, "beam", "decode", c.decode.beam);
    std::string norm = to_string(c.decode.norm);
    read_field(d, "length_norm", "decode", norm);
    c.decode.norm = parse_length_norm(norm);
  }
  read_field(j, "output", "config", c.output);
  return c;
}

const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names = {"desk", "paper"};
  return names;
}

RunConfig profile_config(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "desk") {
    c.train.batch_size = 10;
    c.train.xe_epochs = 60;
    c.train.warmup = 200;
    c.train.lr_factor = 0.1;
    c.train.scst_epochs = 40;
    c.train.scst_max_steps = 200;
    c.decode.beam = 3;
    c.output = "runs/desk";
    return c;
  }
  if (name == "paper") {
    auto& m = c.model;
    m.d_model = 512;
    m.heads = 8;
    m.blocks = 3;
    m.grid_h = m.grid_w = 12;
    m.window = 6;
    m.shift = 3;
    m.max_len = 18;
    m.input = InputKind::kFeatures;
    m.feature_dim = 1536;
    c.train.batch_size = 10;
    c.train.xe_epochs = 20;
    c.train.scst_epochs = 30;
    c.train.warmup = 10000;
    c.train.lr_factor = 1.0;
    c.train.scst_lr = 5e-6;
    c.data.min_count = 6;
    c.decode.beam = 5;
    c.output = "runs/paper";
    return c;
  }
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

RunConfig resolve_run_config(const std::optional<std::string>& file, const std::optional<std::string>& profile,
                             const std::vector<std::string>& overrides) {
  nlohmann::json from_file = nlohmann::json::object();
  if (file) {
    try {
      from_file = nlohmann::json::parse(read_file_bytes(*file));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + *file + "' is not valid JSON: " + e.what());
    }
    if (!from_file.is_object()) throw ConfigError("config file '" + *file + "' must hold a JSON object");
  }
  std::string name = "desk";
  if (profile) {
    name = *profile;
  } else if (from_file.contains("profile") && from_file.at("profile").is_string()) {
    name = from_file.at("profile").get<std::string>();
  }
  nlohmann::json merged = to_json(profile_config(name));
  merge_into(merged, from_file);
  merged["profile"] = name;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not KEY=VALUE");
    const std::string key = item.substr(0, eq), raw = item.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;
    }
    nlohmann::json* node = &merged;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
      if (dot == std::string::npos) {
        if (!node->contains(part)) throw ConfigError("unknown key '" + key + "'");
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part) || !(*node)[part].is_object()) throw ConfigError("unknown key '" + key + "'");
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  RunConfig c = run_config_from_json(merged);
  c.validate();
  return c;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::string config_hash(const RunConfig& config) {
  // The output location does not affect results.
  nlohmann::json j = to_json(config);
  j.erase("output");
  return fnv1a_hex(j.dump());
}

std::size_t thread_count_from_env() {
  const char* env = std::getenv("SWCAP_NUM_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("SWCAP_NUM_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace swcap
