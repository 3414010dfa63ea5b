#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swcap/inference.hpp"
#include "swcap/model_config.hpp"
#include "swcap/training.hpp"

namespace swcap {

struct DataConfig {
  std::string train;
  std::string eval;
  // SCST examples; empty means `train`.
  std::string scst;
  // Extra dataset directories whose captions join the vocabulary count.
  std::vector<std::string> vocab_sources;
  std::size_t min_count = 1;
};

struct DecodeConfig {
  std::size_t beam = 3;
  LengthNorm norm = LengthNorm::kMean;
};

struct RunConfig {
  std::string profile = "desk";
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  DecodeConfig decode;
  std::string output = "runs/desk";

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

// Names: "desk", "paper".
RunConfig profile_config(const std::string& name);
const std::vector<std::string>& profile_names();

// Profile (explicit, else the file's "profile" key, else desk), then the file,
// then KEY=VALUE overrides with dotted keys. VALUE is read as JSON when it
// parses, as a string otherwise.
RunConfig resolve_run_config(const std::optional<std::string>& file, const std::optional<std::string>& profile,
                             const std::vector<std::string>& overrides);

// 16 hex digits of FNV-1a over the canonical JSON dump, output path excluded.
std::string config_hash(const RunConfig& config);
std::string fnv1a_hex(const std::string& bytes);

// SWCAP_NUM_THREADS, default 1.
std::size_t thread_count_from_env();

}  // namespace swcap
