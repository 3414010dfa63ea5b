#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "swcap/config.hpp"
#include "swcap/data.hpp"

namespace swcap {

struct ConfigOptions {
  std::optional<std::string> file;
  std::optional<std::string> profile;
  std::vector<std::string> overrides;

  RunConfig resolve() const { return resolve_run_config(file, profile, overrides); }
};

struct GenSyntheticOptions {
  std::string out;
  std::size_t count = 50;
  std::uint64_t seed = 1;
  std::string style = "standard";    // standard | alternate
  std::string layouts = "all";       // all | primary | held-out
  std::string compositions = "all";  // all | primary | held-out
  double pair_fraction = 0.8;
};

struct CaptionOptions {
  ConfigOptions config;
  std::vector<std::string> checkpoints;
  std::vector<std::string> inputs;  // image or feature files
  std::string data;                 // or a dataset directory
  std::string out;                  // JSON lines; stdout when empty
  std::string attn_dir;             // per-image attention documents
};

struct EvalOptions {
  ConfigOptions config;
  std::vector<std::string> checkpoints;
  std::string data;  // defaults to data.eval
  std::string out;   // optional JSON copy of the table
};

struct DumpAttnOptions {
  ConfigOptions config;
  std::string checkpoint;
  std::string input;
  std::string out;  // stdout when empty
};

struct ScoreOptions {
  std::string candidates;
  std::string references;
};

// Each returns the process exit code and throws swcap::Error on failure.
int run_gen_synthetic(const GenSyntheticOptions& options, std::ostream& out);
int run_train_xe(const ConfigOptions& options, std::ostream& out);
int run_train_scst(const ConfigOptions& options, const std::string& init_checkpoint, std::ostream& out);
int run_caption(const CaptionOptions& options, std::ostream& out);
int run_eval(const EvalOptions& options, std::ostream& out);
int run_dump_attn(const DumpAttnOptions& options, std::ostream& out);
int run_score(const ScoreOptions& options, std::ostream& out);

// Attention-map document for one caption.
nlohmann::json attention_document(const CaptionModel& model, const Vocabulary& vocab, const ModelInput& input,
                                  const std::string& image_id, const DecodeOptions& decode);

// Collects vocabulary-training captions from dataset directories.
Vocabulary build_vocabulary(const std::vector<std::string>& dataset_dirs, std::size_t min_count);

// JSON lines of {"image_id", "caption"} or {"image_id", "captions"}.
std::vector<std::pair<std::string, std::vector<std::string>>> read_caption_lines(const std::string& path);

}  // namespace swcap
