#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "swcap/data.hpp"
#include "swcap/inference.hpp"
#include "swcap/metrics.hpp"
#include "swcap/model.hpp"

namespace swcap {

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t xe_epochs = 20;
  std::size_t scst_epochs = 30;
  // Stops SCST after this many optimizer steps when nonzero.
  std::size_t scst_max_steps = 0;
  std::size_t warmup = 10000;
  // Multiplier on the Noam schedule.
  double lr_factor = 1.0;
  double scst_lr = 5e-6;
  double beta1 = 0.9;
  double xe_beta2 = 0.98;
  double scst_beta2 = 0.999;
  double adam_eps = 1e-9;
  // Global gradient norm cap; 0 disables.
  double xe_clip = 0;
  double scst_clip = 1.0;
  std::uint64_t seed = 1;
  // Appends wall-clock seconds to log records (breaks bit-identical logs).
  bool log_elapsed = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// factor * D^-0.5 * min(step^-0.5, step * warmup^-1.5), step >= 1.
double noam_rate(std::size_t step, std::size_t d_model, std::size_t warmup, double factor = 1.0);

class Adam {
 public:
  Adam(ParameterList params, double beta1, double beta2, double eps);

  void zero_grad();
  void step(double lr);
  // Scales gradients so their global L2 norm is at most `max_norm`; returns
  // the norm before scaling.
  double clip_grad_norm(double max_norm);
  double grad_norm() const;

  std::uint64_t steps() const { return steps_; }
  const ParameterList& parameters() const { return params_; }

 private:
  ParameterList params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
};

// -sum_t log p(target_t) over non-PAD targets. log_probs [T, V].
Tensor xe_loss(const Tensor& log_probs, std::span<const int> targets);

// Teacher-forced loss of one encoded sequence (BOS ... EOS, optionally
// PAD-padded). Accumulates argmax hits into the optional counters.
Tensor sequence_xe_loss(const CaptionModel& model, const RefinedFeatures& features, std::span<const int> sequence,
                        const DropoutContext& dropout = {}, std::size_t* correct = nullptr,
                        std::size_t* total = nullptr);

// Fraction of non-PAD target positions whose argmax is the target, dropout off.
double teacher_forced_accuracy(const CaptionModel& model, const std::vector<TrainingExample>& examples);

// Per-step multinomial sample at temperature 1; stops at EOS or max_len.
Hypothesis sample_caption(const StepFunction& step, std::size_t max_len, std::mt19937_64& rng);

struct RewardRecord {
  Hypothesis sample;
  Hypothesis greedy;
  double sample_reward = 0;
  double greedy_reward = 0;
  double advantage() const { return sample_reward - greedy_reward; }
};

struct ScstStepStats {
  std::vector<RewardRecord> records;
  double mean_reward = 0;
  double mean_baseline = 0;
  double mean_advantage = 0;
  double grad_norm = 0;
  bool applied = false;  // false when every advantage was zero
};

// Reward for a candidate given the example's references.
using RewardFunction = std::function<double(const Tokens& candidate, const TrainingExample& example)>;

RewardFunction cider_reward_function(CiderIdf idf);

// One SCST update: sample and greedy-decode each example, form the surrogate
// -(r(y^s) - r(y^g)) log p(y^s) averaged over the batch, step the optimizer.
ScstStepStats scst_step(const CaptionModel& model, std::span<const TrainingExample* const> batch,
                        const Vocabulary& vocab, const RewardFunction& reward, Adam& optimizer, double lr,
                        double clip, std::mt19937_64& rng);

// Line-oriented JSON log sink.
class TrainLog {
 public:
  TrainLog(std::ostream* out, std::string config_hash, bool elapsed);
  void write(nlohmann::json record);
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ostream* out_;
  std::string config_hash_;
  bool elapsed_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> lines_;
};

struct TrainOutputs {
  std::vector<double> curve;  // per-step loss (XE) or mean reward (SCST)
  std::vector<std::filesystem::path> checkpoints;
};

// Per-epoch hook; returning false stops training early.
using EpochHook = std::function<bool(std::size_t epoch, const CaptionModel& model)>;

// Checkpoints go to `out_dir` (skipped when empty) as xe_epoch_NNN.ckpt.
TrainOutputs train_xe(const CaptionModel& model, const std::vector<TrainingExample>& examples,
                      const Vocabulary& vocab, const TrainConfig& config, TrainLog& log,
                      const std::filesystem::path& out_dir = {}, const EpochHook& on_epoch = {});

TrainOutputs train_scst(const CaptionModel& model, const std::vector<TrainingExample>& examples,
                        const Vocabulary& vocab, const TrainConfig& config, TrainLog& log,
                        const std::filesystem::path& out_dir = {}, const EpochHook& on_epoch = {});

// Decodes every example (in parallel over `threads`) and returns hypotheses in
// example order.
std::vector<Hypothesis> caption_examples(std::span<const CaptionModel* const> members,
                                         const std::vector<TrainingExample>& examples, const DecodeOptions& options,
                                         std::size_t threads = 1);

ScoredCorpus make_scored_corpus(const std::vector<TrainingExample>& examples,
                                const std::vector<Hypothesis>& hypotheses, const Vocabulary& vocab);

}  // namespace swcap
