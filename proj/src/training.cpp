#include "swcap/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "swcap/ops.hpp"

namespace swcap {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (warmup == 0) throw ConfigError("train.warmup must be positive");
  if (!(lr_factor > 0)) throw ConfigError("train.lr_factor must be positive");
  if (!(scst_lr > 0)) throw ConfigError("train.scst_lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(xe_beta2 >= 0 && xe_beta2 < 1)) throw ConfigError("train.xe_beta2 must lie in [0, 1)");
  if (!(scst_beta2 >= 0 && scst_beta2 < 1)) throw ConfigError("train.scst_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("train.adam_eps must be positive");
  if (xe_clip < 0) throw ConfigError("train.xe_clip must be nonnegative");
  if (scst_clip < 0) throw ConfigError("train.scst_clip must be nonnegative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size}, {"xe_epochs", c.xe_epochs},   {"scst_epochs", c.scst_epochs},
                     {"scst_max_steps", c.scst_max_steps}, {"warmup", c.warmup}, {"lr_factor", c.lr_factor},
                     {"scst_lr", c.scst_lr},       {"beta1", c.beta1},           {"xe_beta2", c.xe_beta2},
                     {"scst_beta2", c.scst_beta2}, {"adam_eps", c.adam_eps},     {"xe_clip", c.xe_clip},
                     {"scst_clip", c.scst_clip},   {"seed", c.seed},             {"log_elapsed", c.log_elapsed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  nlohmann::json defaults;
  to_json(defaults, c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown train key 'train." + key + "'");
    const auto& d = defaults.at(key);
    const bool ok = d.is_boolean() ? value.is_boolean()
                    : d.is_number_unsigned() ? (value.is_number_integer() && value.get<long long>() >= 0)
                                            : value.is_number();
    if (!ok) throw ConfigError("train." + key + " has the wrong type");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("batch_size", c.batch_size);
  get("xe_epochs", c.xe_epochs);
  get("scst_epochs", c.scst_epochs);
  get("scst_max_steps", c.scst_max_steps);
  get("warmup", c.warmup);
  get("lr_factor", c.lr_factor);
  get("scst_lr", c.scst_lr);
  get("beta1", c.beta1);
  get("xe_beta2", c.xe_beta2);
  get("scst_beta2", c.scst_beta2);
  get("adam_eps", c.adam_eps);
  get("xe_clip", c.xe_clip);
  get("scst_clip", c.scst_clip);
  get("seed", c.seed);
  get("log_elapsed", c.log_elapsed);
}

double noam_rate(std::size_t step, std::size_t d_model, std::size_t warmup, double factor) {
  if (step == 0) throw ContractError("schedule steps start at 1");
  const double s = static_cast<double>(step);
  return factor * std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(static_cast<double>(warmup), -1.5));
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(ParameterList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  check_unique_names(params_);
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double Adam::grad_norm() const {
  double sq = 0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (Real g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double Adam::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params_) {
      if (!p.tensor.has_grad()) continue;
      for (Real& g : p.tensor.mutable_grad()) g = static_cast<Real>(g * s);
    }
  }
  return norm;
}

void Adam::step(double lr) {
  ++steps_;
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].tensor;
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto w = t.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1_ * m[k] + (1 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1 - beta2_) * gk * gk;
      const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      w[k] = static_cast<Real>(w[k] - update);
    }
    if (!std::all_of(w.begin(), w.end(), [](Real x) { return std::isfinite(x); })) {
      throw NumericError("parameter '" + params_[i].name + "' became non-finite after an optimizer step");
    }
  }
}

// ---- losses -----------------------------------------------------------------

Tensor xe_loss(const Tensor& log_probs, std::span<const int> targets) {
  if (log_probs.ndim() != 2 || log_probs.dim(0) != targets.size()) {
    throw DimensionError("xe_loss expects log-probs [" + std::to_string(targets.size()) + ", V], got " +
                         shape_str(log_probs.shape()));
  }
  std::vector<std::size_t> rows;
  std::vector<int> ids;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] == kPad) continue;
    rows.push_back(t);
    ids.push_back(targets[t]);
  }
  if (rows.empty()) return Tensor::scalar(0);
  return scale(sum(pick(gather_rows(log_probs, rows), ids)), Real(-1));
}

Tensor sequence_xe_loss(const CaptionModel& model, const RefinedFeatures& features, std::span<const int> sequence,
                        const DropoutContext& dropout, std::size_t* correct, std::size_t* total) {
  if (sequence.size() < 2 || sequence.front() != kBos) {
    throw ContractError("training sequences must start with BOS and hold at least one target");
  }
  const auto prefix = sequence.first(sequence.size() - 1);
  const auto targets = sequence.subspan(1);
  const DecodeOutputs out = model.decode(prefix, features, dropout);
  if (correct || total) {
    const std::size_t v = out.log_probs.dim(1);
    const auto lp = out.log_probs.data();
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t] == kPad) continue;
      const auto row = lp.subspan(t * v, v);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (correct && best == targets[t]) ++*correct;
      if (total) ++*total;
    }
  }
  return xe_loss(out.log_probs, targets);
}

double teacher_forced_accuracy(const CaptionModel& model, const std::vector<TrainingExample>& examples) {
  NoGradGuard guard;
  std::size_t correct = 0, total = 0;
  for (const auto& ex : examples) {
    const RefinedFeatures f = model.encode(ex.input);
    for (const auto& seq : ex.targets) sequence_xe_loss(model, f, seq, {}, &correct, &total);
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// ---- SCST -------------------------------------------------------------------

Hypothesis sample_caption(const StepFunction& step, std::size_t max_len, std::mt19937_64& rng) {
  Hypothesis h;
  std::vector<int> prefix{kBos};
  for (std::size_t t = 0; t < max_len; ++t) {
    const auto lp = step(prefix);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double cum = 0;
    std::size_t pick_id = lp.size();
    std::size_t last_valid = 0;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (lp[v] == -std::numeric_limits<double>::infinity()) continue;
      last_valid = v;
      cum += std::exp(lp[v]);
      if (u < cum) {
        pick_id = v;
        break;
      }
    }
    if (pick_id == lp.size()) pick_id = last_valid;  // rounding left u above the total mass
    const int tok = static_cast<int>(pick_id);
    h.tokens.push_back(tok);
    h.log_prob += lp[pick_id];
    prefix.push_back(tok);
    if (tok == kEos) {
      h.terminated = true;
      h.finish_step = t;
      return h;
    }
  }
  h.finish_step = max_len;
  return h;
}

RewardFunction cider_reward_function(CiderIdf idf) {
  return [idf = std::move(idf)](const Tokens& candidate, const TrainingExample& ex) {
    return cider_reward(candidate, ex.references, idf);
  };
}

ScstStepStats scst_step(const CaptionModel& model, std::span<const TrainingExample* const> batch,
                        const Vocabulary& vocab, const RewardFunction& reward, Adam& optimizer, double lr,
                        double clip, std::mt19937_64& rng) {
  if (batch.empty()) throw ContractError("SCST batch is empty");
  ScstStepStats stats;
  const std::size_t max_len = model.config().max_len;
  for (const auto* ex : batch) {
    RewardRecord rec;
    NoGradGuard guard;
    const RefinedFeatures f = model.encode(ex->input);
    const StepFunction step = model_step(model, f);
    rec.sample = sample_caption(step, max_len, rng);
    rec.greedy = greedy_decode(step, max_len);
    rec.sample_reward = reward(vocab.decode_tokens(rec.sample.tokens), *ex);
    rec.greedy_reward = reward(vocab.decode_tokens(rec.greedy.tokens), *ex);
    stats.records.push_back(std::move(rec));
  }
  const double n = static_cast<double>(batch.size());
  for (const auto& r : stats.records) {
    stats.mean_reward += r.sample_reward / n;
    stats.mean_baseline += r.greedy_reward / n;
    stats.mean_advantage += r.advantage() / n;
  }

  optimizer.zero_grad();
  Tensor surrogate;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double adv = stats.records[i].advantage();
    if (adv == 0) continue;
    const RefinedFeatures f = model.encode(batch[i]->input);
    std::vector<int> seq{kBos};
    seq.insert(seq.end(), stats.records[i].sample.tokens.begin(), stats.records[i].sample.tokens.end());
    // -log p(y^s) is the XE loss of the sampled sequence.
    const Tensor nll = sequence_xe_loss(model, f, seq);
    const Tensor term = scale(nll, static_cast<Real>(adv / n));
    surrogate = surrogate.defined() ? add(surrogate, term) : term;
  }
  if (!surrogate.defined()) return stats;
  surrogate.backward();
  stats.grad_norm = optimizer.clip_grad_norm(clip);
  optimizer.step(lr);
  stats.applied = true;
  return stats;
}

// ---- logging ----------------------------------------------------------------

TrainLog::TrainLog(std::ostream* out, std::string config_hash, bool elapsed)
    : out_(out), config_hash_(std::move(config_hash)), elapsed_(elapsed), start_(std::chrono::steady_clock::now()) {}

void TrainLog::write(nlohmann::json record) {
  if (!config_hash_.empty()) record["config_hash"] = config_hash_;
  if (elapsed_) {
    record["elapsed"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  std::string line = record.dump();
  if (out_) *out_ << line << '\n' << std::flush;
  lines_.push_back(std::move(line));
}

// ---- loops ------------------------------------------------------------------

namespace {

template <typename T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const char* phase, std::size_t epoch) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_epoch_%03zu.ckpt", phase, epoch);
  return dir / name;
}

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kDropoutStream = 0x44524f50ULL;
constexpr std::uint64_t kSampleStream = 0x53414d50ULL;

}  // namespace

TrainOutputs train_xe(const CaptionModel& model, const std::vector<TrainingExample>& examples,
                      const Vocabulary& vocab, const TrainConfig& config, TrainLog& log,
                      const std::filesystem::path& out_dir, const EpochHook& on_epoch) {
  config.validate();
  if (examples.empty()) throw ContractError("XE training needs at least one example");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::mt19937_64 shuffle_rng(config.seed ^ kShuffleStream);
  std::mt19937_64 dropout_rng(config.seed ^ kDropoutStream);
  const DropoutContext dropout{static_cast<Real>(model.config().dropout), true, &dropout_rng};
  Adam adam(model.trainable_parameters(), config.beta1, config.xe_beta2, config.adam_eps);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < examples.size(); ++i)
    for (std::size_t k = 0; k < examples[i].targets.size(); ++k) pairs.emplace_back(i, k);

  TrainOutputs outputs;
  for (std::size_t epoch = 1; epoch <= config.xe_epochs; ++epoch) {
    shuffle_in_place(pairs, shuffle_rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += config.batch_size) {
      const std::size_t end = std::min(pairs.size(), begin + config.batch_size);
      std::vector<std::vector<int>> seqs;
      for (std::size_t b = begin; b < end; ++b) seqs.push_back(examples[pairs[b].first].targets[pairs[b].second]);
      seqs = pad_batch(seqs);
      adam.zero_grad();
      Tensor loss;
      std::size_t tokens = 0;
      for (std::size_t b = begin; b < end; ++b) {
        const RefinedFeatures f = model.encode(examples[pairs[b].first].input, dropout);
        const Tensor l = sequence_xe_loss(model, f, seqs[b - begin], dropout, nullptr, &tokens);
        loss = loss.defined() ? add(loss, l) : l;
      }
      loss = scale(loss, Real(1) / static_cast<Real>(end - begin));
      loss.backward();
      const double norm = adam.clip_grad_norm(config.xe_clip);
      const double lr = noam_rate(adam.steps() + 1, model.config().d_model, config.warmup, config.lr_factor);
      adam.step(lr);
      const double value = loss.item();
      outputs.curve.push_back(value);
      epoch_loss += value;
      ++batches;
      log.write({{"phase", "xe"},
                 {"epoch", epoch},
                 {"step", adam.steps()},
                 {"lr", lr},
                 {"loss", value},
                 {"tokens", tokens},
                 {"grad_norm", norm}});
    }
    nlohmann::json summary = {{"phase", "xe"}, {"epoch", epoch}, {"mean_loss", epoch_loss / batches}};
    if (!out_dir.empty()) {
      const auto path = checkpoint_path(out_dir, "xe", epoch);
      save_model(path, model, vocab.tokens(), {{"phase", "xe"}, {"epoch", epoch}, {"step", adam.steps()}});
      outputs.checkpoints.push_back(path);
      summary["checkpoint"] = path.filename().string();
    }
    log.write(summary);
    if (on_epoch && !on_epoch(epoch, model)) break;
  }
  return outputs;
}

TrainOutputs train_scst(const CaptionModel& model, const std::vector<TrainingExample>& examples,
                        const Vocabulary& vocab, const TrainConfig& config, TrainLog& log,
                        const std::filesystem::path& out_dir, const EpochHook& on_epoch) {
  config.validate();
  if (examples.empty()) throw ContractError("SCST needs at least one example");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::vector<std::vector<Tokens>> refs;
  for (const auto& ex : examples) refs.push_back(ex.references);
  const RewardFunction reward = cider_reward_function(CiderIdf::from_references(refs));

  std::mt19937_64 shuffle_rng(config.seed ^ kShuffleStream);
  std::mt19937_64 sample_rng(config.seed ^ kSampleStream);
  Adam adam(model.trainable_parameters(), config.beta1, config.scst_beta2, config.adam_eps);
  std::vector<const TrainingExample*> order;
  for (const auto& ex : examples) order.push_back(&ex);

  TrainOutputs outputs;
  std::size_t steps = 0;
  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.scst_epochs && !done; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    double epoch_reward = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const TrainingExample* const> batch(order.data() + begin, end - begin);
      const ScstStepStats s = scst_step(model, batch, vocab, reward, adam, config.scst_lr, config.scst_clip, sample_rng);
      ++steps;
      ++batches;
      epoch_reward += s.mean_reward;
      outputs.curve.push_back(s.mean_reward);
      log.write({{"phase", "scst"},
                 {"epoch", epoch},
                 {"step", steps},
                 {"lr", config.scst_lr},
                 {"reward", s.mean_reward},
                 {"baseline", s.mean_baseline},
                 {"advantage", s.mean_advantage},
                 {"grad_norm", s.grad_norm},
                 {"applied", s.applied}});
      if (config.scst_max_steps && steps >= config.scst_max_steps) {
        done = true;
        break;
      }
    }
    nlohmann::json summary = {{"phase", "scst"}, {"epoch", epoch}, {"mean_reward", epoch_reward / batches}};
    if (!out_dir.empty()) {
      const auto path = checkpoint_path(out_dir, "scst", epoch);
      save_model(path, model, vocab.tokens(), {{"phase", "scst"}, {"epoch", epoch}, {"step", steps}});
      outputs.checkpoints.push_back(path);
      summary["checkpoint"] = path.filename().string();
    }
    log.write(summary);
    if (on_epoch && !on_epoch(epoch, model)) break;
  }
  return outputs;
}

std::vector<Hypothesis> caption_examples(std::span<const CaptionModel* const> members,
                                         const std::vector<TrainingExample>& examples, const DecodeOptions& options,
                                         std::size_t threads) {
  std::vector<Hypothesis> out(examples.size());
  parallel_for(examples.size(), threads,
               [&](std::size_t i) { out[i] = caption_input(members, examples[i].input, options).best; });
  return out;
}

ScoredCorpus make_scored_corpus(const std::vector<TrainingExample>& examples,
                                const std::vector<Hypothesis>& hypotheses, const Vocabulary& vocab) {
  if (examples.size() != hypotheses.size()) throw ContractError("one hypothesis per example expected");
  ScoredCorpus corpus;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    corpus.push_back({examples[i].id, vocab.decode_tokens(hypotheses[i].tokens), examples[i].references});
  }
  return corpus;
}

}  // namespace swcap
