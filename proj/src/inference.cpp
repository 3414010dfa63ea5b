#include "swcap/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "swcap/ops.hpp"

namespace swcap {

LengthNorm parse_length_norm(const std::string& name) {
  if (name == "none") return LengthNorm::kNone;
  if (name == "mean") return LengthNorm::kMean;
  throw ConfigError("length normalization must be 'none' or 'mean', got '" + name + "'");
}

std::string to_string(LengthNorm norm) { return norm == LengthNorm::kNone ? "none" : "mean"; }

double Hypothesis::score(LengthNorm norm) const {
  if (norm == LengthNorm::kNone || tokens.empty()) return log_prob;
  return log_prob / static_cast<double>(tokens.size());
}

std::vector<int> Hypothesis::words() const {
  std::vector<int> out = tokens;
  if (terminated && !out.empty() && out.back() == kEos) out.pop_back();
  return out;
}

namespace {

std::vector<int> with_bos(const std::vector<int>& tokens) {
  std::vector<int> prefix;
  prefix.reserve(tokens.size() + 1);
  prefix.push_back(kBos);
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  return prefix;
}

}  // namespace

Hypothesis greedy_decode(const StepFunction& step, std::size_t max_len) {
  Hypothesis h;
  for (std::size_t t = 0; t < max_len; ++t) {
    const auto lp = step(with_bos(h.tokens));
    std::size_t best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v) {
      if (lp[v] > lp[best]) best = v;
    }
    h.tokens.push_back(static_cast<int>(best));
    h.log_prob += lp[best];
    if (static_cast<int>(best) == kEos) {
      h.terminated = true;
      h.finish_step = t;
      return h;
    }
  }
  h.finish_step = max_len;
  return h;
}

std::vector<Hypothesis> beam_search(const StepFunction& step, std::size_t beam, std::size_t max_len,
                                    LengthNorm norm) {
  if (beam < 1) throw ConfigError("beam size must be at least 1");
  struct Candidate {
    double log_prob;
    std::size_t parent;
    int token;
  };
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < live.size(); ++p) {
      const auto lp = step(with_bos(live[p].tokens));
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (lp[v] == -std::numeric_limits<double>::infinity()) continue;
        candidates.push_back({live[p].log_prob + lp[v], p, static_cast<int>(v)});
      }
    }
    const std::size_t keep = std::min(beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = candidates[i];
      Hypothesis h = live[c.parent];
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == kEos) {
        h.terminated = true;
        h.finish_step = t;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (auto& h : live) {
    h.finish_step = max_len;
    finished.push_back(std::move(h));
  }
  std::stable_sort(finished.begin(), finished.end(), [norm](const Hypothesis& a, const Hypothesis& b) {
    const double sa = a.score(norm), sb = b.score(norm);
    if (sa != sb) return sa > sb;
    if (a.tokens != b.tokens) return a.tokens < b.tokens;
    return a.finish_step < b.finish_step;
  });
  return finished;
}

StepFunction ensemble_step(std::vector<StepFunction> members) {
  if (members.empty()) throw ConfigError("an ensemble needs at least one member");
  if (members.size() == 1) return members.front();
  return [members = std::move(members)](std::span<const int> prefix) {
    std::vector<std::vector<double>> all;
    all.reserve(members.size());
    for (const auto& m : members) all.push_back(m(prefix));
    const std::size_t v = all.front().size();
    for (const auto& lp : all) {
      if (lp.size() != v) throw DimensionError("ensemble members disagree on vocabulary size");
    }
    const double k = static_cast<double>(all.size());
    std::vector<double> out(v);
    for (std::size_t i = 0; i < v; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (const auto& lp : all) mx = std::max(mx, lp[i]);
      if (mx == -std::numeric_limits<double>::infinity()) {
        out[i] = mx;
        continue;
      }
      double s = 0;
      for (const auto& lp : all) s += std::exp(lp[i] - mx);
      out[i] = mx + std::log(s / k);
    }
    return out;
  };
}

StepFunction model_step(const CaptionModel& model, const RefinedFeatures& features) {
  return [&model, features](std::span<const int> prefix) {
    NoGradGuard guard;
    const DecodeOutputs out = model.decode(prefix, features);
    const std::size_t v = out.log_probs.dim(1);
    const auto row = out.log_probs.data().subspan((prefix.size() - 1) * v, v);
    std::vector<double> lp(row.begin(), row.end());
    lp[kBos] = -std::numeric_limits<double>::infinity();
    lp[kPad] = -std::numeric_limits<double>::infinity();
    return lp;
  };
}

CaptionResult caption_input(std::span<const CaptionModel* const> members, const ModelInput& input,
                            const DecodeOptions& options) {
  if (members.empty()) throw ConfigError("captioning needs at least one model");
  const std::size_t vocab = members.front()->config().vocab_size;
  std::vector<StepFunction> steps;
  std::vector<RefinedFeatures> refined;
  refined.reserve(members.size());
  {
    NoGradGuard guard;
    for (const auto* m : members) {
      if (m->config().vocab_size != vocab) throw ConfigError("ensemble members disagree on vocabulary size");
      refined.push_back(m->encode(input));
    }
  }
  for (std::size_t i = 0; i < members.size(); ++i) steps.push_back(model_step(*members[i], refined[i]));
  const std::size_t max_len = options.max_len ? options.max_len : members.front()->config().max_len;
  CaptionResult result;
  result.beam = beam_search(ensemble_step(std::move(steps)), options.beam, max_len, options.norm);
  result.best = result.beam.front();
  return result;
}

CaptionResult caption_input(const CaptionModel& model, const ModelInput& input, const DecodeOptions& options) {
  const CaptionModel* members[] = {&model};
  return caption_input(std::span<const CaptionModel* const>(members), input, options);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace swcap
