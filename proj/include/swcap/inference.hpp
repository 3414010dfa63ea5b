#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "swcap/model.hpp"

namespace swcap {

// Next-token log-probabilities for a prefix that starts with BOS. Entries may
// be -inf for tokens that can never be produced.
using StepFunction = std::function<std::vector<double>(std::span<const int> prefix)>;

enum class LengthNorm { kNone, kMean };

LengthNorm parse_length_norm(const std::string& name);
std::string to_string(LengthNorm norm);

struct Hypothesis {
  std::vector<int> tokens;  // generated ids, BOS excluded, EOS included when terminated
  double log_prob = 0;      // summed
  bool terminated = false;  // ended with EOS rather than the length cap
  std::size_t finish_step = 0;

  double score(LengthNorm norm) const;
  // Tokens with the trailing EOS removed.
  std::vector<int> words() const;
};

// Argmax each step, lowest id on ties; stops at EOS or after max_len tokens.
Hypothesis greedy_decode(const StepFunction& step, std::size_t max_len);

// Length-synchronous beam search. Each step expands every live hypothesis by
// every token and keeps the best `beam` expansions by summed log-prob (ties:
// smaller token id, then earlier parent). Expansions ending in EOS leave the
// beam as finished; survivors at max_len finish unterminated. Results are
// ordered by score under `norm`, ties by token ids then earlier finish.
std::vector<Hypothesis> beam_search(const StepFunction& step, std::size_t beam, std::size_t max_len,
                                    LengthNorm norm = LengthNorm::kMean);

// Arithmetic mean of the members' probabilities, returned as log-probs.
StepFunction ensemble_step(std::vector<StepFunction> members);

// Step function over a frozen model and fixed refined features.
StepFunction model_step(const CaptionModel& model, const RefinedFeatures& features);

struct DecodeOptions {
  std::size_t beam = 1;
  LengthNorm norm = LengthNorm::kMean;
  // 0 uses the first member's configured max_len.
  std::size_t max_len = 0;
};

struct CaptionResult {
  Hypothesis best;
  std::vector<Hypothesis> beam;
};

// Encodes `input` under each member and decodes with the averaged
// distribution. One member reduces to plain beam search.
CaptionResult caption_input(std::span<const CaptionModel* const> members, const ModelInput& input,
                            const DecodeOptions& options);
CaptionResult caption_input(const CaptionModel& model, const ModelInput& input, const DecodeOptions& options);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace swcap
