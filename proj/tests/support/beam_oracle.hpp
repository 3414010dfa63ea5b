#pragma once

// Toy step functions and exhaustive enumeration for checking beam search.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "swcap/inference.hpp"

namespace swcap::testing {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Deterministic toy distribution per prefix over ids 0..6, BOS and PAD
// excluded, so five producible tokens including EOS.
struct ToyModel {
  std::uint64_t seed;
  double sharpness = 2.0;
  mutable std::map<std::vector<int>, std::vector<double>> cache;

  std::vector<double> operator()(std::span<const int> prefix) const {
    std::vector<int> key(prefix.begin(), prefix.end());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::uint64_t h = seed;
    for (int t : key) h = h * 1000003u + static_cast<std::uint64_t>(t) + 1;
    std::mt19937_64 rng(h);
    std::normal_distribution<double> n(0, sharpness);
    std::vector<double> logits(7);
    for (auto& l : logits) l = n(rng);
    logits[kBos] = logits[kPad] = kNegInf;
    double mx = kNegInf;
    for (auto l : logits) mx = std::max(mx, l);
    double z = 0;
    for (auto l : logits)
      if (l != kNegInf) z += std::exp(l - mx);
    for (auto& l : logits)
      if (l != kNegInf) l = l - mx - std::log(z);
    cache[key] = logits;
    return logits;
  }
};

inline const std::vector<int> kProducible{kEos, 3, 4, 5, 6};

// Every sequence that can leave the search: EOS-terminated of length <= T, or
// exactly T word tokens.
inline std::vector<Hypothesis> enumerate_all(const StepFunction& step, std::size_t max_len) {
  std::vector<Hypothesis> out;
  std::vector<Hypothesis> frontier(1);
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<Hypothesis> next;
    for (const auto& h : frontier) {
      std::vector<int> prefix{kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const auto lp = step(prefix);
      for (int v : kProducible) {
        Hypothesis c = h;
        c.tokens.push_back(v);
        c.log_prob += lp[v];
        if (v == kEos) {
          c.terminated = true;
          c.finish_step = t;
          out.push_back(c);
        } else {
          next.push_back(c);
        }
      }
    }
    frontier = std::move(next);
  }
  for (auto& h : frontier) {
    h.finish_step = max_len;
    out.push_back(h);
  }
  return out;
}

inline bool better(const Hypothesis& a, const Hypothesis& b, LengthNorm norm) {
  if (a.score(norm) != b.score(norm)) return a.score(norm) > b.score(norm);
  return a.tokens < b.tokens;
}

// Exhaustive ranking of every sequence under `norm`, best first.
inline std::vector<Hypothesis> exhaustive_ranking(const StepFunction& step, std::size_t max_len, LengthNorm norm) {
  auto all = enumerate_all(step, max_len);
  std::sort(all.begin(), all.end(), [norm](const auto& a, const auto& b) { return better(a, b, norm); });
  return all;
}

}  // namespace swcap::testing
