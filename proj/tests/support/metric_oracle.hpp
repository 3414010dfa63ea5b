#pragma once

// Straight-line reference implementations of the caption metrics. n-grams are
// kept as token vectors in ordered maps, unlike the string-keyed hash maps of
// the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "swcap/metrics.hpp"

namespace swcap::testing {

using Gram = std::vector<std::string>;

inline std::map<Gram, int> oracle_grams(const Tokens& t, std::size_t n) {
  std::map<Gram, int> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Gram(t.begin() + i, t.begin() + i + n)];
  return out;
}

inline std::vector<long double> oracle_bleu(const ScoredCorpus& corpus) {
  long double c = 0, r = 0;
  long double hit[4] = {0, 0, 0, 0}, tot[4] = {0, 0, 0, 0};
  for (const auto& d : corpus) {
    c += d.candidate.size();
    std::vector<std::size_t> lens;
    for (const auto& ref : d.references) lens.push_back(ref.size());
    std::sort(lens.begin(), lens.end());
    std::size_t best = lens[0];
    for (auto len : lens) {
      const auto diff = [&](std::size_t x) { return x > d.candidate.size() ? x - d.candidate.size() : d.candidate.size() - x; };
      if (diff(len) < diff(best)) best = len;
    }
    r += best;
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [g, k] : oracle_grams(d.candidate, n)) {
        int clip = 0;
        for (const auto& ref : d.references) {
          const auto rg = oracle_grams(ref, n);
          const auto it = rg.find(g);
          if (it != rg.end()) clip = std::max(clip, it->second);
        }
        hit[n - 1] += std::min(k, clip);
        tot[n - 1] += k;
      }
    }
  }
  std::vector<long double> out(4, 0);
  if (c == 0) return out;
  const long double bp = c < r ? std::exp(1 - r / c) : 1;
  long double prod = 1;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (tot[n - 1] == 0 || hit[n - 1] == 0) break;
    prod *= hit[n - 1] / tot[n - 1];
    out[n - 1] = bp * std::pow(prod, 1.0L / n);
  }
  return out;
}

inline std::size_t oracle_lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

inline long double oracle_rouge_l(const ScoredCorpus& corpus) {
  long double total = 0;
  for (const auto& d : corpus) {
    long double p = 0, r = 0;
    for (const auto& ref : d.references) {
      const long double l = oracle_lcs(d.candidate, ref);
      if (!d.candidate.empty()) p = std::max(p, l / d.candidate.size());
      if (!ref.empty()) r = std::max(r, l / ref.size());
    }
    if (p > 0 && r > 0) total += (1 + 1.44L) * p * r / (r + 1.44L * p);
  }
  return total / corpus.size();
}

inline std::vector<long double> oracle_cider_d(const ScoredCorpus& corpus) {
  const long double images = corpus.size();
  std::map<Gram, long double> df;
  for (const auto& d : corpus) {
    std::set<Gram> seen;
    for (const auto& ref : d.references)
      for (std::size_t n = 1; n <= 4; ++n)
        for (const auto& [g, k] : oracle_grams(ref, n)) seen.insert(g);
    for (const auto& g : seen) df[g] += 1;
  }
  auto vectorize = [&](const Tokens& t, std::size_t n) {
    std::map<Gram, long double> v;
    for (const auto& [g, k] : oracle_grams(t, n)) {
      const long double f = df.count(g) ? df[g] : 0;
      v[g] = k * (std::log(images) - std::log(std::max<long double>(1, f)));
    }
    return v;
  };
  auto norm = [](const std::map<Gram, long double>& v) {
    long double s = 0;
    for (const auto& [g, x] : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<long double> out;
  for (const auto& d : corpus) {
    long double per_n_sum = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto vh = vectorize(d.candidate, n);
      for (const auto& ref : d.references) {
        const auto vr = vectorize(ref, n);
        long double dot = 0;
        for (const auto& [g, x] : vh) {
          const auto it = vr.find(g);
          if (it != vr.end()) dot += std::min(x, it->second) * it->second;
        }
        const long double nh = norm(vh), nr = norm(vr);
        if (nh == 0 || nr == 0) continue;
        const long double delta = static_cast<long double>(d.candidate.size()) - static_cast<long double>(ref.size());
        per_n_sum += dot / (nh * nr) * std::exp(-delta * delta / (2 * 36.0L));
      }
    }
    out.push_back(per_n_sum / 4 / d.references.size() * 10);
  }
  return out;
}

inline ScoredDocument doc(std::string id, std::string cand, std::vector<std::string> refs) {
  ScoredDocument d{std::move(id), metric_tokenize(cand), {}};
  for (const auto& r : refs) d.references.push_back(metric_tokenize(r));
  return d;
}

inline ScoredCorpus random_corpus(std::mt19937_64& rng) {
  static const std::vector<std::string> words{"a", "red", "blue", "circle", "square", "above"};
  auto sentence = [&](std::size_t lo) {
    Tokens t(lo + rng() % (9 - lo));
    for (auto& w : t) w = words[rng() % words.size()];
    return t;
  };
  ScoredCorpus c(1 + rng() % 5);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].id = "d" + std::to_string(i);
    c[i].candidate = sentence(1);
    const std::size_t refs = 1 + rng() % 3;
    for (std::size_t k = 0; k < refs; ++k) c[i].references.push_back(sentence(1));
  }
  return c;
}

inline ScoredCorpus golden_corpus() {
  return {
      doc("1", "a red circle above a blue square", {"a red circle above a blue square", "a blue square below a red circle"}),
      doc("2", "a green cross", {"a green cross to the left of a white circle", "a green cross"}),
      doc("3", "a yellow triangle above a purple square", {"a purple square below a yellow circle"}),
  };
}

inline constexpr double kGoldenBleu[4] = {0.882352941176, 0.832632758738, 0.761267777009, 0.685323440657};
inline constexpr double kGoldenRouge = 0.809523809524;
inline constexpr double kGoldenCider = 5.306994140731;

}  // namespace swcap::testing
