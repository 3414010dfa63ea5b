#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swcap {

using Tokens = std::vector<std::string>;

// Lowercase, drop ASCII punctuation, split on whitespace.
Tokens metric_tokenize(std::string_view text);

struct ScoredDocument {
  std::string id;
  Tokens candidate;
  std::vector<Tokens> references;
};

using ScoredCorpus = std::vector<ScoredDocument>;

inline constexpr int kMaxNgram = 4;

// n-gram (tokens joined by a space) -> count.
using NgramCounts = std::unordered_map<std::string, int>;
NgramCounts count_ngrams(const Tokens& tokens, int n);

// Corpus BLEU-n: clipped precisions summed over the corpus, brevity penalty
// against the closest reference length (shorter wins ties). Returns BLEU-1..n.
std::vector<double> bleu(const ScoredCorpus& corpus, int max_n = kMaxNgram);

inline constexpr double kRougeBeta = 1.2;
// Mean over documents of the LCS F-measure using the best precision and the
// best recall across references.
double rouge_l(const ScoredCorpus& corpus);

// Document frequencies over reference sets; each image counts once per n-gram.
struct CiderIdf {
  std::unordered_map<std::string, double> df;
  double num_images = 0;

  static CiderIdf from_references(const std::vector<std::vector<Tokens>>& references);
  double log_df(const std::string& ngram) const;
};

inline constexpr double kCiderSigma = 6.0;

// CIDEr-D of one candidate against its references.
double cider_d_single(const Tokens& candidate, const std::vector<Tokens>& references, const CiderIdf& idf);

struct CiderResult {
  double score = 0;  // corpus mean
  std::vector<double> per_document;
};

// Uses the corpus's own references for idf unless a table is given.
CiderResult cider_d(const ScoredCorpus& corpus);
CiderResult cider_d(const ScoredCorpus& corpus, const CiderIdf& idf);

// SCST reward: CIDEr-D against a frozen idf table.
inline double cider_reward(const Tokens& candidate, const std::vector<Tokens>& references, const CiderIdf& idf) {
  return cider_d_single(candidate, references, idf);
}

struct MetricTable {
  std::array<double, kMaxNgram> bleu{};
  double rouge_l = 0;
  double cider = 0;
};

MetricTable score_corpus(const ScoredCorpus& corpus);
std::string format_metric_table(const MetricTable& table);

}  // namespace swcap
