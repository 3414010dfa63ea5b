#include "swcap/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "swcap/error.hpp"

namespace swcap {

Tokens metric_tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<int>(tokens.size());
  for (int i = 0; i + n <= len; ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back(' ');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

namespace {

void check_corpus(const ScoredCorpus& corpus) {
  for (const auto& doc : corpus) {
    if (doc.references.empty()) throw ContractError("document '" + doc.id + "' has no references");
  }
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

using NgramVector = std::array<std::unordered_map<std::string, double>, kMaxNgram>;

struct CiderVector {
  NgramVector vec;
  std::array<double, kMaxNgram> norm{};
  double length = 0;
};

CiderVector cider_vector(const Tokens& tokens, const CiderIdf& idf) {
  CiderVector out;
  const double log_n = std::log(idf.num_images);
  for (int n = 1; n <= kMaxNgram; ++n) {
    for (const auto& [gram, tf] : count_ngrams(tokens, n)) {
      const double v = tf * (log_n - idf.log_df(gram));
      out.vec[n - 1][gram] = v;
      out.norm[n - 1] += v * v;
    }
    out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
  }
  out.length = static_cast<double>(tokens.size());
  return out;
}

std::array<double, kMaxNgram> cider_similarity(const CiderVector& hyp, const CiderVector& ref) {
  std::array<double, kMaxNgram> val{};
  const double delta = hyp.length - ref.length;
  const double penalty = std::exp(-(delta * delta) / (2 * kCiderSigma * kCiderSigma));
  for (int n = 0; n < kMaxNgram; ++n) {
    for (const auto& [gram, hv] : hyp.vec[n]) {
      const auto it = ref.vec[n].find(gram);
      if (it == ref.vec[n].end()) continue;
      val[n] += std::min(hv, it->second) * it->second;
    }
    if (hyp.norm[n] != 0 && ref.norm[n] != 0) {
      val[n] /= hyp.norm[n] * ref.norm[n];
    } else {
      val[n] = 0;
    }
    val[n] *= penalty;
  }
  return val;
}

}  // namespace

std::vector<double> bleu(const ScoredCorpus& corpus, int max_n) {
  if (max_n < 1) throw ConfigError("BLEU order must be at least 1");
  check_corpus(corpus);
  std::vector<double> matches(max_n, 0), totals(max_n, 0);
  double cand_len = 0, ref_len = 0;
  for (const auto& doc : corpus) {
    const auto c = static_cast<double>(doc.candidate.size());
    cand_len += c;
    double best = -1, best_diff = 0;
    for (const auto& r : doc.references) {
      const auto len = static_cast<double>(r.size());
      const double diff = std::abs(len - c);
      if (best < 0 || diff < best_diff || (diff == best_diff && len < best)) {
        best = len;
        best_diff = diff;
      }
    }
    ref_len += best;
    for (int n = 1; n <= max_n; ++n) {
      const auto cand = count_ngrams(doc.candidate, n);
      std::unordered_map<std::string, int> max_ref;
      for (const auto& r : doc.references) {
        for (const auto& [gram, cnt] : count_ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], cnt);
      }
      for (const auto& [gram, cnt] : cand) {
        totals[n - 1] += cnt;
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matches[n - 1] += std::min(cnt, it->second);
      }
    }
  }
  std::vector<double> out(max_n, 0);
  if (cand_len == 0) return out;
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (matches[n - 1] == 0 || totals[n - 1] == 0) {
      for (int k = n; k <= max_n; ++k) out[k - 1] = 0;
      break;
    }
    log_sum += std::log(matches[n - 1] / totals[n - 1]);
    out[n - 1] = bp * std::exp(log_sum / n);
  }
  return out;
}

double rouge_l(const ScoredCorpus& corpus) {
  check_corpus(corpus);
  if (corpus.empty()) return 0;
  double total = 0;
  for (const auto& doc : corpus) {
    double p_max = 0, r_max = 0;
    for (const auto& r : doc.references) {
      const auto lcs = static_cast<double>(lcs_length(doc.candidate, r));
      if (!doc.candidate.empty()) p_max = std::max(p_max, lcs / static_cast<double>(doc.candidate.size()));
      if (!r.empty()) r_max = std::max(r_max, lcs / static_cast<double>(r.size()));
    }
    if (p_max != 0 && r_max != 0) {
      const double b2 = kRougeBeta * kRougeBeta;
      total += (1 + b2) * p_max * r_max / (r_max + b2 * p_max);
    }
  }
  return total / static_cast<double>(corpus.size());
}

CiderIdf CiderIdf::from_references(const std::vector<std::vector<Tokens>>& references) {
  CiderIdf idf;
  idf.num_images = static_cast<double>(references.size());
  for (const auto& refs : references) {
    std::set<std::string> seen;
    for (const auto& r : refs) {
      for (int n = 1; n <= kMaxNgram; ++n) {
        for (const auto& [gram, cnt] : count_ngrams(r, n)) seen.insert(gram);
      }
    }
    for (const auto& gram : seen) idf.df[gram] += 1;
  }
  return idf;
}

double CiderIdf::log_df(const std::string& ngram) const {
  const auto it = df.find(ngram);
  return std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
}

double cider_d_single(const Tokens& candidate, const std::vector<Tokens>& references, const CiderIdf& idf) {
  if (references.empty()) throw ContractError("CIDEr-D needs at least one reference");
  if (idf.num_images <= 0) throw ContractError("CIDEr-D idf table is empty");
  const CiderVector hyp = cider_vector(candidate, idf);
  std::array<double, kMaxNgram> acc{};
  for (const auto& r : references) {
    const auto sim = cider_similarity(hyp, cider_vector(r, idf));
    for (int n = 0; n < kMaxNgram; ++n) acc[n] += sim[n];
  }
  double mean = 0;
  for (double a : acc) mean += a;
  mean /= kMaxNgram;
  return mean / static_cast<double>(references.size()) * 10.0;
}

CiderResult cider_d(const ScoredCorpus& corpus) {
  check_corpus(corpus);
  std::vector<std::vector<Tokens>> refs;
  refs.reserve(corpus.size());
  for (const auto& doc : corpus) refs.push_back(doc.references);
  return cider_d(corpus, CiderIdf::from_references(refs));
}

CiderResult cider_d(const ScoredCorpus& corpus, const CiderIdf& idf) {
  check_corpus(corpus);
  CiderResult out;
  for (const auto& doc : corpus) out.per_document.push_back(cider_d_single(doc.candidate, doc.references, idf));
  if (!out.per_document.empty()) {
    double s = 0;
    for (double v : out.per_document) s += v;
    out.score = s / static_cast<double>(out.per_document.size());
  }
  return out;
}

MetricTable score_corpus(const ScoredCorpus& corpus) {
  MetricTable t;
  const auto b = bleu(corpus, kMaxNgram);
  std::copy(b.begin(), b.end(), t.bleu.begin());
  t.rouge_l = rouge_l(corpus);
  t.cider = corpus.empty() ? 0 : cider_d(corpus).score;
  return t;
}

std::string format_metric_table(const MetricTable& table) {
  std::string out = "metric   score\n";
  char line[64];
  for (int n = 0; n < kMaxNgram; ++n) {
    std::snprintf(line, sizeof line, "BLEU-%d   %.4f\n", n + 1, table.bleu[n]);
    out += line;
  }
  std::snprintf(line, sizeof line, "ROUGE-L  %.4f\n", table.rouge_l);
  out += line;
  std::snprintf(line, sizeof line, "CIDEr-D  %.4f\n", table.cider);
  out += line;
  return out;
}

}  // namespace swcap
