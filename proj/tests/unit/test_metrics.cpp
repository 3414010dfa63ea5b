#include <algorithm>
#include <random>

#include "doctest.h"
#include "swcap/metrics.hpp"
#include "support/metric_oracle.hpp"

using namespace swcap;
using namespace swcap::testing;

TEST_CASE("tokenization: lowercase, punctuation stripped, whitespace split") {
  CHECK(metric_tokenize("A Red, circle.") == Tokens{"a", "red", "circle"});
  CHECK(metric_tokenize("  two\tspaces\n") == Tokens{"two", "spaces"});
  CHECK(metric_tokenize("...").empty());
  CHECK(metric_tokenize("don't") == Tokens{"dont"});
}

TEST_CASE("count_ngrams") {
  const auto g = count_ngrams({"a", "b", "a", "b"}, 2);
  CHECK(g.at("a b") == 2);
  CHECK(g.at("b a") == 1);
  CHECK(count_ngrams({"a"}, 2).empty());
}

TEST_CASE("BLEU: candidate equal to its single reference scores 1") {
  const ScoredCorpus c{doc("1", "a red circle above a blue square", {"a red circle above a blue square"})};
  for (double b : bleu(c)) CHECK(b == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("BLEU: no unigram overlap scores 0") {
  const ScoredCorpus c{doc("1", "x y z", {"a b c"})};
  for (double b : bleu(c)) CHECK(b == 0);
}

TEST_CASE("BLEU: hand-computed precisions") {
  // p1 = 5/6, p2 = 3/5, p3 = 1/4, p4 = 0; equal lengths, no brevity penalty.
  const ScoredCorpus c{doc("1", "the cat sat on the mat", {"the cat is on the mat"})};
  const auto b = bleu(c);
  CHECK(b[0] == doctest::Approx(5.0 / 6).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(b[2] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(b[3] == 0);
}

TEST_CASE("BLEU: brevity penalty uses the closest reference, shorter on ties") {
  // Candidate length 2; references of length 1 and 3 are equally close.
  const ScoredCorpus c{doc("1", "a b", {"a", "a b c"})};
  CHECK(bleu(c, 1)[0] == doctest::Approx(1.0).epsilon(1e-15));
  const ScoredCorpus longer{doc("1", "a b", {"a b c d", "a b c d e f"})};
  CHECK(bleu(longer, 1)[0] == doctest::Approx(std::exp(1.0 - 4.0 / 2)).epsilon(1e-14));
}

TEST_CASE("BLEU: three-document corpus matches the counting oracle") {
  const ScoredCorpus c{doc("1", "a red circle above a square", {"a red circle above a blue square", "a red circle"}),
                       doc("2", "a blue cross", {"a blue cross to the left of a red square"}),
                       doc("3", "the the the", {"the cat", "a the"})};
  const auto b = bleu(c);
  const auto o = oracle_bleu(c);
  for (int n = 0; n < 4; ++n) CHECK(std::abs(b[n] - static_cast<double>(o[n])) < 1e-9);
}

TEST_CASE("ROUGE-L examples") {
  CHECK(rouge_l({doc("1", "a b c", {"a b c"})}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rouge_l({doc("1", "a b c", {"d e"})}) == 0);
  const double p = 2.0 / 3, r = 1.0, b2 = 1.44;
  CHECK(oracle_lcs({"a", "b", "c"}, {"a", "c"}) == 2);
  CHECK(rouge_l({doc("1", "a b c", {"a c"})}) == doctest::Approx((1 + b2) * p * r / (r + b2 * p)).epsilon(1e-14));
}

TEST_CASE("CIDEr-D examples") {
  CHECK(cider_d({doc("1", "x y", {"a b c"}), doc("2", "a b", {"d e f"})}).per_document[0] == 0);
  // Disjoint references, candidate equal to image 1's reference: cosine 1 for
  // n = 1..3, no 4-grams, so 10 * 3/4.
  const ScoredCorpus c{doc("1", "a b c", {"a b c"}), doc("2", "a", {"d e f"})};
  const CiderResult r = cider_d(c);
  CHECK(r.per_document[0] == doctest::Approx(7.5).epsilon(1e-14));
  CHECK(std::abs(r.per_document[0] - static_cast<double>(oracle_cider_d(c)[0])) < 1e-9);
}

TEST_CASE("CIDEr-D: an n-gram in every image's references has zero idf") {
  const ScoredCorpus c{doc("1", "a", {"a b"}), doc("2", "a", {"a c"})};
  const CiderIdf idf = CiderIdf::from_references({c[0].references, c[1].references});
  CHECK(idf.log_df("a") == std::log(2.0));
  CHECK(cider_d(c).per_document[0] == 0);
  CHECK(cider_d(c).per_document[1] == 0);
}

TEST_CASE("CIDEr-D: reward equals the singleton corpus score under the same idf") {
  const ScoredCorpus c{doc("1", "a red circle", {"a red circle", "a red square"}),
                       doc("2", "a blue cross", {"a blue cross"})};
  std::vector<std::vector<Tokens>> refs{c[0].references, c[1].references};
  const CiderIdf idf = CiderIdf::from_references(refs);
  const CiderResult single = cider_d({c[0]}, idf);
  CHECK(cider_reward(c[0].candidate, c[0].references, idf) == single.score);
  // Empty candidates score 0 without NaN.
  const double empty = cider_reward({}, c[0].references, idf);
  CHECK(empty == 0);
}

TEST_CASE("CIDEr-D: appending a matching reference n-gram does not lower the reward") {
  const ScoredDocument target = doc("1", "", {"a red circle above a blue square"});
  const ScoredCorpus c{target, doc("2", "", {"a green cross"}), doc("3", "", {"a blue circle"})};
  const CiderIdf idf = CiderIdf::from_references({c[0].references, c[1].references, c[2].references});
  Tokens cand;
  double last = cider_reward(cand, target.references, idf);
  for (const auto& w : target.references[0]) {
    cand.push_back(w);
    const double now = cider_reward(cand, target.references, idf);
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("all metrics match the brute-force oracles on 20 random corpora") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const ScoredCorpus c = random_corpus(rng);
    const auto b = bleu(c);
    const auto ob = oracle_bleu(c);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(b[n] - static_cast<double>(ob[n])) < 1e-9);
    CHECK(std::abs(rouge_l(c) - static_cast<double>(oracle_rouge_l(c))) < 1e-9);
    const auto cd = cider_d(c);
    const auto oc = oracle_cider_d(c);
    long double mean = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(std::abs(cd.per_document[i] - static_cast<double>(oc[i])) < 1e-9);
      mean += oc[i] / c.size();
    }
    CHECK(std::abs(cd.score - static_cast<double>(mean)) < 1e-9);
  }
}

TEST_CASE("metrics are invariant to document order and stay in range") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ScoredCorpus c = random_corpus(rng);
    const MetricTable a = score_corpus(c);
    std::shuffle(c.begin(), c.end(), rng);
    const MetricTable b = score_corpus(c);
    for (int n = 0; n < 4; ++n) {
      CHECK(a.bleu[n] == doctest::Approx(b.bleu[n]).epsilon(1e-12));
      CHECK((a.bleu[n] >= 0 && a.bleu[n] <= 1 + 1e-12));
    }
    CHECK(a.rouge_l == doctest::Approx(b.rouge_l).epsilon(1e-12));
    CHECK(a.cider == doctest::Approx(b.cider).epsilon(1e-12));
    CHECK((a.rouge_l >= 0 && a.rouge_l <= 1 + 1e-12));
    CHECK((a.cider >= 0 && a.cider <= 10 + 1e-9));
  }
}

// Frozen values; BLEU-1 = 15/17 and ROUGE-L = (1 + 1 + 3/7) / 3 by hand.
TEST_CASE("golden values on a fixed corpus") {
  const MetricTable t = score_corpus(golden_corpus());
  for (int n = 0; n < 4; ++n) CHECK(t.bleu[n] == doctest::Approx(kGoldenBleu[n]).epsilon(1e-9));
  CHECK(t.rouge_l == doctest::Approx(kGoldenRouge).epsilon(1e-9));
  CHECK(t.cider == doctest::Approx(kGoldenCider).epsilon(1e-9));
  const std::string table = format_metric_table(t);
  CHECK(table.find("BLEU-1") != std::string::npos);
  CHECK(table.find("CIDEr-D") != std::string::npos);
}

TEST_CASE("a candidate without references is rejected") {
  CHECK_THROWS(bleu({ScoredDocument{"x", {"a"}, {}}}));
}
