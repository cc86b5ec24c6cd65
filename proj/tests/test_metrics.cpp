#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "quranqa/errors.hpp"
#include "quranqa/metrics.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace quranqa;
using doctest::Approx;

TEST_SUITE("metrics") {

TEST_CASE("precisionAtK uses k as denominator") {
  std::set<std::string> rel = {"r"};
  CHECK(metrics::precisionAtK({"r"}, rel, 1) == Approx(1.0));
  // short list: positions beyond it count as misses
  CHECK(metrics::precisionAtK({"r"}, rel, 10) == Approx(0.1));
  CHECK(metrics::precisionAtK({"x", "r", "x"}, rel, 2) == Approx(0.5));
  CHECK(metrics::precisionAtK({}, rel, 5) == Approx(0.0));
  CHECK_THROWS_AS(metrics::precisionAtK({"r"}, rel, 0), ConfigError);
}

TEST_CASE("averagePrecision10 known values") {
  // relevant at ranks 2 and 4 with R_q = 2: (1/2 + 2/4)/2 = 0.5
  CHECK(metrics::averagePrecision10({"x", "r1", "x", "r2"}, {"r1", "r2"}) ==
        Approx(0.5).epsilon(1e-12));
  // single relevant at rank 1
  CHECK(metrics::averagePrecision10({"r", "x"}, {"r"}) == Approx(1.0));
  // relevant beyond rank 10 contributes nothing
  std::vector<std::string> long_list;
  for (int i = 0; i < 10; ++i) long_list.push_back("x" + std::to_string(i));
  long_list.push_back("r");
  CHECK(metrics::averagePrecision10(long_list, {"r"}) == Approx(0.0));
  // R_q > 10 normalizes by 10
  std::set<std::string> many;
  std::vector<std::string> hits;
  for (int i = 0; i < 12; ++i) many.insert("r" + std::to_string(i));
  for (int i = 0; i < 10; ++i) hits.push_back("r" + std::to_string(i));
  CHECK(metrics::averagePrecision10(hits, many) == Approx(1.0));
}

TEST_CASE("reciprocalRank10 known values") {
  CHECK(metrics::reciprocalRank10({"x", "x", "x", "r"}, {"r"}) ==
        Approx(0.25).epsilon(1e-12));
  CHECK(metrics::reciprocalRank10({"r"}, {"r"}) == Approx(1.0));
  CHECK(metrics::reciprocalRank10({"x"}, {"r"}) == Approx(0.0));
}

TEST_CASE("zero-answer convention across all three measures") {
  std::set<std::string> none;
  CHECK(metrics::averagePrecision10({}, none) == Approx(1.0));
  CHECK(metrics::averagePrecision10({"x"}, none) == Approx(0.0));
  CHECK(metrics::reciprocalRank10({}, none) == Approx(1.0));
  CHECK(metrics::reciprocalRank10({"x"}, none) == Approx(0.0));
  CHECK(metrics::partialAveragePrecision10({}, {}) == Approx(1.0));
  CHECK(metrics::partialAveragePrecision10({"نص"}, {}) == Approx(0.0));
}

TEST_CASE("ap and rr match the reference implementation on random instances") {
  generators::Rng rng(7031);
  for (int i = 0; i < 300; ++i) {
    auto ranking = generators::randomRanking(rng, "q", "sys", 30, 15);
    auto relevant = generators::randomRelevantSet(rng, 30, 8);
    std::vector<std::string> ids;
    for (const auto& e : ranking.entries) ids.push_back(e.passage_id);
    CHECK(metrics::averagePrecision10(ids, relevant) ==
          Approx(oracles::averagePrecision10(ids, relevant)).epsilon(1e-9));
    CHECK(metrics::reciprocalRank10(ids, relevant) ==
          Approx(oracles::reciprocalRank10(ids, relevant)).epsilon(1e-9));
  }
}

TEST_CASE("tokenF1 multiset semantics") {
  // duplicated predicted token: P = 1/2, R = 1 -> F1 = 2/3
  CHECK(metrics::tokenF1("a a", "a") == Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(metrics::tokenF1("a b", "a b") == Approx(1.0));
  CHECK(metrics::tokenF1("a", "b") == Approx(0.0));
  CHECK(metrics::tokenF1("", "") == Approx(1.0));
  CHECK(metrics::tokenF1("a", "") == Approx(0.0));
  CHECK(metrics::tokenF1("", "a") == Approx(0.0));
  // normalization applies before overlap
  CHECK(metrics::tokenF1("اللَّهُ الصَّمَدُ", "الله الصمد") == Approx(1.0));
}

TEST_CASE("partialAveragePrecision10 known values") {
  // single prediction with 0.8 overlap: delta = 0.8, P(1) = 0.8 -> 0.64
  CHECK(metrics::partialAveragePrecision10({"a b c d e"}, {"a b c d f"}) ==
        Approx(0.64).epsilon(1e-12));
  // exact match
  CHECK(metrics::partialAveragePrecision10({"a b"}, {"a b"}) == Approx(1.0));
  // frozen greedy case: preds {"x y", "x y"} against gold {"x y", "x"}.
  // k=1 matches gold 0 fully (delta 1); k=2 can only take gold "x"
  // (delta 2/3): pAP = (1*1 + (2/3)*((1+2/3)/2))/2 = 7/9
  CHECK(metrics::partialAveragePrecision10({"x y", "x y"}, {"x y", "x"}) ==
        Approx(7.0 / 9.0).epsilon(1e-12));
  // each gold is consumed by at most one prediction
  CHECK(metrics::partialAveragePrecision10({"x", "x"}, {"x"}) == Approx(1.0));
}

TEST_CASE("partialAveragePrecision10 tie goes to the earliest gold") {
  // "a" overlaps both golds at exactly 2/3; consuming the earliest ("a b")
  // leaves only "a c" for the second prediction:
  // delta = {2/3, 1/2}, pAP = ((2/3)(2/3) + (1/2)(2/3+1/2)/2) / 2 = 53/144.
  // the other tie-break would leave "a b" free and score 23/36 instead.
  const double got =
      metrics::partialAveragePrecision10({"a", "a b"}, {"a b", "a c"});
  CHECK(got == Approx(53.0 / 144.0).epsilon(1e-12));
}

TEST_CASE("pap matches the reference implementation on random instances") {
  generators::Rng rng(9177);
  for (int i = 0; i < 300; ++i) {
    std::uniform_int_distribution<int> count_dist(0, 12);
    const int n_pred = count_dist(rng);
    const int n_gold = count_dist(rng);
    std::vector<std::string> preds, golds;
    std::vector<std::vector<std::string>> pred_tokens, gold_tokens;
    for (int k = 0; k < n_pred; ++k) {
      auto tokens = generators::randomSpanTokens(rng, 5);
      pred_tokens.push_back(tokens);
      preds.push_back(generators::joinTokens(tokens));
    }
    for (int k = 0; k < n_gold; ++k) {
      auto tokens = generators::randomSpanTokens(rng, 5);
      gold_tokens.push_back(tokens);
      golds.push_back(generators::joinTokens(tokens));
    }
    const double got = metrics::partialAveragePrecision10(preds, golds);
    const double want =
        oracles::partialAveragePrecision10(pred_tokens, gold_tokens);
    CHECK(got == Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("map10 aggregates per judged question") {
  metrics::RankedIds rankings;
  metrics::RelevantSets judgments;
  judgments["q1"] = {"a"};
  judgments["q2"] = {};   // zero-answer, absent ranking counts as abstention
  judgments["q3"] = {"b"};
  rankings["q1"] = {"a"};
  rankings["q3"] = {"x", "b"};
  AuditLog log;
  auto report = metrics::map10(rankings, judgments, &log);
  CHECK(report.question_count == 3);
  CHECK(report.per_question.at("q1") == Approx(1.0));
  CHECK(report.per_question.at("q2") == Approx(1.0));
  CHECK(report.per_question.at("q3") == Approx(0.5));
  CHECK(report.aggregate == Approx((1.0 + 1.0 + 0.5) / 3.0));
  CHECK(log.empty());
  CHECK(report.measure == "map@10");
}

TEST_CASE("rankings for unjudged questions are excluded with a warning") {
  metrics::RankedIds rankings;
  metrics::RelevantSets judgments;
  judgments["q1"] = {"a"};
  rankings["q1"] = {"a"};
  rankings["q9"] = {"a"};  // never judged
  AuditLog log;
  auto report = metrics::mrr10(rankings, judgments, &log);
  CHECK(report.question_count == 1);
  CHECK(report.per_question.count("q9") == 0);
  REQUIRE(log.size() == 1);
  CHECK(log.snapshot()[0].find("q9") != std::string::npos);
  CHECK(report.measure == "mrr@10");
}

TEST_CASE("empty judgments aggregate to zero") {
  auto report = metrics::map10({}, {});
  CHECK(report.aggregate == Approx(0.0));
  CHECK(report.question_count == 0);
}

TEST_CASE("entries beyond rank 10 never change a score") {
  generators::Rng rng(410);
  for (int i = 0; i < 50; ++i) {
    auto ranking = generators::randomRanking(rng, "q", "sys", 30, 10);
    auto relevant = generators::randomRelevantSet(rng, 30, 6);
    std::vector<std::string> ids;
    for (const auto& e : ranking.entries) ids.push_back(e.passage_id);
    std::vector<std::string> padded = ids;
    while (padded.size() < 14) padded.push_back("tail" + std::to_string(padded.size()));
    if (ids.size() < 10) continue;  // padding below rank 10 may change scores
    CHECK(metrics::averagePrecision10(ids, relevant) ==
          Approx(metrics::averagePrecision10(padded, relevant)));
    CHECK(metrics::reciprocalRank10(ids, relevant) ==
          Approx(metrics::reciprocalRank10(padded, relevant)));
  }
}

TEST_CASE("report format is tab separated with a final ALL row") {
  metrics::MetricReport report;
  report.measure = "map@10";
  report.per_question = {{"q1", 1.0}, {"q2", 0.33333}};
  report.aggregate = 0.666665;
  report.question_count = 2;
  const std::string text = metrics::formatReport(report);
  CHECK(text == "map@10\tq1\t1.0000\nmap@10\tq2\t0.3333\nmap@10\tALL\t0.6667\n");

  testutil::TempDir dir;
  metrics::writeReport(report, dir.file("r.tsv"));
  CHECK(testutil::readFile(dir.file("r.tsv")) == text);
}

}  // TEST_SUITE
