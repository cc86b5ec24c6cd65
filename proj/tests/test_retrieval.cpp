#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "quranqa/corpus.hpp"
#include "quranqa/errors.hpp"
#include "quranqa/retrieval.hpp"
#include "quranqa/text.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace quranqa;
using doctest::Approx;

namespace {

const std::string kDataDir = QQ_TEST_DATA_DIR;

corpus::Collection tinyCollection(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<corpus::Passage> passages;
  for (const auto& [id, text] : rows) {
    corpus::Passage p;
    p.id = id;
    p.text = text;
    p.normalized_text = text::normalizeText(text);
    p.length_tokens = text::tokenize(text).size();
    passages.push_back(std::move(p));
  }
  return corpus::Collection(std::move(passages));
}

corpus::Question makeQuestion(const std::string& id, const std::string& text) {
  corpus::Question q;
  q.id = id;
  q.text = text;
  return q;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("finalizeRanking sorts by score then passage id and truncates") {
  auto r = retrieval::finalizeRanking(
      "q", "sys", {{"b", 0.5}, {"a", 0.5}, {"c", 0.9}, {"d", 0.1}}, 3);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].passage_id == "c");
  CHECK(r.entries[1].passage_id == "a");  // tie broken by id ascending
  CHECK(r.entries[2].passage_id == "b");
  CHECK(r.cutoff == 3);

  CHECK_THROWS_AS(
      retrieval::finalizeRanking("q", "s", {{"a", 1.0}, {"a", 0.5}}, 10),
      DataError);
  CHECK_THROWS_AS(
      retrieval::finalizeRanking(
          "q", "s", {{"a", std::numeric_limits<double>::quiet_NaN()}}, 10),
      DataError);
  CHECK_THROWS_AS(retrieval::finalizeRanking("q", "s", {}, 0), ConfigError);
}

TEST_CASE("inverted index statistics") {
  auto collection = tinyCollection({{"d1", "aaa bbb ccc aaa"}, {"d2", "bbb ddd"}});
  auto index = retrieval::InvertedIndex::build(collection);
  CHECK(index.documentCount() == 2);
  CHECK(index.averageLength() == Approx(3.0));
  CHECK(index.documentFrequency("aaa") == 1);
  CHECK(index.documentFrequency("bbb") == 2);
  CHECK(index.documentFrequency("zzz") == 0);
  const auto* postings = index.postings("aaa");
  REQUIRE(postings != nullptr);
  REQUIRE(postings->size() == 1);
  CHECK((*postings)[0].tf == 2);

  CHECK_THROWS_AS(retrieval::InvertedIndex::build(corpus::Collection{}), DataError);
}

TEST_CASE("bm25 closed-form check on equal-length documents") {
  // both docs 4 tokens, query term in one of them once:
  // idf = ln(1 + 1.5/1.5) = ln 2, tf term = 2.2/2.2 = 1 -> score = ln 2
  auto collection =
      tinyCollection({{"d1", "aaa bbb ccc ddd"}, {"d2", "eee fff ggg hhh"}});
  auto index = retrieval::InvertedIndex::build(collection);
  auto r = retrieval::bm25Retrieve(index, makeQuestion("q", "aaa"));
  REQUIRE(r.entries.size() == 1);
  CHECK(r.entries[0].passage_id == "d1");
  CHECK(r.entries[0].score == Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bm25 excludes zero-score passages and repeats query terms") {
  auto collection =
      tinyCollection({{"d1", "aaa bbb"}, {"d2", "ccc ddd"}, {"d3", "aaa aaa"}});
  auto index = retrieval::InvertedIndex::build(collection);
  auto r = retrieval::bm25Retrieve(index, makeQuestion("q", "aaa"));
  CHECK(r.entries.size() == 2);  // d2 never matches

  // a repeated query token scores twice
  auto once = retrieval::bm25Retrieve(index, makeQuestion("q", "aaa"));
  auto twice = retrieval::bm25Retrieve(index, makeQuestion("q", "aaa aaa"));
  REQUIRE(!once.entries.empty());
  REQUIRE(!twice.entries.empty());
  CHECK(twice.entries[0].score == Approx(2.0 * once.entries[0].score));

  // no overlap at all: empty ranking
  auto none = retrieval::bm25Retrieve(index, makeQuestion("q", "zzz"));
  CHECK(none.entries.empty());
}

TEST_CASE("bm25 parameter validation") {
  auto collection = tinyCollection({{"d1", "aaa"}});
  auto index = retrieval::InvertedIndex::build(collection);
  retrieval::Bm25Params bad;
  bad.b = 1.5;
  CHECK_THROWS_AS(retrieval::bm25Retrieve(index, makeQuestion("q", "aaa"), bad),
                  ConfigError);
  bad.b = 0.75;
  bad.k1 = -1.0;
  CHECK_THROWS_AS(retrieval::bm25Retrieve(index, makeQuestion("q", "aaa"), bad),
                  ConfigError);
}

TEST_CASE("bm25 matches the full-scan reference on random collections") {
  generators::Rng rng(551);
  const std::vector<std::string> vocab = generators::wordPool();
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<oracles::Bm25Doc> docs;
    const int n_docs = 3 + static_cast<int>(rng() % 18);
    for (int d = 0; d < n_docs; ++d) {
      const int len = 2 + static_cast<int>(rng() % 12);
      std::vector<std::string> tokens;
      for (int t = 0; t < len; ++t) tokens.push_back(vocab[word(rng)]);
      const std::string id = generators::pid(d);
      rows.push_back({id, generators::joinTokens(tokens)});
      docs.push_back({id, tokens});
    }
    auto collection = tinyCollection(rows);
    auto index = retrieval::InvertedIndex::build(collection);
    for (int qn = 0; qn < 5; ++qn) {
      const int qlen = 1 + static_cast<int>(rng() % 4);
      std::vector<std::string> qtokens;
      for (int t = 0; t < qlen; ++t) qtokens.push_back(vocab[word(rng)]);
      auto got = retrieval::bm25Retrieve(
          index, makeQuestion("q", generators::joinTokens(qtokens)), {}, 100);
      auto want = oracles::bm25Scores(docs, qtokens, 1.2, 0.75);
      REQUIRE(got.entries.size() == want.size());
      for (const auto& e : got.entries)
        CHECK(e.score == Approx(want.at(e.passage_id)).epsilon(1e-12));
    }
  }
}

TEST_CASE("bm25 is invariant to passage file order") {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"d3", "aaa bbb ccc"}, {"d1", "bbb ccc ddd eee"}, {"d2", "aaa aaa fff"}};
  auto c1 = tinyCollection(rows);
  std::reverse(rows.begin(), rows.end());
  auto c2 = tinyCollection(rows);
  auto i1 = retrieval::InvertedIndex::build(c1);
  auto i2 = retrieval::InvertedIndex::build(c2);
  auto r1 = retrieval::bm25Retrieve(i1, makeQuestion("q", "aaa bbb"));
  auto r2 = retrieval::bm25Retrieve(i2, makeQuestion("q", "aaa bbb"));
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (std::size_t i = 0; i < r1.entries.size(); ++i) {
    CHECK(r1.entries[i].passage_id == r2.entries[i].passage_id);
    CHECK(r1.entries[i].score == Approx(r2.entries[i].score).epsilon(1e-15));
  }
}

TEST_CASE("run ingestion honors scores over declared ranks") {
  auto collection = tinyCollection({{"p1", "aaa"}, {"p2", "bbb"}, {"p3", "ccc"}});
  testutil::TempDir dir;
  // declared ranks disagree with scores; scores must win with a warning
  testutil::writeFile(dir.file("m.run"),
                      "q1 Q0 p1 1 0.2 sys\n"
                      "q1 Q0 p2 2 0.9 sys\n"
                      "q2 Q0 p3 1 0.5 sys\n");
  AuditLog log;
  auto rankings = retrieval::ingestRun(dir.file("m.run"), collection, 10, &log);
  REQUIRE(rankings.count("q1") == 1);
  CHECK(rankings.at("q1").entries[0].passage_id == "p2");
  CHECK(rankings.at("q1").entries[1].passage_id == "p1");
  CHECK(rankings.at("q1").system == "sys");
  REQUIRE(log.size() == 1);
  CHECK(log.snapshot()[0].find("q1") != std::string::npos);
}

TEST_CASE("run ingestion hard errors") {
  auto collection = tinyCollection({{"p1", "aaa"}, {"p2", "bbb"}});
  testutil::TempDir dir;

  testutil::writeFile(dir.file("unknown.run"), "q1 Q0 p9 1 0.5 sys\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("unknown.run"), collection),
                  DataError);

  testutil::writeFile(dir.file("dup.run"),
                      "q1 Q0 p1 1 0.5 sys\nq1 Q0 p1 2 0.4 sys\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("dup.run"), collection), DataError);

  testutil::writeFile(dir.file("mixed.run"),
                      "q1 Q0 p1 1 0.5 sysA\nq1 Q0 p2 2 0.4 sysB\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("mixed.run"), collection), DataError);

  testutil::writeFile(dir.file("short.run"), "q1 Q0 p1 1 0.5\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("short.run"), collection), DataError);

  testutil::writeFile(dir.file("long.run"), "q1 Q0 p1 1 0.5 sys extra\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("long.run"), collection), DataError);

  testutil::writeFile(dir.file("badnum.run"), "q1 Q0 p1 1 not-a-score sys\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("badnum.run"), collection), DataError);

  testutil::writeFile(dir.file("nan.run"), "q1 Q0 p1 1 nan sys\n");
  CHECK_THROWS_AS(retrieval::ingestRun(dir.file("nan.run"), collection), DataError);

  // empty file is tolerated with a warning
  testutil::writeFile(dir.file("empty.run"), "");
  AuditLog log;
  auto rankings = retrieval::ingestRun(dir.file("empty.run"), collection, 10, &log);
  CHECK(rankings.empty());
  CHECK(log.size() == 1);
}

TEST_CASE("error messages carry line numbers") {
  auto collection = tinyCollection({{"p1", "aaa"}});
  testutil::TempDir dir;
  testutil::writeFile(dir.file("bad.run"),
                      "q1 Q0 p1 1 0.5 sys\nq1 Q0 p9 2 0.4 sys\n");
  try {
    retrieval::ingestRun(dir.file("bad.run"), collection);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("writeRun then ingestRun round trips") {
  auto collection = tinyCollection({{"p1", "aaa"}, {"p2", "bbb"}, {"p3", "ccc"}});
  std::map<std::string, retrieval::Ranking> rankings;
  rankings["q1"] = retrieval::finalizeRanking(
      "q1", "sys", {{"p1", 0.123456789}, {"p2", 0.5}}, 10);
  rankings["q2"] = retrieval::finalizeRanking("q2", "sys", {{"p3", 1.5}}, 10);
  testutil::TempDir dir;
  retrieval::writeRun(rankings, dir.file("out.run"));

  const std::string written = testutil::readFile(dir.file("out.run"));
  CHECK(written ==
        "q1 Q0 p2 1 0.500000 sys\n"
        "q1 Q0 p1 2 0.123457 sys\n"
        "q2 Q0 p3 1 1.500000 sys\n");

  auto back = retrieval::ingestRun(dir.file("out.run"), collection);
  REQUIRE(back.size() == 2);
  CHECK(back.at("q1").entries[0].passage_id == "p2");
  CHECK(back.at("q1").entries[1].passage_id == "p1");
  CHECK(back.at("q2").entries[0].score == Approx(1.5));
}

TEST_CASE("threshold drops entries strictly below tau") {
  auto r = retrieval::finalizeRanking(
      "q", "s", {{"a", 0.9}, {"b", 0.7}, {"c", 0.3}}, 10);
  auto kept = retrieval::applyNoAnswerThreshold(r, 0.7);
  REQUIRE(kept.entries.size() == 2);  // 0.7 itself survives
  CHECK(kept.entries[1].passage_id == "b");

  auto all = retrieval::applyNoAnswerThreshold(
      r, -std::numeric_limits<double>::infinity());
  CHECK(all.entries.size() == 3);

  auto none = retrieval::applyNoAnswerThreshold(r, 2.0);
  CHECK(none.entries.empty());

  CHECK_THROWS_AS(retrieval::applyNoAnswerThreshold(
                      r, std::numeric_limits<double>::quiet_NaN()),
                  ConfigError);
}

TEST_CASE("thresholded entry sets nest as tau grows") {
  generators::Rng rng(88);
  for (int i = 0; i < 30; ++i) {
    auto r = generators::randomRanking(rng, "q", "s", 25, 12);
    std::vector<double> taus = {0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0};
    for (std::size_t t = 1; t < taus.size(); ++t) {
      auto wide = retrieval::applyNoAnswerThreshold(r, taus[t - 1]);
      auto narrow = retrieval::applyNoAnswerThreshold(r, taus[t]);
      std::set<std::string> wide_ids, narrow_ids;
      for (const auto& e : wide.entries) wide_ids.insert(e.passage_id);
      for (const auto& e : narrow.entries) narrow_ids.insert(e.passage_id);
      for (const auto& id : narrow_ids) CHECK(wide_ids.count(id) == 1);
    }
  }
}

TEST_CASE("sweepThreshold picks the smallest tau achieving the best map") {
  std::map<std::string, retrieval::Ranking> rankings;
  rankings["q1"] =
      retrieval::finalizeRanking("q1", "s", {{"p1", 0.9}, {"p2", 0.25}}, 10);
  rankings["q2"] = retrieval::finalizeRanking("q2", "s", {{"p3", 0.3}}, 10);
  rankings["q3"] =
      retrieval::finalizeRanking("q3", "s", {{"p5", 0.75}, {"p4", 0.7}}, 10);
  metrics::RelevantSets judgments;
  judgments["q1"] = {"p1"};
  judgments["q2"] = {};  // zero-answer: abstention is only correct above 0.3
  judgments["q3"] = {"p4"};

  auto sweep = retrieval::sweepThreshold(rankings, judgments,
                                         {0.8, 0.0, 0.4, 0.2, 0.6});
  // curve: tau 0.0/0.2 -> (1+0+0.5)/3 = 0.5; 0.4/0.6 -> (1+1+0.5)/3 = 0.8333
  // (tie resolved to the smaller tau); 0.8 -> (1+1+0)/3 = 0.6667
  REQUIRE(sweep.curve.size() == 5);
  CHECK(sweep.curve[0].first == Approx(0.0));
  CHECK(sweep.curve[0].second == Approx(0.5).epsilon(1e-12));
  CHECK(sweep.curve[2].second == Approx(2.5 / 3.0).epsilon(1e-12));
  CHECK(sweep.curve[4].second == Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(sweep.best_tau == Approx(0.4));

  CHECK_THROWS_AS(retrieval::sweepThreshold(rankings, judgments, {}), ConfigError);
  CHECK_THROWS_AS(
      retrieval::sweepThreshold(rankings, judgments,
                                {std::numeric_limits<double>::quiet_NaN()}),
      ConfigError);
}

TEST_CASE("mini corpus has a lexically unique query term") {
  auto collection = corpus::loadCollection(kDataDir + "/passages.tsv");
  auto index = retrieval::InvertedIndex::build(collection);
  CHECK(index.documentFrequency(text::tokenize("الكوثر")[0]) == 1);
  auto r = retrieval::bm25Retrieve(index, makeQuestion("q", "الكوثر"));
  REQUIRE(!r.entries.empty());
  CHECK(r.entries[0].passage_id == "p004");
}

}  // TEST_SUITE
