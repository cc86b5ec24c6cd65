#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "quranqa/corpus.hpp"
#include "quranqa/digest.hpp"
#include "quranqa/errors.hpp"
#include "quranqa/pipeline.hpp"
#include "quranqa/retrieval.hpp"
#include "util.hpp"

using namespace quranqa;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = QQ_TEST_DATA_DIR;

void copyMini(const fs::path& dst) {
  fs::copy(kDataDir, dst, fs::copy_options::recursive);
}

// minimal valid bm25 config body; callers patch what they need
nlohmann::json baseConfig() {
  return nlohmann::json{{"collection", "passages.tsv"},
                        {"questions", "questions.jsonl"},
                        {"judgments", "qrels.tsv"},
                        {"retrieval_source", "bm25"},
                        {"output_dir", "out"}};
}

pipeline::PipelineConfig loadPatched(const testutil::TempDir& dir,
                                     const nlohmann::json& patch,
                                     const std::vector<std::string>& overrides = {}) {
  auto body = baseConfig();
  if (!patch.is_null()) body.merge_patch(patch);
  testutil::writeFile(dir.file("cfg.json"), body.dump(2));
  return pipeline::PipelineConfig::load(dir.file("cfg.json"), overrides);
}

metrics::RelevantSets miniRelevantSets() {
  auto collection = corpus::loadCollection(kDataDir + "/passages.tsv");
  auto judgments = corpus::loadJudgments(kDataDir + "/qrels.tsv", collection);
  metrics::RelevantSets sets;
  for (const auto& [qid, set] : judgments)
    if (set.relevance_judged) sets[qid] = set.relevant_passages;
  return sets;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config load keeps paths as written and resolves them on use") {
  auto cfg = pipeline::PipelineConfig::load(kDataDir + "/config_bm25.json");
  CHECK(cfg.collection == "passages.tsv");
  CHECK(fs::path(cfg.config_dir) == fs::path(kDataDir));
  CHECK(fs::exists(fs::path(cfg.config_dir) / cfg.collection));
  CHECK(cfg.retrieval_source == pipeline::RetrievalSource::kBm25);
  CHECK(cfg.output_dir == "out_bm25");

  auto inputs = cfg.inputPathsAsWritten();
  REQUIRE(inputs.count("passages.tsv") == 1);
  CHECK(fs::exists(inputs.at("passages.tsv")));
}

TEST_CASE("fingerprint is stable and ignores output location") {
  auto a = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json");
  auto b = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json");
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint().size() == 12);

  auto moved = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json",
                                              {"output_dir=/tmp/elsewhere"});
  CHECK(moved.fingerprint() == a.fingerprint());

  auto changed = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json",
                                                {"tau=0.9"});
  CHECK(changed.fingerprint() != a.fingerprint());
}

TEST_CASE("relocating the data tree keeps the fingerprint") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  auto here = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json");
  auto there = pipeline::PipelineConfig::load(
      (dir.path() / "mini" / "config_pipeline.json").string());
  CHECK(here.fingerprint() == there.fingerprint());
}

TEST_CASE("overrides follow dotted paths with json-else-string values") {
  testutil::TempDir dir;
  auto cfg = loadPatched(dir, {},
                         {"bm25.k1=2.0", "seed=42", "retrieval_source=bm25",
                          "fusion.rrf_k=30"});
  CHECK(cfg.bm25.k1 == Approx(2.0));
  CHECK(cfg.seed == 42);
  CHECK(cfg.fusion_config.rrf_k == Approx(30.0));

  CHECK_THROWS_AS(loadPatched(dir, {}, {"nonsense_key=1"}), ConfigError);
  CHECK_THROWS_AS(loadPatched(dir, {}, {"no_equals_sign"}), ConfigError);
}

TEST_CASE("config validation rejects inconsistent stage wiring") {
  testutil::TempDir dir;

  // ingest requires run files and vice versa
  CHECK_THROWS_AS(loadPatched(dir, {{"retrieval_source", "ingest"}}), ConfigError);
  CHECK_THROWS_AS(
      loadPatched(dir, {{"run_files", {"runs/model_a.run"}}}), ConfigError);

  // fusion needs at least two run files
  CHECK_THROWS_AS(loadPatched(dir, {{"retrieval_source", "ingest"},
                                    {"run_files", {"runs/model_a.run"}},
                                    {"fusion_strategy", "rrf"}}),
                  ConfigError);

  // several run files need a fusion strategy
  CHECK_THROWS_AS(
      loadPatched(dir,
                  {{"retrieval_source", "ingest"},
                   {"run_files", {"runs/model_a.run", "runs/model_b.run"}}}),
      ConfigError);

  // extraction needs clients and gold spans
  CHECK_THROWS_AS(loadPatched(dir, {{"extraction", true}}), ConfigError);
  CHECK_THROWS_AS(
      loadPatched(dir, {{"extraction", true},
                        {"gold_spans", "gold_spans.jsonl"},
                        {"clients", nlohmann::json::array()}}),
      ConfigError);

  // duplicate client tags
  CHECK_THROWS_AS(
      loadPatched(
          dir,
          {{"extraction", true},
           {"gold_spans", "gold_spans.jsonl"},
           {"clients",
            {{{"kind", "mock"}, {"tag", "m"}, {"fixtures", "f.jsonl"}},
             {{"kind", "mock"}, {"tag", "m"}, {"fixtures", "g.jsonl"}}}}}),
      ConfigError);

  // unknown top-level key
  CHECK_THROWS_AS(loadPatched(dir, {{"surprise", 1}}), ConfigError);

  // required files
  CHECK_THROWS_AS(loadPatched(dir, {{"collection", nullptr}}), ConfigError);

  CHECK_THROWS_AS(loadPatched(dir, {{"max_in_flight", 0}}), ConfigError);
}

TEST_CASE("computeRetrieval agrees with a direct evaluation of its output") {
  auto cfg = pipeline::PipelineConfig::load(kDataDir + "/config_bm25.json");
  auto artifacts = pipeline::computeRetrieval(cfg);
  auto judged = miniRelevantSets();
  auto again =
      metrics::map10(retrieval::toRankedIds(artifacts.rankings), judged);
  CHECK(artifacts.map_report.aggregate == Approx(again.aggregate).epsilon(1e-12));
  CHECK(artifacts.map_report.per_question.size() ==
        again.per_question.size());
  for (const auto& [qid, value] : again.per_question)
    CHECK(artifacts.map_report.per_question.at(qid) == Approx(value));
  CHECK(artifacts.map_report.config_fingerprint == cfg.fingerprint());
}

TEST_CASE("zero-answer questions score by the abstention convention") {
  auto cfg = pipeline::PipelineConfig::load(kDataDir + "/config_bm25.json");
  auto artifacts = pipeline::computeRetrieval(cfg);
  // q010's vocabulary is absent from the collection: bm25 abstains -> 1.0
  CHECK(artifacts.map_report.per_question.at("q010") == Approx(1.0));
  // q011/q012 share tokens with passages: bm25 answers junk -> 0.0
  CHECK(artifacts.map_report.per_question.at("q011") == Approx(0.0));
  CHECK(artifacts.map_report.per_question.at("q012") == Approx(0.0));
}

TEST_CASE("fusing a run with itself reproduces the single-run ranking") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";

  // the same run under two different system tags
  std::string body = testutil::readFile((mini / "runs/model_a.run").string());
  std::string tagged_a, tagged_b;
  std::istringstream lines(body);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    auto cut = line.rfind(' ');
    tagged_a += line.substr(0, cut) + " sysA\n";
    tagged_b += line.substr(0, cut) + " sysB\n";
  }
  testutil::writeFile((mini / "runs/twin_a.run").string(), tagged_a);
  testutil::writeFile((mini / "runs/twin_b.run").string(), tagged_b);

  nlohmann::json single = {{"collection", "passages.tsv"},
                           {"questions", "questions.jsonl"},
                           {"judgments", "qrels.tsv"},
                           {"retrieval_source", "ingest"},
                           {"run_files", {"runs/twin_a.run"}},
                           {"output_dir", "out_single"}};
  nlohmann::json fused = single;
  fused["run_files"] = {"runs/twin_a.run", "runs/twin_b.run"};
  fused["fusion_strategy"] = "rrf";
  fused["output_dir"] = "out_fused";
  testutil::writeFile((mini / "cfg_single.json").string(), single.dump());
  testutil::writeFile((mini / "cfg_fused.json").string(), fused.dump());

  auto one = pipeline::computeRetrieval(
      pipeline::PipelineConfig::load((mini / "cfg_single.json").string()));
  auto two = pipeline::computeRetrieval(
      pipeline::PipelineConfig::load((mini / "cfg_fused.json").string()));

  REQUIRE(one.rankings.size() == two.rankings.size());
  for (const auto& [qid, ranking] : one.rankings) {
    const auto& other = two.rankings.at(qid);
    REQUIRE(other.entries.size() == ranking.entries.size());
    for (std::size_t i = 0; i < ranking.entries.size(); ++i)
      CHECK(other.entries[i].passage_id == ranking.entries[i].passage_id);
  }
  CHECK(one.map_report.aggregate == Approx(two.map_report.aggregate).epsilon(1e-12));
  CHECK(one.mrr_report.aggregate == Approx(two.mrr_report.aggregate).epsilon(1e-12));
}

TEST_CASE("threshold placement pre and post fusion both apply") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";
  auto load = [&](const std::string& placement) {
    return pipeline::PipelineConfig::load(
        (mini / "config_pipeline.json").string(),
        {"threshold_placement=" + placement, "extraction=false", "tau=0.7"});
  };
  auto post = pipeline::computeRetrieval(load("post_fusion"));
  auto pre = pipeline::computeRetrieval(load("pre_fusion"));
  // post-fusion keeps only fused scores >= 0.7
  for (const auto& [qid, ranking] : post.rankings)
    for (const auto& e : ranking.entries) CHECK(e.score >= 0.7);
  // pre-fusion thresholds raw model scores instead; fused scores may be lower
  bool saw_below = false;
  for (const auto& [qid, ranking] : pre.rankings)
    for (const auto& e : ranking.entries)
      if (e.score < 0.7) saw_below = true;
  CHECK(saw_below);
}

TEST_CASE("computeExtraction with perfect fixtures is exact") {
  auto cfg = pipeline::PipelineConfig::load(kDataDir + "/config_pipeline.json");
  auto artifacts = pipeline::computeExtraction(cfg);
  CHECK(artifacts.pap_report.aggregate == Approx(1.0).epsilon(1e-12));
  CHECK(artifacts.pap_report.measure == "pap@10");
  REQUIRE(!artifacts.spans.empty());
  // single client: the ensemble carries that client's tag
  for (const auto& span : artifacts.spans) CHECK(span.source == "mock_a");
}

TEST_CASE("extraction parallelism does not change the result") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";
  auto serial = pipeline::computeExtraction(pipeline::PipelineConfig::load(
      (mini / "config_pipeline.json").string(), {"max_in_flight=1"}));
  auto parallel = pipeline::computeExtraction(pipeline::PipelineConfig::load(
      (mini / "config_pipeline.json").string(), {"max_in_flight=8"}));
  REQUIRE(serial.spans.size() == parallel.spans.size());
  for (std::size_t i = 0; i < serial.spans.size(); ++i) {
    CHECK(serial.spans[i].question_id == parallel.spans[i].question_id);
    CHECK(serial.spans[i].text == parallel.spans[i].text);
    CHECK(serial.spans[i].rank == parallel.spans[i].rank);
  }
  CHECK(serial.pap_report.aggregate == Approx(parallel.pap_report.aggregate));
}

TEST_CASE("runPipeline writes a reproducible artifact set") {
  ::setenv("SOURCE_DATE_EPOCH", "0", 1);
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";
  auto cfg =
      pipeline::PipelineConfig::load((mini / "config_pipeline.json").string());
  pipeline::runPipeline(cfg);

  const fs::path out = mini / "out";
  for (const char* name :
       {"retrieval.run", "map10.tsv", "mrr10.tsv", "extraction.jsonl",
        "pap10.tsv", "resolved_config.json", "manifest.json", "audit.log"}) {
    CHECK(fs::exists(out / name));
  }

  auto manifest = nlohmann::json::parse(testutil::readFile((out / "manifest.json").string()));
  CHECK(manifest["artifact_version"] == pipeline::kArtifactVersion);
  CHECK(manifest["command"] == "pipeline");
  CHECK(manifest["config_fingerprint"] == cfg.fingerprint());
  CHECK(manifest["created_utc"] == "1970-01-01T00:00:00Z");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["threshold_placement"] == "post_fusion");

  // input digests keyed by the paths as written in the config
  CHECK(manifest["inputs"].contains("passages.tsv"));
  CHECK(manifest["inputs"]["passages.tsv"] ==
        digest::sha256HexFile((mini / "passages.tsv").string()));
  CHECK(manifest["inputs"].contains("runs/model_a.run"));

  // output digests keyed by basename, covering every written file but itself
  CHECK(manifest["outputs"].size() == 7);
  for (const auto& [name, hash] : manifest["outputs"].items()) {
    CHECK(hash == digest::sha256HexFile((out / name).string()));
  }

  // resolved config is the canonical form and excludes output_dir
  auto resolved = nlohmann::json::parse(
      testutil::readFile((out / "resolved_config.json").string()));
  CHECK_FALSE(resolved.contains("output_dir"));
  CHECK(resolved == cfg.toCanonicalJson());

  // a second run over the same inputs is byte-identical
  const std::string first = testutil::readFile((out / "manifest.json").string());
  pipeline::runPipeline(cfg);
  CHECK(testutil::readFile((out / "manifest.json").string()) == first);
  ::unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("manifestTimestamp honors SOURCE_DATE_EPOCH") {
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  CHECK(pipeline::manifestTimestamp() == "1970-01-02T00:00:00Z");
  ::setenv("SOURCE_DATE_EPOCH", "not-a-number", 1);
  const std::string now = pipeline::manifestTimestamp();
  CHECK(now.size() == 20);
  CHECK(now[10] == 'T');
  CHECK(now.back() == 'Z');
  CHECK(now != "1970-01-02T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("ablation rows sort by map and scale-invariant weights tie") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";

  nlohmann::json grid = nlohmann::json::array(
      {{{"label", "w_small"},
        {"overrides",
         {{"fusion", {{"model_weights",
                       {{"model_a", 0.6}, {"model_b", 0.4}}}}}}}},
       {{"label", "w_scaled"},
        {"overrides",
         {{"fusion", {{"model_weights",
                       {{"model_a", 1.2}, {"model_b", 0.8}}}}}}}}});
  testutil::writeFile((mini / "grid_scale.json").string(), grid.dump());

  auto cfg = pipeline::PipelineConfig::load(
      (mini / "config_pipeline.json").string(), {"extraction=false"});
  auto rows =
      pipeline::runAblation(cfg, (mini / "grid_scale.json").string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].map10 == Approx(rows[1].map10).epsilon(1e-12));
  CHECK(rows[0].mrr10 == Approx(rows[1].mrr10).epsilon(1e-12));
  // equal map ties break by label
  CHECK(rows[0].label == "w_scaled");
  CHECK(rows[1].label == "w_small");

  CHECK(fs::exists(mini / "out" / "ablation.tsv"));
  const std::string table =
      testutil::readFile((mini / "out" / "ablation.tsv").string());
  CHECK(table.rfind("label\tmap@10\tmrr@10\n", 0) == 0);

  // duplicate labels are rejected
  nlohmann::json dup = nlohmann::json::array(
      {{{"label", "same"}, {"overrides", nlohmann::json::object()}},
       {{"label", "same"}, {"overrides", nlohmann::json::object()}}});
  testutil::writeFile((mini / "grid_dup.json").string(), dup.dump());
  CHECK_THROWS_AS(
      pipeline::runAblation(cfg, (mini / "grid_dup.json").string()), ConfigError);
}

TEST_CASE("ingest pipeline fails loudly on unusable run inputs") {
  testutil::TempDir dir;
  copyMini(dir.path() / "mini");
  const fs::path mini = dir.path() / "mini";

  // all run files empty -> nothing to rank
  testutil::writeFile((mini / "runs/model_a.run").string(), "");
  testutil::writeFile((mini / "runs/model_b.run").string(), "");
  auto cfg = pipeline::PipelineConfig::load(
      (mini / "config_pipeline.json").string(), {"extraction=false"});
  CHECK_THROWS_AS(pipeline::computeRetrieval(cfg), DataError);
}

}  // TEST_SUITE
