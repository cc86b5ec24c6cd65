#include "quranqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "quranqa/digest.hpp"
#include "quranqa/errors.hpp"

namespace fs = std::filesystem;

namespace quranqa::pipeline {
namespace {

std::string toString(RetrievalSource v) {
  return v == RetrievalSource::kBm25 ? "bm25" : "ingest";
}
std::string toString(FusionStrategy v) {
  switch (v) {
    case FusionStrategy::kNone: return "none";
    case FusionStrategy::kWeighted: return "weighted";
    default: return "rrf";
  }
}
std::string toString(ThresholdPlacement v) {
  return v == ThresholdPlacement::kPreFusion ? "pre_fusion" : "post_fusion";
}
std::string toString(ExtractionPassages v) {
  return v == ExtractionPassages::kGold ? "gold" : "retrieved";
}

RetrievalSource sourceFromString(const std::string& s) {
  if (s == "bm25") return RetrievalSource::kBm25;
  if (s == "ingest") return RetrievalSource::kIngest;
  throw ConfigError("retrieval_source must be 'bm25' or 'ingest', got '" + s + "'");
}
FusionStrategy strategyFromString(const std::string& s) {
  if (s == "none") return FusionStrategy::kNone;
  if (s == "weighted") return FusionStrategy::kWeighted;
  if (s == "rrf") return FusionStrategy::kRrf;
  throw ConfigError("fusion_strategy must be 'none', 'weighted' or 'rrf', got '" +
                    s + "'");
}
ThresholdPlacement placementFromString(const std::string& s) {
  if (s == "pre_fusion") return ThresholdPlacement::kPreFusion;
  if (s == "post_fusion") return ThresholdPlacement::kPostFusion;
  throw ConfigError(
      "threshold_placement must be 'pre_fusion' or 'post_fusion', got '" + s + "'");
}
ExtractionPassages passagesFromString(const std::string& s) {
  if (s == "gold") return ExtractionPassages::kGold;
  if (s == "retrieved") return ExtractionPassages::kRetrieved;
  throw ConfigError("extraction_passages must be 'gold' or 'retrieved', got '" +
                    s + "'");
}

std::string resolveAgainst(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::string resolved(const PipelineConfig& config, const std::string& path) {
  return resolveAgainst(config.config_dir, path);
}

template <typename T>
T typedGet(const nlohmann::json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

ClientConfig clientFromJson(const nlohmann::json& j, std::size_t index) {
  std::string where = "clients[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  ClientConfig client;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") client.kind = typedGet<std::string>(value, where + ".kind");
    else if (key == "tag") client.tag = typedGet<std::string>(value, where + ".tag");
    else if (key == "fixtures") {
      client.fixtures = typedGet<std::string>(value, where + ".fixtures");
    } else if (key == "endpoint") {
      client.http.endpoint = typedGet<std::string>(value, where + ".endpoint");
    } else if (key == "model") {
      client.http.model = typedGet<std::string>(value, where + ".model");
    } else if (key == "temperature") {
      client.http.temperature = typedGet<double>(value, where + ".temperature");
    } else if (key == "timeout_seconds") {
      client.http.timeout_seconds = typedGet<int>(value, where + ".timeout_seconds");
    } else if (key == "max_retries") {
      client.http.max_retries = typedGet<int>(value, where + ".max_retries");
    } else if (key == "backoff_ms") {
      client.http.backoff_ms = typedGet<int>(value, where + ".backoff_ms");
    } else if (key == "auth_env") {
      client.http.auth_env = typedGet<std::string>(value, where + ".auth_env");
    } else {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
  client.http.tag = client.tag;
  if (client.kind != "mock" && client.kind != "http") {
    throw ConfigError(where + ".kind must be 'mock' or 'http'");
  }
  if (client.tag.empty()) throw ConfigError(where + " needs a non-empty tag");
  if (client.kind == "mock") {
    if (client.fixtures.empty()) {
      throw ConfigError(where + " (mock) needs a fixtures path");
    }
    if (!client.http.endpoint.empty() || !client.http.model.empty()) {
      throw ConfigError(where + " (mock) must not set http fields");
    }
  } else {
    if (!client.fixtures.empty()) {
      throw ConfigError(where + " (http) must not set fixtures");
    }
    client.http.validate();
  }
  return client;
}

nlohmann::json clientToJson(const ClientConfig& client) {
  if (client.kind == "mock") {
    return nlohmann::json{
        {"kind", client.kind}, {"tag", client.tag}, {"fixtures", client.fixtures}};
  }
  return nlohmann::json{{"kind", client.kind},
                        {"tag", client.tag},
                        {"endpoint", client.http.endpoint},
                        {"model", client.http.model},
                        {"temperature", client.http.temperature},
                        {"timeout_seconds", client.http.timeout_seconds},
                        {"max_retries", client.http.max_retries},
                        {"backoff_ms", client.http.backoff_ms},
                        {"auth_env", client.http.auth_env}};
}

PipelineConfig configFromJson(const nlohmann::json& j, std::string config_dir) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig config;
  config.config_dir = std::move(config_dir);
  for (const auto& [key, value] : j.items()) {
    if (key == "collection") {
      config.collection = typedGet<std::string>(value, key);
    } else if (key == "questions") {
      config.questions = typedGet<std::string>(value, key);
    } else if (key == "judgments") {
      config.judgments = typedGet<std::string>(value, key);
    } else if (key == "gold_spans") {
      config.gold_spans = typedGet<std::string>(value, key);
    } else if (key == "run_files") {
      config.run_files = typedGet<std::vector<std::string>>(value, key);
    } else if (key == "retrieval_source") {
      config.retrieval_source = sourceFromString(typedGet<std::string>(value, key));
    } else if (key == "fusion_strategy") {
      config.fusion_strategy = strategyFromString(typedGet<std::string>(value, key));
    } else if (key == "threshold_placement") {
      config.threshold_placement =
          placementFromString(typedGet<std::string>(value, key));
    } else if (key == "tau") {
      if (!value.is_null()) config.tau = typedGet<double>(value, key);
    } else if (key == "extraction") {
      config.extraction = typedGet<bool>(value, key);
    } else if (key == "extraction_passages") {
      config.extraction_passages =
          passagesFromString(typedGet<std::string>(value, key));
    } else if (key == "drop_contained") {
      config.drop_contained = typedGet<bool>(value, key);
    } else if (key == "max_in_flight") {
      config.max_in_flight = typedGet<int>(value, key);
    } else if (key == "seed") {
      config.seed = typedGet<std::uint64_t>(value, key);
    } else if (key == "bm25") {
      if (!value.is_object()) throw ConfigError("config key 'bm25' must be an object");
      for (const auto& [bkey, bvalue] : value.items()) {
        if (bkey == "k1") config.bm25.k1 = typedGet<double>(bvalue, "bm25.k1");
        else if (bkey == "b") config.bm25.b = typedGet<double>(bvalue, "bm25.b");
        else throw ConfigError("unknown config key 'bm25." + bkey + "'");
      }
    } else if (key == "fusion") {
      config.fusion_config = fusion::FusionConfig::fromJson(value);
    } else if (key == "clients") {
      if (!value.is_array()) throw ConfigError("config key 'clients' must be an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        config.clients.push_back(clientFromJson(value[i], i));
      }
    } else if (key == "output_dir") {
      config.output_dir = typedGet<std::string>(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

// --set key.path=value; the value is parsed as JSON when it parses, else
// taken as a string.
void applyOverride(nlohmann::json& j, const std::string& spec) {
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value, got '" + spec + "'");
  }
  std::string dotted = spec.substr(0, eq);
  std::string raw_value = spec.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw_value, nullptr, false);
  if (value.is_discarded()) value = raw_value;

  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    std::size_t dot = dotted.find('.', start);
    std::string part = dotted.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override path has an empty segment: '" +
                                        dotted + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    if (!node->is_object()) {
      throw ConfigError("override path '" + dotted +
                        "' descends into a non-object value");
    }
    start = dot + 1;
  }
}

std::string formatScore(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

void writeTextFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing: " + path.string());
}

// Shared tail of every file-writing entry point: resolved config, audit log,
// then the manifest tying inputs to outputs by digest.
void writeCommonArtifacts(const PipelineConfig& config, const std::string& command,
                          std::vector<std::string> output_names,
                          const AuditLog& log, const fs::path& dir) {
  writeTextFile(dir / "resolved_config.json", config.toCanonicalJson().dump(2) + "\n");
  output_names.push_back("resolved_config.json");

  std::ostringstream audit_text;
  for (const auto& line : log.snapshot()) audit_text << line << '\n';
  writeTextFile(dir / "audit.log", audit_text.str());
  output_names.push_back("audit.log");

  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [as_written, resolved_path] : config.inputPathsAsWritten()) {
    inputs[as_written] = digest::sha256HexFile(resolved_path);
  }
  nlohmann::json outputs = nlohmann::json::object();
  std::sort(output_names.begin(), output_names.end());
  for (const auto& name : output_names) {
    outputs[name] = digest::sha256HexFile((dir / name).string());
  }
  nlohmann::json manifest{{"artifact_version", kArtifactVersion},
                          {"command", command},
                          {"config_fingerprint", config.fingerprint()},
                          {"created_utc", manifestTimestamp()},
                          {"inputs", inputs},
                          {"outputs", outputs},
                          {"seed", config.seed},
                          {"threshold_placement",
                           toString(config.threshold_placement)}};
  writeTextFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

fs::path ensureOutputDir(const PipelineConfig& config) {
  fs::path dir(resolved(config, config.output_dir));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + dir.string() +
                      "': " + ec.message());
  }
  return dir;
}

void writeRetrievalFiles(const RetrievalArtifacts& artifacts, const fs::path& dir,
                         std::vector<std::string>& output_names) {
  retrieval::writeRun(artifacts.rankings, (dir / "retrieval.run").string());
  metrics::writeReport(artifacts.map_report, (dir / "map10.tsv").string());
  metrics::writeReport(artifacts.mrr_report, (dir / "mrr10.tsv").string());
  output_names.insert(output_names.end(),
                      {"retrieval.run", "map10.tsv", "mrr10.tsv"});
}

void writeExtractionFiles(const ExtractionArtifacts& artifacts, const fs::path& dir,
                          std::vector<std::string>& output_names) {
  extraction::writeSpans(artifacts.spans, (dir / "extraction.jsonl").string());
  metrics::writeReport(artifacts.pap_report, (dir / "pap10.tsv").string());
  output_names.insert(output_names.end(), {"extraction.jsonl", "pap10.tsv"});
}

// Runs fn(i) for i in [0, count) on up to width threads; the first failure
// (by lowest index) is rethrown after all workers drain.
void forEachIndex(std::size_t count, int width,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  std::size_t threads = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(1, width)), count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> hold(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path,
                                    const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  for (const auto& spec : overrides) applyOverride(j, spec);
  std::error_code ec;
  fs::path absolute = fs::absolute(fs::path(path), ec);
  std::string dir = ec ? std::string() : absolute.parent_path().string();
  return configFromJson(j, dir);
}

void PipelineConfig::validate() const {
  if (collection.empty()) throw ConfigError("config needs a 'collection' path");
  if (questions.empty()) throw ConfigError("config needs a 'questions' path");
  if (retrieval_source == RetrievalSource::kIngest && run_files.empty()) {
    throw ConfigError("retrieval_source 'ingest' needs run_files");
  }
  if (retrieval_source == RetrievalSource::kBm25 && !run_files.empty()) {
    throw ConfigError("run_files are only used with retrieval_source 'ingest'");
  }
  if (fusion_strategy != FusionStrategy::kNone) {
    if (retrieval_source != RetrievalSource::kIngest || run_files.size() < 2) {
      throw ConfigError("fusion needs retrieval_source 'ingest' with at least"
                        " two run_files");
    }
  } else if (run_files.size() > 1) {
    throw ConfigError("multiple run_files need a fusion_strategy");
  }
  if (tau && std::isnan(*tau)) throw ConfigError("tau must not be NaN");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (extraction) {
    if (clients.empty()) throw ConfigError("extraction needs at least one client");
    if (gold_spans.empty()) {
      throw ConfigError("extraction needs a 'gold_spans' path");
    }
  }
  std::set<std::string> tags;
  for (const auto& client : clients) {
    if (!tags.insert(client.tag).second) {
      throw ConfigError("duplicate client tag '" + client.tag + "'");
    }
  }
  if (bm25.k1 < 0.0 || bm25.b < 0.0 || bm25.b > 1.0) {
    throw ConfigError("bm25 parameters out of range: k1 >= 0 and 0 <= b <= 1");
  }
  fusion_config.validate();
  if (output_dir.empty()) throw ConfigError("config needs an 'output_dir'");
}

nlohmann::json PipelineConfig::toCanonicalJson() const {
  nlohmann::json clients_json = nlohmann::json::array();
  for (const auto& client : clients) clients_json.push_back(clientToJson(client));
  nlohmann::json j{{"collection", collection},
                   {"questions", questions},
                   {"judgments", judgments},
                   {"gold_spans", gold_spans},
                   {"run_files", run_files},
                   {"retrieval_source", toString(retrieval_source)},
                   {"fusion_strategy", toString(fusion_strategy)},
                   {"threshold_placement", toString(threshold_placement)},
                   {"tau", tau ? nlohmann::json(*tau) : nlohmann::json()},
                   {"extraction", extraction},
                   {"extraction_passages", toString(extraction_passages)},
                   {"drop_contained", drop_contained},
                   {"max_in_flight", max_in_flight},
                   {"seed", seed},
                   {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}}},
                   {"fusion", fusion_config.toJson()},
                   {"clients", clients_json}};
  return j;
}

std::string PipelineConfig::fingerprint() const {
  return digest::sha256Hex(toCanonicalJson().dump()).substr(0, 12);
}

std::map<std::string, std::string> PipelineConfig::inputPathsAsWritten() const {
  std::map<std::string, std::string> paths;
  auto put = [&](const std::string& as_written) {
    if (!as_written.empty()) paths[as_written] = resolved(*this, as_written);
  };
  put(collection);
  put(questions);
  put(judgments);
  put(gold_spans);
  for (const auto& run : run_files) put(run);
  for (const auto& client : clients) put(client.fixtures);
  return paths;
}

std::unique_ptr<extraction::ChatClient> makeClient(const ClientConfig& config,
                                                   AuditLog* log) {
  if (config.kind == "mock") {
    return std::make_unique<extraction::MockChatClient>(config.tag,
                                                        config.fixtures);
  }
  if (config.kind == "http") {
    return std::make_unique<extraction::HttpChatClient>(config.http, log);
  }
  throw ConfigError("unknown client kind '" + config.kind + "'");
}

RetrievalArtifacts computeRetrieval(const PipelineConfig& config, AuditLog* log) {
  if (config.judgments.empty()) {
    throw ConfigError("retrieval needs a 'judgments' path");
  }
  auto collection = corpus::loadCollection(resolved(config, config.collection));
  auto questions = corpus::loadQuestions(resolved(config, config.questions));
  auto judgments =
      corpus::loadJudgments(resolved(config, config.judgments), collection);

  metrics::RelevantSets relevant;
  for (const auto& [qid, set] : judgments) {
    if (set.relevance_judged) relevant.emplace(qid, set.relevant_passages);
  }

  int cutoff = config.fusion_config.cutoff;

  // system tag -> per-question rankings, one entry per source model
  std::vector<std::pair<std::string, std::map<std::string, retrieval::Ranking>>>
      models;
  if (config.retrieval_source == RetrievalSource::kBm25) {
    auto index = retrieval::InvertedIndex::build(collection);
    std::map<std::string, retrieval::Ranking> rankings;
    for (const auto& question : questions.questions()) {
      rankings.emplace(question.id, retrieval::bm25Retrieve(index, question,
                                                            config.bm25, cutoff));
    }
    models.emplace_back("bm25", std::move(rankings));
  } else {
    std::set<std::string> tags;
    for (const auto& run : config.run_files) {
      auto rankings = retrieval::ingestRun(resolved(config, run), collection,
                                           cutoff, log);
      if (rankings.empty()) {
        audit(log, "run file '" + run + "' contributes no rankings; skipped");
        continue;
      }
      std::string tag = rankings.begin()->second.system;
      if (!tags.insert(tag).second) {
        throw DataError("two run files share the system tag '" + tag + "'");
      }
      models.emplace_back(tag, std::move(rankings));
    }
    if (models.empty()) throw DataError("no run file produced any ranking");
  }

  if (config.tau && config.threshold_placement == ThresholdPlacement::kPreFusion) {
    for (auto& [tag, rankings] : models) {
      for (auto& [qid, ranking] : rankings) {
        ranking = retrieval::applyNoAnswerThreshold(ranking, *config.tau);
      }
    }
  }

  RetrievalArtifacts artifacts;
  if (config.fusion_strategy == FusionStrategy::kNone) {
    artifacts.rankings = std::move(models.front().second);
  } else {
    std::set<std::string> qids;
    for (const auto& [tag, rankings] : models) {
      for (const auto& [qid, ranking] : rankings) qids.insert(qid);
    }
    for (const auto& qid : qids) {
      std::vector<retrieval::Ranking> inputs;
      inputs.reserve(models.size());
      for (const auto& [tag, rankings] : models) {
        auto it = rankings.find(qid);
        if (it != rankings.end()) {
          inputs.push_back(it->second);
        } else {
          // Absence stays visible to fusion as an empty ranking.
          inputs.push_back(retrieval::Ranking{qid, tag, {}, cutoff});
        }
      }
      fusion::FusedRanking fused;
      if (config.fusion_strategy == FusionStrategy::kWeighted) {
        for (auto& input : inputs) input = fusion::minMaxNormalize(input);
        fused = fusion::confidenceWeightedFuse(inputs, config.fusion_config);
      } else {
        fused = fusion::fuseRRF(inputs, config.fusion_config);
      }
      artifacts.rankings.emplace(qid, fusion::toRanking(fused, cutoff));
    }
  }

  if (config.tau && config.threshold_placement == ThresholdPlacement::kPostFusion) {
    for (auto& [qid, ranking] : artifacts.rankings) {
      ranking = retrieval::applyNoAnswerThreshold(ranking, *config.tau);
    }
  }

  auto ids = retrieval::toRankedIds(artifacts.rankings);
  artifacts.map_report = metrics::map10(ids, relevant, log);
  artifacts.mrr_report = metrics::mrr10(ids, relevant, nullptr);
  artifacts.map_report.config_fingerprint = config.fingerprint();
  artifacts.mrr_report.config_fingerprint = config.fingerprint();
  return artifacts;
}

ExtractionArtifacts computeExtraction(
    const PipelineConfig& config,
    const std::map<std::string, retrieval::Ranking>* rankings, AuditLog* log) {
  if (config.gold_spans.empty()) {
    throw ConfigError("extraction needs a 'gold_spans' path");
  }
  if (config.clients.empty()) {
    throw ConfigError("extraction needs at least one client");
  }
  auto collection = corpus::loadCollection(resolved(config, config.collection));
  auto questions = corpus::loadQuestions(resolved(config, config.questions));
  corpus::Judgments judgments;
  if (!config.judgments.empty()) {
    judgments = corpus::loadJudgments(resolved(config, config.judgments), collection);
  }
  corpus::loadGoldSpans(resolved(config, config.gold_spans), collection, judgments);

  // (question, passage) reading pairs, deterministic order.
  std::vector<std::pair<std::string, std::string>> pairs;
  if (config.extraction_passages == ExtractionPassages::kGold) {
    for (const auto& [qid, set] : judgments) {
      if (set.gold_spans.empty()) continue;
      std::set<std::string> seen;
      for (const auto& span : set.gold_spans) {
        if (seen.insert(span.passage_id).second) pairs.emplace_back(qid, span.passage_id);
      }
    }
  } else {
    if (rankings == nullptr) {
      throw ConfigError("extraction over retrieved passages needs the retrieval"
                        " stage output");
    }
    for (const auto& [qid, ranking] : *rankings) {
      for (const auto& entry : ranking.entries) {
        pairs.emplace_back(qid, entry.passage_id);
      }
    }
  }
  for (const auto& [qid, pid] : pairs) {
    if (!questions.contains(qid)) {
      throw DataError("reading pair references unknown question '" + qid + "'");
    }
  }

  std::vector<std::unique_ptr<extraction::ChatClient>> clients;
  clients.reserve(config.clients.size());
  for (const auto& client_config : config.clients) {
    ClientConfig resolved_client = client_config;
    resolved_client.fixtures = resolved(config, client_config.fixtures);
    clients.push_back(makeClient(resolved_client, log));
  }

  auto tmpl = extraction::PromptTemplate::defaultTemplate();
  std::string ensemble_tag =
      clients.size() == 1 ? clients.front()->tag() : std::string("ensemble");

  std::vector<extraction::ExtractionResult> per_pair(pairs.size());
  forEachIndex(pairs.size(), config.max_in_flight, [&](std::size_t i) {
    const auto& [qid, pid] = pairs[i];
    const auto& passage = collection.at(pid);
    const auto* question = questions.find(qid);
    std::vector<extraction::ExtractionResult> results;
    results.reserve(clients.size());
    for (const auto& client : clients) {
      results.push_back(
          extraction::extract(*client, tmpl, passage, *question, log));
    }
    per_pair[i] =
        extraction::ensembleSpans(results, config.drop_contained, ensemble_tag);
  });

  // Per-question concatenation in pair order, ranks 1..n, capped at 10.
  ExtractionArtifacts artifacts;
  std::map<std::string, std::vector<extraction::AnswerSpan>> by_question;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& bucket = by_question[pairs[i].first];
    for (const auto& span : per_pair[i].spans) {
      if (bucket.size() == 10) break;
      bucket.push_back(span);
      bucket.back().rank = static_cast<int>(bucket.size());
    }
  }
  for (auto& [qid, spans] : by_question) {
    for (auto& span : spans) artifacts.spans.push_back(span);
  }

  metrics::SpanLists predictions;
  metrics::SpanLists gold;
  for (const auto& [qid, set] : judgments) {
    if (set.gold_spans.empty()) continue;
    auto& texts = gold[qid];
    for (const auto& span : set.gold_spans) {
      if (!span.answer.empty()) texts.push_back(span.answer);
    }
  }
  for (const auto& [qid, spans] : by_question) {
    auto& texts = predictions[qid];
    for (const auto& span : spans) texts.push_back(span.text);
  }
  artifacts.pap_report = metrics::pap10(predictions, gold, log);
  artifacts.pap_report.config_fingerprint = config.fingerprint();
  return artifacts;
}

RetrievalArtifacts runRetrieval(const PipelineConfig& config, AuditLog* log,
                                const std::string& command) {
  AuditLog local;
  if (!log) log = &local;
  auto artifacts = computeRetrieval(config, log);
  auto dir = ensureOutputDir(config);
  std::vector<std::string> output_names;
  writeRetrievalFiles(artifacts, dir, output_names);
  writeCommonArtifacts(config, command, std::move(output_names), *log, dir);
  return artifacts;
}

ExtractionArtifacts runExtraction(const PipelineConfig& config, AuditLog* log,
                                  const std::string& command) {
  AuditLog local;
  if (!log) log = &local;
  std::map<std::string, retrieval::Ranking> rankings;
  const std::map<std::string, retrieval::Ranking>* rankings_ptr = nullptr;
  if (config.extraction_passages == ExtractionPassages::kRetrieved) {
    rankings = computeRetrieval(config, log).rankings;
    rankings_ptr = &rankings;
  }
  auto artifacts = computeExtraction(config, rankings_ptr, log);
  auto dir = ensureOutputDir(config);
  std::vector<std::string> output_names;
  writeExtractionFiles(artifacts, dir, output_names);
  writeCommonArtifacts(config, command, std::move(output_names), *log, dir);
  return artifacts;
}

PipelineArtifacts runPipeline(const PipelineConfig& config, AuditLog* log) {
  AuditLog local;
  if (!log) log = &local;
  PipelineArtifacts artifacts;
  artifacts.retrieval = computeRetrieval(config, log);
  auto dir = ensureOutputDir(config);
  std::vector<std::string> output_names;
  writeRetrievalFiles(artifacts.retrieval, dir, output_names);
  if (config.extraction) {
    artifacts.extraction =
        computeExtraction(config, &artifacts.retrieval.rankings, log);
    writeExtractionFiles(*artifacts.extraction, dir, output_names);
  }
  writeCommonArtifacts(config, "pipeline", std::move(output_names), *log, dir);
  return artifacts;
}

std::vector<AblationRow> runAblation(const PipelineConfig& base,
                                     const std::string& grid_path,
                                     AuditLog* log) {
  AuditLog local;
  if (!log) log = &local;
  std::string grid_resolved = resolved(base, grid_path);
  std::ifstream in(grid_resolved, std::ios::binary);
  if (!in) throw ConfigError("cannot open ablation grid: " + grid_resolved);
  nlohmann::json grid;
  try {
    grid = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(grid_resolved + ": invalid JSON: " + e.what());
  }
  if (!grid.is_array() || grid.empty()) {
    throw ConfigError("ablation grid must be a non-empty JSON array");
  }

  std::vector<AblationRow> rows;
  std::set<std::string> labels;
  for (const auto& entry : grid) {
    if (!entry.is_object() || !entry.contains("label") ||
        !entry["label"].is_string() || !entry.contains("overrides") ||
        !entry["overrides"].is_object()) {
      throw ConfigError("each grid entry needs {\"label\",\"overrides\"}");
    }
    std::string label = entry["label"].get<std::string>();
    if (label.empty() || !labels.insert(label).second) {
      throw ConfigError("ablation labels must be unique and non-empty");
    }
    nlohmann::json patched = base.toCanonicalJson();
    patched["output_dir"] = base.output_dir;
    patched.merge_patch(entry["overrides"]);
    auto config = configFromJson(patched, base.config_dir);
    auto artifacts = computeRetrieval(config, log);
    rows.push_back(AblationRow{label, artifacts.map_report.aggregate,
                               artifacts.mrr_report.aggregate});
  }
  std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    if (a.map10 != b.map10) return a.map10 < b.map10;
    return a.label < b.label;
  });

  auto dir = ensureOutputDir(base);
  writeTextFile(dir / "ablation.tsv", formatAblation(rows));
  writeCommonArtifacts(base, "ablate", {"ablation.tsv"}, *log, dir);
  return rows;
}

std::string formatAblation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "label\tmap@10\tmrr@10\n";
  for (const auto& row : rows) {
    out << row.label << '\t' << formatScore(row.map10) << '\t'
        << formatScore(row.mrr10) << '\n';
  }
  return out.str();
}

std::string manifestTimestamp() {
  std::time_t stamp = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    long long parsed = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0' && end != epoch) {
      stamp = static_cast<std::time_t>(parsed);
    }
  }
  std::tm utc{};
  gmtime_r(&stamp, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace quranqa::pipeline
