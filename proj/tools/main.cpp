#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quranqa/corpus.hpp"
#include "quranqa/errors.hpp"
#include "quranqa/extraction.hpp"
#include "quranqa/metrics.hpp"
#include "quranqa/pipeline.hpp"
#include "quranqa/retrieval.hpp"

namespace fs = std::filesystem;
using namespace quranqa;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  double tau = 0.0;
  bool tau_set = false;
  bool verbose = false;
};

void addCommon(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "pipeline config JSON")
      ->required();
  cmd->add_option("--set", args.overrides,
                  "config override as key.path=value, repeatable");
  cmd->add_option("--output-dir", args.output_dir, "override output_dir");
  cmd->add_option("--tau", args.tau, "override the no-answer threshold")
      ->each([&args](const std::string&) { args.tau_set = true; });
  cmd->add_flag("-v,--verbose", args.verbose, "echo the audit log to stderr");
}

pipeline::PipelineConfig loadConfig(const CommonArgs& args) {
  auto overrides = args.overrides;
  if (!args.output_dir.empty()) {
    overrides.push_back("output_dir=" + args.output_dir);
  }
  if (args.tau_set) {
    std::ostringstream v;
    v.precision(17);
    v << args.tau;
    overrides.push_back("tau=" + v.str());
  }
  return pipeline::PipelineConfig::load(args.config_path, overrides);
}

void flushAudit(const CommonArgs& args, const AuditLog& log) {
  if (!args.verbose) return;
  for (const auto& line : log.snapshot()) std::cerr << line << '\n';
}

std::string fourPlaces(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string resolveInputPath(const pipeline::PipelineConfig& config,
                             const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || config.config_dir.empty()) {
    return path;
  }
  return (fs::path(config.config_dir) / path).lexically_normal().string();
}

int runValidate(const CommonArgs& args) {
  auto config = loadConfig(args);
  auto collection =
      corpus::loadCollection(resolveInputPath(config, config.collection));
  auto questions = corpus::loadQuestions(resolveInputPath(config, config.questions));
  corpus::Judgments judgments;
  if (!config.judgments.empty()) {
    judgments =
        corpus::loadJudgments(resolveInputPath(config, config.judgments), collection);
  }
  if (!config.gold_spans.empty()) {
    corpus::loadGoldSpans(resolveInputPath(config, config.gold_spans), collection,
                          judgments);
  }
  auto report = corpus::validateCorpus(collection, judgments, questions);
  std::cout << report.toText();
  if (!report.wellFormed()) {
    throw DataError("corpus validation found " +
                    std::to_string(report.violations.size()) + " violation(s)");
  }
  return 0;
}

int runRetrieveCmd(const CommonArgs& args, const std::string& command) {
  auto config = loadConfig(args);
  if (command == "fuse" &&
      config.fusion_strategy == pipeline::FusionStrategy::kNone) {
    throw ConfigError("fuse needs fusion_strategy 'weighted' or 'rrf'");
  }
  AuditLog log;
  auto artifacts = pipeline::runRetrieval(config, &log, command);
  flushAudit(args, log);
  std::cout << "map@10 " << fourPlaces(artifacts.map_report.aggregate) << '\n'
            << "mrr@10 " << fourPlaces(artifacts.mrr_report.aggregate) << '\n';
  return 0;
}

int runThreshold(const CommonArgs& args, const std::string& sweep_spec) {
  auto config = loadConfig(args);
  if (sweep_spec.empty()) {
    if (!config.tau) {
      throw ConfigError("threshold needs --tau or a sweep grid via --sweep");
    }
    return runRetrieveCmd(args, "threshold");
  }

  std::vector<double> grid;
  std::stringstream parts(sweep_spec);
  std::string part;
  while (std::getline(parts, part, ',')) {
    if (part.empty()) continue;
    try {
      std::size_t pos = 0;
      grid.push_back(std::stod(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("--sweep entries must be numbers, got '" + part + "'");
    }
  }

  // Sweep over the unthresholded stage output.
  auto unthresholded = config;
  unthresholded.tau.reset();
  AuditLog log;
  auto artifacts = pipeline::computeRetrieval(unthresholded, &log);
  auto collection = corpus::loadCollection(resolveInputPath(config, config.collection));
  auto judgments =
      corpus::loadJudgments(resolveInputPath(config, config.judgments), collection);
  metrics::RelevantSets relevant;
  for (const auto& [qid, set] : judgments) {
    if (set.relevance_judged) relevant.emplace(qid, set.relevant_passages);
  }
  auto sweep = retrieval::sweepThreshold(artifacts.rankings, relevant, grid, &log);
  flushAudit(args, log);

  fs::path dir(resolveInputPath(config, config.output_dir));
  fs::create_directories(dir);
  std::ostringstream table;
  table << "tau\tmap@10\n";
  for (const auto& [tau, value] : sweep.curve) {
    table << fourPlaces(tau) << '\t' << fourPlaces(value) << '\n';
  }
  std::ofstream out(dir / "sweep.tsv", std::ios::binary);
  if (!out) throw ConfigError("cannot write sweep table");
  out << table.str();
  std::cout << table.str() << "best_tau " << fourPlaces(sweep.best_tau) << '\n';
  return 0;
}

int runExtractCmd(const CommonArgs& args) {
  auto config = loadConfig(args);
  AuditLog log;
  auto artifacts = pipeline::runExtraction(config, &log);
  flushAudit(args, log);
  std::cout << "pap@10 " << fourPlaces(artifacts.pap_report.aggregate) << '\n';
  return 0;
}

int runEvaluate(const CommonArgs& args, const std::string& run_path,
                const std::string& extraction_path) {
  if (run_path.empty() && extraction_path.empty()) {
    throw ConfigError("evaluate needs --run and/or --extraction");
  }
  auto config = loadConfig(args);
  auto collection = corpus::loadCollection(resolveInputPath(config, config.collection));
  AuditLog log;
  fs::path dir(resolveInputPath(config, config.output_dir));
  fs::create_directories(dir);

  if (!run_path.empty()) {
    if (config.judgments.empty()) {
      throw ConfigError("evaluating a run needs a 'judgments' path");
    }
    auto judgments =
        corpus::loadJudgments(resolveInputPath(config, config.judgments), collection);
    metrics::RelevantSets relevant;
    for (const auto& [qid, set] : judgments) {
      if (set.relevance_judged) relevant.emplace(qid, set.relevant_passages);
    }
    auto rankings = retrieval::ingestRun(run_path, collection,
                                         config.fusion_config.cutoff, &log);
    auto ids = retrieval::toRankedIds(rankings);
    auto map_report = metrics::map10(ids, relevant, &log);
    auto mrr_report = metrics::mrr10(ids, relevant, nullptr);
    map_report.config_fingerprint = config.fingerprint();
    mrr_report.config_fingerprint = config.fingerprint();
    metrics::writeReport(map_report, (dir / "map10.tsv").string());
    metrics::writeReport(mrr_report, (dir / "mrr10.tsv").string());
    std::cout << "map@10 " << fourPlaces(map_report.aggregate) << '\n'
              << "mrr@10 " << fourPlaces(mrr_report.aggregate) << '\n';
  }

  if (!extraction_path.empty()) {
    if (config.gold_spans.empty()) {
      throw ConfigError("evaluating extractions needs a 'gold_spans' path");
    }
    corpus::Judgments judgments;
    corpus::loadGoldSpans(resolveInputPath(config, config.gold_spans), collection,
                          judgments);
    auto spans = extraction::loadSpans(extraction_path);
    std::map<std::string, std::string> source_for;
    metrics::SpanLists predictions;
    std::map<std::string, std::map<int, std::string>> by_rank;
    for (const auto& span : spans) {
      auto [it, inserted] = source_for.emplace(span.question_id, span.source);
      if (!inserted && it->second != span.source) {
        throw DataError("evaluate expects one source per question, question '" +
                        span.question_id + "' has '" + it->second + "' and '" +
                        span.source + "'");
      }
      by_rank[span.question_id][span.rank] = span.text;
    }
    for (const auto& [qid, ranked] : by_rank) {
      auto& texts = predictions[qid];
      for (const auto& [rank, text] : ranked) texts.push_back(text);
    }
    metrics::SpanLists gold;
    for (const auto& [qid, set] : judgments) {
      if (set.gold_spans.empty()) continue;
      auto& texts = gold[qid];
      for (const auto& span : set.gold_spans) {
        if (!span.answer.empty()) texts.push_back(span.answer);
      }
    }
    auto pap_report = metrics::pap10(predictions, gold, &log);
    pap_report.config_fingerprint = config.fingerprint();
    metrics::writeReport(pap_report, (dir / "pap10.tsv").string());
    std::cout << "pap@10 " << fourPlaces(pap_report.aggregate) << '\n';
  }
  flushAudit(args, log);
  return 0;
}

int runPipelineCmd(const CommonArgs& args) {
  auto config = loadConfig(args);
  AuditLog log;
  auto artifacts = pipeline::runPipeline(config, &log);
  flushAudit(args, log);
  std::cout << "map@10 " << fourPlaces(artifacts.retrieval.map_report.aggregate)
            << '\n'
            << "mrr@10 " << fourPlaces(artifacts.retrieval.mrr_report.aggregate)
            << '\n';
  if (artifacts.extraction) {
    std::cout << "pap@10 " << fourPlaces(artifacts.extraction->pap_report.aggregate)
              << '\n';
  }
  return 0;
}

int runAblateCmd(const CommonArgs& args, const std::string& grid_path) {
  auto config = loadConfig(args);
  AuditLog log;
  auto rows = pipeline::runAblation(config, grid_path, &log);
  flushAudit(args, log);
  std::cout << pipeline::formatAblation(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quranic question answering pipeline"};
  app.require_subcommand(1);

  CommonArgs validate_args;
  addCommon(app.add_subcommand("validate", "check corpus referential integrity"),
            validate_args);

  CommonArgs retrieve_args;
  addCommon(app.add_subcommand("retrieve", "run the retrieval stage"),
            retrieve_args);

  CommonArgs fuse_args;
  addCommon(app.add_subcommand("fuse", "run retrieval with the configured fusion"),
            fuse_args);

  CommonArgs threshold_args;
  std::string sweep_spec;
  auto* threshold_cmd = app.add_subcommand(
      "threshold", "apply or sweep the no-answer threshold");
  addCommon(threshold_cmd, threshold_args);
  threshold_cmd->add_option("--sweep", sweep_spec,
                            "comma-separated tau grid to sweep");

  CommonArgs extract_args;
  addCommon(app.add_subcommand("extract", "run span extraction"), extract_args);

  CommonArgs evaluate_args;
  std::string eval_run, eval_extraction;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "score an existing run or extraction file");
  addCommon(evaluate_cmd, evaluate_args);
  evaluate_cmd->add_option("--run", eval_run, "TREC run file to score");
  evaluate_cmd->add_option("--extraction", eval_extraction,
                           "extraction JSONL file to score");

  CommonArgs pipeline_args;
  addCommon(app.add_subcommand("pipeline", "retrieval plus optional extraction"),
            pipeline_args);

  CommonArgs ablate_args;
  std::string grid_path;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "tabulate MAP/MRR across config variants");
  addCommon(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--grid", grid_path, "JSON grid of labeled overrides")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("validate")) return runValidate(validate_args);
    if (app.got_subcommand("retrieve")) return runRetrieveCmd(retrieve_args, "retrieve");
    if (app.got_subcommand("fuse")) return runRetrieveCmd(fuse_args, "fuse");
    if (app.got_subcommand("threshold")) return runThreshold(threshold_args, sweep_spec);
    if (app.got_subcommand("extract")) return runExtractCmd(extract_args);
    if (app.got_subcommand("evaluate")) {
      return runEvaluate(evaluate_args, eval_run, eval_extraction);
    }
    if (app.got_subcommand("pipeline")) return runPipelineCmd(pipeline_args);
    if (app.got_subcommand("ablate")) return runAblateCmd(ablate_args, grid_path);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ClientError& e) {
    std::cerr << "client error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
