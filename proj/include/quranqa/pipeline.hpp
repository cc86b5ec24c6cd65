#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quranqa/audit.hpp"
#include "quranqa/client.hpp"
#include "quranqa/corpus.hpp"
#include "quranqa/extraction.hpp"
#include "quranqa/fusion.hpp"
#include "quranqa/metrics.hpp"
#include "quranqa/retrieval.hpp"

namespace quranqa::pipeline {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum class RetrievalSource { kBm25, kIngest };
enum class FusionStrategy { kNone, kWeighted, kRrf };
enum class ThresholdPlacement { kPreFusion, kPostFusion };
enum class ExtractionPassages { kGold, kRetrieved };

struct ClientConfig {
  std::string kind;  // "mock" or "http"
  std::string tag;
  std::string fixtures;  // mock: fixtures file path (resolved)
  extraction::HttpClientSettings http;
};

struct PipelineConfig {
  // Paths, resolved against the config file's directory.
  std::string collection;
  std::string questions;
  std::string judgments;
  std::string gold_spans;
  std::vector<std::string> run_files;

  RetrievalSource retrieval_source = RetrievalSource::kBm25;
  FusionStrategy fusion_strategy = FusionStrategy::kNone;
  ThresholdPlacement threshold_placement = ThresholdPlacement::kPostFusion;
  std::optional<double> tau;
  bool extraction = false;
  ExtractionPassages extraction_passages = ExtractionPassages::kGold;
  bool drop_contained = false;
  int max_in_flight = 1;
  std::uint64_t seed = 0;

  retrieval::Bm25Params bm25;
  fusion::FusionConfig fusion_config;
  std::vector<ClientConfig> clients;

  std::string output_dir = "out";
  std::string config_dir;  // directory of the config file, not serialized

  // Reads the JSON config, applies dotted-path --set overrides (applied
  // before path resolution), resolves relative paths against the config
  // file's directory, and validates.
  static PipelineConfig load(const std::string& path,
                             const std::vector<std::string>& overrides = {});

  // Canonical resolved form; excludes output_dir so the fingerprint is
  // invariant under relocation of outputs.
  nlohmann::json toCanonicalJson() const;

  // First 12 hex chars of the SHA-256 of the canonical JSON.
  std::string fingerprint() const;

  void validate() const;  // structural rules; file existence checked on use

  // Paths as written in the config, for manifest input keys.
  std::map<std::string, std::string> inputPathsAsWritten() const;
};

struct RetrievalArtifacts {
  std::map<std::string, retrieval::Ranking> rankings;  // final, post-threshold
  metrics::MetricReport map_report;
  metrics::MetricReport mrr_report;
};

struct ExtractionArtifacts {
  std::vector<extraction::AnswerSpan> spans;  // final per-question ensembles
  metrics::MetricReport pap_report;
};

// Retrieval stage only, no files written: source rankings (BM25 over the
// collection or ingested runs), optional pre-fusion thresholding, fusion per
// the configured strategy, optional post-fusion thresholding, evaluation
// against the relevance judgments.
RetrievalArtifacts computeRetrieval(const PipelineConfig& config,
                                    AuditLog* log = nullptr);

// Extraction stage only, no files written: prompts every configured client
// for each (question, passage) reading pair, ensembles the spans per pair,
// concatenates per question, and scores partial-credit AP against the gold
// spans. Reading pairs come from the gold-span file by default or from
// `rankings` (the retrieval stage output) when so configured.
ExtractionArtifacts computeExtraction(
    const PipelineConfig& config,
    const std::map<std::string, retrieval::Ranking>* rankings = nullptr,
    AuditLog* log = nullptr);

struct PipelineArtifacts {
  RetrievalArtifacts retrieval;
  std::optional<ExtractionArtifacts> extraction;
};

// File-writing wrappers. Every run writes the resolved config, a manifest
// (config fingerprint, artifact version, input/output digests), and the
// stage outputs into output_dir:
//   retrieval.run, map10.tsv, mrr10.tsv       (retrieval)
//   extraction.jsonl, pap10.tsv               (extraction)
//   resolved_config.json, manifest.json, audit.log
RetrievalArtifacts runRetrieval(const PipelineConfig& config,
                                AuditLog* log = nullptr,
                                const std::string& command = "retrieve");
ExtractionArtifacts runExtraction(const PipelineConfig& config,
                                  AuditLog* log = nullptr,
                                  const std::string& command = "extract");
PipelineArtifacts runPipeline(const PipelineConfig& config,
                              AuditLog* log = nullptr);

struct AblationRow {
  std::string label;
  double map10 = 0.0;
  double mrr10 = 0.0;
};

// Runs the retrieval stage once per grid entry (a label plus a JSON merge
// patch over the base config) and tabulates MAP@10/MRR@10, sorted by MAP@10
// ascending, ties by label. Writes ablation.tsv plus the usual manifest.
std::vector<AblationRow> runAblation(const PipelineConfig& base,
                                     const std::string& grid_path,
                                     AuditLog* log = nullptr);

// Header row then `label<TAB>map@10<TAB>mrr@10` rows at 4 decimal places.
std::string formatAblation(const std::vector<AblationRow>& rows);

// ISO-8601 UTC; honors SOURCE_DATE_EPOCH for reproducible manifests.
std::string manifestTimestamp();

std::unique_ptr<extraction::ChatClient> makeClient(const ClientConfig& config,
                                                   AuditLog* log = nullptr);

}  // namespace quranqa::pipeline
