#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "quranqa/retrieval.hpp"

namespace quranqa::fusion {

struct FusionConfig {
  // Empty map means every system gets weight 1.0; otherwise every
  // participating system tag must have an entry.
  std::map<std::string, double> model_weights;
  double rrf_k = 60.0;
  double decay_lambda = 0.1;
  double boost_threshold = 0.8;
  double boost_factor = 1.25;
  double high_conf_threshold = 0.95;
  double very_high_conf_threshold = 0.99;
  double high_conf_gain = 1.2;
  double very_high_conf_gain = 1.5;
  int cutoff = 10;

  void validate() const;
  double weightFor(const std::string& system) const;

  static FusionConfig fromJson(const nlohmann::json& j);
  nlohmann::json toJson() const;

  // First 12 hex chars of the SHA-256 of the canonical (sorted-key) JSON.
  std::string fingerprint() const;
};

struct ModelContribution {
  int rank = 0;  // 1-based position in that model's ranking
  double normalized_score = 0.0;
};

struct FusedEntry {
  std::string passage_id;
  double score = 0.0;
  std::map<std::string, ModelContribution> provenance;  // system -> contribution
};

struct FusedRanking {
  std::string question_id;
  std::vector<FusedEntry> entries;  // score desc, ties by passage_id asc
  std::string config_fingerprint;
};

// Min-max rescales scores to [0, 1]. Degenerate inputs (single entry or all
// scores equal) map to all 1.0; an empty ranking passes through unchanged.
retrieval::Ranking minMaxNormalize(const retrieval::Ranking& ranking);

// Weighted mean of normalized scores over the union of passages; a model that
// did not rank a passage contributes score 0 at base weight. A model's weight
// is multiplied by high_conf_gain when its score exceeds high_conf_threshold
// and additionally by very_high_conf_gain above very_high_conf_threshold
// (strict >). Requires at least two rankings for the same question, each
// min-max normalized, with distinct system tags.
FusedRanking confidenceWeightedFuse(const std::vector<retrieval::Ranking>& rankings,
                                    const FusionConfig& config);

// Raw enhanced-RRF mass per passage:
//   sum_m weight_m * 1/(rrf_k + rank_m) * exp(-decay_lambda*(rank_m - 1)) * B_m
// where B_m = boost_factor when the model's normalized score exceeds
// boost_threshold, else 1. Models that did not rank a passage contribute
// nothing here.
std::map<std::string, double> rrfComponent(
    const std::vector<retrieval::Ranking>& rankings, const FusionConfig& config);

// Weighted mean of normalized scores (absent -> 0) with plain weights; the
// denominator is the total weight of all participating systems.
std::map<std::string, double> weightedNormalizedScores(
    const std::vector<retrieval::Ranking>& rankings, const FusionConfig& config);

// Min-max rescales the RRF mass over the passage union, then takes the
// geometric mean with the weighted normalized score: sqrt(rrf' * wns).
FusedRanking geometricCombine(const std::string& question_id,
                              const std::map<std::string, double>& rrf_scores,
                              const std::map<std::string, double>& weighted_scores,
                              const FusionConfig& config);

// Full enhanced-RRF strategy: normalize each ranking, compute the RRF
// component and the weighted normalized scores, geometrically combine.
// Accepts a single ranking (it degrades to rescaled plain RRF order).
FusedRanking fuseRRF(const std::vector<retrieval::Ranking>& rankings,
                     const FusionConfig& config);

// Projection back to a plain ranking; the system tag encodes the fusion
// config fingerprint so downstream run files are self-describing.
retrieval::Ranking toRanking(const FusedRanking& fused, int cutoff = 10);

}  // namespace quranqa::fusion
