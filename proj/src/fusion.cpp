#include "quranqa/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "quranqa/digest.hpp"
#include "quranqa/errors.hpp"

namespace quranqa::fusion {
namespace {

constexpr double kNormSlack = 1e-9;  // tolerance on the [0, 1] range check

void requireUnitRange(const retrieval::Ranking& ranking) {
  for (const auto& entry : ranking.entries) {
    if (!(entry.score >= -kNormSlack && entry.score <= 1.0 + kNormSlack)) {
      throw DataError("ranking '" + ranking.system + "' for question '" +
                      ranking.question_id +
                      "' must be min-max normalized before fusion");
    }
  }
}

void requireFinite(const retrieval::Ranking& ranking) {
  for (const auto& entry : ranking.entries) {
    if (std::isnan(entry.score)) {
      throw DataError("ranking '" + ranking.system + "' for question '" +
                      ranking.question_id + "' has a NaN score");
    }
  }
}

// Shared input validation: count, one qid, distinct tags, resolvable weights
// with positive total mass.
void checkInputs(const std::vector<retrieval::Ranking>& rankings,
                 const FusionConfig& config, std::size_t min_count,
                 bool require_normalized) {
  config.validate();
  if (rankings.size() < min_count) {
    throw ConfigError("fusion needs at least " + std::to_string(min_count) +
                      " rankings, got " + std::to_string(rankings.size()));
  }
  std::set<std::string> tags;
  double total_weight = 0.0;
  for (const auto& ranking : rankings) {
    if (ranking.question_id != rankings.front().question_id) {
      throw DataError("cannot fuse rankings for different questions: '" +
                      rankings.front().question_id + "' vs '" +
                      ranking.question_id + "'");
    }
    if (!tags.insert(ranking.system).second) {
      throw DataError("duplicate system tag '" + ranking.system +
                      "' among rankings to fuse");
    }
    total_weight += config.weightFor(ranking.system);
    if (require_normalized) requireUnitRange(ranking);
    requireFinite(ranking);
  }
  if (!(total_weight > 0.0)) {
    throw ConfigError("participating systems have zero total weight");
  }
}

std::vector<FusedEntry> sortAndCut(std::map<std::string, FusedEntry> by_pid,
                                   int cutoff) {
  std::vector<FusedEntry> entries;
  entries.reserve(by_pid.size());
  for (auto& [pid, entry] : by_pid) entries.push_back(std::move(entry));
  std::sort(entries.begin(), entries.end(),
            [](const FusedEntry& a, const FusedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.passage_id < b.passage_id;
            });
  if (entries.size() > static_cast<std::size_t>(cutoff)) {
    entries.resize(static_cast<std::size_t>(cutoff));
  }
  return entries;
}

}  // namespace

void FusionConfig::validate() const {
  if (!(rrf_k > 0.0)) throw ConfigError("rrf_k must be > 0");
  if (!(decay_lambda >= 0.0)) throw ConfigError("decay_lambda must be >= 0");
  if (!(boost_threshold >= 0.0 && boost_threshold <= 1.0)) {
    throw ConfigError("boost_threshold must be in [0, 1]");
  }
  if (!(high_conf_threshold >= 0.0 && high_conf_threshold <= 1.0) ||
      !(very_high_conf_threshold >= 0.0 && very_high_conf_threshold <= 1.0)) {
    throw ConfigError("confidence thresholds must be in [0, 1]");
  }
  if (high_conf_threshold > very_high_conf_threshold) {
    throw ConfigError(
        "high_conf_threshold must not exceed very_high_conf_threshold");
  }
  if (!(boost_factor >= 1.0) || !(high_conf_gain >= 1.0) ||
      !(very_high_conf_gain >= 1.0)) {
    throw ConfigError("boost_factor and confidence gains must be >= 1");
  }
  if (cutoff < 1) throw ConfigError("fusion cutoff must be >= 1");
  if (!model_weights.empty()) {
    bool any_positive = false;
    for (const auto& [system, weight] : model_weights) {
      if (std::isnan(weight) || weight < 0.0) {
        throw ConfigError("weight for system '" + system + "' must be >= 0");
      }
      if (weight > 0.0) any_positive = true;
    }
    if (!any_positive) {
      throw ConfigError("at least one model weight must be positive");
    }
  }
}

double FusionConfig::weightFor(const std::string& system) const {
  if (model_weights.empty()) return 1.0;
  auto it = model_weights.find(system);
  if (it == model_weights.end()) {
    throw ConfigError("no weight configured for system '" + system + "'");
  }
  return it->second;
}

FusionConfig FusionConfig::fromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("fusion config must be a JSON object");
  FusionConfig config;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "model_weights") {
        if (!value.is_object()) {
          throw ConfigError("model_weights must be an object of system -> weight");
        }
        for (const auto& [system, weight] : value.items()) {
          config.model_weights[system] = weight.get<double>();
        }
      } else if (key == "rrf_k") {
        config.rrf_k = value.get<double>();
      } else if (key == "decay_lambda") {
        config.decay_lambda = value.get<double>();
      } else if (key == "boost_threshold") {
        config.boost_threshold = value.get<double>();
      } else if (key == "boost_factor") {
        config.boost_factor = value.get<double>();
      } else if (key == "high_conf_threshold") {
        config.high_conf_threshold = value.get<double>();
      } else if (key == "very_high_conf_threshold") {
        config.very_high_conf_threshold = value.get<double>();
      } else if (key == "high_conf_gain") {
        config.high_conf_gain = value.get<double>();
      } else if (key == "very_high_conf_gain") {
        config.very_high_conf_gain = value.get<double>();
      } else if (key == "cutoff") {
        config.cutoff = value.get<int>();
      } else {
        throw ConfigError("unknown fusion config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("fusion config key '" + key + "' has the wrong type");
    }
  }
  config.validate();
  return config;
}

nlohmann::json FusionConfig::toJson() const {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [system, weight] : model_weights) weights[system] = weight;
  return nlohmann::json{{"model_weights", weights},
                        {"rrf_k", rrf_k},
                        {"decay_lambda", decay_lambda},
                        {"boost_threshold", boost_threshold},
                        {"boost_factor", boost_factor},
                        {"high_conf_threshold", high_conf_threshold},
                        {"very_high_conf_threshold", very_high_conf_threshold},
                        {"high_conf_gain", high_conf_gain},
                        {"very_high_conf_gain", very_high_conf_gain},
                        {"cutoff", cutoff}};
}

std::string FusionConfig::fingerprint() const {
  return digest::sha256Hex(toJson().dump()).substr(0, 12);
}

retrieval::Ranking minMaxNormalize(const retrieval::Ranking& ranking) {
  requireFinite(ranking);
  retrieval::Ranking result = ranking;
  if (result.entries.empty()) return result;
  double lo = result.entries.front().score;
  double hi = lo;
  for (const auto& entry : result.entries) {
    lo = std::min(lo, entry.score);
    hi = std::max(hi, entry.score);
  }
  if (hi > lo) {
    for (auto& entry : result.entries) {
      entry.score = (entry.score - lo) / (hi - lo);
    }
  } else {
    // Degenerate spread carries no ordering information; keep full confidence.
    for (auto& entry : result.entries) entry.score = 1.0;
  }
  return result;
}

FusedRanking confidenceWeightedFuse(const std::vector<retrieval::Ranking>& rankings,
                                    const FusionConfig& config) {
  checkInputs(rankings, config, 2, /*require_normalized=*/true);

  std::map<std::string, FusedEntry> by_pid;
  for (const auto& ranking : rankings) {
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      const auto& entry = ranking.entries[i];
      auto& fused = by_pid[entry.passage_id];
      fused.passage_id = entry.passage_id;
      fused.provenance[ranking.system] =
          ModelContribution{static_cast<int>(i + 1), entry.score};
    }
  }
  for (auto& [pid, fused] : by_pid) {
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto& ranking : rankings) {
      double score = 0.0;
      auto it = fused.provenance.find(ranking.system);
      if (it != fused.provenance.end()) score = it->second.normalized_score;
      double weight = config.weightFor(ranking.system);
      if (score > config.high_conf_threshold) weight *= config.high_conf_gain;
      if (score > config.very_high_conf_threshold) {
        weight *= config.very_high_conf_gain;
      }
      numerator += weight * score;
      denominator += weight;
    }
    fused.score = denominator > 0.0 ? numerator / denominator : 0.0;
  }

  FusedRanking result;
  result.question_id = rankings.front().question_id;
  result.entries = sortAndCut(std::move(by_pid), config.cutoff);
  result.config_fingerprint = config.fingerprint();
  return result;
}

std::map<std::string, double> rrfComponent(
    const std::vector<retrieval::Ranking>& rankings, const FusionConfig& config) {
  checkInputs(rankings, config, 1, /*require_normalized=*/true);
  std::map<std::string, double> mass;
  for (const auto& ranking : rankings) {
    double weight = config.weightFor(ranking.system);
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      const auto& entry = ranking.entries[i];
      double rank = static_cast<double>(i + 1);
      double term = weight / (config.rrf_k + rank);
      term *= std::exp(-config.decay_lambda * (rank - 1.0));
      if (entry.score > config.boost_threshold) term *= config.boost_factor;
      mass[entry.passage_id] += term;
    }
  }
  return mass;
}

std::map<std::string, double> weightedNormalizedScores(
    const std::vector<retrieval::Ranking>& rankings, const FusionConfig& config) {
  checkInputs(rankings, config, 1, /*require_normalized=*/true);
  double total_weight = 0.0;
  for (const auto& ranking : rankings) {
    total_weight += config.weightFor(ranking.system);
  }
  std::map<std::string, double> scores;
  for (const auto& ranking : rankings) {
    double weight = config.weightFor(ranking.system);
    for (const auto& entry : ranking.entries) {
      scores[entry.passage_id] += weight * entry.score;
    }
  }
  for (auto& [pid, value] : scores) value /= total_weight;
  return scores;
}

FusedRanking geometricCombine(const std::string& question_id,
                              const std::map<std::string, double>& rrf_scores,
                              const std::map<std::string, double>& weighted_scores,
                              const FusionConfig& config) {
  config.validate();
  for (const auto& [pid, value] : rrf_scores) {
    if (std::isnan(value)) throw DataError("NaN RRF score for passage '" + pid + "'");
  }
  for (const auto& [pid, value] : weighted_scores) {
    if (std::isnan(value)) {
      throw DataError("NaN weighted score for passage '" + pid + "'");
    }
  }

  std::set<std::string> universe;
  for (const auto& [pid, value] : rrf_scores) universe.insert(pid);
  for (const auto& [pid, value] : weighted_scores) universe.insert(pid);

  FusedRanking result;
  result.question_id = question_id;
  result.config_fingerprint = config.fingerprint();
  if (universe.empty()) return result;

  auto rrf_at = [&](const std::string& pid) {
    auto it = rrf_scores.find(pid);
    return it == rrf_scores.end() ? 0.0 : it->second;
  };
  auto weighted_at = [&](const std::string& pid) {
    auto it = weighted_scores.find(pid);
    return it == weighted_scores.end() ? 0.0 : it->second;
  };

  double lo = rrf_at(*universe.begin());
  double hi = lo;
  for (const auto& pid : universe) {
    lo = std::min(lo, rrf_at(pid));
    hi = std::max(hi, rrf_at(pid));
  }

  std::map<std::string, FusedEntry> by_pid;
  for (const auto& pid : universe) {
    double rescaled = hi > lo ? (rrf_at(pid) - lo) / (hi - lo) : 1.0;
    FusedEntry entry;
    entry.passage_id = pid;
    entry.score = std::sqrt(rescaled * weighted_at(pid));
    by_pid.emplace(pid, std::move(entry));
  }
  result.entries = sortAndCut(std::move(by_pid), config.cutoff);
  return result;
}

FusedRanking fuseRRF(const std::vector<retrieval::Ranking>& rankings,
                     const FusionConfig& config) {
  checkInputs(rankings, config, 1, /*require_normalized=*/false);
  std::vector<retrieval::Ranking> normalized;
  normalized.reserve(rankings.size());
  for (const auto& ranking : rankings) normalized.push_back(minMaxNormalize(ranking));

  auto rrf = rrfComponent(normalized, config);
  auto weighted = weightedNormalizedScores(normalized, config);
  auto result = geometricCombine(rankings.front().question_id, rrf, weighted, config);

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    position.emplace(result.entries[i].passage_id, i);
  }
  for (const auto& ranking : normalized) {
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      auto it = position.find(ranking.entries[i].passage_id);
      if (it != position.end()) {
        result.entries[it->second].provenance[ranking.system] =
            ModelContribution{static_cast<int>(i + 1), ranking.entries[i].score};
      }
    }
  }
  return result;
}

retrieval::Ranking toRanking(const FusedRanking& fused, int cutoff) {
  std::vector<retrieval::RankedEntry> entries;
  entries.reserve(fused.entries.size());
  for (const auto& entry : fused.entries) {
    entries.push_back(retrieval::RankedEntry{entry.passage_id, entry.score});
  }
  return retrieval::finalizeRanking(fused.question_id,
                                    "fused-" + fused.config_fingerprint,
                                    std::move(entries), cutoff);
}

}  // namespace quranqa::fusion
