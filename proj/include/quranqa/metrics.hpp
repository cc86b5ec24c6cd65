#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "quranqa/audit.hpp"

namespace quranqa::metrics {

struct MetricReport {
  std::string measure;
  int cutoff = 10;
  std::map<std::string, double> per_question;
  double aggregate = 0.0;  // arithmetic mean of per_question values
  std::size_t question_count = 0;
  std::string config_fingerprint;
};

// qid -> ranked passage ids / relevant passage sets / ranked span texts.
using RankedIds = std::map<std::string, std::vector<std::string>>;
using RelevantSets = std::map<std::string, std::set<std::string>>;
using SpanLists = std::map<std::string, std::vector<std::string>>;

// |relevant among top-k| / k. Positions beyond the retrieved list count as
// non-relevant (trec-style padding), so the denominator is always k.
double precisionAtK(const std::vector<std::string>& entries,
                    const std::set<std::string>& relevant, int k);

// (1/min(R_q,10)) * sum_{k=1..10} P(k)*delta_k over the top 10 entries.
// R_q = 0 scores 1.0 for an empty list and 0.0 otherwise (abstention
// convention). Entries are assumed deduplicated; truncation is internal.
double averagePrecision10(const std::vector<std::string>& entries,
                          const std::set<std::string>& relevant);

// 1/rank of the first relevant entry within the top 10, 0 if none;
// same R_q = 0 convention as averagePrecision10.
double reciprocalRank10(const std::vector<std::string>& entries,
                        const std::set<std::string>& relevant);

// Means over all judged questions; a judged qid missing from the rankings is
// an empty ranking, a ranking for an unjudged qid is excluded with a warning.
MetricReport map10(const RankedIds& rankings, const RelevantSets& judgments,
                   AuditLog* log = nullptr);
MetricReport mrr10(const RankedIds& rankings, const RelevantSets& judgments,
                   AuditLog* log = nullptr);

// Harmonic mean of token precision/recall under multiset overlap; both sides
// are normalized and tokenized by the retrieval tokenizer. Both empty -> 1.0,
// exactly one empty -> 0.0.
double tokenF1(std::string_view predicted, std::string_view gold);

using OverlapFn = std::function<double(std::string_view, std::string_view)>;

// Partial-credit AP over ranked spans: delta_k = best overlap against the
// still-unmatched gold spans (greedy in rank order, each gold consumed by at
// most one prediction, ties broken by gold list position), P_partial(k) =
// (sum_{j<=k} delta_j)/k, normalized by min(R_q,10). Zero-gold mirrors the
// averagePrecision10 convention. The overlap function is pluggable.
double partialAveragePrecision10(const std::vector<std::string>& predicted_spans,
                                 const std::vector<std::string>& gold_spans,
                                 const OverlapFn& overlap = tokenF1);

MetricReport pap10(const SpanLists& predictions, const SpanLists& gold,
                   AuditLog* log = nullptr, const OverlapFn& overlap = tokenF1);

// TSV report: `measure<TAB>qid<TAB>value` rows plus a final ALL row, values
// at 4 decimal places.
std::string formatReport(const MetricReport& report);
void writeReport(const MetricReport& report, const std::string& path);

}  // namespace quranqa::metrics
