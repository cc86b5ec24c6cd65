#include "quranqa/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "quranqa/errors.hpp"
#include "quranqa/text.hpp"

namespace quranqa::metrics {
namespace {

constexpr int kCutoff = 10;

std::vector<std::string> truncated(const std::vector<std::string>& entries) {
  if (entries.size() <= static_cast<std::size_t>(kCutoff)) return entries;
  return {entries.begin(), entries.begin() + kCutoff};
}

std::string formatValue(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

MetricReport aggregateOver(
    std::string measure, const RankedIds& rankings, const RelevantSets& judgments,
    AuditLog* log,
    double (*scorer)(const std::vector<std::string>&, const std::set<std::string>&)) {
  MetricReport report;
  report.measure = std::move(measure);
  report.cutoff = kCutoff;
  static const std::vector<std::string> kEmpty;
  double sum = 0.0;
  for (const auto& [qid, relevant] : judgments) {
    auto it = rankings.find(qid);
    const auto& entries = it == rankings.end() ? kEmpty : it->second;
    double value = scorer(entries, relevant);
    report.per_question.emplace(qid, value);
    sum += value;
  }
  for (const auto& [qid, entries] : rankings) {
    if (!judgments.count(qid)) {
      audit(log, report.measure + ": ranking for unjudged question '" + qid +
                     "' excluded from evaluation");
    }
  }
  report.question_count = report.per_question.size();
  report.aggregate = report.question_count == 0
                         ? 0.0
                         : sum / static_cast<double>(report.question_count);
  return report;
}

}  // namespace

double precisionAtK(const std::vector<std::string>& entries,
                    const std::set<std::string>& relevant, int k) {
  if (k < 1) throw ConfigError("precisionAtK: k must be >= 1");
  int hits = 0;
  int depth = std::min<int>(k, static_cast<int>(entries.size()));
  for (int i = 0; i < depth; ++i) {
    if (relevant.count(entries[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double averagePrecision10(const std::vector<std::string>& entries,
                          const std::set<std::string>& relevant) {
  if (relevant.empty()) return entries.empty() ? 1.0 : 0.0;
  auto top = truncated(entries);
  int hits = 0;
  double sum = 0.0;
  for (std::size_t k = 1; k <= top.size(); ++k) {
    if (relevant.count(top[k - 1])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k);
    }
  }
  int denom = std::min<int>(static_cast<int>(relevant.size()), kCutoff);
  return sum / static_cast<double>(denom);
}

double reciprocalRank10(const std::vector<std::string>& entries,
                        const std::set<std::string>& relevant) {
  if (relevant.empty()) return entries.empty() ? 1.0 : 0.0;
  auto top = truncated(entries);
  for (std::size_t k = 1; k <= top.size(); ++k) {
    if (relevant.count(top[k - 1])) return 1.0 / static_cast<double>(k);
  }
  return 0.0;
}

MetricReport map10(const RankedIds& rankings, const RelevantSets& judgments,
                   AuditLog* log) {
  return aggregateOver("map@10", rankings, judgments, log, &averagePrecision10);
}

MetricReport mrr10(const RankedIds& rankings, const RelevantSets& judgments,
                   AuditLog* log) {
  return aggregateOver("mrr@10", rankings, judgments, log, &reciprocalRank10);
}

double tokenF1(std::string_view predicted, std::string_view gold) {
  auto p = text::tokenize(predicted);
  auto g = text::tokenize(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& tok : g) ++counts[tok];
  int overlap = 0;
  for (const auto& tok : p) {
    auto it = counts.find(tok);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

double partialAveragePrecision10(const std::vector<std::string>& predicted_spans,
                                 const std::vector<std::string>& gold_spans,
                                 const OverlapFn& overlap) {
  if (gold_spans.empty()) return predicted_spans.empty() ? 1.0 : 0.0;
  auto top = truncated(predicted_spans);
  std::vector<bool> used(gold_spans.size(), false);
  double partial_hits = 0.0;
  double sum = 0.0;
  for (std::size_t k = 1; k <= top.size(); ++k) {
    double best = 0.0;
    std::size_t best_j = gold_spans.size();
    for (std::size_t j = 0; j < gold_spans.size(); ++j) {
      if (used[j]) continue;
      double value = overlap(top[k - 1], gold_spans[j]);
      if (value > best) {
        best = value;
        best_j = j;
      }
    }
    if (best > 0.0) {
      used[best_j] = true;
      partial_hits += best;
      sum += (partial_hits / static_cast<double>(k)) * best;
    }
  }
  int denom = std::min<int>(static_cast<int>(gold_spans.size()), kCutoff);
  return sum / static_cast<double>(denom);
}

MetricReport pap10(const SpanLists& predictions, const SpanLists& gold,
                   AuditLog* log, const OverlapFn& overlap) {
  MetricReport report;
  report.measure = "pap@10";
  report.cutoff = kCutoff;
  static const std::vector<std::string> kEmpty;
  double sum = 0.0;
  for (const auto& [qid, gold_spans] : gold) {
    auto it = predictions.find(qid);
    const auto& spans = it == predictions.end() ? kEmpty : it->second;
    double value = partialAveragePrecision10(spans, gold_spans, overlap);
    report.per_question.emplace(qid, value);
    sum += value;
  }
  for (const auto& [qid, spans] : predictions) {
    if (!gold.count(qid)) {
      audit(log, "pap@10: spans for unjudged question '" + qid +
                     "' excluded from evaluation");
    }
  }
  report.question_count = report.per_question.size();
  report.aggregate = report.question_count == 0
                         ? 0.0
                         : sum / static_cast<double>(report.question_count);
  return report;
}

std::string formatReport(const MetricReport& report) {
  std::ostringstream out;
  for (const auto& [qid, value] : report.per_question) {
    out << report.measure << '\t' << qid << '\t' << formatValue(value) << '\n';
  }
  out << report.measure << '\t' << "ALL" << '\t' << formatValue(report.aggregate)
      << '\n';
  return out.str();
}

void writeReport(const MetricReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open report file for writing: " + path);
  out << formatReport(report);
  if (!out) throw ConfigError("failed writing report file: " + path);
}

}  // namespace quranqa::metrics
