#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quranqa/audit.hpp"
#include "quranqa/corpus.hpp"
#include "quranqa/metrics.hpp"

namespace quranqa::retrieval {

struct RankedEntry {
  std::string passage_id;
  double score = 0.0;
};

// Entries sorted by score descending, ties by passage_id ascending,
// truncated to cutoff. Scores are authoritative; ranks are positional.
struct Ranking {
  std::string question_id;
  std::string system;
  std::vector<RankedEntry> entries;
  int cutoff = 10;
};

// Sorts and truncates; duplicate passage ids or a non-positive cutoff are
// rejected. NaN scores are rejected (they have no rank position).
Ranking finalizeRanking(std::string question_id, std::string system,
                        std::vector<RankedEntry> entries, int cutoff = 10);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;  // in [0, 1]
};

class InvertedIndex {
 public:
  static InvertedIndex build(const corpus::Collection& collection);

  std::size_t documentCount() const { return doc_ids_.size(); }
  double averageLength() const { return avg_length_; }
  std::size_t documentFrequency(const std::string& term) const;
  const std::string& documentId(std::size_t doc) const { return doc_ids_[doc]; }
  std::size_t documentLength(std::size_t doc) const { return doc_lengths_[doc]; }

  struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
  };
  const std::vector<Posting>* postings(const std::string& term) const;

 private:
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<std::string> doc_ids_;  // in collection (id-sorted) order
  std::vector<std::size_t> doc_lengths_;
  double avg_length_ = 0.0;
};

// Okapi BM25 with idf = ln(1 + (N - df + 0.5)/(df + 0.5)); the +1 keeps every
// idf positive so matching passages always score above zero. Query terms are
// scored per occurrence; zero-score passages are excluded from the result.
Ranking bm25Retrieve(const InvertedIndex& index, const corpus::Question& question,
                     const Bm25Params& params = {}, int cutoff = 10,
                     const std::string& system = "bm25");

// Reads a TREC-format run (`qid Q0 passage_id rank score system_tag`,
// whitespace-separated). Scores are authoritative: entries are re-sorted by
// score (ties by passage_id) and a declared rank order that disagrees with
// the score order produces a warning naming the qid. Unknown passage ids,
// duplicate (qid, passage) rows, mixed system tags, and malformed rows are
// hard errors with line numbers.
std::map<std::string, Ranking> ingestRun(const std::string& path,
                                         const corpus::Collection& collection,
                                         int cutoff = 10, AuditLog* log = nullptr);

// TREC format, scores at 6 decimal places, rows sorted by qid then rank.
void writeRun(const std::map<std::string, Ranking>& rankings,
              const std::string& path);

// Drops every entry with score < tau, preserving order. tau = -inf is the
// identity; NaN tau is rejected.
Ranking applyNoAnswerThreshold(const Ranking& ranking, double tau);

struct ThresholdSweep {
  double best_tau = 0.0;  // smallest tau achieving the maximum MAP@10
  std::vector<std::pair<double, double>> curve;  // (tau, MAP@10), tau ascending
};

ThresholdSweep sweepThreshold(const std::map<std::string, Ranking>& rankings,
                              const metrics::RelevantSets& judgments,
                              std::vector<double> grid, AuditLog* log = nullptr);

// qid -> ranked passage ids, the projection consumed by the metrics layer.
metrics::RankedIds toRankedIds(const std::map<std::string, Ranking>& rankings);

}  // namespace quranqa::retrieval
