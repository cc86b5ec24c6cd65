#include "quranqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "quranqa/errors.hpp"
#include "quranqa/text.hpp"

namespace quranqa::retrieval {
namespace {

bool parseInt(const std::string& token, long& out) {
  try {
    std::size_t pos = 0;
    out = std::stol(token, &pos);
    return pos == token.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parseDouble(const std::string& token, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(token, &pos);
    return pos == token.size() && !std::isnan(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

Ranking finalizeRanking(std::string question_id, std::string system,
                        std::vector<RankedEntry> entries, int cutoff) {
  if (cutoff < 1) throw ConfigError("ranking cutoff must be >= 1");
  std::set<std::string> seen;
  for (const auto& entry : entries) {
    if (std::isnan(entry.score)) {
      throw DataError("ranking for question '" + question_id +
                      "' has a NaN score for passage '" + entry.passage_id + "'");
    }
    if (!seen.insert(entry.passage_id).second) {
      throw DataError("ranking for question '" + question_id +
                      "' lists passage '" + entry.passage_id + "' twice");
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.passage_id < b.passage_id;
            });
  if (entries.size() > static_cast<std::size_t>(cutoff)) {
    entries.resize(static_cast<std::size_t>(cutoff));
  }
  return Ranking{std::move(question_id), std::move(system), std::move(entries),
                 cutoff};
}

InvertedIndex InvertedIndex::build(const corpus::Collection& collection) {
  if (collection.size() == 0) {
    throw DataError("cannot index an empty passage collection");
  }
  InvertedIndex index;
  std::size_t total_length = 0;
  for (const auto& passage : collection.passages()) {
    auto doc = static_cast<std::uint32_t>(index.doc_ids_.size());
    auto tokens = text::tokenize(passage.text);
    index.doc_ids_.push_back(passage.id);
    index.doc_lengths_.push_back(tokens.size());
    total_length += tokens.size();
    std::map<std::string, std::uint32_t> tf;
    for (const auto& token : tokens) ++tf[token];
    for (const auto& [term, count] : tf) {
      index.postings_[term].push_back(Posting{doc, count});
    }
  }
  index.avg_length_ =
      static_cast<double>(total_length) / static_cast<double>(index.doc_ids_.size());
  return index;
}

std::size_t InvertedIndex::documentFrequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<InvertedIndex::Posting>* InvertedIndex::postings(
    const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

Ranking bm25Retrieve(const InvertedIndex& index, const corpus::Question& question,
                     const Bm25Params& params, int cutoff,
                     const std::string& system) {
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0) {
    throw ConfigError("bm25 parameters out of range: k1 >= 0 and 0 <= b <= 1");
  }
  auto tokens = text::tokenize(question.text);
  std::vector<double> scores(index.documentCount(), 0.0);
  double n = static_cast<double>(index.documentCount());
  double avg = index.averageLength() > 0.0 ? index.averageLength() : 1.0;
  for (const auto& token : tokens) {
    const auto* plist = index.postings(token);
    if (!plist) continue;
    double df = static_cast<double>(plist->size());
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& posting : *plist) {
      double tf = static_cast<double>(posting.tf);
      double len = static_cast<double>(index.documentLength(posting.doc));
      double norm = params.k1 * (1.0 - params.b + params.b * len / avg);
      scores[posting.doc] += idf * tf * (params.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<RankedEntry> entries;
  for (std::size_t doc = 0; doc < scores.size(); ++doc) {
    if (scores[doc] > 0.0) {
      entries.push_back(RankedEntry{index.documentId(doc), scores[doc]});
    }
  }
  return finalizeRanking(question.id, system, std::move(entries), cutoff);
}

std::map<std::string, Ranking> ingestRun(const std::string& path,
                                         const corpus::Collection& collection,
                                         int cutoff, AuditLog* log) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open run file: " + path);

  struct Row {
    std::string passage_id;
    long declared_rank = 0;
    double score = 0.0;
  };
  std::map<std::string, std::vector<Row>> rows;  // file order within each qid
  std::string tag;
  std::set<std::pair<std::string, std::string>> seen;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string qid, q0, pid, rank_text, score_text, system, extra;
    if (!(row >> qid >> q0 >> pid >> rank_text >> score_text >> system) ||
        (row >> extra)) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 'qid Q0 passage_id rank score system_tag'");
    }
    long rank = 0;
    double score = 0.0;
    if (!parseInt(rank_text, rank) || rank < 1) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": rank must be a positive integer, got '" + rank_text + "'");
    }
    if (!parseDouble(score_text, score)) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": score must be a finite number, got '" + score_text + "'");
    }
    if (!collection.contains(pid)) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": unknown passage id '" + pid + "'");
    }
    if (tag.empty()) {
      tag = system;
    } else if (tag != system) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": mixed system tags '" + tag + "' and '" + system + "'");
    }
    if (!seen.emplace(qid, pid).second) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": duplicate entry for question '" + qid + "' passage '" +
                      pid + "'");
    }
    rows[qid].push_back(Row{pid, rank, score});
  }
  if (rows.empty()) {
    audit(log, "run file '" + path + "' contains no rows");
  }

  std::map<std::string, Ranking> rankings;
  for (auto& [qid, qrows] : rows) {
    std::vector<RankedEntry> entries;
    entries.reserve(qrows.size());
    for (const auto& r : qrows) entries.push_back(RankedEntry{r.passage_id, r.score});

    // Declared ranks are advisory; warn when they disagree with score order.
    std::vector<std::size_t> by_declared(qrows.size());
    for (std::size_t i = 0; i < by_declared.size(); ++i) by_declared[i] = i;
    std::stable_sort(by_declared.begin(), by_declared.end(),
                     [&](std::size_t a, std::size_t b) {
                       return qrows[a].declared_rank < qrows[b].declared_rank;
                     });
    auto by_score = entries;
    std::sort(by_score.begin(), by_score.end(),
              [](const RankedEntry& a, const RankedEntry& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.passage_id < b.passage_id;
              });
    for (std::size_t i = 0; i < by_declared.size(); ++i) {
      if (qrows[by_declared[i]].passage_id != by_score[i].passage_id) {
        audit(log, "run file '" + path + "': declared ranks contradict score order"
                   " for question '" + qid + "'; scores win");
        break;
      }
    }
    rankings.emplace(qid, finalizeRanking(qid, tag, std::move(entries), cutoff));
  }
  return rankings;
}

void writeRun(const std::map<std::string, Ranking>& rankings,
              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open run file for writing: " + path);
  for (const auto& [qid, ranking] : rankings) {
    if (ranking.system.empty()) {
      throw ConfigError("ranking for question '" + qid + "' has no system tag");
    }
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      char score[32];
      std::snprintf(score, sizeof(score), "%.6f", ranking.entries[i].score);
      out << qid << " Q0 " << ranking.entries[i].passage_id << ' ' << (i + 1)
          << ' ' << score << ' ' << ranking.system << '\n';
    }
  }
  if (!out) throw ConfigError("failed writing run file: " + path);
}

Ranking applyNoAnswerThreshold(const Ranking& ranking, double tau) {
  if (std::isnan(tau)) throw ConfigError("no-answer threshold must not be NaN");
  Ranking result = ranking;
  std::erase_if(result.entries,
                [tau](const RankedEntry& e) { return e.score < tau; });
  return result;
}

ThresholdSweep sweepThreshold(const std::map<std::string, Ranking>& rankings,
                              const metrics::RelevantSets& judgments,
                              std::vector<double> grid, AuditLog* log) {
  if (grid.empty()) throw ConfigError("threshold sweep needs a non-empty grid");
  for (double tau : grid) {
    if (std::isnan(tau)) throw ConfigError("threshold grid contains NaN");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  ThresholdSweep sweep;
  bool first = true;
  double best_value = 0.0;
  for (double tau : grid) {
    std::map<std::string, Ranking> thresholded;
    for (const auto& [qid, ranking] : rankings) {
      thresholded.emplace(qid, applyNoAnswerThreshold(ranking, tau));
    }
    auto report = metrics::map10(toRankedIds(thresholded), judgments,
                                 first ? log : nullptr);
    sweep.curve.emplace_back(tau, report.aggregate);
    // Strict > keeps the smallest tau on ties (grid is ascending).
    if (first || report.aggregate > best_value) {
      best_value = report.aggregate;
      sweep.best_tau = tau;
    }
    first = false;
  }
  return sweep;
}

metrics::RankedIds toRankedIds(const std::map<std::string, Ranking>& rankings) {
  metrics::RankedIds ids;
  for (const auto& [qid, ranking] : rankings) {
    std::vector<std::string> pids;
    pids.reserve(ranking.entries.size());
    for (const auto& entry : ranking.entries) pids.push_back(entry.passage_id);
    ids.emplace(qid, std::move(pids));
  }
  return ids;
}

}  // namespace quranqa::retrieval
