#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "quranqa/audit.hpp"

namespace quranqa::corpus {

struct Passage {
  std::string id;
  std::string text;                // raw, kept for display and prompts
  std::string normalized_text;     // canonical view used for substring checks
  std::size_t length_tokens = 0;   // recomputed from the tokenizer, never trusted
};

// Immutable after load; iteration order is ascending by passage id.
class Collection {
 public:
  Collection() = default;
  explicit Collection(std::vector<Passage> passages);

  const std::vector<Passage>& passages() const { return passages_; }
  const Passage* find(const std::string& id) const;
  const Passage& at(const std::string& id) const;  // throws DataError if absent
  bool contains(const std::string& id) const { return find(id) != nullptr; }
  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }

 private:
  std::vector<Passage> passages_;
  std::map<std::string, std::size_t> by_id_;
};

struct Question {
  std::string id;
  std::string text;
  std::optional<std::string> variant_of;  // original question this paraphrases
  bool answerable = true;
};

class QuestionSet {
 public:
  QuestionSet() = default;
  explicit QuestionSet(std::vector<Question> questions);

  const std::vector<Question>& questions() const { return questions_; }
  const Question* find(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }
  std::size_t size() const { return questions_.size(); }

 private:
  std::vector<Question> questions_;
  std::map<std::string, std::size_t> by_id_;
};

struct GoldSpan {
  std::string passage_id;
  std::string answer;  // empty declares a no-answer reading pair on that passage
};

struct JudgmentSet {
  std::string question_id;
  std::set<std::string> relevant_passages;  // empty = judged zero-answer
  std::vector<GoldSpan> gold_spans;         // file order preserved
  // True when the question appeared in the relevance file (incl. explicit
  // zero-answer rows); distinguishes "judged unanswerable" from "unjudged".
  bool relevance_judged = false;
};

using Judgments = std::map<std::string, JudgmentSet>;

struct ValidationReport {
  std::size_t passage_count = 0;
  std::size_t question_count = 0;
  std::size_t zero_answer_question_count = 0;
  std::size_t gold_span_count = 0;
  std::vector<std::string> violations;  // sorted, deterministic

  bool wellFormed() const { return violations.empty(); }
  std::string toText() const;
};

// File loaders. Formats are auto-detected by extension: .json/.jsonl parse as
// JSON-lines, anything else as TSV. All loaders recompute derived fields and
// fail hard on malformed rows (with line numbers) and broken references.
Collection loadCollection(const std::string& path);
void saveCollection(const Collection& collection, const std::string& path);

QuestionSet loadQuestions(const std::string& path);

Judgments loadJudgments(const std::string& path, const Collection& collection);

// Merges gold answer spans (and no-answer pairs) into an existing judgment
// map; creates relevance-unjudged entries for questions seen only here.
void loadGoldSpans(const std::string& path, const Collection& collection,
                   Judgments& judgments);

// Report-only referential check; identical inputs yield byte-identical reports.
ValidationReport validateCorpus(const Collection& collection, const Judgments& judgments,
                                const QuestionSet& questions);

}  // namespace quranqa::corpus
