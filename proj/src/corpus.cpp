#include "quranqa/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "quranqa/errors.hpp"
#include "quranqa/text.hpp"

namespace quranqa::corpus {

namespace {

using nlohmann::json;

bool hasJsonExtension(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".jsonl") || ends_with(".json");
}

std::ifstream openOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

std::string trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

json parseJsonLine(const std::string& line, const std::string& path, std::size_t lineno) {
  json record = json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON record");
  }
  return record;
}

std::string requireString(const json& record, const char* key, const std::string& path,
                          std::size_t lineno) {
  if (!record.contains(key) || !record[key].is_string()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": missing string field '" +
                    key + "'");
  }
  return record[key].get<std::string>();
}

Passage makePassage(std::string id, std::string raw, const std::string& path,
                    std::size_t lineno) {
  if (id.empty()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": empty passage id");
  }
  if (trimmed(raw).empty()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": empty passage text for id '" +
                    id + "'");
  }
  Passage p;
  p.id = std::move(id);
  p.text = std::move(raw);
  p.normalized_text = text::normalizeText(p.text);
  p.length_tokens = text::tokenize(p.text).size();
  return p;
}

}  // namespace

Collection::Collection(std::vector<Passage> passages) : passages_(std::move(passages)) {
  std::sort(passages_.begin(), passages_.end(),
            [](const Passage& a, const Passage& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    if (!by_id_.emplace(passages_[i].id, i).second) {
      throw DataError("duplicate passage id '" + passages_[i].id + "'");
    }
  }
}

const Passage* Collection::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

const Passage& Collection::at(const std::string& id) const {
  const Passage* p = find(id);
  if (p == nullptr) throw DataError("unknown passage id '" + id + "'");
  return *p;
}

QuestionSet::QuestionSet(std::vector<Question> questions) : questions_(std::move(questions)) {
  std::sort(questions_.begin(), questions_.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    if (!by_id_.emplace(questions_[i].id, i).second) {
      throw DataError("duplicate question id '" + questions_[i].id + "'");
    }
  }
}

const Question* QuestionSet::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &questions_[it->second];
}

Collection loadCollection(const std::string& path) {
  std::ifstream in = openOrThrow(path);
  std::vector<Passage> passages;
  std::map<std::string, std::size_t> seen;  // id -> first line
  std::string line;
  std::size_t lineno = 0;
  const bool as_json = hasJsonExtension(path);

  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    std::string id, raw;
    if (as_json) {
      json record = parseJsonLine(line, path, lineno);
      id = requireString(record, "pc_id", path, lineno);
      raw = requireString(record, "text", path, lineno);
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw DataError(path + ":" + std::to_string(lineno) + ": expected 'id<TAB>text'");
      }
      id = line.substr(0, tab);
      raw = line.substr(tab + 1);
    }
    auto [it, inserted] = seen.emplace(id, lineno);
    if (!inserted) {
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate passage id '" +
                      id + "' (first seen at line " + std::to_string(it->second) + ")");
    }
    passages.push_back(makePassage(std::move(id), std::move(raw), path, lineno));
  }
  return Collection(std::move(passages));
}

void saveCollection(const Collection& collection, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  const bool as_json = hasJsonExtension(path);
  for (const Passage& p : collection.passages()) {
    if (as_json) {
      json record;
      record["pc_id"] = p.id;
      record["text"] = p.text;
      out << record.dump() << '\n';
    } else {
      if (p.id.find_first_of("\t\n") != std::string::npos ||
          p.text.find_first_of("\t\n") != std::string::npos) {
        throw DataError("passage '" + p.id + "' contains TAB/newline; save as .jsonl");
      }
      out << p.id << '\t' << p.text << '\n';
    }
  }
}

QuestionSet loadQuestions(const std::string& path) {
  std::ifstream in = openOrThrow(path);
  std::vector<Question> questions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    json record = parseJsonLine(line, path, lineno);
    Question q;
    q.id = requireString(record, "qid", path, lineno);
    q.text = requireString(record, "text", path, lineno);
    if (q.id.empty() || trimmed(q.text).empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": empty question id or text");
    }
    if (!record.contains("answerable") || !record["answerable"].is_boolean()) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": missing boolean field 'answerable'");
    }
    q.answerable = record["answerable"].get<bool>();
    if (record.contains("variant_of") && !record["variant_of"].is_null()) {
      if (!record["variant_of"].is_string()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": 'variant_of' must be a string");
      }
      q.variant_of = record["variant_of"].get<std::string>();
    }
    questions.push_back(std::move(q));
  }

  QuestionSet set(std::move(questions));
  for (const Question& q : set.questions()) {
    if (!q.variant_of) continue;
    if (*q.variant_of == q.id) {
      throw DataError("question '" + q.id + "' declares itself as its own variant");
    }
    if (!set.contains(*q.variant_of)) {
      throw DataError("question '" + q.id + "' references unknown original '" +
                      *q.variant_of + "'");
    }
  }
  return set;
}

Judgments loadJudgments(const std::string& path, const Collection& collection) {
  std::ifstream in = openOrThrow(path);
  Judgments judgments;
  // (qid, pid) -> relevance, to reject contradictory rows.
  std::map<std::pair<std::string, std::string>, int> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    std::istringstream row(line);
    std::string qid, pid, rel_text, extra;
    if (!(row >> qid >> pid >> rel_text) || (row >> extra)) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 'qid<TAB>passage_id<TAB>relevance'");
    }
    int rel;
    if (rel_text == "0") {
      rel = 0;
    } else if (rel_text == "1") {
      rel = 1;
    } else {
      throw DataError(path + ":" + std::to_string(lineno) + ": relevance must be 0 or 1, got '" +
                      rel_text + "'");
    }

    JudgmentSet& set = judgments.try_emplace(qid, JudgmentSet{qid, {}, {}, true}).first->second;

    if (pid == "-1") {
      // Explicit zero-answer declaration.
      if (rel != 0) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": zero-answer row must carry relevance 0");
      }
      if (!set.relevant_passages.empty()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": question '" + qid +
                        "' declared zero-answer but has relevant passages");
      }
      seen[{qid, pid}] = 0;
      continue;
    }

    if (!collection.contains(pid)) {
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown passage id '" + pid +
                      "' for question '" + qid + "'");
    }
    auto [it, inserted] = seen.emplace(std::make_pair(qid, pid), rel);
    if (!inserted && it->second != rel) {
      throw DataError(path + ":" + std::to_string(lineno) + ": contradictory judgment for (" +
                      qid + ", " + pid + ")");
    }
    if (rel == 1) {
      if (seen.count({qid, "-1"}) > 0) {
        throw DataError(path + ":" + std::to_string(lineno) + ": question '" + qid +
                        "' declared zero-answer but has relevant passages");
      }
      set.relevant_passages.insert(pid);
    }
  }
  return judgments;
}

void loadGoldSpans(const std::string& path, const Collection& collection,
                   Judgments& judgments) {
  std::ifstream in = openOrThrow(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    json record = parseJsonLine(line, path, lineno);
    const std::string qid = requireString(record, "qid", path, lineno);
    const std::string pid = requireString(record, "pc_id", path, lineno);
    const std::string answer = requireString(record, "answer", path, lineno);
    const Passage* passage = collection.find(pid);
    if (passage == nullptr) {
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown passage id '" + pid +
                      "' for question '" + qid + "'");
    }
    if (!answer.empty()) {
      const std::string normalized = text::normalizeText(answer);
      if (normalized.empty() ||
          passage->normalized_text.find(normalized) == std::string::npos) {
        throw DataError(path + ":" + std::to_string(lineno) + ": gold span for question '" +
                        qid + "' is not a substring of passage '" + pid + "'");
      }
    }
    JudgmentSet& set =
        judgments.try_emplace(qid, JudgmentSet{qid, {}, {}, false}).first->second;
    set.gold_spans.push_back(GoldSpan{pid, answer});
  }
}

ValidationReport validateCorpus(const Collection& collection, const Judgments& judgments,
                                const QuestionSet& questions) {
  ValidationReport report;
  report.passage_count = collection.size();
  report.question_count = questions.size();
  for (const Question& q : questions.questions()) {
    if (!q.answerable) ++report.zero_answer_question_count;
    if (q.variant_of) {
      if (*q.variant_of == q.id) {
        report.violations.push_back("question '" + q.id + "' is its own variant");
      } else if (!questions.contains(*q.variant_of)) {
        report.violations.push_back("question '" + q.id + "' references unknown original '" +
                                    *q.variant_of + "'");
      }
    }
  }

  for (const auto& [qid, set] : judgments) {
    const Question* question = questions.find(qid);
    if (question == nullptr) {
      report.violations.push_back("judgment references unknown question '" + qid + "'");
    }
    for (const std::string& pid : set.relevant_passages) {
      if (!collection.contains(pid)) {
        report.violations.push_back("question '" + qid + "' references unknown passage '" +
                                    pid + "'");
      }
    }
    for (const GoldSpan& span : set.gold_spans) {
      const Passage* passage = collection.find(span.passage_id);
      if (passage == nullptr) {
        report.violations.push_back("gold span for question '" + qid +
                                    "' references unknown passage '" + span.passage_id + "'");
        continue;
      }
      if (span.answer.empty()) continue;  // declared no-answer pair
      ++report.gold_span_count;
      const std::string normalized = text::normalizeText(span.answer);
      if (normalized.empty() ||
          passage->normalized_text.find(normalized) == std::string::npos) {
        report.violations.push_back("gold span for question '" + qid +
                                    "' is not a substring of passage '" + span.passage_id +
                                    "'");
      }
    }
    if (question != nullptr && set.relevance_judged) {
      if (question->answerable && set.relevant_passages.empty()) {
        report.violations.push_back("answerable question '" + qid +
                                    "' has no relevant passages");
      }
      if (!question->answerable && !set.relevant_passages.empty()) {
        report.violations.push_back("zero-answer question '" + qid +
                                    "' has relevant passages");
      }
    }
  }

  std::sort(report.violations.begin(), report.violations.end());
  return report;
}

std::string ValidationReport::toText() const {
  std::ostringstream out;
  out << "passages\t" << passage_count << '\n';
  out << "questions\t" << question_count << '\n';
  out << "zero_answer_questions\t" << zero_answer_question_count << '\n';
  out << "gold_spans\t" << gold_span_count << '\n';
  out << "violations\t" << violations.size() << '\n';
  for (const std::string& v : violations) out << "violation\t" << v << '\n';
  return out.str();
}

}  // namespace quranqa::corpus
