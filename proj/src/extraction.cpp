#include "quranqa/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "quranqa/client.hpp"
#include "quranqa/errors.hpp"
#include "quranqa/text.hpp"

namespace quranqa::extraction {

const char* const kNoAnswerSentinel = "No answer found in the given text.";
const char* const kNoAnswerSentinelArabic =
    "\u0644\u0627 \u062a\u0648\u062c\u062f \u0625\u062c\u0627\u0628\u0629 "
    "\u0641\u064a \u0627\u0644\u0646\u0635 \u0627\u0644\u0645\u0639\u0637\u0649";

namespace {

constexpr std::size_t kMaxSpans = 10;

std::string trimmed(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && (static_cast<unsigned char>(s[begin]) <= ' ')) ++begin;
  while (end > begin && (static_cast<unsigned char>(s[end - 1]) <= ' ')) --end;
  return std::string(s.substr(begin, end - begin));
}

bool sameTokens(std::string_view a, std::string_view b) {
  return text::tokenize(a) == text::tokenize(b);
}

bool isSentinel(std::string_view line) {
  return sameTokens(line, kNoAnswerSentinel) ||
         sameTokens(line, kNoAnswerSentinelArabic);
}

// Drops list markers: leading bullets and "1." / "2)" style numbering,
// ASCII or Arabic-Indic digits.
std::string stripListMarkers(std::string line) {
  static const std::vector<std::string> kBullets = {
      "-", "*", "\u2022", "\u2013", "\u2014"};
  for (;;) {
    line = trimmed(line);
    bool stripped = false;
    for (const auto& bullet : kBullets) {
      if (line.rfind(bullet, 0) == 0) {
        line = line.substr(bullet.size());
        stripped = true;
        break;
      }
    }
    if (stripped) continue;
    std::size_t i = 0;
    while (i < line.size()) {
      unsigned char c = static_cast<unsigned char>(line[i]);
      if (c >= '0' && c <= '9') {
        ++i;
      } else if (i + 1 < line.size() && c == 0xD9 &&
                 static_cast<unsigned char>(line[i + 1]) >= 0xA0 &&
                 static_cast<unsigned char>(line[i + 1]) <= 0xA9) {
        i += 2;
      } else {
        break;
      }
    }
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      line = line.substr(i + 1);
      continue;
    }
    return line;
  }
}

struct QuotePair {
  std::string open;
  std::string close;
};

// First opening quote to its last matching closer; empty result if unpaired.
bool extractQuoted(const std::string& line, std::string& content) {
  static const std::vector<QuotePair> kQuotes = {
      {"\"", "\""}, {"\u201c", "\u201d"}, {"\u00ab", "\u00bb"}};
  for (const auto& pair : kQuotes) {
    std::size_t open = line.find(pair.open);
    if (open == std::string::npos) continue;
    std::size_t close = line.rfind(pair.close);
    if (close == std::string::npos || close <= open) continue;
    if (pair.open == pair.close && close == open) continue;
    content = trimmed(line.substr(open + pair.open.size(),
                                  close - open - pair.open.size()));
    return true;
  }
  return false;
}

std::string renderExample(const FewShotExample& example, std::size_t index) {
  std::ostringstream out;
  out << "\u0645\u062b\u0627\u0644 " << index << ":\n";
  out << "\u0627\u0644\u0645\u0642\u0637\u0639: " << example.passage << "\n";
  out << "\u0627\u0644\u0633\u0624\u0627\u0644: " << example.question << "\n";
  out << "\u0627\u0644\u0625\u062c\u0627\u0628\u0627\u062a:\n";
  out << formatAnswers(example.answers) << "\n";
  return out.str();
}

void replaceAll(std::string& text, const std::string& marker,
                const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(marker, pos)) != std::string::npos) {
    text.replace(pos, marker.size(), value);
    pos += value.size();
  }
}

}  // namespace

PromptTemplate PromptTemplate::defaultTemplate() {
  PromptTemplate tmpl;
  tmpl.instruction_block =
      "\u0645\u0647\u0645\u0629 \u0627\u0633\u062a\u062e\u0631\u0627\u062c "
      "\u0627\u0644\u0625\u062c\u0627\u0628\u0627\u062a \u0645\u0646 "
      "\u0645\u0642\u0627\u0637\u0639 \u0642\u0631\u0622\u0646\u064a\u0629.\n"
      "\u0627\u0644\u062a\u0639\u0644\u064a\u0645\u0627\u062a:\n"
      "- \u0627\u0633\u062a\u062e\u0631\u062c \u0645\u0646 "
      "\u0627\u0644\u0645\u0642\u0637\u0639 \u0643\u0644 "
      "\u0627\u0644\u0639\u0628\u0627\u0631\u0627\u062a \u0627\u0644\u062a\u064a "
      "\u062a\u062c\u064a\u0628 \u0639\u0646 \u0627\u0644\u0633\u0624\u0627\u0644\u060c "
      "\u0633\u0648\u0627\u0621 \u0648\u0631\u062f\u062a "
      "\u0627\u0644\u0625\u062c\u0627\u0628\u0629 \u0635\u0631\u0627\u062d\u0629 "
      "\u0623\u0648 \u0636\u0645\u0646\u0627.\n"
      "- \u064a\u062c\u0628 \u0623\u0646 \u062a\u0643\u0648\u0646 \u0643\u0644 "
      "\u0625\u062c\u0627\u0628\u0629 \u0627\u0642\u062a\u0628\u0627\u0633\u0627 "
      "\u062d\u0631\u0641\u064a\u0627 \u0645\u0646 "
      "\u0627\u0644\u0645\u0642\u0637\u0639 \u062f\u0648\u0646 \u0623\u064a "
      "\u062a\u063a\u064a\u064a\u0631.\n"
      "- \u0625\u0630\u0627 \u0644\u0645 \u062a\u0648\u062c\u062f "
      "\u0625\u062c\u0627\u0628\u0629 \u0645\u0646\u0627\u0633\u0628\u0629 "
      "\u0641\u064a \u0627\u0644\u0645\u0642\u0637\u0639 "
      "\u0641\u0627\u0643\u062a\u0628: "
      "\u0644\u0627 \u062a\u0648\u062c\u062f \u0625\u062c\u0627\u0628\u0629 "
      "\u0641\u064a \u0627\u0644\u0646\u0635 \u0627\u0644\u0645\u0639\u0637\u0649\n"
      "- \u0644\u0627 \u062a\u0636\u0641 \u0623\u064a \u0634\u0631\u062d "
      "\u0623\u0648 \u062a\u0639\u0644\u064a\u0642.\n"
      "- \u0627\u0643\u062a\u0628 \u0643\u0644 \u0625\u062c\u0627\u0628\u0629 "
      "\u0641\u064a \u0633\u0637\u0631 \u0645\u0633\u062a\u0642\u0644 "
      "\u0628\u0627\u0644\u0635\u064a\u063a\u0629 "
      "\u0627\u0644\u062a\u0627\u0644\u064a\u0629:\n"
      "\"\u0627\u0644\u0625\u062c\u0627\u0628\u0629 "
      "\u0627\u0644\u0623\u0648\u0644\u0649\"\n"
      "\"\u0627\u0644\u0625\u062c\u0627\u0628\u0629 "
      "\u0627\u0644\u062b\u0627\u0646\u064a\u0629\"";

  tmpl.few_shot = {
      // Multi-answer.
      {"\u0642\u0644 \u0647\u0648 \u0627\u0644\u0644\u0647 \u0623\u062d\u062f "
       "\u0627\u0644\u0644\u0647 \u0627\u0644\u0635\u0645\u062f \u0644\u0645 "
       "\u064a\u0644\u062f \u0648\u0644\u0645 \u064a\u0648\u0644\u062f "
       "\u0648\u0644\u0645 \u064a\u0643\u0646 \u0644\u0647 \u0643\u0641\u0648\u0627 "
       "\u0623\u062d\u062f",
       "\u0628\u0645 \u0648\u0635\u0641 \u0627\u0644\u0644\u0647 "
       "\u0646\u0641\u0633\u0647 \u0641\u064a \u0647\u0630\u0647 "
       "\u0627\u0644\u0622\u064a\u0627\u062a\u061f",
       {"\u0627\u0644\u0644\u0647 \u0627\u0644\u0635\u0645\u062f",
        "\u0644\u0645 \u064a\u0644\u062f \u0648\u0644\u0645 "
        "\u064a\u0648\u0644\u062f"}},
      // Single answer.
      {"\u0627\u0644\u062d\u0645\u062f \u0644\u0644\u0647 \u0631\u0628 "
       "\u0627\u0644\u0639\u0627\u0644\u0645\u064a\u0646 "
       "\u0627\u0644\u0631\u062d\u0645\u0646 \u0627\u0644\u0631\u062d\u064a\u0645 "
       "\u0645\u0627\u0644\u0643 \u064a\u0648\u0645 \u0627\u0644\u062f\u064a\u0646",
       "\u0644\u0645\u0646 \u0627\u0644\u062d\u0645\u062f\u061f",
       {"\u0644\u0644\u0647 \u0631\u0628 "
        "\u0627\u0644\u0639\u0627\u0644\u0645\u064a\u0646"}},
      // No answer.
      {"\u0625\u0646\u0627 \u0623\u0639\u0637\u064a\u0646\u0627\u0643 "
       "\u0627\u0644\u0643\u0648\u062b\u0631 \u0641\u0635\u0644 "
       "\u0644\u0631\u0628\u0643 \u0648\u0627\u0646\u062d\u0631 \u0625\u0646 "
       "\u0634\u0627\u0646\u0626\u0643 \u0647\u0648 \u0627\u0644\u0623\u0628\u062a\u0631",
       "\u0643\u0645 \u0639\u062f\u062f \u0623\u0628\u0648\u0627\u0628 "
       "\u0627\u0644\u062c\u0646\u0629\u061f",
       {}}};

  tmpl.target_format =
      "\u0623\u062c\u0628 \u0627\u0644\u0622\u0646.\n"
      "\u0627\u0644\u0645\u0642\u0637\u0639: {passage}\n"
      "\u0627\u0644\u0633\u0624\u0627\u0644: {question}\n"
      "\u0627\u0644\u0625\u062c\u0627\u0628\u0627\u062a:";
  return tmpl;
}

std::string buildPrompt(const PromptTemplate& tmpl, const corpus::Passage& passage,
                        const corpus::Question& question) {
  if (tmpl.target_format.find("{passage}") == std::string::npos) {
    throw ConfigError("prompt target format is missing the {passage} placeholder");
  }
  if (tmpl.target_format.find("{question}") == std::string::npos) {
    throw ConfigError("prompt target format is missing the {question} placeholder");
  }
  if (trimmed(passage.text).empty()) {
    throw DataError("cannot prompt with empty passage '" + passage.id + "'");
  }
  if (trimmed(question.text).empty()) {
    throw DataError("cannot prompt with empty question '" + question.id + "'");
  }
  std::ostringstream out;
  out << tmpl.instruction_block << "\n\n";
  for (std::size_t i = 0; i < tmpl.few_shot.size(); ++i) {
    out << renderExample(tmpl.few_shot[i], i + 1) << "\n";
  }
  std::string target = tmpl.target_format;
  replaceAll(target, "{passage}", passage.text);
  replaceAll(target, "{question}", question.text);
  out << target << "\n";
  return out.str();
}

std::string formatAnswers(const std::vector<std::string>& answers) {
  if (answers.empty()) return kNoAnswerSentinelArabic;
  std::ostringstream out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (i > 0) out << '\n';
    out << '"' << answers[i] << '"';
  }
  return out.str();
}

std::vector<std::string> parseModelOutput(const std::string& raw, AuditLog* log) {
  std::vector<std::string> candidates;
  bool sentinel_seen = false;
  bool any_content = false;

  std::istringstream lines(raw);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string body = stripListMarkers(line);
    if (body.empty()) continue;
    any_content = true;
    std::string content;
    if (extractQuoted(body, content)) {
      if (content.empty()) continue;
      if (isSentinel(content)) {
        sentinel_seen = true;
      } else {
        candidates.push_back(content);
      }
    } else if (isSentinel(body)) {
      sentinel_seen = true;
    }
  }

  if (!candidates.empty()) {
    if (sentinel_seen) {
      audit(log, "model output mixes answers with the no-answer sentinel;"
                 " keeping the answers");
    }
    return candidates;
  }
  if (!sentinel_seen && any_content) {
    audit(log, "unparseable model output; treating as no answer");
  }
  return {};
}

std::vector<AnswerSpan> validateSpans(const std::vector<std::string>& candidates,
                                      const corpus::Passage& passage,
                                      const std::string& question_id,
                                      const std::string& source, AuditLog* log) {
  std::string norm_passage = text::normalizeText(passage.text);
  std::vector<AnswerSpan> spans;
  for (const auto& candidate : candidates) {
    std::string norm = text::normalizeText(candidate);
    if (norm.empty() || norm_passage.find(norm) == std::string::npos) {
      audit(log, "question '" + question_id + "': candidate span is not a"
                 " literal quotation of passage '" + passage.id + "'; dropped");
      continue;
    }
    if (spans.size() == kMaxSpans) break;
    AnswerSpan span;
    span.question_id = question_id;
    span.passage_id = passage.id;
    span.rank = static_cast<int>(spans.size() + 1);
    span.text = candidate;
    span.source = source;
    spans.push_back(std::move(span));
  }
  return spans;
}

ExtractionResult ensembleSpans(const std::vector<ExtractionResult>& results,
                               bool drop_contained, const std::string& source) {
  if (results.empty()) {
    throw ConfigError("span ensemble needs at least one extraction result");
  }
  for (const auto& result : results) {
    if (result.question_id != results.front().question_id ||
        result.passage_id != results.front().passage_id) {
      throw DataError("cannot ensemble spans across different (question, passage)"
                      " pairs: '" + results.front().question_id + "'/'" +
                      results.front().passage_id + "' vs '" + result.question_id +
                      "'/'" + result.passage_id + "'");
    }
  }

  // First occurrence wins; equality is on normalized text.
  std::vector<std::pair<std::string, std::string>> kept;  // (normalized, text)
  std::set<std::string> seen;
  for (const auto& result : results) {
    for (const auto& span : result.spans) {
      std::string norm = text::normalizeText(span.text);
      if (seen.insert(norm).second) kept.emplace_back(norm, span.text);
    }
  }

  if (drop_contained) {
    std::vector<std::pair<std::string, std::string>> maximal;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      bool contained = false;
      for (std::size_t j = 0; j < kept.size() && !contained; ++j) {
        if (j != i && kept[j].first.find(kept[i].first) != std::string::npos) {
          contained = true;
        }
      }
      if (!contained) maximal.push_back(kept[i]);
    }
    kept = std::move(maximal);
  }

  ExtractionResult merged;
  merged.question_id = results.front().question_id;
  merged.passage_id = results.front().passage_id;
  for (const auto& [norm, original] : kept) {
    if (merged.spans.size() == kMaxSpans) break;
    AnswerSpan span;
    span.question_id = merged.question_id;
    span.passage_id = merged.passage_id;
    span.rank = static_cast<int>(merged.spans.size() + 1);
    span.text = original;
    span.source = source;
    merged.spans.push_back(std::move(span));
  }
  return merged;
}

void writeSpans(const std::vector<AnswerSpan>& spans, const std::string& path) {
  auto sorted = spans;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const AnswerSpan& a, const AnswerSpan& b) {
                     if (a.question_id != b.question_id) {
                       return a.question_id < b.question_id;
                     }
                     if (a.source != b.source) return a.source < b.source;
                     return a.rank < b.rank;
                   });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open span file for writing: " + path);
  for (const auto& span : sorted) {
    nlohmann::json row{{"qid", span.question_id},
                       {"pc_id", span.passage_id},
                       {"rank", span.rank},
                       {"answer", span.text},
                       {"source", span.source}};
    out << row.dump() << '\n';
  }
  if (!out) throw ConfigError("failed writing span file: " + path);
}

std::vector<AnswerSpan> loadSpans(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open span file: " + path);
  std::vector<AnswerSpan> spans;
  std::map<std::pair<std::string, std::string>, std::set<int>> ranks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON: " +
                      e.what());
    }
    if (!row.is_object() || !row.contains("qid") || !row.contains("pc_id") ||
        !row.contains("rank") || !row.contains("answer") ||
        !row.contains("source") || !row["qid"].is_string() ||
        !row["pc_id"].is_string() || !row["rank"].is_number_integer() ||
        !row["answer"].is_string() || !row["source"].is_string()) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected {\"qid\",\"pc_id\",\"rank\",\"answer\","
                      "\"source\"}");
    }
    AnswerSpan span;
    span.question_id = row["qid"].get<std::string>();
    span.passage_id = row["pc_id"].get<std::string>();
    span.rank = row["rank"].get<int>();
    span.text = row["answer"].get<std::string>();
    span.source = row["source"].get<std::string>();
    if (span.rank < 1) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": rank must be >= 1");
    }
    if (!ranks[{span.question_id, span.source}].insert(span.rank).second) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": duplicate rank for question '" + span.question_id +
                      "' source '" + span.source + "'");
    }
    spans.push_back(std::move(span));
  }
  for (const auto& [key, group] : ranks) {
    if (*group.rbegin() != static_cast<int>(group.size())) {
      throw DataError(path + ": ranks for question '" + key.first +
                      "' source '" + key.second + "' are not contiguous from 1");
    }
  }
  return spans;
}

ExtractionResult extract(ChatClient& client, const PromptTemplate& tmpl,
                         const corpus::Passage& passage,
                         const corpus::Question& question, AuditLog* log) {
  std::string prompt = buildPrompt(tmpl, passage, question);
  std::string raw;
  try {
    raw = client.complete(prompt);
  } catch (const ClientError& e) {
    throw ClientError("question '" + question.id + "': " + e.what());
  }
  ExtractionResult result;
  result.question_id = question.id;
  result.passage_id = passage.id;
  result.raw_output = raw;
  auto candidates = parseModelOutput(raw, log);
  result.spans = validateSpans(candidates, passage, question.id, client.tag(), log);
  return result;
}

}  // namespace quranqa::extraction
