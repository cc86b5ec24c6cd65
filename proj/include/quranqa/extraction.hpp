#pragma once

#include <string>
#include <vector>

#include "quranqa/audit.hpp"
#include "quranqa/corpus.hpp"

namespace quranqa::extraction {

// Sentinel a model must emit when the passage holds no answer. Either
// rendering is recognized on parse; prompts use the Arabic one.
extern const char* const kNoAnswerSentinel;
extern const char* const kNoAnswerSentinelArabic;

struct FewShotExample {
  std::string passage;
  std::string question;
  std::vector<std::string> answers;  // empty list demonstrates abstention
};

struct PromptTemplate {
  std::string instruction_block;
  std::vector<FewShotExample> few_shot;
  // Must contain both {passage} and {question} placeholders.
  std::string target_format;

  // Three examples covering multi-answer, single-answer, and no-answer.
  static PromptTemplate defaultTemplate();
};

// Deterministic rendering: instructions, worked examples, then the target
// slot with the placeholders substituted. Empty passage or question text and
// missing placeholders are rejected.
std::string buildPrompt(const PromptTemplate& tmpl, const corpus::Passage& passage,
                        const corpus::Question& question);

// One answer per line, each wrapped in double quotes; the empty list renders
// as the sentinel. parseModelOutput inverts this for well-formed spans.
std::string formatAnswers(const std::vector<std::string>& answers);

// Pulls quoted candidate spans out of raw model output, tolerating bullets,
// numbering, and surrounding commentary. A sentinel line (bare or quoted)
// yields the empty list; output with neither spans nor sentinel yields the
// empty list with an audit warning.
std::vector<std::string> parseModelOutput(const std::string& raw,
                                          AuditLog* log = nullptr);

struct AnswerSpan {
  std::string question_id;
  std::string passage_id;
  int rank = 0;  // 1-based within one (question, source) group
  std::string text;
  std::string source;  // producing system or ensemble tag
};

// Keeps candidates that survive the literal-quotation rule: the normalized
// candidate must be a substring of the normalized passage. Rejected
// candidates are dropped with an audit warning; survivors get ranks 1..n in
// candidate order, capped at 10.
std::vector<AnswerSpan> validateSpans(const std::vector<std::string>& candidates,
                                      const corpus::Passage& passage,
                                      const std::string& question_id,
                                      const std::string& source,
                                      AuditLog* log = nullptr);

struct ExtractionResult {
  std::string question_id;
  std::string passage_id;
  std::vector<AnswerSpan> spans;
  std::string raw_output;  // retained verbatim for audit
};

// Union of spans across results for the same (question, passage), first
// occurrence wins, duplicates collapse on normalized text. Containment does
// not deduplicate unless drop_contained is set, in which case spans whose
// normalized text sits strictly inside another kept span are removed. Ranks
// are reassigned 1..n under the ensemble source tag, capped at 10.
ExtractionResult ensembleSpans(const std::vector<ExtractionResult>& results,
                               bool drop_contained = false,
                               const std::string& source = "ensemble");

// JSONL rows {"qid","pc_id","rank","answer","source"}, ordered by qid,
// source, rank.
void writeSpans(const std::vector<AnswerSpan>& spans, const std::string& path);
std::vector<AnswerSpan> loadSpans(const std::string& path);

class ChatClient;

// Full single-model extraction for one (passage, question) pair: build the
// prompt, call the client, parse, validate. Client failures are rethrown as
// ClientError naming the question; the raw model output is retained.
ExtractionResult extract(ChatClient& client, const PromptTemplate& tmpl,
                         const corpus::Passage& passage,
                         const corpus::Question& question,
                         AuditLog* log = nullptr);

}  // namespace quranqa::extraction
