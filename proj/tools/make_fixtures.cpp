// Emits mock-client fixture files for a corpus: one JSONL row per reading
// pair, keyed by the SHA-256 of the exact prompt the pipeline builds. Four
// behavior profiles are written so tests can replay a faithful model, an
// over-eager one, and two complementary partial models.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "quranqa/corpus.hpp"
#include "quranqa/digest.hpp"
#include "quranqa/errors.hpp"
#include "quranqa/extraction.hpp"

namespace fs = std::filesystem;
using namespace quranqa;

namespace {

std::string firstTwoWords(const std::string& text) {
  std::size_t first = text.find(' ');
  if (first == std::string::npos) return text;
  std::size_t second = text.find(' ', first + 1);
  return second == std::string::npos ? text : text.substr(0, second);
}

struct Pair {
  std::string qid;
  std::string pid;
  std::vector<std::string> answers;  // non-empty gold answers, file order
};

void writeFixture(const fs::path& path,
                  const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [key, response] : rows) {
    nlohmann::json row{{"prompt_sha256", key}, {"response", response}};
    out << row.dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate mock chat-completion fixtures"};
  std::string collection_path, questions_path, gold_path, out_dir;
  app.add_option("--collection", collection_path)->required();
  app.add_option("--questions", questions_path)->required();
  app.add_option("--gold", gold_path)->required();
  app.add_option("--out-dir", out_dir)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    auto collection = corpus::loadCollection(collection_path);
    auto questions = corpus::loadQuestions(questions_path);
    corpus::Judgments judgments;
    corpus::loadGoldSpans(gold_path, collection, judgments);

    std::vector<Pair> pairs;
    for (const auto& [qid, set] : judgments) {
      if (set.gold_spans.empty()) continue;
      std::set<std::string> seen;
      for (const auto& span : set.gold_spans) {
        if (seen.insert(span.passage_id).second) {
          pairs.push_back(Pair{qid, span.passage_id, {}});
        }
      }
      for (const auto& span : set.gold_spans) {
        if (span.answer.empty()) continue;
        for (auto& pair : pairs) {
          if (pair.qid == qid && pair.pid == span.passage_id) {
            pair.answers.push_back(span.answer);
          }
        }
      }
    }

    auto tmpl = extraction::PromptTemplate::defaultTemplate();
    std::vector<std::pair<std::string, std::string>> perfect, answer_all,
        partial_a, partial_b;
    for (const auto& pair : pairs) {
      const auto& passage = collection.at(pair.pid);
      const auto* question = questions.find(pair.qid);
      if (!question) {
        throw DataError("gold spans reference unknown question '" + pair.qid + "'");
      }
      auto key = digest::sha256Hex(
          extraction::buildPrompt(tmpl, passage, *question));
      const auto& answers = pair.answers;

      perfect.emplace_back(key, extraction::formatAnswers(answers));

      if (answers.empty()) {
        answer_all.emplace_back(
            key, extraction::formatAnswers({firstTwoWords(passage.text)}));
      } else {
        answer_all.emplace_back(key, extraction::formatAnswers(answers));
      }

      std::size_t head = (answers.size() + 1) / 2;
      std::vector<std::string> first_half(answers.begin(), answers.begin() + head);
      std::vector<std::string> second_half =
          answers.size() <= 1 ? answers
                              : std::vector<std::string>(answers.begin() + head,
                                                         answers.end());
      partial_a.emplace_back(key, extraction::formatAnswers(first_half));
      partial_b.emplace_back(key, extraction::formatAnswers(second_half));
    }

    fs::create_directories(out_dir);
    writeFixture(fs::path(out_dir) / "perfect.jsonl", perfect);
    writeFixture(fs::path(out_dir) / "answer_all.jsonl", answer_all);
    writeFixture(fs::path(out_dir) / "partial_a.jsonl", partial_a);
    writeFixture(fs::path(out_dir) / "partial_b.jsonl", partial_b);
    std::cout << "wrote 4 fixture files for " << pairs.size() << " pairs\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
