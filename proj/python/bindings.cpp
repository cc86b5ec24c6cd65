// Python bindings over the core operations: text normalization, BM25
// retrieval, fusion, span extraction round trips, and the ranking metrics.
// Inputs and outputs are plain Python containers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "quranqa/corpus.hpp"
#include "quranqa/digest.hpp"
#include "quranqa/extraction.hpp"
#include "quranqa/fusion.hpp"
#include "quranqa/metrics.hpp"
#include "quranqa/pipeline.hpp"
#include "quranqa/retrieval.hpp"
#include "quranqa/text.hpp"

namespace py = pybind11;
using namespace quranqa;

namespace {

using Pairs = std::vector<std::pair<std::string, double>>;
using RankingsIn = std::map<std::string, Pairs>;

corpus::Passage makePassage(const std::string& id, const std::string& raw) {
  corpus::Passage p;
  p.id = id;
  p.text = raw;
  p.normalized_text = text::normalizeText(p.text);
  p.length_tokens = text::tokenize(p.text).size();
  return p;
}

retrieval::Ranking toRanking(const std::string& system, const Pairs& entries) {
  std::vector<retrieval::RankedEntry> converted;
  converted.reserve(entries.size());
  for (const auto& [pid, score] : entries) converted.push_back({pid, score});
  const int cutoff = std::max<int>(10, static_cast<int>(converted.size()));
  return retrieval::finalizeRanking("q", system, std::move(converted), cutoff);
}

Pairs fromFused(const fusion::FusedRanking& fused) {
  Pairs out;
  for (const auto& e : fused.entries) out.emplace_back(e.passage_id, e.score);
  return out;
}

metrics::RelevantSets toRelevantSets(
    const std::map<std::string, std::vector<std::string>>& judgments) {
  metrics::RelevantSets sets;
  for (const auto& [qid, ids] : judgments)
    sets[qid] = std::set<std::string>(ids.begin(), ids.end());
  return sets;
}

py::dict reportToDict(const metrics::MetricReport& report) {
  py::dict out;
  out["measure"] = report.measure;
  out["per_question"] = report.per_question;
  out["aggregate"] = report.aggregate;
  return out;
}

fusion::FusionConfig fusionConfig(const std::map<std::string, double>& weights,
                                  double rrf_k, double decay_lambda,
                                  double boost_threshold, double boost_factor,
                                  int cutoff) {
  fusion::FusionConfig cfg;
  cfg.model_weights = weights;
  cfg.rrf_k = rrf_k;
  cfg.decay_lambda = decay_lambda;
  cfg.boost_threshold = boost_threshold;
  cfg.boost_factor = boost_factor;
  cfg.cutoff = cutoff;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Quranic QA pipeline core operations";
  m.attr("__version__") = pipeline::kArtifactVersion;

  // text
  m.def("normalize_text", [](const std::string& s) { return text::normalizeText(s); },
        py::arg("text"),
        "Canonical text view: diacritics stripped, hamza forms composed, "
        "whitespace collapsed.");
  m.def("normalize_for_search",
        [](const std::string& s) { return text::normalizeForSearch(s); },
        py::arg("text"),
        "normalize_text plus letter unification used by retrieval.");
  m.def("tokenize", [](const std::string& s) { return text::tokenize(s); },
        py::arg("text"), "Search-normalized tokens.");
  m.def("sha256_hex", [](const std::string& s) { return digest::sha256Hex(s); },
        py::arg("data"));

  // retrieval
  m.def(
      "bm25_rank",
      [](const std::vector<std::pair<std::string, std::string>>& passages,
         const std::string& query, double k1, double b, int cutoff) {
        std::vector<corpus::Passage> built;
        built.reserve(passages.size());
        for (const auto& [id, raw] : passages) built.push_back(makePassage(id, raw));
        corpus::Collection collection(std::move(built));
        auto index = retrieval::InvertedIndex::build(collection);
        corpus::Question question;
        question.id = "q";
        question.text = query;
        auto ranking = retrieval::bm25Retrieve(index, question, {k1, b}, cutoff);
        Pairs out;
        for (const auto& e : ranking.entries) out.emplace_back(e.passage_id, e.score);
        return out;
      },
      py::arg("passages"), py::arg("query"), py::arg("k1") = 1.2,
      py::arg("b") = 0.75, py::arg("cutoff") = 10,
      "Okapi BM25 over (id, text) passages; returns (id, score) sorted by "
      "score, zero-score passages excluded.");
  m.def(
      "apply_no_answer_threshold",
      [](const Pairs& entries, double tau) {
        auto kept = retrieval::applyNoAnswerThreshold(toRanking("s", entries), tau);
        Pairs out;
        for (const auto& e : kept.entries) out.emplace_back(e.passage_id, e.score);
        return out;
      },
      py::arg("ranking"), py::arg("tau"),
      "Drops entries scoring below tau, preserving order.");

  // fusion
  m.def(
      "fuse_rrf",
      [](const RankingsIn& rankings, const std::map<std::string, double>& weights,
         double rrf_k, double decay_lambda, double boost_threshold,
         double boost_factor, int cutoff) {
        auto cfg = fusionConfig(weights, rrf_k, decay_lambda, boost_threshold,
                                boost_factor, cutoff);
        std::vector<retrieval::Ranking> converted;
        for (const auto& [system, entries] : rankings)
          converted.push_back(toRanking(system, entries));
        return fromFused(fusion::fuseRRF(converted, cfg));
      },
      py::arg("rankings"), py::arg("weights") = std::map<std::string, double>{},
      py::arg("rrf_k") = 60.0, py::arg("decay_lambda") = 0.1,
      py::arg("boost_threshold") = 0.8, py::arg("boost_factor") = 1.25,
      py::arg("cutoff") = 10,
      "Enhanced reciprocal-rank fusion over {system: [(passage_id, score)]}.");
  m.def(
      "confidence_weighted_fuse",
      [](const RankingsIn& rankings, const std::map<std::string, double>& weights,
         int cutoff) {
        fusion::FusionConfig cfg;
        cfg.model_weights = weights;
        cfg.cutoff = cutoff;
        cfg.validate();
        std::vector<retrieval::Ranking> converted;
        for (const auto& [system, entries] : rankings)
          converted.push_back(fusion::minMaxNormalize(toRanking(system, entries)));
        return fromFused(fusion::confidenceWeightedFuse(converted, cfg));
      },
      py::arg("rankings"), py::arg("weights") = std::map<std::string, double>{},
      py::arg("cutoff") = 10,
      "Confidence-weighted score averaging; each input ranking is min-max "
      "normalized first.");
  m.def(
      "min_max_normalize",
      [](const Pairs& entries) {
        auto normed = fusion::minMaxNormalize(toRanking("s", entries));
        Pairs out;
        for (const auto& e : normed.entries) out.emplace_back(e.passage_id, e.score);
        return out;
      },
      py::arg("ranking"));

  // metrics
  m.def("token_f1",
        [](const std::string& pred, const std::string& gold) {
          return metrics::tokenF1(pred, gold);
        },
        py::arg("predicted"), py::arg("gold"));
  m.def("average_precision_10",
        [](const std::vector<std::string>& ranked,
           const std::vector<std::string>& relevant) {
          return metrics::averagePrecision10(
              ranked, std::set<std::string>(relevant.begin(), relevant.end()));
        },
        py::arg("ranked"), py::arg("relevant"));
  m.def("reciprocal_rank_10",
        [](const std::vector<std::string>& ranked,
           const std::vector<std::string>& relevant) {
          return metrics::reciprocalRank10(
              ranked, std::set<std::string>(relevant.begin(), relevant.end()));
        },
        py::arg("ranked"), py::arg("relevant"));
  m.def("partial_average_precision_10",
        [](const std::vector<std::string>& predicted,
           const std::vector<std::string>& gold) {
          return metrics::partialAveragePrecision10(predicted, gold);
        },
        py::arg("predicted_spans"), py::arg("gold_spans"));
  m.def(
      "map_10",
      [](const metrics::RankedIds& rankings,
         const std::map<std::string, std::vector<std::string>>& judgments) {
        return reportToDict(metrics::map10(rankings, toRelevantSets(judgments)));
      },
      py::arg("rankings"), py::arg("judgments"));
  m.def(
      "mrr_10",
      [](const metrics::RankedIds& rankings,
         const std::map<std::string, std::vector<std::string>>& judgments) {
        return reportToDict(metrics::mrr10(rankings, toRelevantSets(judgments)));
      },
      py::arg("rankings"), py::arg("judgments"));
  m.def(
      "pap_10",
      [](const metrics::SpanLists& predictions, const metrics::SpanLists& gold) {
        return reportToDict(metrics::pap10(predictions, gold));
      },
      py::arg("predictions"), py::arg("gold"));

  // extraction
  m.def("build_prompt",
        [](const std::string& passage_text, const std::string& question_text) {
          auto passage = makePassage("p", passage_text);
          corpus::Question question;
          question.id = "q";
          question.text = question_text;
          return extraction::buildPrompt(extraction::PromptTemplate::defaultTemplate(),
                                         passage, question);
        },
        py::arg("passage"), py::arg("question"),
        "Few-shot prompt for one (passage, question) pair.");
  m.def("format_answers",
        [](const std::vector<std::string>& answers) {
          return extraction::formatAnswers(answers);
        },
        py::arg("answers"));
  m.def("parse_model_output",
        [](const std::string& raw) { return extraction::parseModelOutput(raw); },
        py::arg("raw"));
  m.def(
      "validate_spans",
      [](const std::vector<std::string>& candidates, const std::string& passage_text) {
        auto passage = makePassage("p", passage_text);
        auto spans = extraction::validateSpans(candidates, passage, "q", "py");
        std::vector<std::string> out;
        for (const auto& span : spans) out.push_back(span.text);
        return out;
      },
      py::arg("candidates"), py::arg("passage"),
      "Keeps candidates whose normalized text is a substring of the "
      "normalized passage.");

  // corpus
  m.def(
      "validate_corpus",
      [](const std::string& passages, const std::string& questions,
         const std::string& judgments, const std::string& gold_spans) {
        auto collection = corpus::loadCollection(passages);
        auto question_set = corpus::loadQuestions(questions);
        auto judged = corpus::loadJudgments(judgments, collection);
        corpus::loadGoldSpans(gold_spans, collection, judged);
        return corpus::validateCorpus(collection, judged, question_set).toText();
      },
      py::arg("passages"), py::arg("questions"), py::arg("judgments"),
      py::arg("gold_spans"),
      "Referential validation report over the four corpus files.");
}
