"""End-to-end smoke checks for the python bindings."""

import math
import os

import pytest

import quranqa as qq

DATA_DIR = os.environ.get("QQ_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data", "mini"))


def test_version():
    assert qq.__version__ == "0.1.0"


def test_text_normalization():
    assert qq.normalize_text("قُلْ هُوَ اللَّهُ أَحَدٌ") == "قل هو الله أحد"
    assert qq.normalize_for_search("أَحَد") == "احد"
    assert qq.tokenize("من هم، وما لهم؟") == ["من", "هم", "وما", "لهم"]


def test_token_f1():
    assert qq.token_f1("a a", "a") == pytest.approx(2.0 / 3.0)
    assert qq.token_f1("", "") == 1.0
    assert qq.token_f1("x", "") == 0.0


def test_ranking_metrics():
    assert qq.average_precision_10(["x1", "r1", "x2", "r2"], ["r1", "r2"]) == pytest.approx(0.5)
    assert qq.reciprocal_rank_10(["x1", "x2", "x3", "r"], ["r"]) == pytest.approx(0.25)
    # zero-answer convention: empty output scores 1.0, anything else 0.0
    assert qq.average_precision_10([], []) == 1.0
    assert qq.average_precision_10(["p"], []) == 0.0


def test_partial_average_precision():
    assert qq.partial_average_precision_10(["a b c d e"], ["a b c d f"]) == pytest.approx(0.64)
    assert qq.partial_average_precision_10([], []) == 1.0


def test_report_aggregation():
    report = qq.map_10(
        {"q1": ["r1"], "q2": ["x", "r2"]},
        {"q1": ["r1"], "q2": ["r2"]},
    )
    assert report["measure"] == "map@10"
    assert report["per_question"]["q1"] == pytest.approx(1.0)
    assert report["per_question"]["q2"] == pytest.approx(0.5)
    assert report["aggregate"] == pytest.approx(0.75)


def test_bm25():
    passages = [
        ("p1", "alpha beta gamma delta"),
        ("p2", "epsilon zeta eta theta"),
    ]
    ranked = qq.bm25_rank(passages, "alpha")
    assert [pid for pid, _ in ranked] == ["p1"]
    # equal lengths, single term in one of two docs: score is exactly ln 2
    assert ranked[0][1] == pytest.approx(math.log(2.0), abs=1e-12)


def test_threshold():
    kept = qq.apply_no_answer_threshold([("a", 0.9), ("b", 0.4)], 0.5)
    assert kept == [("a", 0.9)]


def test_fusion():
    rankings = {"m1": [("A", 0.9), ("B", 0.2)], "m2": [("A", 0.8), ("C", 0.3)]}
    fused = qq.fuse_rrf(rankings)
    assert fused[0][0] == "A"
    assert all(0.0 <= score <= 1.0 for _, score in fused)

    solo = qq.fuse_rrf({"m1": [("A", 0.9), ("B", 0.5), ("C", 0.2)]})
    assert [pid for pid, _ in solo] == ["A", "B", "C"]

    averaged = qq.confidence_weighted_fuse(rankings)
    assert averaged[0][0] == "A"

    flat = qq.min_max_normalize([("A", 5.0), ("B", 5.0)])
    assert flat == [("A", 1.0), ("B", 1.0)]


def test_extraction_round_trip():
    answers = ["الله الصمد", "لم يلد"]
    assert qq.parse_model_output(qq.format_answers(answers)) == answers
    assert qq.parse_model_output(qq.format_answers([])) == []

    prompt = qq.build_prompt("قل هو الله أحد", "من هو الصمد؟")
    assert "قل هو الله أحد" in prompt
    assert "من هو الصمد؟" in prompt

    spans = qq.validate_spans(["اللَّهُ الصَّمَدُ", "غير موجود"], "قل هو الله أحد الله الصمد")
    assert spans == ["اللَّهُ الصَّمَدُ"]


def test_validate_corpus_on_bundled_data():
    report = qq.validate_corpus(
        os.path.join(DATA_DIR, "passages.tsv"),
        os.path.join(DATA_DIR, "questions.jsonl"),
        os.path.join(DATA_DIR, "qrels.tsv"),
        os.path.join(DATA_DIR, "gold_spans.jsonl"),
    )
    assert "violations\t0" in report
    assert "passages\t20" in report
