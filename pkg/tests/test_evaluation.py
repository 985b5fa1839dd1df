"""Harness tests: dataset generation, loaders, metrics, full runs."""
from __future__ import annotations

import json
import math
import random
from pathlib import Path

import numpy as np
import pytest

from faceoracle.agent import Agent, ChatSession, plan
from faceoracle.corpus import Corpus
from faceoracle.errors import EmptyEvaluation, NoImages, ParseError
from faceoracle.evaluation import (
    EvalSample,
    MetricsReport,
    TurnLog,
    builtin_corpus_dir,
    builtin_type2_path,
    canonical_question,
    collect_turn_logs,
    compute_distance_metrics,
    compute_report,
    compute_tsa,
    generate_type1_dataset,
    load_dataset,
    load_type2_dataset,
    run_evaluation,
    sample_to_dict,
    save_dataset,
)
from faceoracle.llm_gateway import ScriptedGateway
from faceoracle.pipeline import ingest_directory
from faceoracle.vector_index import VectorIndex
from helpers import cosine_oracle, embed_oracle, make_gray_ppm

TABLE2_QUESTION = "What is unified quality score?"
TABLE2_ANSWER = (
    "A quantitative expression of the predicted verification performance of the "
    "biometric sample. Valid values for Quality Score are integers between 0 and "
    "100, where higher values indicate better quality."
)


@pytest.fixture
def image_dir(tmp_path) -> Path:
    rng = random.Random(2)
    for i in range(6):
        w, h = rng.randint(20, 40), rng.randint(20, 40)
        luma = np.array(
            [rng.randrange(256) for _ in range(w * h)], dtype=np.uint8
        ).reshape(h, w)
        (tmp_path / f"img-{i}.ppm").write_bytes(make_gray_ppm(w, h, luma))
    return tmp_path


def _grounded_agent() -> Agent:
    corpus = Corpus()
    index = VectorIndex()
    ingest_directory(corpus, index, builtin_corpus_dir())
    return Agent(index, ScriptedGateway())


# --- samples ---

def test_sample_invariants():
    with pytest.raises(ValueError):
        EvalSample(kind="type1", question="q", answer="a")  # missing image/tools
    with pytest.raises(ValueError):
        EvalSample(kind="type2", question="q", answer="a", image="x.png")
    with pytest.raises(ValueError):
        EvalSample(kind="type3", question="q", answer="a")


# --- type1 generation ---

def test_generate_type1_deterministic(image_dir):
    first = generate_type1_dataset(image_dir, 40, seed=9)
    second = generate_type1_dataset(image_dir, 40, seed=9)
    assert first == second
    assert len(first) == 40
    assert generate_type1_dataset(image_dir, 10, seed=10) != generate_type1_dataset(
        image_dir, 10, seed=11
    )


def test_generate_type1_shapes(image_dir):
    samples = generate_type1_dataset(image_dir, 30, seed=1)
    for sample in samples:
        assert sample.kind == "type1"
        assert sample.image in {f"img-{i}.ppm" for i in range(6)}
        assert 1 <= len(sample.expected_tools) <= 3
        assert "measure has the value of" in sample.answer


def test_canonical_question_template():
    assert canonical_question(["sharpness", "dynamic range"]) == (
        "what are the sharpness and dynamic range quality values of this image?"
    )
    assert canonical_question(["sharpness"]) == (
        "what is the sharpness quality value of this image?"
    )
    assert canonical_question(["a", "b", "c"]) == (
        "what are the a, b and c quality values of this image?"
    )


def test_generate_type1_no_images(tmp_path):
    with pytest.raises(NoImages):
        generate_type1_dataset(tmp_path, 5, seed=0)


def test_generate_type1_uses_sidecar_annotation(tmp_path):
    luma = np.zeros((32, 32), dtype=np.uint8)
    luma[4:16, 4:20] = 255  # saturate exactly the sidecar region
    (tmp_path / "one.ppm").write_bytes(make_gray_ppm(32, 32, luma))
    (tmp_path / "one.facebox").write_text("4 4 16 12\n")
    rng_hits = [
        s
        for s in generate_type1_dataset(tmp_path, 60, seed=3)
        if s.expected_tools == ("over_exposure",)
    ]
    assert rng_hits, "seeded generation never drew a single-measure over_exposure sample"
    assert "the value of 0" in rng_hits[0].answer  # fully saturated region


# --- dataset files ---

def test_table2_sample_round_trip(tmp_path):
    sample = EvalSample(kind="type2", question=TABLE2_QUESTION, answer=TABLE2_ANSWER)
    path = tmp_path / "ds.jsonl"
    save_dataset([sample], path)
    loaded = load_type2_dataset(path)
    assert loaded == [sample]
    assert sample_to_dict(loaded[0]) == sample_to_dict(sample)


def test_empty_file_loads_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_type2_dataset(path) == []


def test_type1_record_in_type2_file_rejected(tmp_path, image_dir):
    samples = generate_type1_dataset(image_dir, 1, seed=0)
    path = tmp_path / "mixed.jsonl"
    save_dataset(
        [EvalSample(kind="type2", question="q", answer="a"), samples[0]], path
    )
    with pytest.raises(ParseError):
        load_type2_dataset(path)
    assert len(load_dataset(path)) == 2  # the generic loader accepts both kinds


def test_malformed_line_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind": "type2", "question": "q"}\n')  # missing answer
    with pytest.raises(ParseError):
        load_dataset(path)


def test_shipped_type2_dataset():
    samples = load_type2_dataset(builtin_type2_path())
    assert len(samples) == 100
    assert all(s.kind == "type2" for s in samples)
    # the headline concept definition ships verbatim
    assert any(
        s.question == TABLE2_QUESTION and "integers between 0 and 100" in s.answer
        for s in samples
    )
    # every question must route to retrieval without an attached image
    session = ChatSession(session_id="routing-check")
    for sample in samples:
        p = plan(sample.question, session)
        assert p.tool_calls == ()
        assert p.retrieval_queries


# --- TSA ---

def _type1_log(expected, selected) -> TurnLog:
    sample = EvalSample(
        kind="type1",
        question="q",
        answer="a",
        image="x.ppm",
        expected_tools=tuple(expected),
    )
    return TurnLog(
        sample=sample,
        selected_tools=tuple(selected),
        answer_text="a",
        context_text="",
    )


def test_tsa_all_correct():
    logs = [_type1_log(["sharpness"], ["sharpness"]) for _ in range(10)]
    assert compute_tsa(logs) == 1.0


def test_tsa_97_of_100():
    logs = [_type1_log(["sharpness"], ["sharpness"]) for _ in range(97)]
    logs += [_type1_log(["sharpness"], []) for _ in range(3)]
    assert compute_tsa(logs) == pytest.approx(0.97)


def test_tsa_partial_sample_counts_per_call():
    logs = [_type1_log(["dynamic_range", "sharpness"], ["dynamic_range"])]
    assert compute_tsa(logs) == 0.5


def test_tsa_extraneous_selections_ignored():
    logs = [_type1_log(["sharpness"], ["sharpness", "pose", "dynamic_range"])]
    assert compute_tsa(logs) == 1.0


def test_tsa_empty():
    with pytest.raises(EmptyEvaluation):
        compute_tsa([])


# --- distance metrics ---

def _type2_log(question, truth, answer, context) -> TurnLog:
    return TurnLog(
        sample=EvalSample(kind="type2", question=question, answer=truth),
        selected_tools=(),
        answer_text=answer,
        context_text=context,
    )


def test_ard_zero_when_echoing_truth():
    logs = [_type2_log("q", "the exact truth", "the exact truth", "ctx words")]
    _, _, ard = compute_distance_metrics(logs)
    assert ard == pytest.approx(0.0, abs=1e-9)


def test_acd_zero_when_answer_equals_context():
    logs = [_type2_log("q", "truth", "same words here", "same words here")]
    acd, _, _ = compute_distance_metrics(logs)
    assert acd == pytest.approx(0.0, abs=1e-9)


def test_empty_context_contributes_max_distance():
    logs = [_type2_log("q", "truth words", "answer words", "")]
    acd, qcd, _ = compute_distance_metrics(logs)
    assert acd == 2.0
    assert qcd == 2.0


def test_two_sample_fixture_matches_hand_oracle():
    # spreadsheet-style: embed with the standalone oracle, average by hand
    rows = [
        ("what is dynamic range", "spread of luminance levels",
         "the tonal spread of levels", "dynamic range is the spread of levels"),
        ("define sharpness", "fine detail strength",
         "sharpness reflects focus detail", "sharpness measures focus and detail"),
    ]
    logs = [_type2_log(*row) for row in rows]
    acd, qcd, ard = compute_distance_metrics(logs)

    expected_ard = math.fsum(
        cosine_oracle(embed_oracle(answer), embed_oracle(truth))
        for _, truth, answer, _ in rows
    ) / len(rows)
    expected_acd = math.fsum(
        cosine_oracle(embed_oracle(answer), embed_oracle(ctx))
        for _, _, answer, ctx in rows
    ) / len(rows)
    expected_qcd = math.fsum(
        cosine_oracle(embed_oracle(question), embed_oracle(ctx))
        for question, _, _, ctx in rows
    ) / len(rows)
    assert ard == pytest.approx(expected_ard, abs=1e-12)
    assert acd == pytest.approx(expected_acd, abs=1e-12)
    assert qcd == pytest.approx(expected_qcd, abs=1e-12)


def test_distance_metrics_need_type2():
    with pytest.raises(EmptyEvaluation):
        compute_distance_metrics([_type1_log(["sharpness"], ["sharpness"])])


def test_ard_token_disjoint_answer_is_far():
    truth = "histogram entropy summarizes tonal spread"
    answer = "zebra quartz violin umbrella"  # shares no tokens with the truth
    logs = [_type2_log("q", truth, answer, "some context")]
    _, _, ard = compute_distance_metrics(logs)
    expected = cosine_oracle(embed_oracle(answer), embed_oracle(truth))
    assert ard == pytest.approx(expected, abs=1e-12)
    assert ard > 0.9


# --- full runs ---

def test_run_evaluation_type1_only(image_dir):
    samples = generate_type1_dataset(image_dir, 20, seed=4)
    report = run_evaluation(samples, Agent(VectorIndex(), ScriptedGateway()), image_dir)
    assert report.tsa == 1.0
    assert report.acd is None and report.qcd is None and report.ard is None
    assert report.type1_count == 20 and report.type2_count == 0
    assert '"tsa": 1.0' in report.to_json()
    assert "-" in report.to_table()


def test_run_evaluation_empty_dataset():
    with pytest.raises(EmptyEvaluation):
        run_evaluation([], Agent(VectorIndex(), ScriptedGateway()))


def test_run_evaluation_shipped_type2_deterministic():
    agent = _grounded_agent()
    samples = load_type2_dataset(builtin_type2_path())[:20]
    first = run_evaluation(samples, agent)
    second = run_evaluation(samples, agent)
    assert first.to_json() == second.to_json()
    assert first.to_table() == second.to_table()
    assert first.tsa is None
    assert 0 <= first.acd <= 2 and 0 <= first.qcd <= 2 and 0 <= first.ard <= 2


def test_report_serialization_shapes():
    report = MetricsReport(tsa=1.0, acd=None, qcd=None, ard=None, type1_count=5, type2_count=0)
    payload = json.loads(report.to_json())
    assert payload == {
        "tsa": 1.0, "acd": None, "qcd": None, "ard": None,
        "counts": {"type1": 5, "type2": 0},
    }
    table = report.to_table()
    lines = table.splitlines()
    assert lines[0].split() == ["Method", "TSA", "ACD", "QCD", "ARD"]
    assert lines[1].split() == ["faceoracle", "1.000", "-", "-", "-"]


def test_collect_turn_logs_requires_image_dir(image_dir):
    samples = generate_type1_dataset(image_dir, 1, seed=0)
    with pytest.raises(ValueError):
        collect_turn_logs(samples, Agent(VectorIndex(), ScriptedGateway()), None)


def test_compute_report_mixed(image_dir):
    agent = _grounded_agent()
    samples = generate_type1_dataset(image_dir, 10, seed=6)
    samples += load_type2_dataset(builtin_type2_path())[:10]
    logs = collect_turn_logs(samples, agent, image_dir)
    report = compute_report(logs)
    assert report.tsa == 1.0
    assert report.type1_count == 10 and report.type2_count == 10
    assert report.acd is not None
