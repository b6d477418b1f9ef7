import dataclasses
import json
import threading

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trajectory
from tracexai.errors import DuplicateRunId, JudgeParse, JudgeTransport, MalformedRecord, MissingOutcome
from tracexai.rubric_judge import (
    FlagVector,
    JudgeConfig,
    aggregate,
    build_judge_request,
    flags_from_jsonl,
    flags_to_jsonl,
    judge_llm,
    judge_llm_corpus,
    judge_rules,
    matrix_from_ground_truth,
    parse_judge_reply,
)
from tracexai.rubrics import RUBRIC_IDS, RUBRICS, canonical_order
from tracexai.synth_env import FaultSpec, OutcomeModel, generate_corpus
from tracexai.trace_model import Action, Observation, Outcome, Step


def _reply(verdict):
    return {"choices": [{"message": {"role": "assistant", "content": json.dumps(verdict)}}]}


def _stub(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


CFG = JudgeConfig(endpoint="http://judge.test/v1/chat/completions", model="stub", backoff=0.0)


def test_rubric_registry():
    assert RUBRIC_IDS == (
        "intent_alignment", "plan_adherence", "tool_correctness",
        "tool_choice_accuracy", "state_tracking_consistency", "error_recovery",
    )
    assert all(r.description for r in RUBRICS)
    assert canonical_order(["error_recovery", "intent_alignment"]) == ["intent_alignment", "error_recovery"]
    with pytest.raises(ValueError):
        canonical_order(["nope"])


def test_clean_trace_has_no_flags():
    corpus, truth = generate_corpus(20, FaultSpec({}, seed=4), OutcomeModel())
    for t in corpus:
        assert judge_rules(t).flags == {r: 0 for r in RUBRIC_IDS}


def test_wrong_tool_marker_detected():
    corpus, truth = generate_corpus(20, FaultSpec({"tool_choice_accuracy": 1.0}, seed=4), OutcomeModel())
    for t in corpus:
        flags = judge_rules(t).flags
        assert flags["tool_choice_accuracy"] == 1
        assert flags == truth.flags(t.run_id)


def test_unrecovered_error_flags_error_recovery():
    steps = [
        Step(0, {}, Action("message"), None),
        Step(1, {}, Action("tool_call", "book", {}), Observation("tool_result", {"error": "timeout"}, True)),
        Step(2, {}, Action("message", rationale="sorry"), None),
    ]
    assert judge_rules(make_trajectory(steps=steps)).flags["error_recovery"] == 1
    retried = steps[:2] + [
        Step(2, {}, Action("tool_call", "book", {}), Observation("tool_result", {"status": "ok"})),
    ]
    assert judge_rules(make_trajectory(steps=retried)).flags["error_recovery"] == 0


def test_rules_match_ground_truth(small_corpus):
    corpus, truth = small_corpus[:2]
    for t in corpus:
        assert judge_rules(t).flags == truth.flags(t.run_id)


def test_rules_ignore_outcome(small_corpus):
    t = small_corpus[0][0]
    flipped = dataclasses.replace(t, outcome=Outcome(not t.outcome.success, 1.0 if not t.outcome.success else 0.0))
    assert judge_rules(t) == judge_rules(flipped)
    assert build_judge_request(t, RUBRIC_IDS, CFG) == build_judge_request(flipped, RUBRIC_IDS, CFG)


def test_rules_subset():
    fv = judge_rules(make_trajectory(), ["error_recovery"])
    assert fv.flags == {"error_recovery": 0}


def test_conforming_reply():
    verdict = {r: i % 2 for i, r in enumerate(RUBRIC_IDS)}
    client = _stub(lambda req: httpx.Response(200, json=_reply(verdict)))
    assert judge_llm(make_trajectory(), RUBRIC_IDS, CFG, client).flags == verdict


@pytest.mark.parametrize(
    "body",
    [
        b"not json",
        json.dumps({"choices": []}).encode(),
        json.dumps(_reply({"intent_alignment": 1})).encode(),
        json.dumps(_reply({r: 2 for r in RUBRIC_IDS})).encode(),
        json.dumps(_reply({r: True for r in RUBRIC_IDS})).encode(),
        json.dumps(_reply({**{r: 0 for r in RUBRIC_IDS}, "extra": 0})).encode(),
        json.dumps({"choices": [{"message": {"content": "Sure! intent_alignment: 1"}}]}).encode(),
        json.dumps({"choices": [{"message": {"content": "[0, 1]"}}]}).encode(),
    ],
)
def test_malformed_replies_raise(body):
    client = _stub(lambda req: httpx.Response(200, content=body))
    with pytest.raises(JudgeParse):
        judge_llm(make_trajectory(), RUBRIC_IDS, CFG, client)


def test_request_excludes_outcome(small_corpus):
    captured = []

    def handler(req):
        captured.append(json.loads(req.content))
        return httpx.Response(200, json=_reply({r: 0 for r in RUBRIC_IDS}))

    for t in small_corpus[0][:10]:
        judge_llm(t, RUBRIC_IDS, CFG, _stub(handler))
    assert len(captured) == 10
    for body in captured:
        assert body["temperature"] == 0.1
        user = body["messages"][1]["content"]
        trace = json.loads(user.split("\n", 1)[1])
        assert "outcome" not in trace and "meta" not in trace
        assert '"outcome"' not in json.dumps(body)


def test_retries_then_succeeds():
    calls = []

    def handler(req):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503, text="busy")
        return httpx.Response(200, json=_reply({r: 0 for r in RUBRIC_IDS}))

    judge_llm(make_trajectory(), RUBRIC_IDS, CFG, _stub(handler))
    assert len(calls) == 3


def test_retry_budget_exhausted():
    client = _stub(lambda req: httpx.Response(500, text="down"))
    with pytest.raises(JudgeTransport) as exc:
        judge_llm(make_trajectory(), RUBRIC_IDS, JudgeConfig("http://x", "m", retry_budget=2, backoff=0.0), client)
    assert exc.value.status == 500


def test_client_error_not_retried():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401, text="no")

    with pytest.raises(JudgeTransport):
        judge_llm(make_trajectory(), RUBRIC_IDS, CFG, _stub(handler))
    assert len(calls) == 1


def test_transport_failure():
    def handler(req):
        raise httpx.ConnectError("refused")

    with pytest.raises(JudgeTransport):
        judge_llm(make_trajectory(), RUBRIC_IDS, JudgeConfig("http://x", "m", retry_budget=1, backoff=0.0),
                  _stub(handler))


def test_corpus_order_and_concurrency(small_corpus, tmp_path):
    corpus, truth = small_corpus[:2]
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def handler(req):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        run = json.loads(json.loads(req.content)["messages"][1]["content"].split("\n", 1)[1])
        verdict = truth.flags(run["run_id"])
        with lock:
            state["now"] -= 1
        return httpx.Response(200, json=_reply(verdict))

    cfg = JudgeConfig("http://x", "m", max_in_flight=3, audit_path=str(tmp_path / "audit.jsonl"))
    vectors = judge_llm_corpus(corpus[:40], RUBRIC_IDS, cfg, _stub(handler))
    assert [v.run_id for v in vectors] == [t.run_id for t in corpus[:40]]
    assert all(v.flags == truth.flags(v.run_id) for v in vectors)
    assert state["peak"] <= 3
    audit = (tmp_path / "audit.jsonl").read_text().splitlines()
    assert len(audit) == 40


def test_judge_config_defaults_and_env():
    cfg = JudgeConfig.from_env({"JUDGE_ENDPOINT": "http://e", "JUDGE_MODEL": "m", "JUDGE_API_KEY": "k"})
    assert (cfg.endpoint, cfg.model, cfg.api_key, cfg.temperature) == ("http://e", "m", "k", 0.1)
    with pytest.raises(ValueError):
        JudgeConfig("http://e", "m", temperature=-0.1)


def test_aggregate():
    vecs = [FlagVector(f"r{i}", {r: i % 2 for r in RUBRIC_IDS}) for i in range(3)]
    m = aggregate(vecs, {f"r{i}": Outcome(i == 1, 1.0 if i == 1 else 0.0) for i in range(3)})
    assert len(m) == 3 and m.run_ids == ("r0", "r1", "r2")
    assert m.success.tolist() == [False, True, False]
    with pytest.raises(MissingOutcome):
        aggregate(vecs, {"r0": True, "r1": False})
    with pytest.raises(DuplicateRunId):
        aggregate(vecs + vecs[:1], {f"r{i}": True for i in range(3)})
    empty = aggregate([], {})
    assert len(empty) == 0 and empty.flags.shape == (0, 6)


def test_flag_vector_validation():
    with pytest.raises(ValueError):
        FlagVector("r", {"intent_alignment": 2})
    with pytest.raises(ValueError):
        FlagVector("r", {"intent_alignment": True})
    with pytest.raises(ValueError):
        FlagVector("r", {"bogus": 0})


def test_flags_jsonl_round_trip(small_corpus):
    m = matrix_from_ground_truth(small_corpus[1])
    vectors = m.vectors()
    assert flags_from_jsonl(flags_to_jsonl(vectors)) == vectors
    with pytest.raises(MalformedRecord):
        flags_from_jsonl(b'{"run_id": "x"}\n')


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(30))))
def test_rules_order_independent(small_corpus, perm):
    corpus = small_corpus[0][:30]
    forward = {t.run_id: judge_rules(t) for t in corpus}
    shuffled = {corpus[i].run_id: judge_rules(corpus[i]) for i in perm}
    assert forward == shuffled
