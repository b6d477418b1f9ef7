import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trajectory
from tracexai.errors import DuplicateRunId, MalformedRecord
from tracexai.trace_model import (
    Action,
    Observation,
    Step,
    parse_trace_corpus,
    serialize_corpus,
    serialize_trajectory,
    trace_digest,
    trajectory_to_dict,
    validate_trajectory,
)

FIXTURE = "\n".join(
    json.dumps(d)
    for d in [
        {
            "v": 1, "run_id": "a", "task_id": "t1", "benchmark": "fx",
            "steps": [
                {"index": i, "state": {}, "action": {"kind": "message", "tool_name": None, "arguments": None,
                                                     "rationale": "r"}, "observation": None}
                for i in range(3)
            ],
            "outcome": {"success": True, "score": 1.0}, "meta": {"model": "m"},
        },
        {
            "v": 1, "run_id": "b", "task_id": "t2", "benchmark": "fx",
            "steps": [
                {"index": i, "state": {"k": i},
                 "action": {"kind": "tool_call", "tool_name": "search", "arguments": {"q": i}, "rationale": None},
                 "observation": {"kind": "tool_result", "payload": {"n": i}, "is_error": False}}
                for i in range(5)
            ],
            "outcome": {"success": False, "score": 0.0}, "meta": None,
        },
    ]
) + "\n"


def test_empty_stream_parses_to_empty_list():
    assert parse_trace_corpus(b"") == []
    assert parse_trace_corpus(io.BytesIO(b"\n\n")) == []


def test_fixture_step_counts():
    ts = parse_trace_corpus(FIXTURE.encode())
    assert [len(t.steps) for t in ts] == [3, 5]
    assert [t.run_id for t in ts] == ["a", "b"]


def test_missing_outcome_names_line():
    lines = FIXTURE.splitlines()
    rec = json.loads(lines[1])
    del rec["outcome"]
    with pytest.raises(MalformedRecord) as exc:
        parse_trace_corpus((lines[0] + "\n" + json.dumps(rec) + "\n").encode())
    assert exc.value.line_no == 2
    assert "outcome" in exc.value.reason


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(v=2),
        lambda d: d.update(steps=[]),
        lambda d: d["steps"][0]["action"].update(tool_name=None),
        lambda d: d["outcome"].update(score=1.5),
        lambda d: d["outcome"].update(success=True, score=0.0),
        lambda d: d["steps"][0]["observation"].update(payload=None),
    ],
)
def test_schema_violations_rejected(mutate):
    rec = json.loads(FIXTURE.splitlines()[1])
    mutate(rec)
    with pytest.raises(MalformedRecord):
        parse_trace_corpus(json.dumps(rec).encode())


def test_invalid_json_line():
    with pytest.raises(MalformedRecord) as exc:
        parse_trace_corpus(FIXTURE.encode() + b"{not json\n")
    assert exc.value.line_no == 3


def test_duplicate_run_id():
    line = FIXTURE.splitlines()[0]
    with pytest.raises(DuplicateRunId):
        parse_trace_corpus((line + "\n" + line + "\n").encode())


def test_matching_tool_result_is_clean():
    assert validate_trajectory(make_trajectory()) == []


def test_unanswered_tool_call():
    t = make_trajectory(steps=[Step(0, {}, Action("tool_call", "lookup", {}), None)])
    assert [str(v) for v in validate_trajectory(t)] == ["unanswered_tool_call@0"]


def test_non_contiguous_index():
    steps = [Step(i, {}, Action("message"), None) for i in (0, 1, 3)]
    assert [str(v) for v in validate_trajectory(make_trajectory(steps=steps))] == ["non_contiguous_index@2"]


def test_error_observation_answers_tool_call():
    steps = [Step(0, {}, Action("tool_call", "x", {}), Observation("env_feedback", None, is_error=True))]
    assert validate_trajectory(make_trajectory(steps=steps)) == []


def test_digest_counts():
    steps = [
        Step(0, {}, Action("message"), None),
        Step(1, {}, Action("tool_call", "a", {}), Observation("tool_result", {})),
        Step(2, {}, Action("message"), None),
        Step(3, {}, Action("tool_call", "b", {}), Observation("tool_result", None, is_error=True)),
    ]
    d = trace_digest(make_trajectory(steps=steps))
    assert (d.n_steps, d.n_tool_calls, d.n_error_observations) == (4, 2, 1)
    assert d.distinct_tools == ("a", "b")
    no_tools = make_trajectory(steps=[Step(0, {}, Action("message"), None)])
    assert trace_digest(no_tools).n_tool_calls == 0


def test_canonical_key_order():
    d = trajectory_to_dict(make_trajectory())
    assert list(d) == ["v", "run_id", "task_id", "benchmark", "steps", "outcome", "meta"]
    assert b" " not in serialize_trajectory(make_trajectory()).replace(b'"start"', b"")


def test_synthetic_corpus_round_trip_and_integrity(small_corpus):
    corpus = small_corpus[0]
    data = serialize_corpus(corpus)
    parsed = parse_trace_corpus(data)
    assert parsed == corpus
    assert serialize_corpus(parsed) == data
    assert all(validate_trajectory(t) == [] for t in corpus)


_json_scalar = st.one_of(st.none(), st.booleans(), st.integers(-1000, 1000), st.text(max_size=8))
_json_map = st.dictionaries(st.text(min_size=1, max_size=6), _json_scalar, max_size=4)


@st.composite
def trajectories(draw):
    n = draw(st.integers(1, 6))
    steps = []
    for i in range(n):
        if draw(st.booleans()):
            action = Action("tool_call", draw(st.sampled_from(["a", "b", "c"])), draw(_json_map))
            obs = Observation("tool_result", draw(_json_map), False) if draw(st.booleans()) else \
                Observation("env_feedback", None, True)
        else:
            action = Action("message", rationale=draw(st.one_of(st.none(), st.text(max_size=10))))
            obs = draw(st.one_of(st.none(), st.builds(lambda p: Observation("env_feedback", p), _json_map)))
        steps.append(Step(i, draw(_json_map), action, obs))
    success = draw(st.booleans())
    return make_trajectory(run_id=draw(st.text(min_size=1, max_size=8)), steps=steps, success=success,
                           score=1.0 if success else draw(st.sampled_from([0.0, 0.5, None])))


@settings(max_examples=200, deadline=None)
@given(trajectories())
def test_round_trip_property(t):
    data = serialize_trajectory(t) + b"\n"
    (back,) = parse_trace_corpus(data)
    assert serialize_trajectory(back) + b"\n" == data
    assert validate_trajectory(back) == []


@settings(max_examples=200, deadline=None)
@given(trajectories())
def test_digest_matches_recount(t):
    d = trace_digest(t)
    assert d.n_steps == sum(1 for _ in t.steps)
    assert d.n_tool_calls == len([s for s in t.steps if s.action.kind == "tool_call"])
    assert d.n_error_observations == len([s for s in t.steps if s.observation and s.observation.is_error])
