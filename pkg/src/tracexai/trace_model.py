"""Trajectory data model and the line-delimited trace format.

A corpus is UTF-8 text with one JSON object per line::

    {"v":1,"run_id":...,"task_id":...,"benchmark":...,"steps":[...],"outcome":{...},"meta":{...}}

The canonical form (what :func:`serialize_trajectory` writes) uses the key
order above, sorted keys inside opaque maps, no insignificant whitespace, and
``null`` for absent optional fields. Parsing is lenient about omitted optional
keys but strict about types, enums and per-record invariants. Cross-step
structure (index contiguity, unanswered tool calls) is left to
:func:`validate_trajectory`, which reports violations as data.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .errors import DuplicateRunId, MalformedRecord

SCHEMA_VERSION = 1

ACTION_KINDS = ("message", "tool_call")
OBSERVATION_KINDS = ("tool_result", "env_feedback")


@dataclass(frozen=True)
class Action:
    kind: str
    tool_name: str | None = None
    arguments: dict | None = None
    rationale: str | None = None

    @property
    def is_tool_call(self) -> bool:
        return self.kind == "tool_call"


@dataclass(frozen=True)
class Observation:
    kind: str
    payload: Any = None
    is_error: bool = False


@dataclass(frozen=True)
class Step:
    index: int
    state: dict
    action: Action
    observation: Observation | None = None


@dataclass(frozen=True)
class Outcome:
    success: bool
    score: float | None = None


@dataclass(frozen=True)
class Trajectory:
    run_id: str
    task_id: str
    benchmark: str
    steps: tuple[Step, ...]
    outcome: Outcome
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class IntegrityViolation:
    rule: str
    step: int
    detail: str = ""

    def __str__(self):
        return f"{self.rule}@{self.step}"


@dataclass(frozen=True)
class TraceDigest:
    n_steps: int
    n_tool_calls: int
    n_error_observations: int
    distinct_tools: tuple[str, ...]


# -- canonical serialization -------------------------------------------------


def _sorted(value):
    if isinstance(value, dict):
        return {k: _sorted(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_sorted(v) for v in value]
    return value


def _action_to_dict(a: Action) -> dict:
    return {
        "kind": a.kind,
        "tool_name": a.tool_name,
        "arguments": _sorted(a.arguments) if a.arguments is not None else None,
        "rationale": a.rationale,
    }


def _observation_to_dict(o: Observation | None) -> dict | None:
    if o is None:
        return None
    return {"kind": o.kind, "payload": _sorted(o.payload), "is_error": o.is_error}


def step_to_dict(s: Step) -> dict:
    return {
        "index": s.index,
        "state": _sorted(s.state),
        "action": _action_to_dict(s.action),
        "observation": _observation_to_dict(s.observation),
    }


def trajectory_to_dict(t: Trajectory, *, include_outcome: bool = True) -> dict:
    d = {
        "v": SCHEMA_VERSION,
        "run_id": t.run_id,
        "task_id": t.task_id,
        "benchmark": t.benchmark,
        "steps": [step_to_dict(s) for s in t.steps],
    }
    if include_outcome:
        d["outcome"] = {"success": t.outcome.success, "score": t.outcome.score}
    d["meta"] = _sorted(t.meta)
    return d


def dumps_canonical(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def serialize_trajectory(t: Trajectory) -> bytes:
    return dumps_canonical(trajectory_to_dict(t)).encode("utf-8")


def serialize_corpus(trajectories: Iterable[Trajectory]) -> bytes:
    return b"".join(serialize_trajectory(t) + b"\n" for t in trajectories)


def trace_sha256(t: Trajectory) -> str:
    return hashlib.sha256(serialize_trajectory(t)).hexdigest()


# -- parsing -----------------------------------------------------------------


class _Bad(Exception):
    pass


def _require(d: dict, key: str, types, where: str, *, nullable=False):
    if key not in d:
        if nullable:
            return None
        raise _Bad(f"{where}: missing {key!r}")
    v = d[key]
    if v is None and nullable:
        return None
    # bool is an int subclass; keep them apart
    if isinstance(v, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise _Bad(f"{where}.{key}: expected {types}, got bool")
    if not isinstance(v, types):
        raise _Bad(f"{where}.{key}: expected {getattr(types, '__name__', types)}, got {type(v).__name__}")
    return v


def _parse_action(d, where) -> Action:
    if not isinstance(d, dict):
        raise _Bad(f"{where}: action must be an object")
    kind = _require(d, "kind", str, where)
    if kind not in ACTION_KINDS:
        raise _Bad(f"{where}.kind: unknown action kind {kind!r}")
    tool_name = _require(d, "tool_name", str, where, nullable=True)
    arguments = _require(d, "arguments", dict, where, nullable=True)
    rationale = _require(d, "rationale", str, where, nullable=True)
    if kind == "tool_call":
        if not tool_name:
            raise _Bad(f"{where}: tool_call needs a non-empty tool_name")
        if arguments is None:
            arguments = {}
    else:
        if tool_name is not None:
            raise _Bad(f"{where}: message action carries tool_name")
        if arguments is not None:
            raise _Bad(f"{where}: message action carries arguments")
    return Action(kind=kind, tool_name=tool_name, arguments=arguments, rationale=rationale)


def _parse_observation(d, where) -> Observation | None:
    if d is None:
        return None
    if not isinstance(d, dict):
        raise _Bad(f"{where}: observation must be an object or null")
    kind = _require(d, "kind", str, where)
    if kind not in OBSERVATION_KINDS:
        raise _Bad(f"{where}.kind: unknown observation kind {kind!r}")
    is_error = _require(d, "is_error", bool, where, nullable=True) or False
    payload = d.get("payload")
    if payload is None and not is_error:
        raise _Bad(f"{where}: payload required unless is_error")
    return Observation(kind=kind, payload=payload, is_error=is_error)


def _parse_step(d, where) -> Step:
    if not isinstance(d, dict):
        raise _Bad(f"{where}: step must be an object")
    index = _require(d, "index", int, where)
    if index < 0:
        raise _Bad(f"{where}.index: negative")
    state = _require(d, "state", dict, where, nullable=True) or {}
    action = _parse_action(d.get("action"), f"{where}.action")
    observation = _parse_observation(d.get("observation"), f"{where}.observation")
    return Step(index=index, state=state, action=action, observation=observation)


def trajectory_from_dict(d: dict) -> Trajectory:
    """Build a trajectory from a decoded record; raises ``ValueError`` on schema violations."""
    try:
        return _trajectory_from_dict(d)
    except _Bad as exc:
        raise ValueError(str(exc)) from None


def _trajectory_from_dict(d) -> Trajectory:
    if not isinstance(d, dict):
        raise _Bad("record must be a JSON object")
    v = d.get("v")
    if v != SCHEMA_VERSION or isinstance(v, bool):
        raise _Bad(f"unsupported or missing schema version v={v!r}")
    run_id = _require(d, "run_id", str, "record")
    if not run_id:
        raise _Bad("record.run_id: empty")
    task_id = _require(d, "task_id", str, "record")
    benchmark = _require(d, "benchmark", str, "record")
    raw_steps = _require(d, "steps", list, "record")
    if not raw_steps:
        raise _Bad("record.steps: at least one step required")
    steps = tuple(_parse_step(s, f"steps[{i}]") for i, s in enumerate(raw_steps))
    out = _require(d, "outcome", dict, "record")
    success = _require(out, "success", bool, "outcome")
    score = _require(out, "score", (int, float), "outcome", nullable=True)
    if score is not None:
        if not 0.0 <= score <= 1.0:
            raise _Bad("outcome.score: outside [0,1]")
        if success and score <= 0:
            raise _Bad("outcome.score: successful run must have score > 0")
    meta = _require(d, "meta", dict, "record", nullable=True) or {}
    return Trajectory(
        run_id=run_id,
        task_id=task_id,
        benchmark=benchmark,
        steps=steps,
        outcome=Outcome(success=success, score=score),
        meta=meta,
    )


def _lines(source) -> Iterator[bytes | str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    elif isinstance(source, str):
        source = io.StringIO(source)
    yield from source


def iter_trace_corpus(source) -> Iterator[Trajectory]:
    """Stream trajectories from bytes, text, or an open file.

    Blank lines are skipped. Raises :class:`MalformedRecord` (1-based line
    number) and :class:`DuplicateRunId`.
    """
    seen = set()
    for line_no, raw in enumerate(_lines(source), start=1):
        if isinstance(raw, (bytes, bytearray)):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedRecord(line_no, f"not UTF-8: {exc}") from None
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
        try:
            t = _trajectory_from_dict(record)
        except _Bad as exc:
            raise MalformedRecord(line_no, str(exc)) from None
        if t.run_id in seen:
            raise DuplicateRunId(t.run_id)
        seen.add(t.run_id)
        yield t


def parse_trace_corpus(source) -> list[Trajectory]:
    return list(iter_trace_corpus(source))


def read_corpus(path) -> list[Trajectory]:
    with open(path, "rb") as fh:
        return parse_trace_corpus(fh)


def write_corpus(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_corpus(trajectories))


# -- structural checks -------------------------------------------------------


def validate_trajectory(t: Trajectory) -> list[IntegrityViolation]:
    """Cross-step structural checks. Returns an empty list for a sound trace."""
    violations = []
    expected = 0
    for pos, s in enumerate(t.steps):
        if s.index != expected:
            violations.append(
                IntegrityViolation("non_contiguous_index", expected, f"found index {s.index} at position {pos}")
            )
        expected = s.index + 1
        obs = s.observation
        if s.action.is_tool_call:
            if obs is None:
                violations.append(IntegrityViolation("unanswered_tool_call", s.index, s.action.tool_name))
            elif obs.kind != "tool_result" and not obs.is_error:
                violations.append(
                    IntegrityViolation("tool_call_without_result", s.index, f"observation kind {obs.kind}")
                )
        elif obs is not None and obs.kind == "tool_result":
            violations.append(IntegrityViolation("orphan_tool_result", s.index))
    return violations


def trace_digest(t: Trajectory) -> TraceDigest:
    tools = [s.action.tool_name for s in t.steps if s.action.is_tool_call]
    errors = sum(1 for s in t.steps if s.observation is not None and s.observation.is_error)
    return TraceDigest(
        n_steps=len(t.steps),
        n_tool_calls=len(tools),
        n_error_observations=errors,
        distinct_tools=tuple(sorted(set(tools))),
    )
