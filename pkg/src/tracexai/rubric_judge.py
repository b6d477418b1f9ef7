"""Per-run rubric labelling: a deterministic rule judge and a remote LLM judge.

Both judges see only the trace. The outcome never reaches a rule and is
stripped from every LLM request. Flag polarity: 1 means the rubric was
violated.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import httpx
import numpy as np

from .errors import DuplicateRunId, JudgeParse, JudgeTransport, MalformedRecord, MissingOutcome
from .rubrics import RUBRIC_BY_ID, RUBRIC_IDS, canonical_order
from .trace_model import Outcome, Trajectory, dumps_canonical, trajectory_to_dict

log = logging.getLogger(__name__)

PROMPT_VERSION = "judge_v1"


@dataclass(frozen=True)
class FlagVector:
    run_id: str
    flags: dict

    def __post_init__(self):
        canonical_order(self.flags)
        for r, v in self.flags.items():
            if isinstance(v, bool) or v not in (0, 1):
                raise ValueError(f"flag {r} for {self.run_id} must be 0 or 1, got {v!r}")

    def as_row(self) -> list[int]:
        return [self.flags[r] for r in RUBRIC_IDS]


@dataclass(frozen=True)
class FlagMatrix:
    run_ids: tuple
    flags: np.ndarray  # (N, 6) int8, columns in RUBRIC_IDS order
    success: np.ndarray  # (N,) bool

    def __len__(self):
        return len(self.run_ids)

    def column(self, rubric_id: str) -> np.ndarray:
        return self.flags[:, RUBRIC_IDS.index(rubric_id)]

    def vectors(self) -> list[FlagVector]:
        return [
            FlagVector(rid, {r: int(v) for r, v in zip(RUBRIC_IDS, row)})
            for rid, row in zip(self.run_ids, self.flags)
        ]


# -- rule judge --------------------------------------------------------------


def _first_state_value(t: Trajectory, key):
    for s in t.steps:
        if key in s.state:
            return s.state[key]
    return None


def _intent_violation(t):
    default_goal = _first_state_value(t, "goal")
    for s in t.steps:
        if not s.action.is_tool_call:
            continue
        goal = s.state.get("goal", default_goal)
        args = s.action.arguments or {}
        if goal is not None and "intent" in args and args["intent"] != goal:
            return True
    return False


def _plan_violation(t):
    prev = None
    for s in t.steps:
        cur = s.state.get("plan_cursor")
        if not isinstance(cur, int):
            continue
        if prev is not None and not prev <= cur <= prev + 1:
            return True
        prev = cur
    return False


def _tool_correctness_violation(t):
    registry = _first_state_value(t, "tools")
    for s in t.steps:
        if not s.action.is_tool_call:
            continue
        if isinstance(registry, dict):
            required = registry.get(s.action.tool_name)
            if required is None:
                return True
            if set(s.action.arguments or {}) != set(required):
                return True
        obs = s.observation
        if obs is not None and obs.is_error and isinstance(obs.payload, dict):
            if obs.payload.get("error") in ("invalid_arguments", "unknown_tool"):
                return True
    return False


def _tool_choice_violation(t):
    for s in t.steps:
        expected = s.state.get("expected_tool")
        if s.action.is_tool_call and expected is not None and s.action.tool_name != expected:
            return True
    return False


def _state_tracking_violation(t):
    observed = {}
    for s in t.steps:
        memory = s.state.get("memory")
        if isinstance(memory, dict):
            for key, value in observed.items():
                if memory.get(key) != value:
                    return True
        obs = s.observation
        if obs is not None and not obs.is_error and isinstance(obs.payload, dict):
            updates = obs.payload.get("updates")
            if isinstance(updates, dict):
                observed.update(updates)
    return False


def _error_recovery_violation(t):
    # an error counts as handled once a later tool call succeeds
    pending = False
    for s in t.steps:
        obs = s.observation
        if obs is None:
            continue
        if obs.is_error:
            pending = True
        elif s.action.is_tool_call and pending:
            pending = False
    return pending


_RULES = {
    "intent_alignment": _intent_violation,
    "plan_adherence": _plan_violation,
    "tool_correctness": _tool_correctness_violation,
    "tool_choice_accuracy": _tool_choice_violation,
    "state_tracking_consistency": _state_tracking_violation,
    "error_recovery": _error_recovery_violation,
}


def judge_rules(t: Trajectory, rubrics=None) -> FlagVector:
    ids = canonical_order(rubrics if rubrics is not None else RUBRIC_IDS)
    return FlagVector(t.run_id, {r: int(_RULES[r](t)) for r in ids})


# -- LLM judge ---------------------------------------------------------------


@dataclass(frozen=True)
class JudgeConfig:
    endpoint: str
    model: str
    temperature: float = 0.1
    max_in_flight: int = 4
    retry_budget: int = 3
    timeout: float = 60.0
    api_key: str | None = None
    backoff: float = 0.5
    audit_path: str | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be positive")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")

    @classmethod
    def from_env(cls, env=None, **overrides) -> "JudgeConfig":
        env = os.environ if env is None else env
        kwargs = {
            "endpoint": env.get("JUDGE_ENDPOINT", ""),
            "model": env.get("JUDGE_MODEL", ""),
            "api_key": env.get("JUDGE_API_KEY"),
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


def _prompt_template() -> str:
    return resources.files("tracexai.prompts").joinpath(f"{PROMPT_VERSION}.txt").read_text("utf-8")


def render_trace(t: Trajectory) -> str:
    """Trace text shown to the judge: steps and identifiers only, no outcome or meta."""
    d = trajectory_to_dict(t, include_outcome=False)
    d.pop("meta", None)
    return json.dumps(d, ensure_ascii=False, indent=1)


def build_judge_request(t: Trajectory, rubric_ids, cfg: JudgeConfig) -> dict:
    ids = canonical_order(rubric_ids)
    block = "\n".join(f"- {r}: {RUBRIC_BY_ID[r].name}. {RUBRIC_BY_ID[r].description}" for r in ids)
    system = _prompt_template().format(rubric_block=block, rubric_keys=", ".join(ids))
    return {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": f"Trace:\n{render_trace(t)}"},
        ],
    }


def parse_judge_reply(body: bytes | str, run_id: str, rubric_ids) -> FlagVector:
    ids = canonical_order(rubric_ids)
    try:
        doc = json.loads(body)
        content = doc["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise JudgeParse(f"not a chat-completions body ({exc.__class__.__name__})") from None
    if not isinstance(content, str):
        raise JudgeParse("message content is not a string")
    try:
        verdict = json.loads(content.strip())
    except ValueError:
        raise JudgeParse("message content is not a JSON object") from None
    if not isinstance(verdict, dict):
        raise JudgeParse("message content is not a JSON object")
    if set(verdict) != set(ids):
        raise JudgeParse(f"expected keys {ids}, got {sorted(verdict)}")
    for r, v in verdict.items():
        if isinstance(v, bool) or v not in (0, 1) or not isinstance(v, int):
            raise JudgeParse(f"{r}: value {v!r} is not 0 or 1")
    return FlagVector(run_id, {r: verdict[r] for r in ids})


_audit_lock = threading.Lock()


def _audit(cfg: JudgeConfig, record: dict):
    if cfg.audit_path:
        with _audit_lock, open(cfg.audit_path, "a", encoding="utf-8") as fh:
            fh.write(dumps_canonical(record) + "\n")


def judge_llm(t: Trajectory, rubrics, cfg: JudgeConfig, client: httpx.Client | None = None) -> FlagVector:
    """Single-pass LLM judgement of one trajectory.

    Retries transport failures, 429 and 5xx up to ``cfg.retry_budget`` times
    with exponential backoff. Other HTTP errors fail immediately.
    """
    ids = canonical_order(rubrics if rubrics is not None else RUBRIC_IDS)
    payload = build_judge_request(t, ids, cfg)
    headers = {"Authorization": f"Bearer {cfg.api_key}"} if cfg.api_key else {}
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout)
    try:
        status = None
        for attempt in range(cfg.retry_budget + 1):
            if attempt:
                time.sleep(cfg.backoff * 2 ** (attempt - 1))
            try:
                resp = client.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
            except httpx.HTTPError as exc:
                status = f"transport:{exc.__class__.__name__}"
                log.warning("judge request for %s failed: %s", t.run_id, exc)
                continue
            status = resp.status_code
            _audit(cfg, {"run_id": t.run_id, "attempt": attempt, "request": payload, "status": status, "reply": resp.text})
            if status == 200:
                return parse_judge_reply(resp.content, t.run_id, ids)
            if status != 429 and status < 500:
                raise JudgeTransport(status, resp.text[:200])
        raise JudgeTransport(status, "retry budget exhausted")
    finally:
        if own:
            client.close()


def judge_llm_corpus(trajectories, rubrics, cfg: JudgeConfig, client: httpx.Client | None = None) -> list[FlagVector]:
    """Judge a corpus with at most ``cfg.max_in_flight`` concurrent requests, preserving corpus order."""
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout, limits=httpx.Limits(max_connections=cfg.max_in_flight))
    try:
        with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
            return list(pool.map(lambda t: judge_llm(t, rubrics, cfg, client), trajectories))
    finally:
        if own:
            client.close()


# -- aggregation -------------------------------------------------------------


def aggregate(vectors, outcomes) -> FlagMatrix:
    """Align flag vectors with outcomes (``run_id -> Outcome | bool``), preserving vector order."""
    run_ids = []
    rows = []
    success = []
    seen = set()
    for v in vectors:
        if v.run_id in seen:
            raise DuplicateRunId(v.run_id)
        seen.add(v.run_id)
        if set(v.flags) != set(RUBRIC_IDS):
            raise ValueError(f"flag vector for {v.run_id} does not cover all six rubrics")
        if v.run_id not in outcomes:
            raise MissingOutcome(v.run_id)
        out = outcomes[v.run_id]
        run_ids.append(v.run_id)
        rows.append(v.as_row())
        success.append(out.success if isinstance(out, Outcome) else bool(out))
    flags = np.array(rows, dtype=np.int8).reshape(len(rows), len(RUBRIC_IDS))
    return FlagMatrix(tuple(run_ids), flags, np.array(success, dtype=bool))


def matrix_from_ground_truth(truth) -> FlagMatrix:
    vectors = [FlagVector(rid, dict(flags)) for rid, (flags, _) in truth.records.items()]
    return aggregate(vectors, {rid: s for rid, (_, s) in truth.records.items()})


def flags_to_jsonl(vectors) -> bytes:
    return "".join(
        dumps_canonical({"run_id": v.run_id, "flags": {r: v.flags[r] for r in canonical_order(v.flags)}}) + "\n"
        for v in vectors
    ).encode("utf-8")


def flags_from_jsonl(data: bytes) -> list[FlagVector]:
    out = []
    for line_no, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(FlagVector(rec["run_id"], dict(rec["flags"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedRecord(line_no, str(exc)) from None
    return out
