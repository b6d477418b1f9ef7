"""Seeded synthetic tool-use environment with ground-truth fault labels.

Each run is an airline-style tool session: an opening message, a sequence of
tool calls following a plan, and a closing message. Rubric violations are
injected as structural markers that :func:`tracexai.rubric_judge.judge_rules`
detects exactly. Reserved state fields:

``goal``           user goal (every step)
``plan``           planned tool sequence (step 0)
``tools``          tool registry, name -> required argument names (step 0)
``plan_cursor``    index of the plan item being worked on (every step)
``expected_tool``  tool the current sub-task calls for (tool-call steps)
``memory``         values the agent carries, from ``updates`` in tool results

Fault signatures:

* intent_alignment: a tool call whose ``intent`` argument is not the goal
* plan_adherence: ``plan_cursor`` jumps by two (a plan item is skipped)
* tool_correctness: a call missing a required argument (env rejects it, agent retries)
* tool_choice_accuracy: a call to a tool other than ``expected_tool``
* state_tracking_consistency: one step's ``memory`` holds a stale value
* error_recovery: the last tool call fails and the agent ends without retrying

Random streams: run ``k`` under seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(k,)))``, so any run can be regenerated on
its own without replaying earlier ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateRunId, InvalidFaultSpec, MalformedRecord, OrdinalOutOfRange
from .rubrics import RUBRIC_IDS
from .trace_model import Action, Observation, Outcome, Step, Trajectory, dumps_canonical

MIN_STEPS = 6
MAX_STEPS = 20
TRANSIENT_ERROR_RATE = 0.25

GOALS = ("rebook_flight", "cancel_trip", "request_refund", "upgrade_seat", "baggage_inquiry")

TOOLS = {
    "search_flights": ("intent", "origin", "destination", "date"),
    "get_reservation": ("intent", "reservation_id"),
    "check_seat_availability": ("intent", "flight_id"),
    "update_reservation": ("intent", "reservation_id", "flight_id"),
    "cancel_reservation": ("intent", "reservation_id"),
    "issue_refund": ("intent", "reservation_id", "amount"),
    "lookup_baggage_policy": ("intent", "fare_class"),
    "send_confirmation": ("intent", "reservation_id", "email"),
}
TOOL_NAMES = tuple(TOOLS)

RESULT_KEYS = {
    "search_flights": "flight_id",
    "get_reservation": "reservation_status",
    "check_seat_availability": "seat",
    "update_reservation": "reservation_id",
    "cancel_reservation": "cancellation_id",
    "issue_refund": "refund_id",
    "lookup_baggage_policy": "baggage_allowance",
    "send_confirmation": "confirmation_id",
}


@dataclass(frozen=True)
class FaultSpec:
    probabilities: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.probabilities) - set(RUBRIC_IDS)
        if unknown:
            raise InvalidFaultSpec(f"unknown rubric ids: {sorted(unknown)}")
        for k, p in self.probabilities.items():
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                raise InvalidFaultSpec(f"probability for {k} must be in [0,1], got {p!r}")
        _check_seed(self.seed)

    def p(self, rubric_id: str) -> float:
        return float(self.probabilities.get(rubric_id, 0.0))


@dataclass(frozen=True)
class OutcomeModel:
    """Success probability is ``sigmoid(bias + sum(weights[r] * flag[r]))``.

    A negative weight makes a violation push the run toward failure.
    """

    bias: float = 0.0
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.weights) - set(RUBRIC_IDS)
        if unknown:
            raise InvalidFaultSpec(f"unknown rubric ids in outcome weights: {sorted(unknown)}")
        for v in (self.bias, *self.weights.values()):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidFaultSpec(f"outcome model values must be finite reals, got {v!r}")

    def success_probability(self, flags: dict) -> float:
        z = self.bias + sum(float(self.weights.get(r, 0.0)) * flags.get(r, 0) for r in RUBRIC_IDS)
        return 1.0 / (1.0 + math.exp(-z))


@dataclass(frozen=True)
class RunConfig:
    seed: int
    faults: FaultSpec
    outcome: OutcomeModel
    ordinal: int
    n_runs: int | None = None


@dataclass
class GroundTruth:
    """run_id -> (flags, success), in generation order."""

    records: dict = field(default_factory=dict)

    def flags(self, run_id: str) -> dict:
        return self.records[run_id][0]

    def success(self, run_id: str) -> bool:
        return self.records[run_id][1]

    def __len__(self):
        return len(self.records)

    def to_jsonl(self) -> bytes:
        lines = []
        for run_id, (flags, success) in self.records.items():
            rec = {"run_id": run_id, "flags": {r: flags[r] for r in RUBRIC_IDS}, "success": success}
            lines.append(dumps_canonical(rec) + "\n")
        return "".join(lines).encode("utf-8")

    @classmethod
    def from_jsonl(cls, data: bytes) -> "GroundTruth":
        records = {}
        for line_no, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                flags = {r: int(rec["flags"][r]) for r in RUBRIC_IDS}
                success = rec["success"]
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedRecord(line_no, f"bad ground-truth record: {exc!r}") from None
            if not isinstance(success, bool):
                raise MalformedRecord(line_no, "success must be a boolean")
            if rec["run_id"] in records:
                raise DuplicateRunId(rec["run_id"])
            records[rec["run_id"]] = (flags, success)
        return cls(records)


def _check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2**64:
        raise InvalidFaultSpec(f"seed must be a 64-bit unsigned integer, got {seed!r}")


def run_rng(seed: int, ordinal: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(ordinal),))))


def run_id_for(seed: int, ordinal: int) -> str:
    return f"synth-{seed}-{ordinal:06d}"


def _token(rng, prefix):
    return f"{prefix}-{int(rng.integers(1000, 10000))}"


def _arguments(rng, tool, goal):
    args = {}
    for name in TOOLS[tool]:
        if name == "intent":
            args[name] = goal
        elif name == "amount":
            args[name] = int(rng.integers(50, 1500))
        else:
            args[name] = _token(rng, name[:3].upper())
    return args


def _generate_run(seed, ordinal, faults: FaultSpec, outcome: OutcomeModel):
    rng = run_rng(seed, ordinal)
    # fixed draw order keeps every stream stable when one fault probability changes
    flags = {r: int(rng.random() < faults.p(r)) for r in RUBRIC_IDS}
    success = bool(rng.random() < outcome.success_probability(flags))
    n_steps = int(rng.integers(MIN_STEPS, MAX_STEPS + 1))
    transient_draw = bool(rng.random() < TRANSIENT_ERROR_RATE)
    goal = GOALS[int(rng.integers(len(GOALS)))]

    n_extra = flags["tool_correctness"] + flags["tool_choice_accuracy"]
    n_calls = n_steps - 2 - n_extra
    transient = transient_draw and n_calls - 1 >= 2
    if transient:
        n_calls -= 1

    plan_len = n_calls + flags["plan_adherence"]
    plan = [TOOL_NAMES[int(i)] for i in rng.integers(len(TOOL_NAMES), size=plan_len)]
    if flags["plan_adherence"]:
        skip = int(rng.integers(1, n_calls))
        plan_idx = [i for i in range(plan_len) if i != skip]
    else:
        plan_idx = list(range(plan_len))

    last = n_calls - 1
    fail_last = bool(flags["error_recovery"])
    non_last = last if fail_last else n_calls
    tc_slot = int(rng.integers(non_last)) if flags["tool_correctness"] else -1
    ch_slot = int(rng.integers(n_calls)) if flags["tool_choice_accuracy"] else -1
    in_slot = int(rng.integers(n_calls)) if flags["intent_alignment"] else -1
    tr_slot = int(rng.integers(non_last)) if transient else -1

    # each attempt: (tool, args, observation, cursor, expected_tool)
    attempts = []
    for slot in range(n_calls):
        cursor = plan_idx[slot]
        expected = plan[cursor]
        slot_attempts = []
        if slot == ch_slot:
            wrong = TOOL_NAMES[int(rng.integers(len(TOOL_NAMES)))]
            if wrong == expected:
                wrong = TOOL_NAMES[(TOOL_NAMES.index(wrong) + 1) % len(TOOL_NAMES)]
            slot_attempts.append([wrong, _arguments(rng, wrong, goal), "ok"])
        if slot == tc_slot:
            args = _arguments(rng, expected, goal)
            droppable = [a for a in TOOLS[expected] if a != "intent"]
            dropped = droppable[int(rng.integers(len(droppable)))]
            del args[dropped]
            slot_attempts.append([expected, args, ("invalid_arguments", dropped)])
        if slot == tr_slot:
            slot_attempts.append([expected, _arguments(rng, expected, goal), ("timeout", None)])
        final_obs = ("service_unavailable", None) if (fail_last and slot == last) else "ok"
        slot_attempts.append([expected, _arguments(rng, expected, goal), final_obs])
        if slot == in_slot:
            other = [g for g in GOALS if g != goal]
            slot_attempts[0][1]["intent"] = other[int(rng.integers(len(other)))]
        for tool, args, obs in slot_attempts:
            attempts.append((tool, args, obs, cursor, expected))

    registry = {name: list(req) for name, req in TOOLS.items()}
    steps = []
    memory: dict = {}

    def state_for(cursor, expected=None, first=False):
        s = {"goal": goal, "plan_cursor": cursor, "memory": dict(memory)}
        if expected is not None:
            s["expected_tool"] = expected
        if first:
            s["plan"] = list(plan)
            s["tools"] = registry
            s["user_request"] = f"Please help me with: {goal.replace('_', ' ')}"
        return s

    steps.append(
        Step(
            index=0,
            state=state_for(0, first=True),
            action=Action(kind="message", rationale="Acknowledge the request and outline the plan."),
            observation=Observation(kind="env_feedback", payload={"user": "go ahead"}),
        )
    )
    first_update_step = None
    for tool, args, obs, cursor, expected in attempts:
        idx = len(steps)
        state = state_for(cursor, expected)
        if obs == "ok":
            key = RESULT_KEYS[tool]
            value = _token(rng, key[:3].upper())
            observation = Observation(kind="tool_result", payload={"status": "ok", "updates": {key: value}})
            memory[key] = value
            if first_update_step is None:
                first_update_step = idx
        else:
            code, detail = obs
            payload = {"error": code}
            if detail is not None:
                payload["missing"] = [detail]
            observation = Observation(kind="tool_result", payload=payload, is_error=True)
        steps.append(
            Step(
                index=idx,
                state=state,
                action=Action(kind="tool_call", tool_name=tool, arguments=args, rationale=f"Work on plan item {cursor}."),
                observation=observation,
            )
        )
    steps.append(
        Step(
            index=len(steps),
            state=state_for(plan_idx[last]),
            action=Action(kind="message", rationale="Report the result to the user."),
            observation=None,
        )
    )

    if flags["state_tracking_consistency"]:
        candidates = list(range(first_update_step + 1, len(steps)))
        target = candidates[int(rng.integers(len(candidates)))]
        st = steps[target].state
        key = sorted(st["memory"])[int(rng.integers(len(st["memory"])))]
        st["memory"][key] = "stale:" + st["memory"][key]

    meta = {
        "model": "synthetic-agent-v1",
        "cost": round(float(rng.uniform(0.01, 0.5)), 4),
        "wall_time": round(float(rng.uniform(2.0, 60.0)), 3),
        "synth": {"seed": int(seed), "ordinal": int(ordinal)},
    }
    traj = Trajectory(
        run_id=run_id_for(seed, ordinal),
        task_id=f"task-{goal}-{ordinal % 50:02d}",
        benchmark="synthetic-airline",
        steps=tuple(steps),
        outcome=Outcome(success=success, score=1.0 if success else 0.0),
        meta=meta,
    )
    return traj, flags, success


def generate_corpus(n_runs: int, faults: FaultSpec, outcome: OutcomeModel, seed: int | None = None):
    """Generate ``n_runs`` trajectories and their ground truth.

    ``seed`` defaults to ``faults.seed``.
    """
    if isinstance(n_runs, bool) or not isinstance(n_runs, int) or n_runs < 1:
        raise InvalidFaultSpec(f"n_runs must be a positive integer, got {n_runs!r}")
    seed = faults.seed if seed is None else seed
    _check_seed(seed)
    corpus = []
    truth = GroundTruth()
    for k in range(n_runs):
        traj, flags, success = _generate_run(seed, k, faults, outcome)
        corpus.append(traj)
        truth.records[traj.run_id] = (flags, success)
    return corpus, truth


def replay(cfg: RunConfig) -> Trajectory:
    if cfg.ordinal < 0 or (cfg.n_runs is not None and cfg.ordinal >= cfg.n_runs):
        raise OrdinalOutOfRange(f"ordinal {cfg.ordinal} outside [0, {cfg.n_runs})")
    _check_seed(cfg.seed)
    return _generate_run(cfg.seed, cfg.ordinal, cfg.faults, cfg.outcome)[0]


def replay_config_for(t: Trajectory, faults: FaultSpec, outcome: OutcomeModel) -> RunConfig:
    """Recover the run config recorded in a synthetic trajectory's ``meta``."""
    synth = t.meta.get("synth")
    if not isinstance(synth, dict) or "seed" not in synth or "ordinal" not in synth:
        raise OrdinalOutOfRange(f"run {t.run_id} carries no synthetic run config")
    return RunConfig(seed=synth["seed"], faults=faults, outcome=outcome, ordinal=synth["ordinal"])


def load_synth_config(path) -> tuple[FaultSpec, OutcomeModel, int | None]:
    """Read a TOML file with optional ``seed``, ``[faults]``, ``[outcome]`` and ``[outcome.weights]``."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidFaultSpec(f"{path}: {exc}") from None
    return synth_config_from_dict(doc)


def synth_config_from_dict(doc: dict) -> tuple[FaultSpec, OutcomeModel, int | None]:
    seed = doc.get("seed")
    faults = FaultSpec(probabilities=dict(doc.get("faults", {})), seed=seed if seed is not None else 0)
    out = doc.get("outcome", {})
    outcome = OutcomeModel(bias=out.get("bias", 0.0), weights=dict(out.get("weights", {})))
    return faults, outcome, seed
