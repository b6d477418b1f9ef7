"""Minimal Explanation Packets: an explanation artifact bound to its context and verification signals.

Packets serialize to JSON with sorted keys (``.mep.json``). Every packet is
validated on construction and on load, so a deserialized packet always
satisfies the type invariants. A JSON-schema document for third-party
validation ships as ``tracexai/schemas/mep-v1.schema.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

from .errors import DanglingStepReference, InvariantViolation, MalformedPacket, SchemaVersionMismatch
from .rubric_judge import FlagVector
from .trace_model import IntegrityViolation, Trajectory, trace_sha256

MEP_VERSION = 1
SCOPES = ("local", "global")
PARADIGMS = ("static", "agentic")
SIGNAL_KINDS = ("stability_rho", "rubric_flags", "replay_consistent", "trace_integrity")
_SUMMARY_CHARS = 200


@dataclass(frozen=True)
class AttributionArtifact:
    features: tuple  # ((feature name, score), ...) by descending |score|
    base_value: float
    pdp_ref: str | None = None
    kind: str = "attribution_scores"


@dataclass(frozen=True)
class StepAccount:
    step: int
    action_kind: str
    tool_name: str | None
    rationale: str | None
    observation: str | None
    is_error: bool


@dataclass(frozen=True)
class TraceAccount:
    steps: tuple
    kind: str = "trace_account"


@dataclass(frozen=True)
class InstanceContext:
    model_ref: str
    input_text: str | None = None
    predicted_label: int | None = None
    confidence: float | None = None
    corpus_digest: str | None = None
    kind: str = "instance_context"


@dataclass(frozen=True)
class ToolCallDigest:
    step: int
    tool_name: str
    arguments_sha256: str


@dataclass(frozen=True)
class StateRef:
    step: int
    state_sha256: str


@dataclass(frozen=True)
class TrajectoryContext:
    run_id: str
    task_id: str
    trace_sha256: str
    step_refs: tuple
    tool_calls: tuple
    state_refs: tuple
    user_request: str | None = None
    kind: str = "trajectory_context"


@dataclass(frozen=True)
class VerificationSignal:
    kind: str
    value: object


@dataclass(frozen=True)
class ExplanationPacket:
    scope: str
    paradigm: str
    artifact: object
    context: object
    verification: tuple
    version: int = MEP_VERSION

    def signal(self, kind: str):
        return next((s.value for s in self.verification if s.kind == kind), None)


# -- validation --------------------------------------------------------------


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_signal(sig: VerificationSignal):
    if sig.kind not in SIGNAL_KINDS:
        raise InvariantViolation(f"unknown verification signal {sig.kind!r}")
    v = sig.value
    if sig.kind == "stability_rho":
        if not _finite(v) or not -1.0 <= v <= 1.0:
            raise InvariantViolation(f"stability_rho must lie in [-1, 1], got {v!r}")
    elif sig.kind == "replay_consistent":
        if not isinstance(v, bool):
            raise InvariantViolation("replay_consistent must be a boolean")
    elif sig.kind == "rubric_flags":
        if not isinstance(v, FlagVector):
            raise InvariantViolation("rubric_flags must carry a flag vector")
    elif sig.kind == "trace_integrity":
        if not isinstance(v, tuple) or not all(isinstance(x, IntegrityViolation) for x in v):
            raise InvariantViolation("trace_integrity must be a tuple of integrity violations")


def validate_packet(p: ExplanationPacket) -> ExplanationPacket:
    if p.version != MEP_VERSION:
        raise SchemaVersionMismatch(f"packet version {p.version}, expected {MEP_VERSION}")
    if p.scope not in SCOPES:
        raise InvariantViolation(f"unknown scope {p.scope!r}")
    if p.paradigm not in PARADIGMS:
        raise InvariantViolation(f"unknown paradigm {p.paradigm!r}")
    if not p.verification:
        raise InvariantViolation("verification must not be empty")
    for sig in p.verification:
        _check_signal(sig)

    if p.paradigm == "static":
        if not isinstance(p.context, InstanceContext):
            raise InvariantViolation("static packets need an instance context")
        if not isinstance(p.artifact, AttributionArtifact):
            raise InvariantViolation("static packets carry attribution scores")
        if not all(isinstance(n, str) and _finite(s) for n, s in p.artifact.features):
            raise InvariantViolation("attribution features must be (name, finite score) pairs")
        if not _finite(p.artifact.base_value):
            raise InvariantViolation("base value must be finite")
        c = p.context
        if p.scope == "local":
            if c.input_text is None or c.predicted_label is None or c.confidence is None:
                raise InvariantViolation("local static context needs input text, predicted label and confidence")
            if not _finite(c.confidence) or not 0.0 <= c.confidence <= 1.0:
                raise InvariantViolation("confidence must lie in [0, 1]")
        elif c.corpus_digest is None:
            raise InvariantViolation("global static context needs a corpus digest")
    else:
        if not isinstance(p.context, TrajectoryContext):
            raise InvariantViolation("agentic packets need a trajectory context")
        if not isinstance(p.artifact, TraceAccount):
            raise InvariantViolation("agentic packets carry a trace account")
        known = set(p.context.step_refs)
        refs = [s.step for s in p.artifact.steps]
        refs += [d.step for d in p.context.tool_calls] + [r.step for r in p.context.state_refs]
        dangling = sorted(set(refs) - known)
        if dangling:
            raise DanglingStepReference(f"step references {dangling} do not resolve in run {p.context.run_id}")
        flags = p.signal("rubric_flags")
        if flags is not None and flags.run_id != p.context.run_id:
            raise InvariantViolation(f"rubric flags belong to {flags.run_id}, packet explains {p.context.run_id}")
    return p


# -- builders ----------------------------------------------------------------


def _sha(obj) -> str:
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _feature_pairs(attribution, top_k):
    names = attribution.feature_names
    return tuple(
        (names[i] if names is not None else str(i), float(v)) for i, v in attribution.top(top_k)
    )


def build_static_mep(model_ref: str, text: str, attribution, stability: float, *, predicted_label: int,
                     confidence: float, top_k: int = 10) -> ExplanationPacket:
    if attribution.scope != "local":
        raise InvariantViolation("a local packet needs a local attribution")
    packet = ExplanationPacket(
        scope="local",
        paradigm="static",
        artifact=AttributionArtifact(_feature_pairs(attribution, top_k), float(attribution.base_value)),
        context=InstanceContext(model_ref=model_ref, input_text=text, predicted_label=int(predicted_label),
                                confidence=float(confidence)),
        verification=(VerificationSignal("stability_rho", float(stability)),),
    )
    return validate_packet(packet)


def build_global_static_mep(model_ref: str, attribution, stability: float, *, corpus_digest: str,
                            pdp_ref: str | None = None, top_k: int = 10) -> ExplanationPacket:
    if attribution.scope != "global":
        raise InvariantViolation("a global packet needs a global attribution")
    packet = ExplanationPacket(
        scope="global",
        paradigm="static",
        artifact=AttributionArtifact(_feature_pairs(attribution, top_k), float(attribution.base_value), pdp_ref),
        context=InstanceContext(model_ref=model_ref, corpus_digest=corpus_digest),
        verification=(VerificationSignal("stability_rho", float(stability)),),
    )
    return validate_packet(packet)


def _summary(payload) -> str:
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return text if len(text) <= _SUMMARY_CHARS else text[: _SUMMARY_CHARS - 3] + "..."


def build_agentic_mep(t: Trajectory, flags: FlagVector, replay_ok: bool | None,
                      integrity) -> ExplanationPacket:
    """Packet for one run. ``replay_ok=None`` (no replay available) omits the replay signal."""
    if flags.run_id != t.run_id:
        raise InvariantViolation(f"flags are for {flags.run_id}, trajectory is {t.run_id}")
    account = TraceAccount(
        tuple(
            StepAccount(
                step=s.index,
                action_kind=s.action.kind,
                tool_name=s.action.tool_name,
                rationale=s.action.rationale,
                observation=None if s.observation is None else _summary(s.observation.payload),
                is_error=bool(s.observation is not None and s.observation.is_error),
            )
            for s in t.steps
        )
    )
    request = next((s.state["user_request"] for s in t.steps if isinstance(s.state.get("user_request"), str)), None)
    context = TrajectoryContext(
        run_id=t.run_id,
        task_id=t.task_id,
        trace_sha256=trace_sha256(t),
        step_refs=tuple(s.index for s in t.steps),
        tool_calls=tuple(
            ToolCallDigest(s.index, s.action.tool_name, _sha(s.action.arguments or {}))
            for s in t.steps
            if s.action.is_tool_call
        ),
        state_refs=tuple(StateRef(s.index, _sha(s.state)) for s in t.steps),
        user_request=request,
    )
    signals = [VerificationSignal("rubric_flags", flags)]
    if replay_ok is not None:
        signals.append(VerificationSignal("replay_consistent", bool(replay_ok)))
    signals.append(VerificationSignal("trace_integrity", tuple(integrity)))
    return validate_packet(ExplanationPacket("local", "agentic", account, context, tuple(signals)))


# -- serialization -----------------------------------------------------------


def _signal_to_dict(sig):
    v = sig.value
    if sig.kind == "rubric_flags":
        v = {"run_id": v.run_id, "flags": dict(v.flags)}
    elif sig.kind == "trace_integrity":
        v = [{"rule": x.rule, "step": x.step, "detail": x.detail} for x in v]
    return {"kind": sig.kind, "value": v}


def packet_to_dict(p: ExplanationPacket) -> dict:
    a, c = p.artifact, p.context
    if isinstance(a, AttributionArtifact):
        artifact = {"kind": a.kind, "features": [[n, s] for n, s in a.features], "base_value": a.base_value,
                    "pdp_ref": a.pdp_ref}
    else:
        artifact = {"kind": a.kind, "steps": [vars(s) for s in a.steps]}
    if isinstance(c, InstanceContext):
        context = vars(c).copy()
    else:
        context = {
            "kind": c.kind,
            "run_id": c.run_id,
            "task_id": c.task_id,
            "trace_sha256": c.trace_sha256,
            "step_refs": list(c.step_refs),
            "tool_calls": [vars(d) for d in c.tool_calls],
            "state_refs": [vars(r) for r in c.state_refs],
            "user_request": c.user_request,
        }
    return {
        "v": p.version,
        "scope": p.scope,
        "paradigm": p.paradigm,
        "artifact": artifact,
        "context": context,
        "verification": [_signal_to_dict(s) for s in p.verification],
    }


def serialize(p: ExplanationPacket) -> bytes:
    validate_packet(p)
    return json.dumps(packet_to_dict(p), sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False).encode("utf-8")


def _signal_from_dict(d):
    kind, v = d["kind"], d["value"]
    if kind == "rubric_flags":
        v = FlagVector(v["run_id"], dict(v["flags"]))
    elif kind == "trace_integrity":
        v = tuple(IntegrityViolation(x["rule"], x["step"], x.get("detail", "")) for x in v)
    return VerificationSignal(kind, v)


def packet_from_dict(d: dict) -> ExplanationPacket:
    a, c = d["artifact"], d["context"]
    if a["kind"] == "attribution_scores":
        artifact = AttributionArtifact(tuple((n, s) for n, s in a["features"]), a["base_value"], a.get("pdp_ref"))
    elif a["kind"] == "trace_account":
        artifact = TraceAccount(tuple(StepAccount(**s) for s in a["steps"]))
    else:
        raise ValueError(f"unknown artifact kind {a['kind']!r}")
    if c["kind"] == "instance_context":
        context = InstanceContext(**{k: v for k, v in c.items() if k != "kind"})
    elif c["kind"] == "trajectory_context":
        context = TrajectoryContext(
            run_id=c["run_id"],
            task_id=c["task_id"],
            trace_sha256=c["trace_sha256"],
            step_refs=tuple(c["step_refs"]),
            tool_calls=tuple(ToolCallDigest(**x) for x in c["tool_calls"]),
            state_refs=tuple(StateRef(**x) for x in c["state_refs"]),
            user_request=c.get("user_request"),
        )
    else:
        raise ValueError(f"unknown context kind {c['kind']!r}")
    return ExplanationPacket(
        scope=d["scope"],
        paradigm=d["paradigm"],
        artifact=artifact,
        context=context,
        verification=tuple(_signal_from_dict(s) for s in d["verification"]),
        version=d["v"],
    )


def deserialize(data: bytes) -> ExplanationPacket:
    try:
        d = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedPacket(f"not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise MalformedPacket("packet must be a JSON object")
    if d.get("v") != MEP_VERSION or isinstance(d.get("v"), bool):
        raise SchemaVersionMismatch(f"packet version {d.get('v')!r}, expected {MEP_VERSION}")
    try:
        packet = packet_from_dict(d)
        return validate_packet(packet)
    except (InvariantViolation, DanglingStepReference) as exc:
        raise MalformedPacket(f"packet violates invariants: {exc}") from None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedPacket(f"packet structure invalid: {exc!r}") from None


def json_schema() -> dict:
    return json.loads(resources.files("tracexai.schemas").joinpath("mep-v1.schema.json").read_text("utf-8"))
