"""Randomly constructed explanation packets for round-trip tests."""

import numpy as np

from tracexai.mep import build_agentic_mep, build_global_static_mep, build_static_mep
from tracexai.rubric_judge import judge_rules
from tracexai.static_xai import Attribution
from tracexai.trace_model import IntegrityViolation, validate_trajectory

_WORDS = ["python", "sql", "nurse", "audit", "cloud", "ünïcode", "tab\tword", 'quote"d', "emoji 🚀", ""]


def random_packet(rng: np.random.Generator, corpus):
    kind = rng.integers(3)
    if kind == 2:
        t = corpus[int(rng.integers(len(corpus)))]
        integrity = validate_trajectory(t)
        if rng.random() < 0.3:
            integrity = integrity + [IntegrityViolation("unanswered_tool_call", int(rng.integers(20)), "x")]
        replay_ok = [True, False, None][int(rng.integers(3))]
        return build_agentic_mep(t, judge_rules(t), replay_ok, integrity)
    d = int(rng.integers(1, 30))
    names = tuple(f"{_WORDS[int(rng.integers(len(_WORDS)))]}_{j}" for j in range(d))
    values = rng.normal(scale=10 ** rng.uniform(-6, 3), size=d)
    stability = float(rng.uniform(-1, 1))
    top_k = int(rng.integers(1, 15))
    if kind == 0:
        attr = Attribution(values, float(rng.normal()), "local", names if rng.random() < 0.8 else None)
        text = " ".join(_WORDS[int(i)] for i in rng.integers(len(_WORDS), size=int(rng.integers(0, 12))))
        label = int(rng.integers(2))
        return build_static_mep(f"model-{rng.integers(1000)}", text, attr, stability, predicted_label=label,
                                confidence=float(rng.uniform(0.5, 1.0)), top_k=top_k)
    attr = Attribution(np.abs(values), float(rng.normal()), "global", names)
    pdp_ref = "pdp.csv" if rng.random() < 0.5 else None
    return build_global_static_mep("model.json", attr, stability, corpus_digest="%064x" % int(rng.integers(2**62)),
                                   pdp_ref=pdp_ref, top_k=top_k)
