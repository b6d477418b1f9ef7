"""Explanation stability: rank agreement of feature attributions under perturbation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from ..errors import LengthMismatch, UndefinedCorrelation


def spearman_rho(scores_a, scores_b) -> float:
    """Spearman coefficient with average ranks for ties.

    Raises :class:`UndefinedCorrelation` when either input is constant.
    """
    a = np.asarray(scores_a, dtype=float).ravel()
    b = np.asarray(scores_b, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size} scores")
    if a.size == 0:
        raise LengthMismatch("empty score vectors")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    saa = float(np.dot(ra, ra))
    sbb = float(np.dot(rb, rb))
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedCorrelation("a ranking is constant")
    rho = float(np.dot(ra, rb)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, rho))


def top_k(scores, k: int) -> np.ndarray:
    """Indices of the k largest |score| values; ties broken by lower index."""
    s = np.abs(np.asarray(scores, dtype=float).ravel())
    return np.lexsort((np.arange(s.size), -s))[:k]


def top_k_union_rho(scores_a, scores_b, k: int) -> float:
    """Spearman over the union of both top-k sets.

    Inside its own top-k a feature is ranked by |score|; union members outside
    it share the last (tie-averaged) rank.
    """
    a = np.abs(np.asarray(scores_a, dtype=float).ravel())
    b = np.abs(np.asarray(scores_b, dtype=float).ravel())
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size} scores")
    ta, tb = top_k(a, k), top_k(b, k)
    union = np.union1d(ta, tb)
    va = np.where(np.isin(union, ta), a[union], -np.inf)
    vb = np.where(np.isin(union, tb), b[union], -np.inf)
    return spearman_rho(va, vb)


@dataclass(frozen=True)
class StabilityConfig:
    k: int = 10
    n_perturb: int = 20
    perturbation: str = "token_dropout"  # or "bootstrap_retrain"
    rate: float = 0.1
    seed: int = 42

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_perturb < 1:
            raise ValueError("n_perturb must be >= 1")
        if self.perturbation not in ("token_dropout", "bootstrap_retrain"):
            raise ValueError(f"unknown perturbation {self.perturbation!r}")
        if self.perturbation == "token_dropout" and not 0.0 < self.rate < 1.0:
            raise ValueError("dropout rate must be in (0, 1)")


@dataclass(frozen=True)
class StabilityResult:
    score: float
    n_pairs: int
    n_skipped: int
    per_instance: tuple

    def __float__(self):
        return self.score


def token_dropout(instance, rng: np.random.Generator, rate: float):
    """Drop each whitespace token (text) or each non-zero entry (vector) with probability ``rate``."""
    if isinstance(instance, str):
        tokens = instance.split()
        keep = rng.random(len(tokens)) >= rate
        return " ".join(t for t, k in zip(tokens, keep) if k)
    if sp.issparse(instance):
        out = sp.csr_matrix(instance, copy=True)
        out.data = out.data * (rng.random(out.data.size) >= rate)
        out.eliminate_zeros()
        return out
    x = np.array(instance, dtype=float)
    mask = (x != 0) & (rng.random(x.shape) < rate)
    x[mask] = 0.0
    return x


def _pair_rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def stability_score(explain_fn, instances, cfg: StabilityConfig | None = None, *, perturb=None, refit=None) -> StabilityResult:
    """Mean top-k Spearman between original and perturbed explanations.

    ``explain_fn(instance)`` returns one score per feature. In
    ``token_dropout`` mode each instance is perturbed ``n_perturb`` times
    (``perturb(instance, rng)`` overrides the default dropout). In
    ``bootstrap_retrain`` mode ``refit(rng)`` must return a retrained
    explain_fn; it is called once per draw and compared on every instance.
    Pairs whose correlation is undefined are skipped and counted.
    """
    cfg = cfg or StabilityConfig()
    instances = list(instances)
    if not instances:
        raise ValueError("no instances")
    if cfg.perturbation == "bootstrap_retrain" and refit is None:
        raise ValueError("bootstrap_retrain needs a refit callable")
    originals = [np.asarray(explain_fn(x), dtype=float).ravel() for x in instances]

    refitted = []
    if cfg.perturbation == "bootstrap_retrain":
        refitted = [refit(_pair_rng(cfg.seed, p)) for p in range(cfg.n_perturb)]

    per_instance = []
    total = 0.0
    n_pairs = 0
    n_skipped = 0
    for i, (x, base) in enumerate(zip(instances, originals)):
        rhos = []
        for p in range(cfg.n_perturb):
            if cfg.perturbation == "bootstrap_retrain":
                other = refitted[p](x)
            else:
                rng = _pair_rng(cfg.seed, i, p)
                x_p = perturb(x, rng) if perturb is not None else token_dropout(x, rng, cfg.rate)
                other = explain_fn(x_p)
            try:
                rhos.append(top_k_union_rho(base, other, cfg.k))
            except UndefinedCorrelation:
                n_skipped += 1
        per_instance.append(float(np.mean(rhos)) if rhos else float("nan"))
        total += sum(rhos)
        n_pairs += len(rhos)
    if n_pairs == 0:
        raise UndefinedCorrelation("every instance/perturbation pair was undefined")
    return StabilityResult(total / n_pairs, n_pairs, n_skipped, tuple(per_instance))
