"""Rubric-feature bridge: a success surrogate over rubric flags, attributed with linear SHAP.

Feature polarity is 1 = violated; the surrogate label is 1 = success, so a
negative SHAP value means the violation pushes a run toward failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorpusMismatch, DegenerateOutcomeClass, EmptyMatrix
from .outcome_stats import StatsReport
from .rubrics import RUBRIC_IDS
from .static_xai.attribution import mean_abs_shap, shap_values
from .static_xai.logreg import FitInfo, LogRegConfig, train_logreg


@dataclass(frozen=True, eq=False)
class RubricDesignMatrix:
    X: np.ndarray  # (N, 6) float 0/1, columns in RUBRIC_IDS order
    y: np.ndarray  # (N,) int, 1 = success
    run_ids: tuple


@dataclass(frozen=True, eq=False)
class BridgeReport:
    scores: dict  # rubric -> mean |SHAP|
    ranking: tuple  # rubric ids, descending score
    weights: dict
    bias: float
    base_value: float
    fit_info: FitInfo
    run_ids: tuple
    shap: np.ndarray  # (N, 6) per-run values for beeswarm plots
    features: np.ndarray  # (N, 6) design matrix


def flags_to_features(m) -> RubricDesignMatrix:
    if len(m) == 0:
        raise EmptyMatrix("flag matrix has no runs")
    return RubricDesignMatrix(
        X=np.asarray(m.flags, dtype=float),
        y=np.asarray(m.success, dtype=int),
        run_ids=tuple(m.run_ids),
    )


def rank_scores(scores: dict) -> tuple:
    return tuple(sorted(RUBRIC_IDS, key=lambda r: (-scores[r], RUBRIC_IDS.index(r))))


def run_bridge(m, train_config: LogRegConfig | None = None) -> BridgeReport:
    design = flags_to_features(m)
    n_success = int(design.y.sum())
    if n_success == 0 or n_success == design.y.size:
        raise DegenerateOutcomeClass("bridge surrogate needs both successful and failed runs")
    model = train_logreg(design.X, design.y, train_config or LogRegConfig(), feature_names=RUBRIC_IDS)
    glob = mean_abs_shap(model, design.X)
    scores = {r: float(v) for r, v in zip(RUBRIC_IDS, glob.values)}
    return BridgeReport(
        scores=scores,
        ranking=rank_scores(scores),
        weights={r: float(w) for r, w in zip(RUBRIC_IDS, model.weights)},
        bias=model.bias,
        base_value=glob.base_value,
        fit_info=model.fit_info,
        run_ids=design.run_ids,
        shap=shap_values(model, design.X),
        features=design.X,
    )


@dataclass(frozen=True)
class SummaryRow:
    rubric_id: str
    mean_abs_shap: float
    shap_rank: int
    delta_prev: float
    ratio_prev: object
    delta_rel: object
    rr: object


def paradigm_summary(report: BridgeReport, stats: StatsReport) -> list[SummaryRow]:
    """Per rubric: the surrogate's correlative signal beside the outcome-conditioned diagnostics."""
    if set(report.run_ids) != set(stats.run_ids) or len(report.run_ids) != len(stats.run_ids):
        raise CorpusMismatch("bridge report and statistics were computed on different runs")
    rows = []
    for r in RUBRIC_IDS:
        srow = stats.row(r)
        rows.append(
            SummaryRow(
                rubric_id=r,
                mean_abs_shap=report.scores[r],
                shap_rank=report.ranking.index(r) + 1,
                delta_prev=srow.prevalence.delta,
                ratio_prev=srow.prevalence.ratio,
                delta_rel=srow.reliability.delta,
                rr=srow.reliability.rr,
            )
        )
    return rows
