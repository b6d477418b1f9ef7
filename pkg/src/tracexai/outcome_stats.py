"""Outcome-conditioned rubric statistics.

For one rubric the 2x2 table is::

                 failure (y=0)   success (y=1)
    flag=1             a               c
    flag=0             b               d

Prevalence compares P(flag | failure) = a/(a+b) with P(flag | success) = c/(c+d).
Reliability compares P(success | flag) = c/(a+c) with P(success | no flag) = d/(b+d).
Raw frequencies, no smoothing. A 0/0 quantity is :data:`UNDEFINED`, never NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOutcomeClass, EmptyMatrix
from .rubrics import RUBRIC_IDS


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()


def is_undefined(x) -> bool:
    return x is UNDEFINED


@dataclass(frozen=True)
class ContingencyTable:
    rubric_id: str
    a: int  # flag & failure
    b: int  # no flag & failure
    c: int  # flag & success
    d: int  # no flag & success

    def __post_init__(self):
        for name in "abcd":
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"count {name} must be a non-negative integer, got {v!r}")
        if self.n < 1:
            raise ValueError("contingency table is empty")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def n_failure(self) -> int:
        return self.a + self.b

    @property
    def n_success(self) -> int:
        return self.c + self.d


@dataclass(frozen=True)
class PrevalenceResult:
    p_flag_given_failure: float
    p_flag_given_success: float
    delta: float
    ratio: object  # float, math.inf or UNDEFINED


@dataclass(frozen=True)
class ReliabilityResult:
    p_success_given_flag: object
    p_success_given_noflag: object
    delta: object
    rr: object


def _div(num, den):
    return UNDEFINED if den == 0 else num / den


def _ratio(num, den):
    """Ratio of two non-negative rates: +inf for x/0 with x>0, UNDEFINED for 0/0 or undefined inputs."""
    if is_undefined(num) or is_undefined(den):
        return UNDEFINED
    if den == 0:
        return math.inf if num > 0 else UNDEFINED
    return num / den


def build_contingency(m, rubric_id: str) -> ContingencyTable:
    if len(m) == 0:
        raise EmptyMatrix("flag matrix has no runs")
    f = m.column(rubric_id).astype(bool)
    s = np.asarray(m.success, dtype=bool)
    return ContingencyTable(
        rubric_id,
        a=int(np.sum(f & ~s)),
        b=int(np.sum(~f & ~s)),
        c=int(np.sum(f & s)),
        d=int(np.sum(~f & s)),
    )


def prevalence(ct: ContingencyTable) -> PrevalenceResult:
    if ct.n_failure == 0 or ct.n_success == 0:
        raise DegenerateOutcomeClass(
            f"{ct.rubric_id}: need both outcome classes (failures={ct.n_failure}, successes={ct.n_success})"
        )
    p_fail = ct.a / ct.n_failure
    p_succ = ct.c / ct.n_success
    return PrevalenceResult(p_fail, p_succ, p_fail - p_succ, _ratio(p_fail, p_succ))


def reliability(ct: ContingencyTable) -> ReliabilityResult:
    p_flag = _div(ct.c, ct.a + ct.c)
    p_noflag = _div(ct.d, ct.b + ct.d)
    if is_undefined(p_flag) or is_undefined(p_noflag):
        delta = UNDEFINED
    else:
        delta = p_flag - p_noflag
    return ReliabilityResult(p_flag, p_noflag, delta, _ratio(p_flag, p_noflag))


@dataclass(frozen=True)
class StatsRow:
    rubric_id: str
    table: ContingencyTable
    prevalence: PrevalenceResult
    reliability: ReliabilityResult
    prevalence_mark: str = ""  # "best", "second", "worst" or ""
    reliability_mark: str = ""


@dataclass(frozen=True)
class StatsReport:
    rows: tuple
    run_ids: tuple
    n_failure: int
    n_success: int

    def row(self, rubric_id: str) -> StatsRow:
        return next(r for r in self.rows if r.rubric_id == rubric_id)

    def marked(self, column: str, mark: str) -> str | None:
        attr = f"{column}_mark"
        return next((r.rubric_id for r in self.rows if getattr(r, attr) == mark), None)


def _marks(values: list, lower_is_better: bool) -> list[str]:
    """Best/second/worst labels over defined values; ties go to the earlier position."""
    idx = [i for i, v in enumerate(values) if not is_undefined(v)]
    marks = [""] * len(values)
    if not idx:
        return marks
    sign = 1 if lower_is_better else -1
    ranked = sorted(idx, key=lambda i: (sign * values[i], i))
    worst = sorted(idx, key=lambda i: (-sign * values[i], i))[0]
    marks[worst] = "worst"
    for i, label in zip((i for i in ranked if i != worst), ("best", "second")):
        marks[i] = label
    return marks


def stats_report(m) -> StatsReport:
    """Per-rubric prevalence and reliability in canonical rubric order, annotated.

    Prevalence: best = lowest delta, worst = highest delta. Reliability: best =
    highest RR, worst = lowest RR.
    """
    tables = [build_contingency(m, r) for r in RUBRIC_IDS]
    prev = [prevalence(ct) for ct in tables]
    rel = [reliability(ct) for ct in tables]
    pmarks = _marks([p.delta for p in prev], lower_is_better=True)
    rmarks = _marks([r.rr for r in rel], lower_is_better=False)
    rows = tuple(
        StatsRow(r, ct, p, q, pm, rm) for r, ct, p, q, pm, rm in zip(RUBRIC_IDS, tables, prev, rel, pmarks, rmarks)
    )
    return StatsReport(rows, tuple(m.run_ids), tables[0].n_failure, tables[0].n_success)


def table_from_counts(counts: dict) -> "object":
    """Build a flag matrix realising given per-rubric (a, b, c, d) counts.

    All rubrics must share the same failure and success totals. Useful for
    reproducing published tables from reconstructed counts.
    """
    from .rubric_judge import FlagMatrix

    totals = {(a + b, c + d) for a, b, c, d in counts.values()}
    if len(totals) != 1:
        raise ValueError(f"inconsistent outcome totals across rubrics: {sorted(totals)}")
    n_fail, n_succ = totals.pop()
    n = n_fail + n_succ
    flags = np.zeros((n, len(RUBRIC_IDS)), dtype=np.int8)
    for j, r in enumerate(RUBRIC_IDS):
        a, b, c, d = counts.get(r, (0, n_fail, 0, n_succ))
        flags[:a, j] = 1
        flags[n_fail : n_fail + c, j] = 1
    success = np.array([False] * n_fail + [True] * n_succ)
    run_ids = tuple(f"run-{i:04d}" for i in range(n))
    return FlagMatrix(run_ids, flags, success)
