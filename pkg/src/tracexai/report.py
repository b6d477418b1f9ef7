"""Report tables in markdown, CSV and JSON.

Every table kind has a fixed column schema. Reals are printed to 3 decimals,
an infinite ratio as "∞" and an undefined (0/0) quantity as "—", identically
in every format, so CSV and markdown carry the same numeric content.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .bridge import BridgeReport, SummaryRow
from .outcome_stats import StatsReport, is_undefined
from .static_xai.attribution import Attribution

INF = "∞"
UNDEF = "—"
FORMATS = ("markdown", "csv", "json")

COLUMNS = {
    "prevalence": ("rubric", "p_flag_given_failure", "p_flag_given_success", "delta_prev", "ratio_prev", "mark"),
    "reliability": ("rubric", "p_success_given_flag", "p_success_given_noflag", "delta_rel", "rr", "mark"),
    "bridge": ("rank", "rubric", "mean_abs_shap", "weight"),
    "paradigm_summary": ("rubric", "mean_abs_shap", "shap_rank", "delta_prev", "ratio_prev", "delta_rel", "rr"),
    "attribution": ("rank", "feature", "score"),
}
TITLES = {
    "prevalence": "Failure-mode prevalence",
    "reliability": "Reliability correlates",
    "bridge": "Rubric-feature bridge (mean |SHAP|)",
    "paradigm_summary": "Static vs agentic signals per rubric",
    "attribution": "Feature attribution",
}


@dataclass(frozen=True)
class Table:
    kind: str
    rows: tuple  # tuples of raw cells, in COLUMNS[kind] order

    def __post_init__(self):
        if self.kind not in COLUMNS:
            raise ValueError(f"unknown table kind {self.kind!r}")
        width = len(COLUMNS[self.kind])
        if any(len(r) != width for r in self.rows):
            raise ValueError(f"{self.kind} rows must have {width} cells")

    @property
    def columns(self):
        return COLUMNS[self.kind]


def format_cell(v) -> str:
    if is_undefined(v) or v is None:
        return UNDEF
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return UNDEF
    if math.isinf(v):
        return INF if v > 0 else "-" + INF
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _json_cell(v):
    s = format_cell(v)
    if isinstance(v, str) or s in (UNDEF, INF, "-" + INF):
        return s
    return int(s) if isinstance(v, (int, np.integer)) and not isinstance(v, (bool, np.bool_)) else float(s)


# -- table builders ----------------------------------------------------------


def stats_tables(report: StatsReport) -> list[Table]:
    prev = tuple(
        (r.rubric_id, r.prevalence.p_flag_given_failure, r.prevalence.p_flag_given_success, r.prevalence.delta,
         r.prevalence.ratio, r.prevalence_mark)
        for r in report.rows
    )
    rel = tuple(
        (r.rubric_id, r.reliability.p_success_given_flag, r.reliability.p_success_given_noflag, r.reliability.delta,
         r.reliability.rr, r.reliability_mark)
        for r in report.rows
    )
    return [Table("prevalence", prev), Table("reliability", rel)]


def bridge_table(report: BridgeReport) -> Table:
    return Table(
        "bridge",
        tuple((i + 1, r, report.scores[r], report.weights[r]) for i, r in enumerate(report.ranking)),
    )


def summary_table(rows) -> Table:
    return Table(
        "paradigm_summary",
        tuple((s.rubric_id, s.mean_abs_shap, s.shap_rank, s.delta_prev, s.ratio_prev, s.delta_rel, s.rr) for s in rows),
    )


def attribution_table(attr: Attribution, k: int = 20) -> Table:
    names = attr.feature_names
    return Table(
        "attribution",
        tuple((rank + 1, names[i] if names is not None else str(i), v) for rank, (i, v) in enumerate(attr.top(k))),
    )


def to_tables(results) -> list[Table]:
    if isinstance(results, Table):
        return [results]
    if isinstance(results, StatsReport):
        return stats_tables(results)
    if isinstance(results, BridgeReport):
        return [bridge_table(results)]
    if isinstance(results, Attribution):
        return [attribution_table(results)]
    if isinstance(results, (list, tuple)):
        if results and all(isinstance(r, SummaryRow) for r in results):
            return [summary_table(results)]
        out = []
        for r in results:
            out.extend(to_tables(r))
        return out
    raise TypeError(f"cannot render {type(results).__name__}")


# -- rendering ---------------------------------------------------------------


def _markdown(tables) -> str:
    parts = []
    for t in tables:
        lines = [f"### {TITLES[t.kind]}", "", "| " + " | ".join(t.columns) + " |",
                 "|" + "|".join(" --- " for _ in t.columns) + "|"]
        lines += ["| " + " | ".join(format_cell(c) for c in row) + " |" for row in t.rows]
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def _csv(tables) -> str:
    # several tables are separated by a blank line, each with its own header
    chunks = []
    for t in tables:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(t.columns)
        for row in t.rows:
            w.writerow([format_cell(c) for c in row])
        chunks.append(buf.getvalue())
    return "\n".join(chunks)


def _json(tables) -> str:
    doc = {
        "tables": [
            {"kind": t.kind, "columns": list(t.columns), "rows": [[_json_cell(c) for c in row] for row in t.rows]}
            for t in tables
        ]
    }
    return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def render_report(results, format: str = "markdown") -> bytes:
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    tables = to_tables(results)
    text = {"markdown": _markdown, "csv": _csv, "json": _json}[format](tables)
    return text.encode("utf-8")


def parse_csv_cells(data: bytes) -> list[list[str]]:
    """Data cells of a rendered CSV report, header rows and separators removed."""
    rows = []
    header = True
    for row in csv.reader(io.StringIO(data.decode("utf-8"))):
        if not row:
            header = True
            continue
        if header:
            header = False
            continue
        rows.append(row)
    return rows


def parse_markdown_cells(data: bytes) -> list[list[str]]:
    rows = []
    for block in data.decode("utf-8").split("### ")[1:]:
        table_lines = [ln for ln in block.splitlines() if ln.startswith("|")]
        for ln in table_lines[2:]:
            rows.append([c.strip() for c in ln.strip("|").split("|")])
    return rows


# -- plot data ---------------------------------------------------------------


def beeswarm_json(report: BridgeReport) -> bytes:
    """Per-run SHAP values and feature values by rubric, in ranking order."""
    from .rubrics import RUBRIC_IDS

    doc = {
        "base_value": report.base_value,
        "run_ids": list(report.run_ids),
        "rubrics": [
            {
                "rubric": r,
                "mean_abs_shap": report.scores[r],
                "shap": report.shap[:, RUBRIC_IDS.index(r)].tolist(),
                "flag": report.features[:, RUBRIC_IDS.index(r)].astype(int).tolist(),
            }
            for r in report.ranking
        ],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def pdp_csv(curves: dict) -> bytes:
    """``curves`` maps feature name to [(grid value, mean prediction), ...]."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "value", "mean_prediction"])
    for name, curve in curves.items():
        for v, p in curve:
            w.writerow([name, repr(float(v)), repr(float(p))])
    return buf.getvalue().encode("utf-8")
