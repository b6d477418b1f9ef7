"""Labelled text corpora: CSV I/O and a seeded synthetic job-posting generator."""

from __future__ import annotations

import csv
import io

import numpy as np

from ..errors import DataError

IT_TERMS = (
    "software developer python java database network server programming engineer cloud linux "
    "backend frontend devops sql api testing security systems code"
).split()
NON_IT_TERMS = (
    "accounting finance sales marketing customer teacher nurse hotel logistics legal audit "
    "retail manager hospitality translator driver warehouse reception tax budget"
).split()
SHARED_TERMS = (
    "experience team work company position candidate skills required office project "
    "communication development management years responsible support ability knowledge strong english"
).split()


def synthetic_job_postings(n_docs: int, seed: int = 0, *, signal: float = 0.35, leak: float = 0.05,
                           zipf: float = 1.0, min_len: int = 60, max_len: int = 120):
    """Two-class postings, alternating labels starting with 0.

    A label-1 posting draws ``signal`` of its tokens from the IT lexicon, a
    label-0 posting from the non-IT lexicon; ``leak`` of tokens come from the
    other class and the rest from a shared lexicon. Within each lexicon words
    follow a Zipf law with exponent ``zipf`` (0 gives uniform draws).
    """
    rng = np.random.default_rng(seed)

    def sampler(pool):
        p = 1.0 / np.arange(1, len(pool) + 1) ** zipf
        return pool, p / p.sum()

    it, non_it, shared = sampler(IT_TERMS), sampler(NON_IT_TERMS), sampler(SHARED_TERMS)
    docs, labels = [], []
    for i in range(n_docs):
        label = i % 2
        own, other = (it, non_it) if label else (non_it, it)
        n_tok = int(rng.integers(min_len, max_len + 1))
        words = []
        for v in rng.random(n_tok):
            pool, p = own if v < signal else other if v < signal + leak else shared
            words.append(pool[int(rng.choice(len(pool), p=p))])
        docs.append(" ".join(words))
        labels.append(label)
    return docs, np.array(labels, dtype=int)


_BOOL_LABELS = {"true": 1, "false": 0, "1": 1, "0": 0}


def read_labelled_csv(source) -> tuple[list[str], np.ndarray]:
    """Read labelled text from a CSV path or file object.

    Accepts ``text,label`` columns with 0/1 labels, or the Online Job Postings
    layout, where ``jobpost`` holds the text and ``IT`` is TRUE/FALSE.
    """
    fh = open(source, newline="", encoding="utf-8") if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__") else source
    try:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        if {"text", "label"} <= fields:
            text_col, label_col = "text", "label"
        elif {"jobpost", "IT"} <= fields:
            text_col, label_col = "jobpost", "IT"
        else:
            raise DataError("CSV must have 'text' and 'label' columns (or 'jobpost' and 'IT')")
        docs, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            raw = (row[label_col] or "").strip()
            label = _BOOL_LABELS.get(raw.lower())
            if label is None or (label_col == "label" and raw not in ("0", "1")):
                raise DataError(f"line {line_no}: label {row[label_col]!r} must be 0 or 1")
            docs.append(row[text_col] or "")
            labels.append(label)
    finally:
        if fh is not source:
            fh.close()
    return docs, np.array(labels, dtype=int)


def write_labelled_csv(docs, labels) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["text", "label"])
    for d, y in zip(docs, labels):
        w.writerow([d, int(y)])
    return buf.getvalue()
