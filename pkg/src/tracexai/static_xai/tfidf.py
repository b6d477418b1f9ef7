"""TF-IDF vectorizer with word n-grams and document-frequency bounds.

Tokens are lowercase runs of two or more word characters; stopwords are
removed before n-grams are formed. Weights are raw term counts times a
smoothed idf, ``ln((1 + n) / (1 + df)) + 1``, and each row is L2-normalised.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import EmptyVocabulary
from .stopwords import STOPWORD_LISTS

TOKEN_RE = re.compile(r"(?u)\b\w\w+\b")
FORMAT = "tracexai.tfidf"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TfIdfConfig:
    ngram_range: tuple = (1, 2)
    min_df: float = 5  # int: document count, float in (0,1]: fraction of documents
    max_df: float = 0.9
    stop_words: str | None = "english"

    def stopwords(self) -> frozenset:
        if self.stop_words is None:
            return frozenset()
        try:
            return STOPWORD_LISTS[self.stop_words]
        except KeyError:
            raise ValueError(f"unknown stopword list {self.stop_words!r}") from None


@dataclass(eq=False)
class TfIdfModel:
    vocabulary: dict  # term -> column
    idf: np.ndarray
    config: TfIdfConfig = field(default_factory=TfIdfConfig)
    document_frequency: dict = field(default_factory=dict)
    n_docs: int = 0

    def __post_init__(self):
        self._terms = None

    @property
    def feature_names(self) -> list[str]:
        if self._terms is None:
            terms = [None] * len(self.vocabulary)
            for t, j in self.vocabulary.items():
                terms[j] = t
            self._terms = terms
        return self._terms

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": FORMAT,
                "version": FORMAT_VERSION,
                "config": {
                    "ngram_range": list(self.config.ngram_range),
                    "min_df": self.config.min_df,
                    "max_df": self.config.max_df,
                    "stop_words": self.config.stop_words,
                },
                "n_docs": self.n_docs,
                "terms": self.feature_names,
                "idf": [float(v) for v in self.idf],
                "df": [int(self.document_frequency.get(t, 0)) for t in self.feature_names],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "TfIdfModel":
        d = json.loads(text)
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError(f"not a {FORMAT} v{FORMAT_VERSION} document")
        c = d["config"]
        cfg = TfIdfConfig(tuple(c["ngram_range"]), c["min_df"], c["max_df"], c["stop_words"])
        terms = d["terms"]
        return cls(
            vocabulary={t: j for j, t in enumerate(terms)},
            idf=np.asarray(d["idf"], dtype=float),
            config=cfg,
            document_frequency=dict(zip(terms, d["df"])),
            n_docs=d["n_docs"],
        )


def analyze(doc: str, config: TfIdfConfig, stopwords=None) -> list[str]:
    stopwords = config.stopwords() if stopwords is None else stopwords
    tokens = [t for t in TOKEN_RE.findall(doc.lower()) if t not in stopwords]
    lo, hi = config.ngram_range
    terms = []
    for n in range(lo, hi + 1):
        terms.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return terms


def _doc_count(bound, n_docs):
    # ints are document counts, floats are fractions of the corpus
    return bound if isinstance(bound, (int, np.integer)) else bound * n_docs


def fit_tfidf(corpus, config: TfIdfConfig | None = None) -> TfIdfModel:
    config = config or TfIdfConfig()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    n = len(corpus)
    stop = config.stopwords()
    df = Counter()
    for doc in corpus:
        df.update(set(analyze(doc, config, stop)))
    lo = _doc_count(config.min_df, n)
    hi = _doc_count(config.max_df, n)
    if hi < lo:
        raise ValueError("max_df corresponds to fewer documents than min_df")
    kept = sorted(t for t, c in df.items() if lo <= c <= hi)
    if not kept:
        raise EmptyVocabulary("document-frequency bounds exclude every term")
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in kept])
    return TfIdfModel(
        vocabulary={t: j for j, t in enumerate(kept)},
        idf=idf,
        config=config,
        document_frequency={t: df[t] for t in kept},
        n_docs=n,
    )


def transform_many(m: TfIdfModel, docs) -> sp.csr_matrix:
    stop = m.config.stopwords()
    indptr = [0]
    indices = []
    data = []
    for doc in docs:
        counts = Counter(j for t in analyze(doc, m.config, stop) if (j := m.vocabulary.get(t)) is not None)
        cols = sorted(counts)
        vals = np.array([counts[j] * m.idf[j] for j in cols], dtype=float)
        norm = np.sqrt(np.dot(vals, vals))
        if norm > 0:
            vals /= norm
        indices.extend(cols)
        data.extend(vals.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, m.n_features))


def transform(m: TfIdfModel, doc: str) -> sp.csr_matrix:
    """One document as a 1 x n_features sparse row; out-of-vocabulary terms are ignored."""
    return transform_many(m, [doc])
