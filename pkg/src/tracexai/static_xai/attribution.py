"""Feature attributions: exact linear SHAP, LIME-style local surrogates, PDP.

SHAP values are computed in margin (log-odds) space against the model's
background means, where for a linear model they are exact:
``phi_i = w_i * (x_i - mu_i)`` and ``sum(phi) + base_value = w.x + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateInstance, DimensionMismatch
from .logreg import LinearModel

_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class Attribution:
    values: np.ndarray
    base_value: float
    scope: str  # "local" or "global"
    feature_names: tuple | None = None

    def top(self, k: int, by_abs: bool = True) -> list[tuple[int, float]]:
        key = np.abs(self.values) if by_abs else self.values
        order = np.lexsort((np.arange(key.size), -key))[:k]
        return [(int(i), float(self.values[i])) for i in order]


def _dense_row(x, n_features) -> np.ndarray:
    if sp.issparse(x):
        x = x.toarray()
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 1 or x.size != n_features:
        raise DimensionMismatch(f"expected a vector of {n_features} features, got shape {x.shape}")
    return x


def shap_linear(m: LinearModel, x) -> Attribution:
    x = _dense_row(x, m.n_features)
    phi = m.weights * (x - m.background_means)
    base = float(np.dot(m.weights, m.background_means) + m.bias)
    return Attribution(phi, base, "local", m.feature_names)


def _row_chunks(X):
    for start in range(0, X.shape[0], _CHUNK):
        block = X[start : start + _CHUNK]
        yield block.toarray() if sp.issparse(block) else np.asarray(block, dtype=float)


def shap_values(m: LinearModel, X) -> np.ndarray:
    """Per-row SHAP values, shape (n_rows, n_features). Dense; use on modest inputs."""
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(f"expected {m.n_features} columns, got {X.shape[1]}")
    return np.vstack([m.weights * (block - m.background_means) for block in _row_chunks(X)])


def mean_abs_shap(m: LinearModel, X) -> Attribution:
    if X.shape[0] == 0:
        raise ValueError("X has no rows")
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(f"expected {m.n_features} columns, got {X.shape[1]}")
    total = np.zeros(m.n_features)
    for block in _row_chunks(X):
        total += np.abs(m.weights * (block - m.background_means)).sum(axis=0)
    base = float(np.dot(m.weights, m.background_means) + m.bias)
    return Attribution(total / X.shape[0], base, "global", m.feature_names)


# -- LIME --------------------------------------------------------------------


@dataclass(frozen=True)
class LimeConfig:
    num_features: int = 10
    num_samples: int = 5000
    random_state: int = 42
    kernel_width: float | None = None  # default 0.75 * sqrt(active feature count)
    ridge_alpha: float = 1.0


@dataclass(frozen=True)
class LimeExplanation:
    features: tuple  # ((feature index, weight), ...) by descending |weight|
    intercept: float
    kernel_width: float
    n_active: int


def _weighted_ridge(Z, y, sw, alpha):
    sw_sum = sw.sum()
    z_mean = sw @ Z / sw_sum
    y_mean = sw @ y / sw_sum
    Zc = Z - z_mean
    yc = y - y_mean
    A = Zc.T @ (Zc * sw[:, None]) + alpha * np.eye(Z.shape[1])
    coef = np.linalg.solve(A, Zc.T @ (sw * yc))
    return coef, float(y_mean - z_mean @ coef)


def lime_explain(predict_fn, instance, config: LimeConfig | None = None) -> LimeExplanation:
    """Local surrogate over binary masks of the instance's non-zero features.

    Row 0 of the sample is the unmasked instance; every other row switches off
    a uniformly drawn number of active features. ``predict_fn`` receives a
    (num_samples, n_features) matrix, sparse if the instance was sparse, and
    returns one score per row.
    """
    config = config or LimeConfig()
    sparse_in = sp.issparse(instance)
    x = np.asarray(instance.toarray() if sparse_in else instance, dtype=float).ravel()
    active = np.flatnonzero(x)
    d = active.size
    if d == 0:
        raise DegenerateInstance("instance has no active features")
    rng = np.random.default_rng(config.random_state)
    n = config.num_samples
    Z = np.ones((n, d))
    n_off = rng.integers(1, d + 1, size=n - 1)
    # a random permutation per row; switch off its first n_off positions
    position = np.argsort(rng.random((n - 1, d)), axis=1).argsort(axis=1)
    Z[1:] = position >= n_off[:, None]
    if sparse_in:
        samples = sp.csr_matrix(Z * x[active])
        samples = sp.csr_matrix((samples.data, active[samples.indices], samples.indptr), shape=(n, x.size))
    else:
        samples = np.tile(x, (n, 1))
        samples[:, active] *= Z
    preds = np.asarray(predict_fn(samples), dtype=float).ravel()
    if preds.size != n:
        raise DimensionMismatch(f"predict_fn returned {preds.size} scores for {n} samples")

    width = config.kernel_width if config.kernel_width is not None else 0.75 * np.sqrt(d)
    dist = np.sqrt(d - Z.sum(axis=1))
    sw = np.sqrt(np.exp(-(dist**2) / width**2))
    coef, intercept = _weighted_ridge(Z, preds, sw, config.ridge_alpha)

    order = np.lexsort((active, -np.abs(coef)))[: config.num_features]
    feats = tuple((int(active[i]), float(coef[i])) for i in order)
    return LimeExplanation(feats, intercept, float(width), d)


# -- partial dependence ------------------------------------------------------


def pdp(predict_fn, X, feature: int, grid) -> list[tuple[float, float]]:
    """Mean prediction over rows of ``X`` with column ``feature`` pinned to each grid value."""
    Xd = X.toarray() if sp.issparse(X) else np.array(X, dtype=float)
    curve = []
    for v in grid:
        Xv = Xd.copy()
        Xv[:, feature] = v
        curve.append((float(v), float(np.mean(predict_fn(Xv)))))
    return curve
