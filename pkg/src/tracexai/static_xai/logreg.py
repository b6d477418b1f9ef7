"""Class-weighted, L2-penalised logistic regression.

Objective (bias unpenalised)::

    sum_i cw[y_i] * (log(1 + exp(z_i)) - y_i * z_i) + (l2 / 2) * ||w||^2,   z = X w + b

with balanced class weights ``cw[c] = N / (2 * N_c)``. Minimised with
L-BFGS; iteration stops once the full gradient norm is at most ``tol`` or
after ``max_iter`` iterations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit

from ..errors import DimensionMismatch, SingleClassInput

FORMAT = "tracexai.linear_model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class LogRegConfig:
    max_iter: int = 500
    tol: float = 1e-6
    l2: float = 1.0
    class_weight: str | None = "balanced"


@dataclass(frozen=True)
class FitInfo:
    n_iter: int
    grad_norm: float
    loss: float
    converged: bool
    status: str


@dataclass(eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    background_means: np.ndarray
    feature_names: tuple | None = None
    fit_info: FitInfo | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.background_means = np.asarray(self.background_means, dtype=float).ravel()
        self.bias = float(self.bias)
        if self.weights.shape != self.background_means.shape:
            raise DimensionMismatch(
                f"weights have {self.weights.size} entries, background means {self.background_means.size}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.background_means)) and np.isfinite(self.bias)):
            raise ValueError("linear model parameters must be finite")

    @property
    def n_features(self) -> int:
        return self.weights.size

    def to_json(self) -> str:
        d = {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "background_means": self.background_means.tolist(),
            "feature_names": list(self.feature_names) if self.feature_names is not None else None,
            "fit_info": None if self.fit_info is None else vars(self.fit_info),
        }
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        d = json.loads(text)
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError(f"not a {FORMAT} v{FORMAT_VERSION} document")
        names = d.get("feature_names")
        info = d.get("fit_info")
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            bias=d["bias"],
            background_means=np.asarray(d["background_means"], dtype=float),
            feature_names=tuple(names) if names is not None else None,
            fit_info=FitInfo(**info) if info else None,
        )


def _as_matrix(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def column_means(X) -> np.ndarray:
    return np.asarray(X.mean(axis=0), dtype=float).ravel()


def class_weights(y: np.ndarray, mode: str | None) -> np.ndarray:
    if mode is None:
        return np.ones_like(y, dtype=float)
    if mode != "balanced":
        raise ValueError(f"unknown class_weight mode {mode!r}")
    n = y.size
    n_pos = y.sum()
    return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))


def train_logreg(X, y, config: LogRegConfig | None = None, feature_names=None) -> LinearModel:
    config = config or LogRegConfig()
    X = _as_matrix(X)
    y = np.asarray(y).astype(float).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise SingleClassInput("training labels contain a single class")
    cw = class_weights(y, config.class_weight)
    d = X.shape[1]
    cache = {}

    def objective(theta):
        w, b = theta[:d], theta[d]
        z = X @ w + b
        loss = np.sum(cw * (np.logaddexp(0.0, z) - y * z)) + 0.5 * config.l2 * np.dot(w, w)
        r = cw * (expit(z) - y)
        grad = np.empty_like(theta)
        grad[:d] = X.T @ r + config.l2 * w
        grad[d] = r.sum()
        cache["x"], cache["grad"] = theta.copy(), grad
        return loss, grad

    def grad_at(theta):
        if "x" not in cache or not np.array_equal(cache["x"], theta):
            objective(theta)
        return cache["grad"]

    def stop_when_small(intermediate_result):
        if np.linalg.norm(grad_at(intermediate_result.x)) <= config.tol:
            raise StopIteration

    theta0 = np.zeros(d + 1)
    loss0, g0 = objective(theta0)
    if np.linalg.norm(g0) <= config.tol:
        res_x, n_iter, status = theta0, 0, "converged"
    else:
        res = minimize(
            objective,
            theta0,
            jac=True,
            method="L-BFGS-B",
            callback=stop_when_small,
            options={"maxiter": config.max_iter, "gtol": 0.0, "ftol": 0.0, "maxcor": 20},
        )
        res_x, n_iter = res.x, int(res.nit)
        status = "converged" if np.linalg.norm(grad_at(res_x)) <= config.tol else (
            "max_iter" if n_iter >= config.max_iter else "stalled"
        )
    loss, grad = objective(res_x)
    gnorm = float(np.linalg.norm(grad))
    info = FitInfo(n_iter=n_iter, grad_norm=gnorm, loss=float(loss), converged=gnorm <= config.tol, status=status)
    return LinearModel(
        weights=res_x[:d].copy(),
        bias=float(res_x[d]),
        background_means=column_means(X),
        feature_names=tuple(feature_names) if feature_names is not None else None,
        fit_info=info,
    )


def decision_function(m: LinearModel, x):
    """Margin ``w.x + b`` for a vector (returns float) or a matrix (returns array)."""
    if sp.issparse(x):
        if x.shape[-1] != m.n_features:
            raise DimensionMismatch(f"expected {m.n_features} features, got {x.shape[-1]}")
        z = np.asarray(x @ m.weights).ravel() + m.bias
        return z if x.shape[0] != 1 else float(z[0])
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.n_features:
        raise DimensionMismatch(f"expected {m.n_features} features, got {x.shape[-1]}")
    z = x @ m.weights + m.bias
    return float(z) if x.ndim == 1 else z


def predict_proba(m: LinearModel, x):
    z = decision_function(m, x)
    return float(expit(z)) if np.isscalar(z) else expit(z)
