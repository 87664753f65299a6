"""Predictive models: OLS linear regression and IRLS logistic regression.

Fitting is deterministic given the data, which keeps cross-validation runs
reproducible. OLS solves via SVD (orthogonalization, not normal equations) and
returns the minimum-norm solution with a warning on rank-deficient designs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import FeatureMatrix
from .errors import ConfigError


def _design(fm_or_values) -> np.ndarray:
    values = fm_or_values.values if isinstance(fm_or_values, FeatureMatrix) else np.asarray(fm_or_values)
    return np.column_stack([np.ones(len(values)), values])


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray  # intercept first
    fit_diagnostics: dict

    def predict(self, fm_or_values) -> np.ndarray:
        return _design(fm_or_values) @ self.coefficients

    def to_json(self) -> dict:
        return {"kind": "linear", "coefficients": [float(c) for c in self.coefficients]}


@dataclass(frozen=True)
class LogisticModel:
    coefficients: np.ndarray
    converged: bool
    iterations: int

    def predict_proba(self, fm_or_values) -> np.ndarray:
        z = _design(fm_or_values) @ self.coefficients
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, fm_or_values) -> np.ndarray:
        return (self.predict_proba(fm_or_values) >= 0.5).astype(np.float64)

    def to_json(self) -> dict:
        return {
            "kind": "logistic",
            "coefficients": [float(c) for c in self.coefficients],
            "converged": self.converged,
            "iterations": self.iterations,
        }


def fit_ols(fm, y) -> LinearModel:
    """Least squares with intercept via SVD; minimum-norm on rank deficiency."""
    y = np.asarray(y, dtype=np.float64)
    X = _design(fm)
    n, p1 = X.shape
    if n <= p1:
        raise ConfigError(f"need more rows ({n}) than coefficients ({p1})")
    coef, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < p1:
        warnings.warn(
            f"rank-deficient design (rank {rank} < {p1}); returning the minimum-norm solution",
            RuntimeWarning,
            stacklevel=2,
        )
    residuals = y - X @ coef
    positive = sv[sv > sv[0] * np.finfo(np.float64).eps * max(n, p1)] if sv.size else sv
    cond = float(sv[0] / positive[-1]) if positive.size else math.inf
    return LinearModel(
        coef,
        {"residual_mse": float((residuals**2).mean()), "condition_estimate": cond, "rank": int(rank)},
    )


def _log_likelihood(z: np.ndarray, y: np.ndarray) -> float:
    return float((y * z - np.logaddexp(0.0, z)).sum())


def fit_logistic(fm, y_binary, max_iter: int = 100, tol: float = 1e-6) -> LogisticModel:
    """Logistic regression by iteratively reweighted least squares.

    Step-halving keeps the log-likelihood nondecreasing; a 1e-8 ridge on the
    weighted normal system keeps steps defined near separation. Converged
    means the gradient norm fell below tol * n at a genuine optimum;
    completely separated data (every margin strictly positive, so the
    likelihood is unbounded) reports converged=False even when saturation
    drives the gradient under the tolerance.
    """
    y = np.asarray(y_binary, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ConfigError("targets must be binary 0/1")
    if y.min() == y.max():
        raise ConfigError("both classes must be present")
    X = _design(fm)
    n, p1 = X.shape
    beta = np.zeros(p1)
    z = X @ beta
    ll = _log_likelihood(z, y)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        prob = 1.0 / (1.0 + np.exp(-z))
        grad = X.T @ (y - prob)
        if np.linalg.norm(grad) < tol * n:
            converged = True
            break
        w = prob * (1.0 - prob)
        hess = (X * w[:, None]).T @ X + 1e-8 * np.eye(p1)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            z_cand = X @ cand
            ll_cand = _log_likelihood(z_cand, y)
            if ll_cand >= ll:
                break
            scale *= 0.5
        else:
            break  # no improving step; stop at the current iterate
        beta, z, ll = cand, z_cand, ll_cand
    if converged and np.all((2.0 * y - 1.0) * z > 0.0):
        converged = False  # complete separation: no finite maximum exists
    return LogisticModel(beta, converged, iterations)


def score(model, fm, y) -> dict:
    """MSE for regression models, accuracy at threshold 0.5 for classifiers."""
    y = np.asarray(y, dtype=np.float64)
    if isinstance(model, LinearModel):
        return {"mse": float(((model.predict(fm) - y) ** 2).mean())}
    if isinstance(model, LogisticModel):
        return {"accuracy": float((model.predict(fm) == y).mean())}
    raise ConfigError(f"unknown model type {type(model).__name__}")
