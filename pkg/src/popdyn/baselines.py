"""Closed-form linear baseline over flattened feature sequences.

The bias is absorbed as an always-1 extra dimension. Fitting is ridge
least squares on log1p targets, so the baseline and the recurrent models
are compared free of optimizer confounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LinearModel", "fit_linear", "predict_linear"]


@dataclass
class LinearModel:
    weights: np.ndarray  # (T*K + 1,), last entry is the absorbed bias
    feature_dim: int
    num_steps: int
    horizon: int
    target_transform: str = "log1p"

    def predict(self, X: np.ndarray) -> float:
        return predict_linear(self, X)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.array([predict_linear(self, x) for x in X])


def _design_row(m: LinearModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (m.num_steps, m.feature_dim):
        raise ValueError(
            f"feature shape {X.shape}, expected ({m.num_steps}, {m.feature_dim})"
        )
    return np.concatenate([X.reshape(-1), [1.0]])


def fit_linear(
    X: np.ndarray,
    y: np.ndarray,
    horizon: int,
    ridge: float = 1e-6,
    target_transform: str = "log1p",
) -> LinearModel:
    """Ridge least squares on (flattened features, 1) against log1p targets."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 3 or y.shape != (X.shape[0],):
        raise ValueError(f"need X (N,T,K) and aligned y, got {X.shape}, {y.shape}")
    if np.any(y <= 0):
        raise ValueError("all targets must be positive")
    if ridge <= 0:
        raise ValueError(f"ridge must be positive, got {ridge}")
    n, t, k = X.shape
    a = np.concatenate([X.reshape(n, t * k), np.ones((n, 1))], axis=1)
    target = np.log1p(y) if target_transform == "log1p" else y
    gram = a.T @ a + ridge * np.eye(t * k + 1)
    w = np.linalg.solve(gram, a.T @ target)
    return LinearModel(
        weights=w,
        feature_dim=k,
        num_steps=t,
        horizon=horizon,
        target_transform=target_transform,
    )


def predict_linear(m: LinearModel, X: np.ndarray) -> float:
    """Dot product on the transformed scale, inverted and clamped at zero."""
    s = float(_design_row(m, X) @ m.weights)
    if m.target_transform == "log1p":
        return max(float(np.expm1(s)), 0.0)
    return max(s, 0.0)
