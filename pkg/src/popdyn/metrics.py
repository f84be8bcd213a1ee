"""Evaluation metrics: MAPE, tolerance accuracy, and per-horizon reports.

Sums run left to right in index order, on purpose: reports must be bitwise
reproducible and recomputable by a trivial external script.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = ["EvalReport", "mape", "acc", "evaluate", "reports_to_csv"]

DEFAULT_EPSILON = 0.3


def _check_pairs(preds: Sequence[float], obs: Sequence[float]) -> None:
    if len(preds) != len(obs) or len(preds) == 0:
        raise ValueError(
            f"need equal nonempty lengths, got {len(preds)} and {len(obs)}"
        )
    for i, n in enumerate(obs):
        if not n > 0:
            raise ValueError(f"nonpositive observation at index {i}: {n}")


def mape(preds: Sequence[float], obs: Sequence[float]) -> float:
    """Mean absolute percentage error, summed in index order."""
    _check_pairs(preds, obs)
    total = 0.0
    for p, n in zip(preds, obs):
        total += abs((p - n) / n)
    return total / len(preds)


def acc(preds: Sequence[float], obs: Sequence[float], epsilon: float) -> float:
    """Fraction of items whose relative error is within epsilon (inclusive)."""
    _check_pairs(preds, obs)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    hits = 0
    for p, n in zip(preds, obs):
        if abs((p - n) / n) <= epsilon:
            hits += 1
    return hits / len(preds)


@dataclass
class EvalReport:
    horizon: int
    mape: float
    acc: float
    epsilon: float
    num_items: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.acc <= 1.0) or self.mape < 0 or self.num_items < 1:
            raise ValueError(f"inconsistent report: {self}")


def evaluate(
    predict: Callable[[np.ndarray], float],
    samples_by_horizon: dict[int, tuple[np.ndarray, np.ndarray]],
    horizons: Iterable[int],
    epsilon: float = DEFAULT_EPSILON,
) -> list[EvalReport]:
    """One report per horizon; an empty horizon bucket is an error, not a skip.

    ``samples_by_horizon`` maps horizon -> (features (N,T,K), targets (N,)).
    """
    reports = []
    for h in sorted(horizons):
        if h not in samples_by_horizon:
            raise DataError(f"no evaluation samples for horizon {h}")
        feats, targets = samples_by_horizon[h]
        if len(targets) == 0:
            raise DataError(f"empty evaluation bucket for horizon {h}")
        preds = [predict(x) for x in feats]
        obs = [float(t) for t in targets]
        reports.append(
            EvalReport(
                horizon=h,
                mape=mape(preds, obs),
                acc=acc(preds, obs, epsilon),
                epsilon=epsilon,
                num_items=len(obs),
            )
        )
    return reports


def reports_to_csv(rows: Iterable[tuple[str, EvalReport]]) -> str:
    """Table-1-shaped CSV: one row per (model, horizon)."""
    lines = ["model,horizon,MAPE,ACC,epsilon,M"]
    for name, r in rows:
        lines.append(
            f"{name},{r.horizon},{r.mape!r},{r.acc!r},{r.epsilon!r},{r.num_items}"
        )
    return "\n".join(lines) + "\n"
