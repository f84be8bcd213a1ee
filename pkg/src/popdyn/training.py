"""MAPE loss, Adadelta, and the mini-batch training loop.

The loss is computed in count space, after the model's inverse target
transform, so the objective being minimized is exactly the reported MAPE
metric. Adadelta has no learning-rate hyperparameter; its step size adapts
from the gradient and update accumulators alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import DlamModel
from .numerics import make_rng

__all__ = [
    "mape_loss",
    "AdadeltaState",
    "adadelta_step",
    "clip_global_norm",
    "TrainConfig",
    "TrainReport",
    "train",
]


def mape_loss(
    preds: np.ndarray, targets: np.ndarray, denom_floor: float = 0.0
) -> tuple[float, np.ndarray]:
    """Mean absolute percentage error and its subgradient w.r.t. preds.

    Targets must be strictly positive (the dataset filter guarantees
    cumulative targets of at least 6). ``denom_floor`` is a safety floor on
    the denominator; with the filter in place it never engages.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.size == 0:
        raise ValueError(
            f"need equal nonempty shapes, got {preds.shape} and {targets.shape}"
        )
    if np.any(targets <= 0):
        bad = int(np.argmax(targets <= 0))
        raise ValueError(f"nonpositive target at index {bad}: {targets[bad]}")
    denom = np.maximum(targets, denom_floor)
    m = preds.size
    loss = float(np.sum(np.abs((preds - targets) / denom)) / m)
    grad = np.sign(preds - targets) / (m * denom)
    return loss, grad


@dataclass
class AdadeltaState:
    """Per-parameter running averages E[g^2] and E[dx^2]."""

    acc_grad: list[np.ndarray]
    acc_update: list[np.ndarray]
    rho: float = 0.95
    eps: float = 1e-6

    @classmethod
    def for_params(
        cls, params: list[np.ndarray], rho: float = 0.95, eps: float = 1e-6
    ) -> "AdadeltaState":
        if not (0.0 < rho < 1.0):
            raise ValueError(f"rho must be in (0,1), got {rho}")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        return cls(
            acc_grad=[np.zeros_like(p) for p in params],
            acc_update=[np.zeros_like(p) for p in params],
            rho=rho,
            eps=eps,
        )


def adadelta_step(
    state: AdadeltaState, params: list[np.ndarray], grads: list[np.ndarray]
) -> None:
    """In-place Adadelta update (accumulate, scale, apply, accumulate)."""
    if not (len(state.acc_grad) == len(params) == len(grads)):
        raise ValueError(
            f"length mismatch: state {len(state.acc_grad)}, "
            f"params {len(params)}, grads {len(grads)}"
        )
    rho, eps = state.rho, state.eps
    for eg2, edx2, p, g in zip(state.acc_grad, state.acc_update, params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        delta = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * g
        edx2 *= rho
        edx2 += (1.0 - rho) * delta * delta
        p += delta


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    patience: int = 20
    val_fraction: float = 0.1
    seed: int = 0
    rho: float = 0.95
    eps: float = 1e-6
    clip_norm: float = 5.0
    denom_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, patience >= 1 required")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError(f"val_fraction must be in (0,1), got {self.val_fraction}")


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,seconds"]
        for i, (tl, vl, sec) in enumerate(
            zip(self.train_losses, self.val_losses, self.seconds)
        ):
            lines.append(f"{i},{tl!r},{vl!r},{sec:.3f}")
        return "\n".join(lines) + "\n"


def _check_finite_params(model: DlamModel, epoch: int) -> None:
    for p in model.params():
        if not np.all(np.isfinite(p)):
            raise NumericalError(f"non-finite parameter after epoch {epoch}")


def train(
    model: DlamModel,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    log=None,
) -> TrainReport:
    """Train ``model`` in place; returns the per-epoch report.

    Deterministic given the seed: the same config, data, and initial
    parameters reproduce the run bit for bit. The model is left at the
    parameters of the best validation epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0 or y.shape != (n,):
        raise ValueError(f"need nonempty aligned data, got X {X.shape}, y {y.shape}")
    if np.any(y <= 0):
        raise ValueError("all targets must be positive")
    report = TrainReport()
    if cfg.epochs == 0:
        return report

    rng = make_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n))) if n > 1 else 0
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    if train_idx.size == 0:
        train_idx = val_idx

    state = AdadeltaState.for_params(model.params(), rho=cfg.rho, eps=cfg.eps)
    best_params = [p.copy() for p in model.params()]
    best_val = np.inf
    patience_left = cfg.patience

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = train_idx[rng.permutation(train_idx.size)]
        batch_losses = []
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            cache = model.forward_batch(X[batch])
            loss, dpred = mape_loss(cache.pred_raw, y[batch], cfg.denom_floor)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            grads = model.backward_batch(cache, dpred)
            clip_global_norm(grads, cfg.clip_norm)
            adadelta_step(state, model.params(), grads)
            batch_losses.append(loss)
        _check_finite_params(model, epoch)
        train_loss = float(np.mean(batch_losses))
        if n_val:
            val_loss, _ = mape_loss(model.predict_batch(X[val_idx]), y[val_idx])
        else:
            val_loss = train_loss
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        report.seconds.append(time.perf_counter() - t0)
        if log is not None:
            log(f"epoch {epoch}: train={train_loss:.4f} val={val_loss:.4f}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in model.params()]
            report.best_epoch = epoch
            patience_left = cfg.patience
        else:
            patience_left -= 1
            if patience_left == 0:
                break
    model.set_params(best_params)
    return report
