"""Multi-model experiment driver: train every (variant, horizon) cell,
evaluate on a held-out test split, and emit a Table-style metrics CSV plus
per-model diagnostics (predicted-vs-actual scatter data and attention
weight dumps).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .baselines import fit_linear
from .data import (
    DEFAULT_HORIZONS,
    DEFAULT_TRAIN_YEARS,
    DEFAULT_WINDOW,
    PopularityHistory,
    TrainingSample,
    build_sample_arrays,
    build_samples,
    filter_training_set,
)
from .errors import DataError, NumericalError
from .metrics import DEFAULT_EPSILON, EvalReport, acc, mape, reports_to_csv
from .model import MODE_DLAM, MODE_LTCCP, DlamModel
from .numerics import make_rng
from .serialize import save_model
from .training import TrainConfig, train

__all__ = ["ExperimentConfig", "ExperimentResult", "run_experiment"]

VARIANTS = (MODE_DLAM, MODE_LTCCP, "linear")


@dataclass
class ExperimentConfig:
    seed: int = 0
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    epsilon: float = DEFAULT_EPSILON
    hidden_size: int = 16
    num_layers: int = 2
    train_years: int = DEFAULT_TRAIN_YEARS
    window: int = DEFAULT_WINDOW
    min_count: int = 5
    test_fraction: float = 0.2
    variants: tuple[str, ...] = VARIANTS
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")


@dataclass
class ExperimentResult:
    reports: list[tuple[str, EvalReport]]
    metrics_csv: str


def _cell_seed(base: int, variant: str, horizon: int) -> int:
    return base * 1000 + VARIANTS.index(variant) * 100 + horizon


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def split_samples(
    samples: Sequence[TrainingSample], test_fraction: float, seed: int
) -> tuple[list[TrainingSample], list[TrainingSample]]:
    """Seeded item-level train/test split."""
    rng = make_rng(seed)
    perm = rng.permutation(len(samples))
    n_test = max(1, int(round(test_fraction * len(samples))))
    test_idx = set(perm[:n_test].tolist())
    train_set = [s for i, s in enumerate(samples) if i not in test_idx]
    test_set = [s for i, s in enumerate(samples) if i in test_idx]
    if not train_set or not test_set:
        raise DataError("not enough samples for a train/test split")
    return train_set, test_set


def _scatter_csv(ids: list[str], actual: np.ndarray, preds: np.ndarray) -> str:
    lines = ["item_id,actual,predicted"]
    for item, a, p in zip(ids, actual, preds):
        lines.append(f"{item},{float(a)!r},{float(p)!r}")
    return "\n".join(lines) + "\n"


def _attention_csv(model: DlamModel, X: np.ndarray, ids: list[str]) -> str:
    steps = model.num_steps
    header = "item_id," + ",".join(f"alpha_{t}" for t in range(1, steps + 1))
    lines = [header]
    cache = model.forward_batch(X)
    for item, w in zip(ids, cache.weights):
        lines.append(item + "," + ",".join(repr(float(v)) for v in w))
    return "\n".join(lines) + "\n"


def run_experiment(
    histories: Sequence[PopularityHistory],
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    log: Callable[[str], None] | None = None,
) -> ExperimentResult:
    """Train and evaluate every configured (variant, horizon) cell.

    Deterministic given the config seed. When ``out_dir`` is set, writes
    metrics.csv, per-cell model files, scatter data, and attention dumps,
    each atomically.
    """
    max_h = max(cfg.horizons)
    kept = filter_training_set(
        histories,
        min_count=cfg.min_count,
        first_years=cfg.train_years,
        min_followup=max_h,
    )
    if len(kept) < 10:
        raise DataError(f"only {len(kept)} items survive the filter; need at least 10")
    samples = [
        build_samples(h, cfg.train_years, cfg.horizons, cfg.window) for h in kept
    ]
    train_set, test_set = split_samples(samples, cfg.test_fraction, cfg.seed)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    rows: list[tuple[str, EvalReport]] = []
    for variant in cfg.variants:
        for horizon in sorted(cfg.horizons):
            seed = _cell_seed(cfg.seed, variant, horizon)
            Xtr, ytr, _ = build_sample_arrays(train_set, horizon)
            Xte, yte, test_ids = build_sample_arrays(test_set, horizon)
            if log is not None:
                log(f"[{variant} h={horizon}] training on {len(ytr)} samples")
            try:
                if variant == "linear":
                    model = fit_linear(Xtr, ytr, horizon)
                else:
                    model = DlamModel.init(
                        mode=variant,
                        feature_dim=cfg.window,
                        num_steps=cfg.train_years,
                        horizon=horizon,
                        hidden_size=cfg.hidden_size,
                        num_layers=cfg.num_layers,
                        rng=make_rng(seed),
                    )
                    train(model, Xtr, ytr, replace(cfg.train, seed=seed))
            except NumericalError as e:
                raise NumericalError(
                    f"training failed for variant {variant!r}, horizon {horizon}: {e}"
                ) from e
            preds = model.predict_batch(Xte)
            report = EvalReport(
                horizon=horizon,
                mape=mape(preds.tolist(), yte.tolist()),
                acc=acc(preds.tolist(), yte.tolist(), cfg.epsilon),
                epsilon=cfg.epsilon,
                num_items=len(yte),
            )
            rows.append((variant, report))
            if log is not None:
                log(
                    f"[{variant} h={horizon}] MAPE={report.mape:.3f} "
                    f"ACC={report.acc:.3f} (M={report.num_items})"
                )
            if out_dir is not None:
                stem = f"{variant.replace('-', '_')}_h{horizon}"
                save_model(model, os.path.join(out_dir, f"model_{stem}.json"))
                _atomic_write(
                    os.path.join(out_dir, f"scatter_{stem}.csv"),
                    _scatter_csv(test_ids, yte, preds),
                )
                if variant == MODE_DLAM:
                    _atomic_write(
                        os.path.join(out_dir, f"attention_{stem}.csv"),
                        _attention_csv(model, Xte, test_ids),
                    )

    csv = reports_to_csv(rows)
    if out_dir is not None:
        _atomic_write(os.path.join(out_dir, "metrics.csv"), csv)
    return ExperimentResult(reports=rows, metrics_csv=csv)
