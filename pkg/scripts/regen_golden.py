#!/usr/bin/env python3
"""Regenerate the golden model fixture and its pinned predictions.

Run from the repository root:

    python scripts/regen_golden.py

Rewrites tests/fixtures/golden_model.json and golden_predictions.csv.
The fixture guards against silent numerical drift: tests recompute the
predictions from the saved model and compare bitwise against the CSV.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from popdyn.data import build_sample_arrays, build_samples, filter_training_set
from popdyn.model import MODE_DLAM, DlamModel
from popdyn.numerics import make_rng
from popdyn.serialize import model_to_document
from popdyn.synthgen import CorpusSpec, generate_corpus
from popdyn.training import TrainConfig, train

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

CORPUS_SEED = 515
MODEL_SEED = 99
TRAIN_SEED = 7
WINDOW = 6
TRAIN_YEARS = 5
HORIZON = 2


def main() -> None:
    histories, _ = generate_corpus(CorpusSpec(num_items=120, seed=CORPUS_SEED))
    kept = filter_training_set(
        histories, min_count=5, first_years=TRAIN_YEARS, min_followup=HORIZON
    )
    samples = [
        build_samples(h, TRAIN_YEARS, (HORIZON,), WINDOW) for h in kept
    ]
    X, y, _ = build_sample_arrays(samples, HORIZON)

    model = DlamModel.init(
        MODE_DLAM,
        feature_dim=WINDOW,
        num_steps=TRAIN_YEARS,
        horizon=HORIZON,
        hidden_size=4,
        num_layers=2,
        rng=make_rng(MODEL_SEED),
    )
    train(model, X, y, TrainConfig(epochs=15, seed=TRAIN_SEED))

    os.makedirs(FIXTURE_DIR, exist_ok=True)
    with open(
        os.path.join(FIXTURE_DIR, "golden_model.json"), "w", encoding="utf-8"
    ) as fh:
        fh.write(model_to_document(model))

    # pinned predictions on deterministic probe inputs, not training data
    probe_rng = make_rng(1234)
    lines = ["case,predicted"]
    for i in range(8):
        x = np.floor(probe_rng.uniform(0, 30, size=(TRAIN_YEARS, WINDOW)))
        lines.append(f"{i},{model.predict(x)!r}")
    with open(
        os.path.join(FIXTURE_DIR, "golden_predictions.csv"), "w", encoding="utf-8"
    ) as fh:
        fh.write("\n".join(lines) + "\n")
    print("fixtures regenerated")


if __name__ == "__main__":
    main()
