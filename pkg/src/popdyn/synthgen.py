"""Synthetic citation trajectories from a reinforced-Poisson-style process.

Yearly event counts are Poisson draws with intensity

    rate(y) = fitness * lognormal_pdf(y + 0.5; mu, sigma) * (offset + C_{y-1})

where C is the running cumulative count. The three ingredients give the
corpus its qualitative realism: per-item fitness spreads quality, the
log-normal relaxation ages every item, and the (offset + C) factor
reinforces already-popular items into a heavy-tailed count distribution.

This is a test-corpus generator only. It does not reproduce any published
reinforced-Poisson intensity exactly and is never fitted to real data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PopularityHistory
from .numerics import spawn_rngs

__all__ = ["RppParams", "CorpusSpec", "generate_trajectory", "generate_corpus"]

# cap on a single year's Poisson rate so pathological parameter draws cannot
# stall generation or overflow counts
MAX_YEARLY_RATE = 1e4


@dataclass
class RppParams:
    fitness: float
    aging_mu: float
    aging_sigma: float
    reinforcement_offset: float

    def __post_init__(self) -> None:
        if self.fitness < 0:
            raise ValueError(f"fitness must be >= 0, got {self.fitness}")
        if self.aging_sigma <= 0:
            raise ValueError(f"aging_sigma must be > 0, got {self.aging_sigma}")
        if self.reinforcement_offset <= 0:
            raise ValueError(
                f"reinforcement_offset must be > 0, got {self.reinforcement_offset}"
            )


def aging_density(age: np.ndarray | float, mu: float, sigma: float) -> np.ndarray:
    """Log-normal density over years since publication."""
    age = np.asarray(age, dtype=np.float64)
    out = np.zeros_like(age)
    pos = age > 0
    x = age[pos]
    out[pos] = np.exp(-((np.log(x) - mu) ** 2) / (2.0 * sigma**2)) / (
        x * sigma * np.sqrt(2.0 * np.pi)
    )
    return out


def generate_trajectory(
    p: RppParams, years: int, rng: np.random.Generator
) -> np.ndarray:
    """Year-by-year simulation; returns nonnegative integer counts."""
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    counts = np.zeros(years, dtype=np.int64)
    cumulative = 0
    for y in range(years):
        # age evaluated at the year's midpoint so year 0 has nonzero density
        rate = (
            p.fitness
            * float(aging_density(y + 0.5, p.aging_mu, p.aging_sigma))
            * (p.reinforcement_offset + cumulative)
        )
        rate = min(rate, MAX_YEARLY_RATE)
        n = int(rng.poisson(rate)) if rate > 0 else 0
        counts[y] = n
        cumulative += n
    return counts


@dataclass
class CorpusSpec:
    num_items: int
    seed: int
    years: int = 15
    first_pub_year: int = 1990
    # per-item fitness ~ LogNormal(fitness_mu, fitness_sigma)
    fitness_mu: float = 0.4
    fitness_sigma: float = 0.7
    aging_mu_range: tuple[float, float] = (1.0, 2.0)
    aging_sigma_range: tuple[float, float] = (0.5, 1.2)
    reinforcement_offset: float = 4.0

    def __post_init__(self) -> None:
        if self.num_items < 1:
            raise ValueError(f"num_items must be >= 1, got {self.num_items}")
        if self.years < 1:
            raise ValueError(f"years must be >= 1, got {self.years}")


def generate_corpus(
    spec: CorpusSpec,
) -> tuple[list[PopularityHistory], list[RppParams]]:
    """Seeded corpus of histories plus the ground-truth parameter sidecar.

    Each item gets its own RNG stream split from the corpus seed, so
    generation is reproducible regardless of iteration order.
    """
    streams = spawn_rngs(spec.seed, spec.num_items)
    width = len(str(spec.num_items - 1))
    histories = []
    truths = []
    for i, rng in enumerate(streams):
        params = RppParams(
            fitness=float(rng.lognormal(spec.fitness_mu, spec.fitness_sigma)),
            aging_mu=float(rng.uniform(*spec.aging_mu_range)),
            aging_sigma=float(rng.uniform(*spec.aging_sigma_range)),
            reinforcement_offset=spec.reinforcement_offset,
        )
        yearly = generate_trajectory(params, spec.years, rng)
        histories.append(
            PopularityHistory(
                item_id=f"synth{i:0{width}d}",
                pub_year=spec.first_pub_year,
                yearly=yearly,
            )
        )
        truths.append(params)
    return histories, truths


def truth_sidecar_csv(
    histories: list[PopularityHistory], truths: list[RppParams]
) -> str:
    lines = ["item_id,fitness,aging_mu,aging_sigma,reinforcement_offset"]
    for h, p in zip(histories, truths):
        lines.append(
            f"{h.item_id},{p.fitness!r},{p.aging_mu!r},"
            f"{p.aging_sigma!r},{p.reinforcement_offset!r}"
        )
    return "\n".join(lines) + "\n"
