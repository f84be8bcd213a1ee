"""Citation event ingestion, filtering, feature windows, and distribution stats.

Event logs are one tab-separated record per line: ``cited_id <TAB> citing_year``.
A manifest file maps item ids to publication years, same layout. All modeling
downstream works in years-since-publication; calendar years survive only here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "CitationEvent",
    "PopularityHistory",
    "TrainingSample",
    "IngestReport",
    "DistributionHistogram",
    "parse_manifest",
    "ingest_events",
    "filter_training_set",
    "build_samples",
    "build_sample_arrays",
    "citation_distribution",
    "save_histories",
    "load_histories",
]

YEAR_MIN, YEAR_MAX = 1900, 2100

DEFAULT_TRAIN_YEARS = 5
DEFAULT_WINDOW = 10
DEFAULT_HORIZONS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class CitationEvent:
    cited_id: str
    citing_year: int


@dataclass
class PopularityHistory:
    """Yearly attention counts for one item, indexed by years since publication.

    ``yearly[i]`` is the count received in publication year + i; the length is
    the number of observed years. The cumulative view is nondecreasing by
    construction.
    """

    item_id: str
    pub_year: int
    yearly: np.ndarray

    def __post_init__(self) -> None:
        self.yearly = np.asarray(self.yearly, dtype=np.int64)
        if np.any(self.yearly < 0):
            raise ValueError(f"{self.item_id}: negative yearly count")

    @property
    def observed_years(self) -> int:
        return len(self.yearly)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.yearly)

    def cumulative_at(self, years: int) -> int:
        """Total count over the first ``years`` observed years."""
        return int(self.yearly[:years].sum())


@dataclass
class TrainingSample:
    item_id: str
    features: np.ndarray  # (T, K)
    targets: dict[int, int]  # horizon -> cumulative count at train_years+horizon
    missing_horizons: tuple[int, ...] = ()


@dataclass
class IngestReport:
    total_lines: int = 0
    events_ok: int = 0
    malformed: int = 0
    quarantined_pre_publication: int = 0
    quarantined_unknown_item: int = 0

    def summary(self) -> str:
        return (
            f"lines={self.total_lines} ok={self.events_ok} "
            f"malformed={self.malformed} "
            f"pre_publication={self.quarantined_pre_publication} "
            f"unknown_item={self.quarantined_unknown_item}"
        )


def parse_manifest(lines: Iterable[str]) -> dict[str, int]:
    """Read ``item_id <TAB> publication_year`` lines."""
    out: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"manifest line {lineno}: expected 2 fields")
        item_id, year_str = parts
        try:
            year = int(year_str)
        except ValueError:
            raise DataError(f"manifest line {lineno}: bad year {year_str!r}") from None
        if not (YEAR_MIN <= year <= YEAR_MAX):
            raise DataError(f"manifest line {lineno}: year {year} out of range")
        out[item_id] = year
    return out


def _parse_event(line: str) -> CitationEvent | None:
    parts = line.split("\t")
    if len(parts) != 2:
        return None
    try:
        year = int(parts[1])
    except ValueError:
        return None
    if not (YEAR_MIN <= year <= YEAR_MAX):
        return None
    return CitationEvent(parts[0], year)


def ingest_events(
    event_lines: Iterable[str],
    pub_years: dict[str, int],
    end_year: int | None = None,
) -> tuple[list[PopularityHistory], IngestReport]:
    """Tally events into per-item yearly histories, streaming.

    Memory is proportional to the number of distinct items, not events.
    Events citing before publication are quarantined (counted, excluded);
    malformed lines and unknown item ids are counted and skipped. Histories
    extend to ``end_year`` (default: the latest valid citing year seen), so
    trailing zero years count as observed.
    """
    report = IngestReport()
    counts: dict[str, dict[int, int]] = {}
    max_year_seen = None
    for raw in event_lines:
        line = raw.rstrip("\n")
        if not line:
            continue
        report.total_lines += 1
        ev = _parse_event(line)
        if ev is None:
            report.malformed += 1
            continue
        pub = pub_years.get(ev.cited_id)
        if pub is None:
            report.quarantined_unknown_item += 1
            continue
        item = counts.setdefault(ev.cited_id, {})
        if ev.citing_year < pub:
            report.quarantined_pre_publication += 1
            continue
        report.events_ok += 1
        offset = ev.citing_year - pub
        item[offset] = item.get(offset, 0) + 1
        if max_year_seen is None or ev.citing_year > max_year_seen:
            max_year_seen = ev.citing_year
    if end_year is None:
        end_year = max_year_seen
    histories = []
    for item_id in sorted(counts):
        pub = pub_years[item_id]
        by_offset = counts[item_id]
        span = 0
        if end_year is not None and end_year >= pub:
            span = end_year - pub + 1
        if by_offset:
            span = max(span, max(by_offset) + 1)
        yearly = np.zeros(span, dtype=np.int64)
        for offset, n in by_offset.items():
            yearly[offset] = n
        histories.append(PopularityHistory(item_id, pub, yearly))
    return histories, report


def filter_training_set(
    histories: Iterable[PopularityHistory],
    min_count: int = 5,
    first_years: int = DEFAULT_TRAIN_YEARS,
    min_followup: int = 5,
) -> list[PopularityHistory]:
    """Keep items with strictly more than ``min_count`` citations in the first
    ``first_years`` years and at least ``min_followup`` observed years after
    the training period."""
    kept = []
    for h in histories:
        if h.observed_years < first_years + min_followup:
            continue
        if h.cumulative_at(first_years) > min_count:
            kept.append(h)
    return kept


def build_samples(
    history: PopularityHistory,
    train_years: int = DEFAULT_TRAIN_YEARS,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    window: int = DEFAULT_WINDOW,
) -> TrainingSample:
    """Windowed features plus per-horizon cumulative targets for one item.

    Timestep t (1-based, t = 1..train_years) carries the last ``window``
    yearly counts ending at year t, left-padded with zeros where the item is
    younger than the window. Horizons whose target year is not observed are
    omitted and flagged.
    """
    if history.observed_years < train_years:
        raise DataError(
            f"{history.item_id}: only {history.observed_years} observed years, "
            f"need {train_years}"
        )
    feats = np.zeros((train_years, window))
    for t in range(1, train_years + 1):
        chunk = history.yearly[max(0, t - window) : t]
        feats[t - 1, window - len(chunk) :] = chunk
    targets: dict[int, int] = {}
    missing = []
    for h in horizons:
        year = train_years + h
        if history.observed_years >= year:
            targets[h] = history.cumulative_at(year)
        else:
            missing.append(h)
    return TrainingSample(
        item_id=history.item_id,
        features=feats,
        targets=targets,
        missing_horizons=tuple(missing),
    )


def build_sample_arrays(
    samples: Sequence[TrainingSample], horizon: int
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Stack the samples that carry the given horizon into (X, y, ids)."""
    chosen = [s for s in samples if horizon in s.targets]
    if not chosen:
        raise DataError(f"no samples carry horizon {horizon}")
    X = np.stack([s.features for s in chosen])
    y = np.array([float(s.targets[horizon]) for s in chosen])
    return X, y, [s.item_id for s in chosen]


@dataclass
class DistributionHistogram:
    """Items per final cumulative citation count."""

    buckets: dict[int, int] = field(default_factory=dict)

    @property
    def num_items(self) -> int:
        return sum(self.buckets.values())

    def linear_csv(self) -> str:
        lines = ["citations,papers"]
        for count in sorted(self.buckets):
            lines.append(f"{count},{self.buckets[count]}")
        return "\n".join(lines) + "\n"

    def loglog_csv(self, bins_per_decade: int = 5) -> str:
        """Log-binned view (bin edges at powers of 10^(1/bins_per_decade));
        zero-count items land in a dedicated first row."""
        lines = ["bin_low,bin_high,papers"]
        zeros = self.buckets.get(0, 0)
        if zeros:
            lines.append(f"0,0,{zeros}")
        positive = {c: n for c, n in self.buckets.items() if c > 0}
        if positive:
            top = max(positive)
            ratio = 10.0 ** (1.0 / bins_per_decade)
            low = 1.0
            while low <= top:
                high = low * ratio
                n = sum(v for c, v in positive.items() if low <= c < high)
                if n:
                    lines.append(f"{low:.6g},{high:.6g},{n}")
                low = high
        return "\n".join(lines) + "\n"


def citation_distribution(
    histories: Sequence[PopularityHistory],
) -> DistributionHistogram:
    if not histories:
        raise DataError("no histories to summarize")
    hist = DistributionHistogram()
    for h in histories:
        total = int(h.yearly.sum())
        hist.buckets[total] = hist.buckets.get(total, 0) + 1
    return hist


# histories cache file: item_id <TAB> pub_year <TAB> comma-joined yearly counts


def save_histories(histories: Iterable[PopularityHistory]) -> str:
    lines = []
    for h in histories:
        joined = ",".join(str(int(c)) for c in h.yearly)
        lines.append(f"{h.item_id}\t{h.pub_year}\t{joined}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_histories(lines: Iterable[str]) -> list[PopularityHistory]:
    out = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"histories cache line {lineno}: expected 3 fields")
        item_id, pub_str, counts_str = parts
        try:
            pub = int(pub_str)
            yearly = (
                [int(c) for c in counts_str.split(",")] if counts_str else []
            )
        except ValueError:
            raise DataError(f"histories cache line {lineno}: bad number") from None
        out.append(PopularityHistory(item_id, pub, np.array(yearly, dtype=np.int64)))
    return out


def read_lines(path) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from fh
