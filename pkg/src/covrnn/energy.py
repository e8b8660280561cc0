"""Coverage bookkeeping and the objective function of the campaign.

Coverage lives as bin hit sets; percentages are always recomputed from the
sets so summaries cannot drift.  The objective ("energy") is the weighted
sum of squared coverage shortfalls, zero exactly at full coverage of every
weighted metric.  Candidate evaluations preview the union of the cumulative
database with a run's bins without mutating anything; only accepted runs
are committed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping


class RangeError(ValueError):
    pass


class MissingMetric(KeyError):
    pass


class BinUniverseMismatch(ValueError):
    pass


def penalty(x: float) -> float:
    """Squared shortfall from full coverage, (100 - x)^2 for x in [0, 100]."""
    if not 0.0 <= x <= 100.0:
        raise RangeError(f"coverage percentage out of range: {x}")
    return (100.0 - x) ** 2


@dataclass(frozen=True)
class MetricWeights:
    """Relative importance of each coverage metric in the objective.

    Functional coverage dominates by default; structural metrics act as a
    tie-breaker at four orders of magnitude less weight.
    """

    weights: Mapping[str, float] = field(
        default_factory=lambda: {"functional": 1.0, "statement": 0.0001, "branch": 0.0001}
    )

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("metric weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ValueError("at least one metric weight must be positive")

    def items(self):
        return self.weights.items()

    def positive_metrics(self) -> tuple[str, ...]:
        return tuple(m for m, w in self.weights.items() if w > 0)


@dataclass(frozen=True)
class CoverageSnapshot:
    """Per-metric bin hits (bin id -> hit count) against a fixed universe."""

    hits: Mapping[str, Mapping[str, int]]
    totals: Mapping[str, int]

    def hit_count(self, metric: str) -> int:
        return len(self.hits[metric])

    def percentage(self, metric: str) -> float:
        if metric not in self.totals:
            raise MissingMetric(metric)
        return 100.0 * len(self.hits.get(metric, {})) / self.totals[metric]

    def percentages(self) -> dict[str, float]:
        return {m: self.percentage(m) for m in self.totals}

    def bin_sets(self) -> dict[str, frozenset[str]]:
        return {m: frozenset(self.hits.get(m, {})) for m in self.totals}

    def merged(self, other: "CoverageSnapshot") -> "CoverageSnapshot":
        if dict(self.totals) != dict(other.totals):
            raise BinUniverseMismatch(f"{dict(self.totals)} != {dict(other.totals)}")
        merged: dict[str, dict[str, int]] = {}
        for metric in self.totals:
            bins = dict(self.hits.get(metric, {}))
            for b, c in other.hits.get(metric, {}).items():
                bins[b] = bins.get(b, 0) + c
            merged[metric] = bins
        return CoverageSnapshot(hits=merged, totals=dict(self.totals))


def empty_snapshot(totals: Mapping[str, int]) -> CoverageSnapshot:
    return CoverageSnapshot(hits={m: {} for m in totals}, totals=dict(totals))


def energy(snapshot: CoverageSnapshot, weights: MetricWeights) -> float:
    """Weighted sum of per-metric penalties for one coverage state."""
    total = 0.0
    for metric, a in weights.items():
        if a <= 0:
            continue
        if metric not in snapshot.totals:
            raise MissingMetric(metric)
        total += a * penalty(snapshot.percentage(metric))
    return total


@dataclass
class HistoryEntry:
    step: int
    percentages: dict[str, float]
    energy: float


class CoverageDb:
    """Cumulative coverage of all accepted evaluations, plus their history.

    Commits are permanent and must be serialized by the caller; previews are
    read-only and safe to run concurrently.
    """

    def __init__(self, totals: Mapping[str, int], weights: MetricWeights | None = None):
        self.totals = dict(totals)
        self.weights = weights or MetricWeights()
        self._cumulative = empty_snapshot(self.totals)
        self.history: list[HistoryEntry] = []

    def snapshot(self) -> CoverageSnapshot:
        return self._cumulative

    def energy(self) -> float:
        return energy(self._cumulative, self.weights)

    def merge_preview(self, new: CoverageSnapshot) -> CoverageSnapshot:
        """Union of the cumulative state with `new`, without committing."""
        return self._cumulative.merged(new)

    def commit(self, new: CoverageSnapshot, step: int = -1) -> CoverageSnapshot:
        """Apply the union permanently and append to the history."""
        self._cumulative = self._cumulative.merged(new)
        self.history.append(
            HistoryEntry(step=step, percentages=self._cumulative.percentages(),
                         energy=self.energy())
        )
        return self._cumulative

    def percentages(self) -> dict[str, float]:
        return self._cumulative.percentages()

    def closed(self, goals: Mapping[str, float]) -> bool:
        """True when every positively weighted metric has reached its goal."""
        pct = self.percentages()
        return all(
            pct[m] >= goals.get(m, 100.0) for m in self.weights.positive_metrics()
        )
