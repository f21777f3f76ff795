"""Approximation ratio, success probability, time to solution and aggregation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "DomainError",
    "BenchRecord",
    "approximation_ratio",
    "success_probability",
    "tts_candidate",
    "time_to_solution",
    "Aggregate",
    "aggregate",
    "t_halfwidth",
    "heatmap_difference",
    "fit_tts_slope",
    "TtsFit",
]

CONFIDENCE = 0.99


class DomainError(ValueError):
    pass


@dataclass
class BenchRecord:
    """One experiment cell: one algorithm at one resource level on one instance."""

    algorithm: str  # "qaoa" or "sa"
    qubits: int
    load_fraction: float
    seed: int
    s: int  # layers for QAOA, temperature steps for SA
    sample_costs: list[float]
    expected_cost: float | None = None  # exact distribution mean (QAOA only)
    exact_success: float | None = None  # exact P(AR >= threshold) (QAOA only)
    indices: list[int] | None = None  # sampled table indices
    ars: list[float] = field(init=False)

    def __post_init__(self):
        self.ars = [approximation_ratio(c) for c in self.sample_costs]

    @property
    def num_samples(self) -> int:
        return len(self.sample_costs)

    @property
    def best_ar(self) -> float:
        return max(self.ars)

    @property
    def mean_ar(self) -> float:
        return float(np.mean(self.ars))

    @property
    def expected_ar(self) -> float | None:
        return None if self.expected_cost is None else approximation_ratio(self.expected_cost)

    def success(self, threshold: float) -> float:
        return success_probability(self.ars, threshold)


def approximation_ratio(normalized_cost: float) -> float:
    """``1 - cost`` for a min/max normalized cost."""
    if not -1e-9 <= normalized_cost <= 1.0 + 1e-9:
        raise DomainError(f"normalized cost {normalized_cost} outside [0, 1]")
    return 1.0 - normalized_cost


def success_probability(ars: Sequence[float], threshold: float) -> float:
    """Fraction of samples whose approximation ratio reaches ``threshold``."""
    if len(ars) == 0:
        raise ValueError("no samples")
    return sum(1 for a in ars if a >= threshold) / len(ars)


def tts_candidate(s: float, p_success: float, confidence: float = CONFIDENCE) -> float:
    """``s * (log(1 - confidence) / log(1 - P_s) + 1)``.

    At ``P_s == 1`` one run suffices and the value is ``s``; at ``P_s == 0``
    the target is never reached and ``inf`` is returned.
    """
    if not 0.0 <= p_success <= 1.0:
        raise DomainError(f"success probability {p_success} outside [0, 1]")
    if p_success == 0.0:
        return math.inf
    if p_success == 1.0:
        return float(s)
    # log1p keeps tiny P_s from rounding log(1 - P_s) to zero
    return s * (math.log1p(-confidence) / math.log1p(-p_success) + 1.0)


def time_to_solution(
    points: Iterable[tuple[float, float]] | Mapping[float, float],
    confidence: float = CONFIDENCE,
) -> float:
    """Minimum TTS candidate over ``(s, P_s)`` pairs; ``inf`` if never reached."""
    if isinstance(points, Mapping):
        points = points.items()
    points = list(points)
    if not points:
        raise ValueError("no records to compute a time to solution from")
    return min(tts_candidate(s, p, confidence) for s, p in points)


def t_halfwidth(values: Sequence[float], level: float = 0.95) -> float:
    """Half-width of the Student-t confidence interval for the mean."""
    n = len(values)
    if n < 2:
        return 0.0
    sd = float(np.std(values, ddof=1))
    q = 0.5 + level / 2
    t = stats.t.ppf(q, n - 1)
    # one Newton step: scipy's ppf is only good to ~1e-11, the cdf to ~1e-16
    t -= (stats.t.cdf(t, n - 1) - q) / stats.t.pdf(t, n - 1)
    return float(t) * sd / math.sqrt(n)


@dataclass(frozen=True)
class Aggregate:
    key: tuple
    n: int
    mean: float
    ci95: float
    min: float
    max: float

    @property
    def degenerate(self) -> bool:
        return self.n < 2


def aggregate(
    items: Iterable,
    key: Callable[[object], Hashable],
    value: Callable[[object], float],
) -> list[Aggregate]:
    """Group ``items`` by ``key`` and summarize ``value`` per group (sorted by key)."""
    groups: dict = defaultdict(list)
    for it in items:
        groups[key(it)].append(value(it))
    if not groups:
        raise ValueError("nothing to aggregate")
    out = []
    for k in sorted(groups):
        v = groups[k]
        out.append(Aggregate(k if isinstance(k, tuple) else (k,), len(v), float(np.mean(v)), t_halfwidth(v), min(v), max(v)))
    return out


def heatmap_difference(a: Mapping, b: Mapping) -> dict:
    """Cellwise ``a - b`` over the cells present in both maps."""
    return {k: a[k] - b[k] for k in sorted(a.keys() & b.keys())}


@dataclass(frozen=True)
class TtsFit:
    slope: float
    intercept: float
    points: tuple[tuple[int, float], ...]
    excluded: tuple[int, ...]


def fit_tts_slope(tts_per_qubit: Mapping[int, float]) -> TtsFit:
    """Least-squares line through ``(qubits, log2 TTS)``; non-finite TTS are excluded."""
    finite = sorted((q, t) for q, t in tts_per_qubit.items() if math.isfinite(t) and t > 0)
    excluded = tuple(sorted(q for q, t in tts_per_qubit.items() if not (math.isfinite(t) and t > 0)))
    if len(finite) < 2:
        raise ValueError(f"need at least two finite TTS points, got {len(finite)}")
    q = np.array([p[0] for p in finite], dtype=float)
    y = np.log2([p[1] for p in finite])
    slope, intercept = np.polyfit(q, y, 1)
    return TtsFit(float(slope), float(intercept), tuple(finite), excluded)
