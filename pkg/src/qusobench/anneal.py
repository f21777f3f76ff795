"""Simulated annealing over generator bitstrings.

Proposals flip one uniformly chosen bit (Hamming-1 neighbourhood); worse
candidates are accepted with probability ``exp(-|dC| / (k T))`` and the
temperature follows a geometric schedule ``T <- alpha * T`` after every
temperature step.  Costs are read from the normalized cost table, so the
returned values map directly onto approximation ratios.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .costtable import CostTable
from .grid import rng_stream

__all__ = ["SaConfig", "SaResult", "metropolis_accept", "run_sa", "trace_csv"]

# stream id for SA restarts, see grid.rng_stream
_STREAM_SA = 20


@dataclass(frozen=True)
class SaConfig:
    temperature_steps: int = 80
    inner_iterations_per_step: int | None = None  # None: one sweep, i.e. M proposals
    T0: float = 1.0
    alpha: float = 0.95
    k: float = 1.0
    seed: int = 15
    num_samples: int = 10

    def __post_init__(self):
        if self.temperature_steps < 1:
            raise ValueError("temperature_steps must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.T0 > 0.0:
            raise ValueError("T0 must be positive")
        if not self.k > 0.0:
            raise ValueError("k must be positive")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.inner_iterations_per_step is not None and self.inner_iterations_per_step < 1:
            raise ValueError("inner_iterations_per_step must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SaResult:
    best_index: np.ndarray  # per restart
    best_cost: np.ndarray  # normalized, per restart
    # rows of (restart, temperature_step, T, current_cost, best_cost)
    trace: list[tuple[int, int, float, float, float]] = field(default_factory=list)


def metropolis_accept(delta: float, T: float, k: float, u: float) -> bool:
    """Accept a move changing the cost by ``delta`` given a uniform draw ``u``."""
    if delta <= 0.0:
        return True
    return u < math.exp(-abs(delta) / (k * T))


def run_sa(table: CostTable, config: SaConfig) -> SaResult:
    costs = table.normalized if isinstance(table, CostTable) else np.asarray(table, dtype=float)
    if costs.size == 0:
        raise ValueError("empty cost table")
    m = costs.size.bit_length() - 1
    inner = config.inner_iterations_per_step or max(m, 1)
    steps = config.temperature_steps
    cost_list = costs.tolist()

    best_index = np.empty(config.num_samples, dtype=np.int64)
    best_cost = np.empty(config.num_samples)
    trace = []
    for r in range(config.num_samples):
        rng = rng_stream(config.seed, _STREAM_SA, r)
        x = int(rng.integers(0, costs.size))
        flips = rng.integers(0, max(m, 1), size=steps * inner).tolist()
        draws = rng.random(steps * inner).tolist()
        cur = cost_list[x]
        best_x, best = x, cur
        T = config.T0
        pos = 0
        for step in range(steps):
            for _ in range(inner):
                y = x ^ (1 << flips[pos]) if m else x
                cand = cost_list[y]
                if metropolis_accept(cand - cur, T, config.k, draws[pos]):
                    x, cur = y, cand
                    if cur < best:
                        best_x, best = x, cur
                pos += 1
            trace.append((r, step, T, cur, best))
            T *= config.alpha
        best_index[r] = best_x
        best_cost[r] = best
    return SaResult(best_index=best_index, best_cost=best_cost, trace=trace)


def trace_csv(result: SaResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["restart", "temperature_step", "T", "current_cost", "best_cost"])
    for r, step, T, cur, best in result.trace:
        w.writerow([r, step, repr(T), repr(cur), repr(best)])
    return buf.getvalue()
