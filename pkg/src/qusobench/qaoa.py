"""Statevector simulation of QAOA with a precomputed diagonal cost.

The cost unitary of every layer is diagonal in the computational basis, with
entry ``exp(-1j * gamma * cost[x])`` built from a normalized
:class:`~qusobench.costtable.CostTable`, so no ancilla or arithmetic register
is simulated.  The mixer applies ``exp(-1j * beta * X)`` to every qubit.

Amplitude ``i`` corresponds to the bitstring with qubit ``k`` equal to bit
``k`` of ``i``, matching the cost-table index convention.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numba
import numpy as np

from .costtable import CostTable
from .grid import rng_stream

__all__ = [
    "RampSchedule",
    "make_schedule",
    "uniform_state",
    "apply_cost_phase",
    "apply_mixer",
    "evolve",
    "run_qaoa",
    "sample_outcomes",
    "expected_cost",
    "distribution_rows",
    "distribution_csv",
    "distribution_json",
]

# stream id for measurement sampling, see grid.rng_stream
_STREAM_SAMPLE = 10


@dataclass(frozen=True)
class RampSchedule:
    gammas: np.ndarray
    betas: np.ndarray

    @property
    def p(self) -> int:
        return len(self.gammas)

    def __post_init__(self):
        if len(self.gammas) != len(self.betas):
            raise ValueError("gammas and betas differ in length")


def make_schedule(p: int) -> RampSchedule:
    """Linear ramp: ``gamma_k = k/p`` and ``beta_k = -(p - k + 1)/p`` for k = 1..p."""
    if p < 1:
        raise ValueError(f"layer count must be positive, got {p}")
    k = np.arange(1, p + 1, dtype=float)
    return RampSchedule(gammas=k / p, betas=-(p - k + 1) / p)


def uniform_state(n: int) -> np.ndarray:
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def _num_qubits(state: np.ndarray) -> int:
    n = state.size.bit_length() - 1
    if state.size != 1 << n:
        raise ValueError(f"state length {state.size} is not a power of two")
    return n


def _costs_of(costs) -> np.ndarray:
    if isinstance(costs, CostTable):
        return costs.normalized
    return np.asarray(costs, dtype=float)


def apply_cost_phase(state: np.ndarray, costs, gamma: float) -> np.ndarray:
    """Multiply amplitude ``i`` by ``exp(-1j*gamma*costs[i])`` in place."""
    c = _costs_of(costs)
    if c.size != state.size:
        raise ValueError(f"cost table has {c.size} entries, state has {state.size}")
    if gamma != 0.0:
        state *= np.exp(-1j * gamma * c)
    return state


@numba.njit(cache=True)
def _mixer_kernel(s, cos_b, sin_b):
    # (cos b) I - i (sin b) X on each qubit; pairs (i, i+h) are disjoint
    n = s.size
    h = 1
    while h < n:
        for blk in range(0, n, 2 * h):
            for i in range(blk, blk + h):
                a0 = s[i]
                a1 = s[i + h]
                s[i] = complex(cos_b * a0.real + sin_b * a1.imag, cos_b * a0.imag - sin_b * a1.real)
                s[i + h] = complex(cos_b * a1.real + sin_b * a0.imag, cos_b * a1.imag - sin_b * a0.real)
        h *= 2


@numba.njit(cache=True)
def _phase_kernel(s, costs, gamma):
    for i in range(s.size):
        ph = -gamma * costs[i]
        s[i] *= complex(np.cos(ph), np.sin(ph))


def _mixer_numpy(state: np.ndarray, beta: float) -> None:
    cos_b, msin_b = np.cos(beta), -1j * np.sin(beta)
    for q in range(_num_qubits(state)):
        v = state.reshape(-1, 2, 1 << q)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] *= cos_b
        v[:, 0, :] += msin_b * a1
        a1 *= cos_b
        a1 += msin_b * a0


def apply_mixer(state: np.ndarray, beta: float, backend: str = "numba") -> np.ndarray:
    """Apply ``exp(-1j*beta*X)`` to every qubit, in place."""
    _num_qubits(state)
    if beta == 0.0:
        return state
    if backend == "numba":
        _mixer_kernel(state, np.cos(beta), np.sin(beta))
    elif backend == "numpy":
        _mixer_numpy(state, beta)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return state


def evolve(table, schedule: RampSchedule, backend: str = "numba") -> np.ndarray:
    """Final statevector of the p-layer circuit started from ``|+>^n``."""
    costs = np.ascontiguousarray(_costs_of(table))
    n = _num_qubits(costs)
    state = uniform_state(n)
    for gamma, beta in zip(schedule.gammas, schedule.betas):
        if backend == "numba":
            if gamma != 0.0:
                _phase_kernel(state, costs, float(gamma))
        else:
            apply_cost_phase(state, costs, float(gamma))
        apply_mixer(state, float(beta), backend)
    return state


def run_qaoa(table, schedule: RampSchedule, backend: str = "numba") -> np.ndarray:
    """Exact measurement distribution ``|a_i|^2`` after the circuit."""
    state = evolve(table, schedule, backend)
    return state.real**2 + state.imag**2


def sample_outcomes(distribution: np.ndarray, num_samples: int, seed: int, stream: int = 0) -> np.ndarray:
    """Draw table indices i.i.d. from ``distribution`` by inverse CDF.

    ``stream`` selects an independent sequence for the same seed (e.g. one
    per layer count).
    """
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    p = np.asarray(distribution, dtype=float)
    total = p.sum()
    if not abs(total - 1.0) <= 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    cdf = np.cumsum(p / total)
    u = rng_stream(seed, _STREAM_SAMPLE, stream).random(num_samples)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, p.size - 1)


def expected_cost(distribution: np.ndarray, table) -> float:
    return float(np.dot(distribution, _costs_of(table)))


def distribution_rows(distribution: np.ndarray, table, min_probability: float = 0.0):
    c = _costs_of(table)
    n = _num_qubits(c)
    for i in np.flatnonzero(distribution >= min_probability):
        # bitstring printed with qubit 0 rightmost
        yield format(int(i), f"0{n}b"), float(distribution[i]), float(c[i])


def distribution_csv(distribution: np.ndarray, table, min_probability: float = 0.0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bitstring", "probability", "normalized_cost"])
    for bits, prob, cost in distribution_rows(distribution, table, min_probability):
        w.writerow([bits, repr(prob), repr(cost)])
    return buf.getvalue()


def distribution_json(distribution: np.ndarray, table, min_probability: float = 0.0) -> str:
    rows = [
        {"bitstring": b, "probability": p, "normalized_cost": c}
        for b, p, c in distribution_rows(distribution, table, min_probability)
    ]
    return json.dumps(rows)
