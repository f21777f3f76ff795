"""DC power flow on the reduced grid Laplacian.

The Laplacian with the reference bus's row and column removed is factorized
once per grid (Cholesky) and reused for every injection vector.  Deleting the
reference row makes that bus the slack: whatever imbalance the injections
carry is absorbed there.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .grid import PowerGrid, Scenario

__all__ = [
    "SingularLaplacianError",
    "FlowSolution",
    "FlowSolver",
    "laplacian",
    "reduced_laplacian",
    "incidence",
    "solver_for",
    "solve_flow",
    "solve_flow_dense_oracle",
]


class SingularLaplacianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class FlowSolution:
    theta: np.ndarray  # radians per bus, theta[r-1] == 0
    flows: np.ndarray  # MW per line, oriented i -> j with i < j
    cost: float

    def to_json(self) -> str:
        return json.dumps(
            {"theta": self.theta.tolist(), "flows": self.flows.tolist(), "cost": self.cost}
        )


def laplacian(grid: PowerGrid) -> np.ndarray:
    n = grid.num_buses
    L = np.zeros((n, n))
    for i, j, b in grid.lines:
        L[i - 1, j - 1] -= b
        L[j - 1, i - 1] -= b
        L[i - 1, i - 1] += b
        L[j - 1, j - 1] += b
    return L


def _keep(grid: PowerGrid) -> np.ndarray:
    return np.array([k for k in range(grid.num_buses) if k != grid.reference_bus - 1], dtype=int)


def reduced_laplacian(grid: PowerGrid) -> np.ndarray:
    """Grid Laplacian without the reference bus row/column (SPD if connected)."""
    keep = _keep(grid)
    reduced = laplacian(grid)[np.ix_(keep, keep)]
    if not grid.is_connected():
        raise SingularLaplacianError("reduced Laplacian of a disconnected grid is singular")
    return reduced


def incidence(grid: PowerGrid) -> np.ndarray:
    """Susceptance-weighted incidence, ``flows = incidence @ theta``."""
    A = np.zeros((grid.num_lines, grid.num_buses))
    for k, (i, j, b) in enumerate(grid.lines):
        A[k, i - 1] = b
        A[k, j - 1] = -b
    return A


class FlowSolver:
    """Factorized DC power flow for one grid.

    The factorization is computed in ``__init__`` and never mutated, so one
    solver may be shared between threads.
    """

    def __init__(self, grid: PowerGrid):
        self.grid = grid
        self.keep = _keep(grid)
        self.matrix = reduced_laplacian(grid)
        try:
            self._factor = scipy.linalg.cho_factor(self.matrix, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularLaplacianError(str(exc)) from exc
        self.weighted_incidence = incidence(grid)

    def angles(self, p: np.ndarray) -> np.ndarray:
        """Bus angles for injections ``p`` (last axis = buses; batched allowed)."""
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.grid.num_buses:
            raise ValueError(f"expected {self.grid.num_buses} injections, got {p.shape[-1]}")
        reduced = p[..., self.keep]
        sol = scipy.linalg.cho_solve(self._factor, reduced.T, check_finite=False).T
        theta = np.zeros(p.shape)
        theta[..., self.keep] = sol
        return theta

    def solve(self, p: np.ndarray, line_costs: Sequence[float], penalty: float = 0.0) -> FlowSolution:
        theta = self.angles(p)
        flows = self.weighted_incidence @ theta
        cost = float(np.abs(flows) @ np.asarray(line_costs, dtype=float))
        if penalty:
            cost += penalty * float(np.sum(p)) ** 2
        return FlowSolution(theta=theta, flows=flows, cost=cost)


@functools.lru_cache(maxsize=64)
def solver_for(grid: PowerGrid) -> FlowSolver:
    return FlowSolver(grid)


def solve_flow(scenario: Scenario, x) -> FlowSolution:
    """Flows and transmission cost when generators ``x`` are switched on.

    ``x`` is either a bit sequence of length M or a table index (bit k is
    generator k).
    """
    solver = solver_for(scenario.grid)
    return solver.solve(scenario.injections(x), scenario.line_costs, scenario.penalty)


# -- independent oracle -------------------------------------------------------


def _gauss_solve(A: list[list[float]], rhs: list[float]) -> list[float]:
    """Gaussian elimination with partial pivoting on plain Python lists."""
    n = len(rhs)
    M = [row[:] + [rhs[k]] for k, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) < 1e-300:
            raise SingularLaplacianError("singular matrix in dense oracle")
        M[col], M[piv] = M[piv], M[col]
        pivot_row = M[col]
        for r in range(col + 1, n):
            f = M[r][col] / pivot_row[col]
            if f:
                row = M[r]
                for c in range(col, n + 1):
                    row[c] -= f * pivot_row[c]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n] - sum(M[r][c] * out[c] for c in range(r + 1, n))
        out[r] = s / M[r][r]
    return out


def solve_flow_dense_oracle(scenario: Scenario, x) -> FlowSolution:
    """Reference solution rebuilt from scratch with no factorization reuse."""
    grid = scenario.grid
    n, r = grid.num_buses, grid.reference_bus - 1
    if not grid.is_connected():
        raise SingularLaplacianError("disconnected grid")
    L = [[0.0] * n for _ in range(n)]
    for i, j, b in grid.lines:
        i, j = i - 1, j - 1
        L[i][i] += b
        L[j][j] += b
        L[i][j] -= b
        L[j][i] -= b
    p = scenario.injections(x).tolist()
    idx = [k for k in range(n) if k != r]
    A = [[L[a][b] for b in idx] for a in idx]
    sol = _gauss_solve(A, [p[k] for k in idx])
    theta = [0.0] * n
    for k, v in zip(idx, sol):
        theta[k] = v
    flows = [b * (theta[i - 1] - theta[j - 1]) for i, j, b in grid.lines]
    cost = sum(c * abs(f) for c, f in zip(scenario.line_costs, flows))
    if scenario.penalty:
        cost += scenario.penalty * sum(p) ** 2
    return FlowSolution(theta=np.array(theta), flows=np.array(flows), cost=float(cost))
