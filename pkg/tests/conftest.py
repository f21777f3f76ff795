import numpy as np
import pytest

from qusobench.grid import PowerGrid, Scenario, generate_scenario, ieee57


@pytest.fixture(scope="session")
def grid57():
    return ieee57()


@pytest.fixture
def triangle():
    return PowerGrid(3, ((1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)))


def hand_scenario(grid, generators, loads, capacity=1.0, costs=None, penalty=0.0):
    return Scenario(
        grid=grid,
        generators=tuple(generators),
        loads=tuple(float(v) for v in loads),
        total_capacity=capacity * len(generators),
        load_fraction=1.0,
        line_costs=tuple(costs or [1.0] * grid.num_lines),
        seed=0,
        penalty=penalty,
    )


def random_grid(rng: np.random.Generator, n: int, extra: int | None = None) -> PowerGrid:
    """Random connected grid: random spanning tree plus extra edges."""
    order = rng.permutation(n) + 1
    lines = []
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        lines.append((int(order[k]), int(parent), float(rng.uniform(0.5, 20.0))))
    for _ in range(n // 2 if extra is None else extra):
        i, j = rng.choice(n, size=2, replace=False) + 1
        lines.append((int(i), int(j), float(rng.uniform(0.5, 20.0))))
    return PowerGrid(n, tuple(lines), reference_bus=int(rng.integers(1, n + 1)))


def random_scenario(rng: np.random.Generator, max_buses: int = 57, max_generators: int = 8) -> Scenario:
    n = int(rng.integers(3, max_buses + 1))
    grid = random_grid(rng, n)
    m = int(rng.integers(1, min(max_generators, n - 1) + 1))
    return generate_scenario(
        grid, m, total_capacity=float(rng.uniform(10, 2000)), load_fraction=float(rng.uniform(0.05, 1.0)),
        seed=int(rng.integers(0, 2**63)), random_costs=bool(rng.integers(0, 2)),
    )


# acceptance tests register one line per criterion here
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
