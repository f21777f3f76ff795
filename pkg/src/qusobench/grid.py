"""Power grid model, IEEE Common Data Format ingestion and UCP scenario generation.

Buses are re-indexed contiguously as 1..N in order of appearance; the
reference (slack) bus defaults to N.  Lines are undirected, stored once per
unordered bus pair with ``i < j``, and carry the DC susceptance ``b = 1/x``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "GridError",
    "CDFParseError",
    "DisconnectedGridError",
    "ScenarioError",
    "PowerGrid",
    "Scenario",
    "parse_cdf",
    "read_cdf",
    "write_cdf",
    "ieee57",
    "generate_scenario",
    "scenario_to_json",
    "scenario_from_json",
    "rng_stream",
    "derive_seed",
    "bits_of",
]


class GridError(ValueError):
    """Base class for grid construction and validation failures."""


class CDFParseError(GridError):
    """Raised for malformed IEEE CDF input.

    ``label`` is a short machine-readable tag such as ``"section-header"``,
    ``"reactance-non-numeric"`` or ``"reactance-zero"``.
    """

    def __init__(self, label: str, message: str, lineno: int | None = None):
        self.label = label
        self.lineno = lineno
        where = f" (line {lineno})" if lineno is not None else ""
        super().__init__(f"[{label}] {message}{where}")


class DisconnectedGridError(GridError):
    label = "disconnected"


class ScenarioError(GridError):
    pass


@dataclass(frozen=True)
class PowerGrid:
    """Connected, undirected, susceptance-weighted transmission graph."""

    num_buses: int
    lines: tuple[tuple[int, int, float], ...]
    reference_bus: int = 0  # 0 means "use num_buses"
    name: str = ""

    def __post_init__(self):
        if self.num_buses < 1:
            raise GridError("grid needs at least one bus")
        if self.reference_bus == 0:
            object.__setattr__(self, "reference_bus", self.num_buses)
        if not 1 <= self.reference_bus <= self.num_buses:
            raise GridError(f"reference bus {self.reference_bus} outside 1..{self.num_buses}")
        merged: dict[tuple[int, int], float] = {}
        for i, j, b in self.lines:
            i, j = int(i), int(j)
            if i == j:
                raise GridError(f"self-loop at bus {i}")
            if not (1 <= i <= self.num_buses and 1 <= j <= self.num_buses):
                raise GridError(f"line ({i}, {j}) references an unknown bus")
            if not b > 0:
                raise GridError(f"line ({i}, {j}) has non-positive susceptance {b}")
            key = (min(i, j), max(i, j))
            merged[key] = merged.get(key, 0.0) + float(b)
        lines = tuple((i, j, b) for (i, j), b in sorted(merged.items()))
        object.__setattr__(self, "lines", lines)
        if not self.is_connected():
            raise DisconnectedGridError("[disconnected] grid graph is not connected")

    @property
    def buses(self) -> range:
        return range(1, self.num_buses + 1)

    @property
    def num_lines(self) -> int:
        return len(self.lines)

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_buses, dtype=int)
        for i, j, _ in self.lines:
            d[i - 1] += 1
            d[j - 1] += 1
        return d

    def is_connected(self) -> bool:
        adj: list[list[int]] = [[] for _ in range(self.num_buses)]
        for i, j, _ in self.lines:
            adj[i - 1].append(j - 1)
            adj[j - 1].append(i - 1)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_buses

    def with_reference(self, bus: int) -> "PowerGrid":
        return replace(self, reference_bus=bus)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "buses": list(self.buses),
            "reference_bus": self.reference_bus,
            "lines": [{"i": i, "j": j, "b": b} for i, j, b in self.lines],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PowerGrid":
        return cls(
            num_buses=len(d["buses"]),
            lines=tuple((int(l["i"]), int(l["j"]), float(l["b"])) for l in d["lines"]),
            reference_bus=int(d.get("reference_bus", 0)),
            name=d.get("name", ""),
        )

    def digest(self) -> str:
        return _digest(self.to_dict())


# -- IEEE Common Data Format ------------------------------------------------


def _field(line: str, lo: int, hi: int) -> str:
    # 1-based inclusive column range
    return line[lo - 1 : hi].strip()


def _section_lines(lines: list[str], start: int, keyword: str) -> tuple[list[tuple[int, str]], int]:
    """Collect records after a ``<keyword> DATA FOLLOWS`` header up to ``-999``."""
    for k in range(start, len(lines)):
        text = lines[k].strip()
        if not text:
            continue
        if not text.upper().startswith(keyword):
            raise CDFParseError(
                "section-header",
                f"expected '{keyword} DATA FOLLOWS', got {text[:40]!r}",
                k + 1,
            )
        if "FOLLOW" not in text.upper():
            raise CDFParseError("section-header", f"malformed section header {text[:40]!r}", k + 1)
        records = []
        for m in range(k + 1, len(lines)):
            if lines[m].strip().startswith("-999"):
                return records, m + 1
            if lines[m].strip():
                records.append((m + 1, lines[m]))
        raise CDFParseError("unterminated-section", f"{keyword} section has no -999 terminator")
    raise CDFParseError("section-header", f"missing {keyword} DATA section")


def parse_cdf(text: str, name: str = "") -> PowerGrid:
    """Parse IEEE CDF text into a :class:`PowerGrid`.

    Only bus numbers and branch endpoints/reactances are used.  Bus numbers
    are re-indexed contiguously in order of appearance and the last bus
    becomes the reference.  Parallel branches are merged by adding their
    susceptances.
    """
    lines = text.splitlines()
    if not lines:
        raise CDFParseError("empty", "empty case file")
    # first line is the title card
    bus_records, pos = _section_lines(lines, 1, "BUS")
    index: dict[int, int] = {}
    for lineno, rec in bus_records:
        raw = _field(rec, 1, 4)
        try:
            number = int(raw)
        except ValueError:
            raise CDFParseError("bus-number", f"non-numeric bus number {raw!r}", lineno) from None
        if number in index:
            raise CDFParseError("bus-duplicate", f"bus {number} listed twice", lineno)
        index[number] = len(index) + 1
    if not index:
        raise CDFParseError("no-buses", "BUS DATA section is empty")

    branch_records, _ = _section_lines(lines, pos, "BRANCH")
    branches = []
    for lineno, rec in branch_records:
        try:
            tap, z = int(_field(rec, 1, 4)), int(_field(rec, 6, 9))
        except ValueError:
            raise CDFParseError("branch-bus", "non-numeric branch endpoint", lineno) from None
        raw_x = _field(rec, 30, 40)
        try:
            x = float(raw_x)
        except ValueError:
            raise CDFParseError("reactance-non-numeric", f"reactance {raw_x!r} is not a number", lineno) from None
        if x == 0.0:
            raise CDFParseError("reactance-zero", "zero reactance gives infinite susceptance", lineno)
        for bus in (tap, z):
            if bus not in index:
                raise CDFParseError("branch-bus", f"branch references unknown bus {bus}", lineno)
        # negative reactances (series compensation) would break positive definiteness
        branches.append((index[tap], index[z], 1.0 / abs(x)))

    return PowerGrid(num_buses=len(index), lines=tuple(branches), name=name)


def read_cdf(path: str | Path) -> PowerGrid:
    path = Path(path)
    return parse_cdf(path.read_text(), name=path.stem)


def write_cdf(grid: PowerGrid, title: str = "qusobench export") -> str:
    """Serialize a grid as minimal IEEE CDF (bus and branch sections only).

    The reactance field is 11 columns wide, so susceptances survive a CDF
    round trip only to about 1e-9 relative; use the JSON form for exact
    persistence.
    """
    out = [f" 01/01/00 {'QUSOBENCH':<20s} 100.0  2000 S {title[:28]}"]
    out.append(f"BUS DATA FOLLOWS                            {grid.num_buses} ITEMS")
    for i in grid.buses:
        out.append(f"{i:4d} {'Bus ' + str(i):<12s}  1  1  0  1.000   0.00")
    out.append("-999")
    out.append(f"BRANCH DATA FOLLOWS                         {grid.num_lines} ITEMS")
    for i, j, b in grid.lines:
        x = 1.0 / b
        out.append(f"{i:4d} {j:4d} {1:2d}{1:2d}  1 0{0.0:10.5f}{_fit(x, 11)}{0.0:10.5f}")
    out.append("-999")
    out.append("END OF DATA")
    return "\n".join(out) + "\n"


def _fit(x: float, width: int) -> str:
    for digits in range(width, 0, -1):
        s = f"{x:.{digits}g}"
        if len(s) <= width:
            return s.rjust(width)
    raise ValueError(f"cannot fit {x} in {width} columns")


def ieee57() -> PowerGrid:
    """The bundled IEEE 57-bus test case."""
    text = resources.files("qusobench.data").joinpath("ieee57cdf.txt").read_text()
    return parse_cdf(text, name="ieee57")


# -- scenarios ----------------------------------------------------------------

# per-purpose stream ids, see rng_stream
_STREAM_ASSIGN, _STREAM_LOAD, _STREAM_COST = 1, 2, 3


def rng_stream(seed: int, *purpose: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *purpose)``.

    Streams are derived with ``SeedSequence(seed, spawn_key=purpose)`` so that
    every purpose (assignment, load sampling, cost sampling, SA restart r, ...)
    draws from its own statistically independent sequence.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(purpose))))


def derive_seed(seed: int, *key: int) -> int:
    """64-bit child seed for ``(seed, *key)``; stable across platforms."""
    lo, hi = np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass(frozen=True)
class Scenario:
    """A concrete unit-commitment instance on a grid.

    ``generators`` is ordered: generator ``k`` is bit ``k`` (least significant
    first) of a cost-table index.  ``loads`` holds the consumption of every
    non-generator bus as a non-negative MW number; injections are negative.
    """

    grid: PowerGrid
    generators: tuple[int, ...]
    loads: tuple[float, ...]  # MW per bus 1..N, 0.0 at generator buses
    total_capacity: float
    load_fraction: float
    line_costs: tuple[float, ...]
    seed: int
    penalty: float = 0.0
    _capacity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.num_buses
        if len(self.loads) != n:
            raise ScenarioError(f"expected {n} load entries, got {len(self.loads)}")
        if len(self.line_costs) != self.grid.num_lines:
            raise ScenarioError("one cost factor per line required")
        if len(set(self.generators)) != len(self.generators):
            raise ScenarioError("duplicate generator bus")
        for g in self.generators:
            if not 1 <= g <= n:
                raise ScenarioError(f"generator bus {g} outside 1..{n}")
            if self.loads[g - 1] != 0.0:
                raise ScenarioError(f"generator bus {g} also carries load")
        if not self.generators:
            raise ScenarioError("scenario needs at least one generator")
        object.__setattr__(self, "_capacity", self.total_capacity / len(self.generators))

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    @property
    def capacity_per_generator(self) -> float:
        return self._capacity

    @property
    def load_buses(self) -> tuple[int, ...]:
        gens = set(self.generators)
        return tuple(i for i in self.grid.buses if i not in gens)

    def injections(self, x: Sequence[int] | int) -> np.ndarray:
        """Injection vector p_x (MW per bus, index 0 is bus 1)."""
        bits = bits_of(x, self.num_generators)
        p = -np.asarray(self.loads, dtype=float)
        for g, on in zip(self.generators, bits):
            if on:
                p[g - 1] += self._capacity
        return p

    def restrict(self, k: int) -> "Scenario":
        """Keep only the first ``k`` generators.

        Dropped generator buses become zero-injection buses; the load profile
        stays unchanged, and the full ``total_capacity`` is shared by the
        remaining ``k`` generators.
        """
        if not 1 <= k <= self.num_generators:
            raise ScenarioError(f"cannot restrict {self.num_generators} generators to {k}")
        return replace(self, generators=self.generators[:k])

    def to_dict(self) -> dict:
        return {
            **self.grid.to_dict(),
            "generators": list(self.generators),
            "injections": {
                "capacity_per_generator": self.capacity_per_generator,
                "loads": list(self.loads),
            },
            "total_capacity": self.total_capacity,
            "line_costs": list(self.line_costs),
            "seed": self.seed,
            "load_fraction": self.load_fraction,
            "penalty": self.penalty,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scenario":
        return cls(
            grid=PowerGrid.from_dict(d),
            generators=tuple(int(g) for g in d["generators"]),
            loads=tuple(float(v) for v in d["injections"]["loads"]),
            total_capacity=float(d["total_capacity"]),
            load_fraction=float(d["load_fraction"]),
            line_costs=tuple(float(c) for c in d["line_costs"]),
            seed=int(d["seed"]),
            penalty=float(d.get("penalty", 0.0)),
        )

    def digest(self) -> str:
        return _digest(self.to_dict())


def bits_of(x: Sequence[int] | int, m: int) -> tuple[int, ...]:
    """Bitstring of length ``m``; integers are read least-significant bit first."""
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < (1 << m):
            raise ValueError(f"index {x} out of range for {m} bits")
        return tuple((int(x) >> k) & 1 for k in range(m))
    bits = tuple(int(b) for b in x)
    if len(bits) != m:
        raise ValueError(f"bitstring has length {len(bits)}, expected {m}")
    return bits


def generate_scenario(
    grid: PowerGrid,
    num_generators: int,
    total_capacity: float = 1000.0,
    load_fraction: float = 1.0,
    seed: int = 15,
    random_costs: bool = False,
    penalty: float = 0.0,
) -> Scenario:
    """Seeded UCP instance: generator placement, scaled loads and line costs.

    Generators are drawn uniformly without replacement from the non-reference
    buses.  Raw loads are uniform on (0, 1] and rescaled so that they sum to
    ``load_fraction * total_capacity``.  Line costs are 1.0 unless
    ``random_costs`` is set, in which case they are uniform on [0.5, 1.5].
    The placement and raw load draws do not depend on ``load_fraction``, so
    scenarios for different loads share the same topology.
    """
    n = grid.num_buses
    if not 1 <= num_generators <= n - 1:
        raise ScenarioError(f"num_generators must be in 1..{n - 1}, got {num_generators}")
    if not 0.0 < load_fraction <= 1.0:
        raise ScenarioError(f"load_fraction must be in (0, 1], got {load_fraction}")
    if not total_capacity > 0:
        raise ScenarioError("total_capacity must be positive")

    candidates = np.array([b for b in grid.buses if b != grid.reference_bus])
    chosen = rng_stream(seed, _STREAM_ASSIGN).choice(candidates, size=num_generators, replace=False)
    generators = tuple(int(g) for g in chosen)

    gens = set(generators)
    load_buses = [b for b in grid.buses if b not in gens]
    raw = 1.0 - rng_stream(seed, _STREAM_LOAD).random(len(load_buses))  # (0, 1]
    target = load_fraction * total_capacity
    scaled = raw * (target / raw.sum())
    loads = np.zeros(n)
    loads[np.array(load_buses) - 1] = scaled

    if random_costs:
        costs = rng_stream(seed, _STREAM_COST).uniform(0.5, 1.5, grid.num_lines)
    else:
        costs = np.ones(grid.num_lines)

    return Scenario(
        grid=grid,
        generators=generators,
        loads=tuple(float(v) for v in loads),
        total_capacity=float(total_capacity),
        load_fraction=float(load_fraction),
        line_costs=tuple(float(c) for c in costs),
        seed=int(seed),
        penalty=float(penalty),
    )


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=1)


def scenario_from_json(text: str) -> Scenario:
    return Scenario.from_dict(json.loads(text))


def _digest(obj: object) -> str:
    # repr-exact floats via json; key order fixed
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
