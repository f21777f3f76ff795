"""Exhaustive objective tables over all generator bitstrings.

Index ``i`` of a table is the bitstring whose bit ``k`` (least significant
first) switches generator ``k`` of the scenario on.  Qubit ``k`` of the QAOA
register uses the same convention.

Because DC flows are linear in the injections, the flow vector of every
bitstring is the load-only flow plus the flows of the switched-on generators.
Those M + 1 base flows come from one Cholesky factorization; the table is then
filled by adding them in a fixed order (load first, then generator 0, 1, ...),
which keeps every entry bit-identical regardless of chunking or thread count.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dcflow import solver_for
from .grid import Scenario

__all__ = [
    "TableCapacityError",
    "TableFormatError",
    "StaleCacheError",
    "CostTable",
    "table_from_costs",
    "build_table",
    "save_table",
    "load_table",
    "HEADER_SIZE",
    "DEFAULT_MAX_QUBITS",
]

DEFAULT_MAX_QUBITS = 24
MAGIC = b"QSBCTAB1"
# magic, M, flags, digest (32 raw bytes), min index, max index
_HEADER = struct.Struct("<8sII32sqq")
HEADER_SIZE = _HEADER.size


class TableCapacityError(MemoryError):
    pass


class TableFormatError(ValueError):
    pass


class StaleCacheError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostTable:
    raw: np.ndarray
    normalized: np.ndarray
    min_index: int
    max_index: int
    scenario_digest: str = ""
    trivial: bool = False  # all costs equal up to rounding; normalized is all 0.0

    @property
    def num_qubits(self) -> int:
        return int(self.raw.size).bit_length() - 1

    def __len__(self) -> int:
        return self.raw.size

    def identical(self, other: "CostTable") -> bool:
        return (
            self.scenario_digest == other.scenario_digest
            and self.min_index == other.min_index
            and self.max_index == other.max_index
            and self.trivial == other.trivial
            and self.raw.tobytes() == other.raw.tobytes()
            and self.normalized.tobytes() == other.normalized.tobytes()
        )


# spans below this fraction of the cost magnitude are rounding noise
DEGENERATE_RTOL = 1e-12


def table_from_costs(raw, scenario_digest: str = "") -> CostTable:
    """Min/max-rescale raw objective values into a :class:`CostTable`.

    If all values agree to ``DEGENERATE_RTOL`` the table is flagged trivial
    and every normalized cost is 0.0.
    """
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    m = raw.size.bit_length() - 1
    if raw.ndim != 1 or raw.size != 1 << m:
        raise ValueError(f"table length must be a power of two, got {raw.size}")
    lo, hi = int(np.argmin(raw)), int(np.argmax(raw))
    span = raw[hi] - raw[lo]
    trivial = not span > DEGENERATE_RTOL * max(abs(raw[hi]), abs(raw[lo]))
    if not trivial:
        normalized = (raw - raw[lo]) / span
        np.clip(normalized, 0.0, 1.0, out=normalized)
        normalized[lo], normalized[hi] = 0.0, 1.0
    else:
        normalized = np.zeros_like(raw)
    raw.flags.writeable = False
    normalized.flags.writeable = False
    return CostTable(raw, normalized, lo, hi, scenario_digest, trivial)


def _base_flows(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Load-only flows (E,) and per-generator unit-commitment flows (M, E)."""
    solver = solver_for(scenario.grid)
    n = scenario.grid.num_buses
    p = np.zeros((scenario.num_generators + 1, n))
    p[0] = -np.asarray(scenario.loads)
    for k, g in enumerate(scenario.generators, start=1):
        p[k, g - 1] = scenario.capacity_per_generator
    flows = solver.angles(p) @ solver.weighted_incidence.T
    return flows[0], flows[1:]


def _chunk_costs(start: int, low_bits: int, load_flow, gen_flows, costs) -> np.ndarray:
    m = gen_flows.shape[0]
    acc = load_flow[None, :].copy()
    for k in range(low_bits):
        acc = np.concatenate([acc, acc + gen_flows[k]])
    for k in range(low_bits, m):
        if (start >> k) & 1:
            acc += gen_flows[k]
    a = np.abs(acc)
    if costs is not None:
        a *= costs
    return a.sum(axis=1)


def build_table(
    scenario: Scenario,
    max_qubits: int = DEFAULT_MAX_QUBITS,
    workers: int | None = None,
    chunk_bits: int = 12,
) -> CostTable:
    """Transmission cost of every bitstring, min/max normalized.

    ``workers`` threads evaluate disjoint index blocks of ``2**chunk_bits``
    entries; the result does not depend on either setting.
    """
    m = scenario.num_generators
    if m > max_qubits:
        need = 2 * 8 * (1 << m)
        raise TableCapacityError(
            f"{m} generators need a 2^{m}-entry table ({need / 2**20:.0f} MiB for raw and "
            f"normalized float64 arrays); limit is {max_qubits}"
        )
    load_flow, gen_flows = _base_flows(scenario)
    c = np.asarray(scenario.line_costs, dtype=float)
    # unit costs: a plain row sum gives the same value with fewer operations
    costs = None if np.all(c == 1.0) else c
    low = min(chunk_bits, m)
    starts = range(0, 1 << m, 1 << low)

    def work(start):
        return _chunk_costs(start, low, load_flow, gen_flows, costs)

    if workers is None:
        workers = min(8, os.cpu_count() or 1)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    raw = np.concatenate(parts)

    if scenario.penalty:
        online = np.array([bin(i).count("1") for i in range(1 << m)], dtype=float)
        imbalance = online * scenario.capacity_per_generator - float(np.sum(scenario.loads))
        raw = raw + scenario.penalty * imbalance**2
    return table_from_costs(raw, scenario.digest())


def save_table(table: CostTable, path: str | Path) -> None:
    """Write header + raw + normalized (little-endian float64) atomically."""
    path = Path(path)
    digest = bytes.fromhex(table.scenario_digest) if table.scenario_digest else bytes(32)
    header = _HEADER.pack(MAGIC, table.num_qubits, int(table.trivial), digest, table.min_index, table.max_index)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(table.raw.astype("<f8").tobytes())
        fh.write(table.normalized.astype("<f8").tobytes())
    os.replace(tmp, path)


def load_table(path: str | Path, scenario: Scenario | None = None) -> CostTable:
    """Read a table written by :func:`save_table`.

    If ``scenario`` is given its digest must match the stored one, otherwise
    :class:`StaleCacheError` is raised.
    """
    blob = Path(path).read_bytes()
    if len(blob) < HEADER_SIZE:
        raise TableFormatError(f"{path}: truncated header")
    magic, m, flags, digest, lo, hi = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise TableFormatError(f"{path}: not a cost table")
    size = 1 << m
    if len(blob) != HEADER_SIZE + 16 * size:
        raise TableFormatError(f"{path}: expected {HEADER_SIZE + 16 * size} bytes, found {len(blob)}")
    hexdigest = digest.hex() if any(digest) else ""
    if scenario is not None and scenario.digest() != hexdigest:
        raise StaleCacheError(f"{path}: cached table belongs to a different scenario")
    raw = np.frombuffer(blob, dtype="<f8", count=size, offset=HEADER_SIZE).astype(np.float64)
    norm = np.frombuffer(blob, dtype="<f8", count=size, offset=HEADER_SIZE + 8 * size).astype(np.float64)
    raw.flags.writeable = False
    norm.flags.writeable = False
    return CostTable(raw, norm, int(lo), int(hi), hexdigest, bool(flags & 1))
