"""Experiment plans: sweep qubits x loads x resource levels for QAOA and SA.

Every instance cell ``(seed, qubits, load)`` is built from one master
assignment of ``master_generators`` generators; smaller qubit counts keep the
first ``qubits`` of them, so instances nest across the sweep.  All randomness
in a cell is derived from the plan seed and the cell coordinates, which makes
record files reproducible byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .anneal import SaConfig, run_sa
from .costtable import CostTable, build_table, load_table, save_table
from .grid import PowerGrid, derive_seed, generate_scenario, ieee57, read_cdf
from .metrics import BenchRecord
from .qaoa import make_schedule, run_qaoa, sample_outcomes

__all__ = [
    "ExperimentPlan",
    "PlanError",
    "load_case",
    "cell_scenario",
    "run_cell",
    "run_plan",
    "write_atomic",
    "RECORD_FIELDS",
    "CELL_FIELDS",
]

log = logging.getLogger(__name__)

RECORD_FIELDS = ["algorithm", "qubits", "load", "seed", "s", "sample_index", "index", "normalized_cost", "ar"]
CELL_FIELDS = [
    "algorithm", "qubits", "load", "seed", "s", "num_samples",
    "best_ar", "mean_ar", "expected_ar", "p_success", "exact_p_success",
]


class PlanError(ValueError):
    pass


def _default_loads() -> list[float]:
    return [round(k / 10, 10) for k in range(1, 11)]


@dataclass
class ExperimentPlan:
    case: str = "ieee57"
    qubits: list[int] = field(default_factory=lambda: list(range(4, 21)))
    loads: list[float] = field(default_factory=_default_loads)
    layers: list[int] = field(default_factory=lambda: [2**k for k in range(11)])
    temperature_steps: list[int] = field(default_factory=lambda: list(range(10, 81, 10)))
    seeds: list[int] = field(default_factory=lambda: [15])
    master_generators: int = 20
    total_capacity: float = 1000.0
    threshold: float = 0.95
    qaoa_samples: int = 10
    sa_samples: int = 10
    sa_T0: float = 1.0
    sa_alpha: float = 0.95
    sa_k: float = 1.0
    sa_inner: int | None = None
    random_costs: bool = False
    penalty: float = 0.0
    heatmap_layers: int = 256
    heatmap_temperature_steps: int = 20
    max_qubits: int = 24

    def validate(self) -> None:
        for name in ("qubits", "loads", "layers", "temperature_steps", "seeds"):
            if not getattr(self, name):
                raise PlanError(f"{name} must not be empty")
        if max(self.qubits) > min(self.max_qubits, self.master_generators):
            raise PlanError(
                f"qubit count {max(self.qubits)} exceeds master generator count "
                f"{self.master_generators} or table limit {self.max_qubits}"
            )
        if min(self.qubits) < 1:
            raise PlanError("qubit counts must be positive")
        if any(not 0 < f <= 1 for f in self.loads):
            raise PlanError("load fractions must lie in (0, 1]")
        if min(self.layers) < 1 or min(self.temperature_steps) < 1:
            raise PlanError("layer and temperature step counts must be positive")
        if not 0 < self.threshold <= 1:
            raise PlanError("threshold must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        return cls(**d)

    def cells(self) -> list[tuple[int, int, float]]:
        return [(seed, q, f) for seed in self.seeds for q in self.qubits for f in self.loads]


def load_case(case: str) -> PowerGrid:
    if case == "ieee57":
        return ieee57()
    return read_cdf(case)


def cell_scenario(plan: ExperimentPlan, grid: PowerGrid, seed: int, qubits: int, load: float):
    master = generate_scenario(
        grid,
        plan.master_generators,
        plan.total_capacity,
        load,
        seed,
        random_costs=plan.random_costs,
        penalty=plan.penalty,
    )
    return master.restrict(qubits)


def cell_seed(seed: int, qubits: int, load: float) -> int:
    # loads enter as integer per-mille so the key is exact
    return derive_seed(seed, qubits, int(round(load * 1000)))


def _table_path(cache_dir: Path, seed: int, qubits: int, load: float) -> Path:
    return cache_dir / f"table_q{qubits}_load{load:g}_seed{seed}.bin"


def _cell_table(plan, grid, seed, qubits, load, cache_dir: Path | None) -> CostTable:
    scenario = cell_scenario(plan, grid, seed, qubits, load)
    if cache_dir is None:
        return build_table(scenario, max_qubits=plan.max_qubits)
    path = _table_path(cache_dir, seed, qubits, load)
    if path.exists():
        return load_table(path, scenario)
    table = build_table(scenario, max_qubits=plan.max_qubits)
    save_table(table, path)
    return table


def run_cell(plan: ExperimentPlan, grid: PowerGrid, seed: int, qubits: int, load: float,
             cache_dir: Path | None = None) -> dict:
    """Run every QAOA layer count and SA temperature count on one instance."""
    t0 = time.perf_counter()
    table = _cell_table(plan, grid, seed, qubits, load, cache_dir)
    t_table = time.perf_counter() - t0
    cseed = cell_seed(seed, qubits, load)
    good = (1.0 - table.normalized) >= plan.threshold
    records: list[BenchRecord] = []
    timings = {"table": t_table}

    for p in plan.layers:
        t0 = time.perf_counter()
        dist = run_qaoa(table, make_schedule(p))
        idx = sample_outcomes(dist, plan.qaoa_samples, cseed, stream=p)
        rec = BenchRecord(
            "qaoa", qubits, load, seed, p,
            sample_costs=table.normalized[idx].tolist(),
            expected_cost=min(max(float(dist @ table.normalized), 0.0), 1.0),
            exact_success=min(float(dist[good].sum()), 1.0),
            indices=idx.tolist(),
        )
        records.append(rec)
        timings[f"qaoa_p{p}"] = time.perf_counter() - t0

    for steps in plan.temperature_steps:
        t0 = time.perf_counter()
        cfg = SaConfig(
            temperature_steps=steps,
            inner_iterations_per_step=plan.sa_inner,
            T0=plan.sa_T0,
            alpha=plan.sa_alpha,
            k=plan.sa_k,
            seed=derive_seed(cseed, steps),
            num_samples=plan.sa_samples,
        )
        res = run_sa(table, cfg)
        rec = BenchRecord("sa", qubits, load, seed, steps, sample_costs=res.best_cost.tolist(),
                          indices=res.best_index.tolist())
        records.append(rec)
        timings[f"sa_t{steps}"] = time.perf_counter() - t0

    return {
        "seed": seed,
        "qubits": qubits,
        "load": load,
        "cell_seed": cseed,
        "table_digest": table.scenario_digest,
        "trivial": bool(table.trivial),
        "optimum_index": table.min_index,
        "status": "ok",
        "records": records,
        "timings": timings,
    }


def _run_cell_safe(args) -> dict:
    plan, grid, seed, qubits, load, cache_dir = args
    try:
        return run_cell(plan, grid, seed, qubits, load, cache_dir)
    except Exception as exc:  # recorded per cell; the plan continues
        log.warning("cell q=%s load=%s seed=%s failed: %s", qubits, load, seed, exc)
        return {
            "seed": seed, "qubits": qubits, "load": load,
            "cell_seed": cell_seed(seed, qubits, load),
            "table_digest": "", "trivial": False, "optimum_index": -1,
            "status": f"error: {type(exc).__name__}: {exc}",
            "records": [], "timings": {},
        }


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(results: list[dict]) -> str:
    rows = []
    for cell in results:
        for rec in cell["records"]:
            for k, (c, a) in enumerate(zip(rec.sample_costs, rec.ars)):
                rows.append([rec.algorithm, rec.qubits, _fmt(rec.load_fraction), rec.seed, rec.s, k,
                             rec.indices[k], _fmt(c), _fmt(a)])
    return _csv(rows, RECORD_FIELDS)


def cells_csv(results: list[dict], threshold: float) -> str:
    rows = []
    for cell in results:
        for rec in cell["records"]:
            rows.append([
                rec.algorithm, rec.qubits, _fmt(rec.load_fraction), rec.seed, rec.s, rec.num_samples,
                _fmt(rec.best_ar), _fmt(rec.mean_ar), _fmt(rec.expected_ar),
                _fmt(rec.success(threshold)), _fmt(rec.exact_success),
            ])
    return _csv(rows, CELL_FIELDS)


def manifest(plan: ExperimentPlan, grid: PowerGrid, results: list[dict]) -> dict:
    return {
        "case_digest": grid.digest(),
        "plan": plan.to_dict(),
        "seeds": plan.seeds,
        "tool_version": __version__,
        "per_cell": [
            {
                "qubits": c["qubits"],
                "load": c["load"],
                "seed": c["seed"],
                "cell_seed": c["cell_seed"],
                "table_digest": c["table_digest"],
                "optimum_index": c["optimum_index"],
                "trivial": c["trivial"],
                "status": c["status"],
            }
            for c in results
        ],
    }


def run_plan(
    plan: ExperimentPlan,
    output_dir: str | Path,
    cache_dir: str | Path | None = None,
    workers: int = 1,
    figures: bool = True,
) -> dict:
    """Run all cells, write records, manifest and derived report files.

    Returns the manifest.  Failed cells carry an ``error: ...`` status.
    """
    from .report import write_report

    plan.validate()
    grid = load_case(plan.case)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cache_dir) if cache_dir is not None else out / "tables"
    cache.mkdir(parents=True, exist_ok=True)

    jobs = [(plan, grid, seed, q, f, cache) for seed, q, f in plan.cells()]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell_safe, jobs))
    else:
        results = [_run_cell_safe(j) for j in jobs]

    write_atomic(out / "records.csv", records_csv(results))
    write_atomic(out / "cells.csv", cells_csv(results, plan.threshold))
    man = manifest(plan, grid, results)
    write_atomic(out / "manifest.json", json.dumps(man, indent=1) + "\n")
    timing_rows = [[c["qubits"], _fmt(c["load"]), c["seed"], k, f"{v:.6f}"]
                   for c in results for k, v in c["timings"].items()]
    write_atomic(out / "timings.csv", _csv(timing_rows, ["qubits", "load", "seed", "stage", "seconds"]))
    write_report(out, figures=figures)
    return man
