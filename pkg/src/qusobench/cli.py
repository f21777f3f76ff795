"""Command-line entry point: ``qusobench <subcommand>``.

Subcommands: ``parse``, ``precompute``, ``qaoa``, ``sa``, ``bench``, ``report``.
The output directory of ``bench`` may be set with ``QUSOBENCH_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .anneal import SaConfig, run_sa, trace_csv
from .bench import ExperimentPlan, load_case, run_plan, write_atomic
from .costtable import DEFAULT_MAX_QUBITS, build_table, load_table, save_table
from .grid import generate_scenario, scenario_to_json
from .metrics import approximation_ratio
from .qaoa import distribution_csv, distribution_json, make_schedule, run_qaoa, sample_outcomes
from .report import write_report

OUTPUT_ENV = "QUSOBENCH_OUTPUT_DIR"


def _ints(text: str) -> list[int]:
    """Parse ``4,6,8`` or ``4:20`` (inclusive) or ``pow2:0:10``."""
    if text.startswith("pow2:"):
        lo, hi = map(int, text[5:].split(":"))
        return [2**k for k in range(lo, hi + 1)]
    if ":" in text:
        parts = list(map(int, text.split(":")))
        lo, hi, step = (parts + [1])[:3]
        return list(range(lo, hi + 1, step))
    return [int(t) for t in text.split(",") if t]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", default="ieee57", help="CDF case file or 'ieee57' (bundled)")
    p.add_argument("--table", type=Path, help="use a precomputed cost table instead of building one")
    p.add_argument("--master-generators", type=int, default=20)
    p.add_argument("--qubits", type=int, default=12, help="generators kept from the master assignment")
    p.add_argument("--load", type=float, default=0.5, help="load as a fraction of total capacity")
    p.add_argument("--capacity", type=float, default=1000.0, help="total generating capacity in MW")
    p.add_argument("--seed", type=int, default=15)
    p.add_argument("--random-costs", action="store_true", help="sample line costs uniformly in [0.5, 1.5]")
    p.add_argument("--penalty", type=float, default=0.0, help="weight of the squared power imbalance")


def _scenario(args):
    grid = load_case(args.case)
    master = generate_scenario(grid, args.master_generators, args.capacity, args.load, args.seed,
                               random_costs=args.random_costs, penalty=args.penalty)
    return master.restrict(args.qubits)


def _table(args):
    if args.table is not None:
        return load_table(args.table)
    return build_table(_scenario(args))


def cmd_parse(args) -> int:
    grid = load_case(args.case)
    d = grid.degrees()
    info = {
        "name": grid.name,
        "buses": grid.num_buses,
        "lines": grid.num_lines,
        "reference_bus": grid.reference_bus,
        "max_degree": int(d.max()),
        "digest": grid.digest(),
    }
    print(json.dumps(info))
    if args.json:
        write_atomic(args.json, json.dumps(grid.to_dict(), indent=1) + "\n")
    return 0


def cmd_precompute(args) -> int:
    scenario = _scenario(args)
    table = build_table(scenario, max_qubits=args.max_qubits, workers=args.workers)
    save_table(table, args.out)
    if args.scenario_json:
        write_atomic(args.scenario_json, scenario_to_json(scenario) + "\n")
    print(json.dumps({
        "table": str(args.out),
        "qubits": table.num_qubits,
        "digest": table.scenario_digest,
        "min_index": table.min_index,
        "min_cost": float(table.raw[table.min_index]),
        "max_cost": float(table.raw[table.max_index]),
        "trivial": bool(table.trivial),
    }))
    return 0


def cmd_qaoa(args) -> int:
    table = _table(args)
    dist = run_qaoa(table, make_schedule(args.layers))
    idx = sample_outcomes(dist, args.samples, args.seed, stream=args.layers)
    ars = [approximation_ratio(c) for c in table.normalized[idx]]
    good = (1.0 - table.normalized) >= args.threshold
    print(json.dumps({
        "layers": args.layers,
        "expected_ar": approximation_ratio(min(max(float(dist @ table.normalized), 0.0), 1.0)),
        "p_optimum": float(dist[table.min_index]),
        "exact_p_success": float(dist[good].sum()),
        "samples": [int(i) for i in idx],
        "best_sample_ar": max(ars),
    }))
    if args.dump:
        text = distribution_json(dist, table, args.min_probability) if args.dump.suffix == ".json" \
            else distribution_csv(dist, table, args.min_probability)
        write_atomic(args.dump, text)
    return 0


def cmd_sa(args) -> int:
    table = _table(args)
    cfg = SaConfig(
        temperature_steps=args.temperature_steps,
        inner_iterations_per_step=args.inner,
        T0=args.T0,
        alpha=args.alpha,
        k=args.k,
        seed=args.seed,
        num_samples=args.samples,
    )
    res = run_sa(table, cfg)
    print(json.dumps({
        "config": cfg.to_dict(),
        "best_index": res.best_index.tolist(),
        "best_ar": [approximation_ratio(c) for c in res.best_cost],
        "optimum_found": bool(np.any(res.best_index == table.min_index)),
    }))
    if args.trace:
        write_atomic(args.trace, trace_csv(res))
    return 0


def _plan_from_args(args) -> ExperimentPlan:
    if args.plan:
        d = json.loads(Path(args.plan).read_text())
        return ExperimentPlan.from_dict(d.get("plan", d))
    return ExperimentPlan(
        case=args.case,
        qubits=args.qubits,
        loads=args.loads,
        layers=args.layers,
        temperature_steps=args.temperature_steps,
        seeds=args.seeds,
        master_generators=args.master_generators,
        total_capacity=args.capacity,
        threshold=args.threshold,
        qaoa_samples=args.qaoa_samples,
        sa_samples=args.sa_samples,
        sa_T0=args.T0,
        sa_alpha=args.alpha,
        sa_k=args.k,
        sa_inner=args.inner,
        random_costs=args.random_costs,
        penalty=args.penalty,
        heatmap_layers=args.heatmap_layers,
        heatmap_temperature_steps=args.heatmap_temperature_steps,
        max_qubits=args.max_qubits,
    )


def cmd_bench(args) -> int:
    plan = _plan_from_args(args)
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "results"
    man = run_plan(plan, out, cache_dir=args.cache_dir, workers=args.workers, figures=not args.no_figures)
    failed = [c for c in man["per_cell"] if c["status"] != "ok"]
    if failed:
        print(json.dumps({"status": "partial", "failed_cells": failed}), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "output_dir": str(out), "cells": len(man["per_cell"])}))
    return 0


def cmd_report(args) -> int:
    res = write_report(args.directory, figures=not args.no_figures)
    print(json.dumps({
        "files": res["files"],
        "tts_slopes": {alg: fit.slope for alg, fit in res["fits"].items()},
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qusobench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="validate a CDF case file")
    p.add_argument("case", nargs="?", default="ieee57")
    p.add_argument("--json", type=Path, help="write the canonical grid JSON here")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("precompute", help="build and save a cost table")
    _add_scenario_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scenario-json", type=Path)
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("qaoa", help="run the ramp-schedule QAOA on one instance")
    _add_scenario_args(p)
    p.add_argument("--layers", type=int, default=256)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--dump", type=Path, help="write the distribution (.csv or .json)")
    p.add_argument("--min-probability", type=float, default=0.0)
    p.set_defaults(func=cmd_qaoa)

    p = sub.add_parser("sa", help="run simulated annealing on one instance")
    _add_scenario_args(p)
    p.add_argument("--temperature-steps", type=int, default=80)
    p.add_argument("--inner", type=int, help="proposals per temperature step (default: qubits)")
    p.add_argument("--T0", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--trace", type=Path, help="write the step trace CSV here")
    p.set_defaults(func=cmd_sa)

    d = ExperimentPlan()
    p = sub.add_parser("bench", help="run an experiment plan")
    p.add_argument("--plan", type=Path, help="plan JSON or manifest.json to re-run")
    p.add_argument("--case", default=d.case)
    p.add_argument("--qubits", type=_ints, default=d.qubits, help="e.g. 4:20 or 4,8,12")
    p.add_argument("--loads", type=_floats, default=d.loads)
    p.add_argument("--layers", type=_ints, default=d.layers, help="e.g. pow2:0:10")
    p.add_argument("--temperature-steps", type=_ints, default=d.temperature_steps, help="e.g. 10:80:10")
    p.add_argument("--seeds", type=_ints, default=d.seeds)
    p.add_argument("--master-generators", type=int, default=d.master_generators)
    p.add_argument("--capacity", type=float, default=d.total_capacity)
    p.add_argument("--threshold", type=float, default=d.threshold)
    p.add_argument("--qaoa-samples", type=int, default=d.qaoa_samples)
    p.add_argument("--sa-samples", type=int, default=d.sa_samples)
    p.add_argument("--T0", type=float, default=d.sa_T0)
    p.add_argument("--alpha", type=float, default=d.sa_alpha)
    p.add_argument("--k", type=float, default=d.sa_k)
    p.add_argument("--inner", type=int, default=d.sa_inner)
    p.add_argument("--random-costs", action="store_true")
    p.add_argument("--penalty", type=float, default=d.penalty)
    p.add_argument("--heatmap-layers", type=int, default=d.heatmap_layers)
    p.add_argument("--heatmap-temperature-steps", type=int, default=d.heatmap_temperature_steps)
    p.add_argument("--max-qubits", type=int, default=d.max_qubits)
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="recompute derived tables and figures from records")
    p.add_argument("directory", type=Path)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, MemoryError) as exc:
        print(json.dumps({"status": "error", "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
