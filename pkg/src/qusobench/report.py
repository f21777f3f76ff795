"""Derived tables recomputed from ``records.csv``, ``cells.csv`` and the manifest.

Everything written here is a pure function of those three files, so a report
can be regenerated at any time with ``qusobench report <dir>``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import BenchRecord, aggregate, fit_tts_slope, heatmap_difference, time_to_solution

__all__ = ["load_records", "write_report", "Report"]


def _float(v: str) -> float | None:
    return None if v == "" else float(v)


def load_records(out: Path) -> tuple[dict, list[BenchRecord]]:
    """Rebuild :class:`BenchRecord` objects from a result directory."""
    man = json.loads((out / "manifest.json").read_text())
    samples: dict[tuple, list] = defaultdict(list)
    with open(out / "records.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["algorithm"], int(row["qubits"]), float(row["load"]), int(row["seed"]), int(row["s"]))
            samples[key].append((int(row["sample_index"]), int(row["index"]), float(row["normalized_cost"])))
    exact: dict[tuple, tuple] = {}
    with open(out / "cells.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["algorithm"], int(row["qubits"]), float(row["load"]), int(row["seed"]), int(row["s"]))
            exp_ar = _float(row["expected_ar"])
            exact[key] = (None if exp_ar is None else 1.0 - exp_ar, _float(row["exact_p_success"]))
    records = []
    for key, rows in samples.items():
        rows.sort()
        expected_cost, exact_success = exact.get(key, (None, None))
        records.append(
            BenchRecord(
                *key,
                sample_costs=[c for _, _, c in rows],
                expected_cost=expected_cost,
                exact_success=exact_success,
                indices=[i for _, i, _ in rows],
            )
        )
    return man, records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _pick(value: int, available: list[int]) -> int:
    return value if value in available else max(available)


@dataclass
class Report:
    plan: dict
    records: list[BenchRecord]

    @property
    def threshold(self) -> float:
        return self.plan["threshold"]

    def by(self, algorithm: str) -> list[BenchRecord]:
        return [r for r in self.records if r.algorithm == algorithm]

    def lineplot(self) -> list[list]:
        """Per (algorithm, s, load): AR statistics over all qubit counts and seeds."""
        rows = []
        reductions = {
            "best": lambda r: r.best_ar,
            "mean": lambda r: r.mean_ar,
            "expected": lambda r: r.expected_ar,
        }
        for name, fn in reductions.items():
            recs = [r for r in self.records if fn(r) is not None]
            if not recs:
                continue
            for a in aggregate(recs, lambda r: (r.algorithm, r.s, r.load_fraction), fn):
                alg, s, load = a.key
                rows.append([alg, s, load, name, a.n, a.mean, a.ci95, a.min, a.max, int(a.degenerate)])
        rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
        return rows

    def scaling(self) -> list[list]:
        """Per (algorithm, s, load) at the largest qubit count (mean over seeds)."""
        qmax = max(r.qubits for r in self.records)
        recs = [r for r in self.records if r.qubits == qmax]
        best = {a.key: a for a in aggregate(recs, lambda r: (r.algorithm, r.s, r.load_fraction), lambda r: r.best_ar)}
        mean = {a.key: a for a in aggregate(recs, lambda r: (r.algorithm, r.s, r.load_fraction), lambda r: r.mean_ar)}
        rows = []
        for key in sorted(best):
            alg, s, load = key
            exp = [r.expected_ar for r in recs if (r.algorithm, r.s, r.load_fraction) == key and r.expected_ar is not None]
            rows.append([alg, qmax, s, load, best[key].mean, mean[key].mean, float(np.mean(exp)) if exp else None])
        return rows

    def heatmap(self, algorithm: str, s: int) -> dict[tuple[int, float], float]:
        """(qubits, load) -> mean over seeds of best-of-samples AR."""
        recs = [r for r in self.by(algorithm) if r.s == s]
        return {a.key: a.mean for a in aggregate(recs, lambda r: (r.qubits, r.load_fraction), lambda r: r.best_ar)}

    def heatmap_pair(self) -> tuple[int, int]:
        layers = sorted({r.s for r in self.by("qaoa")})
        temps = sorted({r.s for r in self.by("sa")})
        return _pick(self.plan["heatmap_layers"], layers), _pick(self.plan["heatmap_temperature_steps"], temps)

    def tts_instances(self, exact: bool = False) -> list[list]:
        """TTS per (algorithm, qubits, load, seed) over all resource levels."""
        groups: dict[tuple, list[BenchRecord]] = defaultdict(list)
        for r in self.records:
            groups[(r.algorithm, r.qubits, r.load_fraction, r.seed)].append(r)
        rows = []
        for key in sorted(groups):
            recs = groups[key]
            if exact and key[0] != "qaoa":
                continue
            pts = [(r.s, r.exact_success if exact else r.success(self.threshold)) for r in recs]
            rows.append([*key, time_to_solution(pts)])
        return rows

    def tts_per_qubit(self, instances: list[list]) -> dict[str, dict[int, tuple[float, int, int]]]:
        """algorithm -> qubits -> (mean finite TTS over loads/seeds, n finite, n unattained)."""
        acc: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
        for alg, q, _load, _seed, tts in instances:
            acc[alg][q].append(tts)
        out: dict[str, dict[int, tuple[float, int, int]]] = {}
        for alg, per_q in acc.items():
            out[alg] = {}
            for q, vals in sorted(per_q.items()):
                finite = [v for v in vals if math.isfinite(v)]
                mean = float(np.mean(finite)) if finite else math.inf
                out[alg][q] = (mean, len(finite), len(vals) - len(finite))
        return out


def write_report(out: str | Path, figures: bool = True) -> dict:
    """Write every derived CSV and ``summary.md``; optionally render figures."""
    from .bench import write_atomic

    out = Path(out)
    man, records = load_records(out)
    rep = Report(man["plan"], records)
    if not records:
        # every cell failed; derived tables would be empty, so only say so
        failed = sum(1 for c in man.get("per_cell", []) if c["status"] != "ok")
        write_atomic(out / "summary.md", f"# Benchmark summary ({man['plan']['case']})\n\n"
                     f"No successful cells ({failed} failed); see manifest.json.\n")
        return {"fits": {}, "files": ["summary.md"]}
    files = {}

    files["lineplot.csv"] = _csv(
        ["algorithm", "s", "load", "reduction", "n", "mean_ar", "ci95", "min_ar", "max_ar", "degenerate"],
        rep.lineplot(),
    )
    files["scaling.csv"] = _csv(
        ["algorithm", "qubits", "s", "load", "best_ar", "mean_ar", "expected_ar"], rep.scaling()
    )

    heat_rows = []
    for alg in ("qaoa", "sa"):
        for s in sorted({r.s for r in rep.by(alg)}):
            for (q, load), v in sorted(rep.heatmap(alg, s).items()):
                heat_rows.append([alg, s, q, load, v])
    files["heatmap.csv"] = _csv(["algorithm", "s", "qubits", "load", "ar"], heat_rows)

    p_sel, t_sel = rep.heatmap_pair()
    hq, hs = rep.heatmap("qaoa", p_sel), rep.heatmap("sa", t_sel)
    diff = heatmap_difference(hq, hs)
    files["heatmap_diff.csv"] = _csv(
        ["qubits", "load", "qaoa_layers", "sa_temperature_steps", "qaoa_ar", "sa_ar", "difference"],
        [[q, load, p_sel, t_sel, hq[(q, load)], hs[(q, load)], d] for (q, load), d in diff.items()],
    )

    inst = rep.tts_instances()
    inst_exact = rep.tts_instances(exact=True)
    files["tts_instances.csv"] = _csv(["algorithm", "qubits", "load", "seed", "tts"], inst)
    per_q = rep.tts_per_qubit(inst)
    tts_rows = [[alg, q, *vals] for alg in sorted(per_q) for q, vals in per_q[alg].items()]
    exact_q = rep.tts_per_qubit([["qaoa_exact", *r[1:]] for r in inst_exact])
    tts_rows += [[alg, q, *vals] for alg in sorted(exact_q) for q, vals in exact_q[alg].items()]
    files["tts.csv"] = _csv(["algorithm", "qubits", "mean_tts", "n_finite", "n_unattained"], tts_rows)

    fits = {}
    fit_rows = []
    for alg, series in {**per_q, **exact_q}.items():
        try:
            fit = fit_tts_slope({q: v[0] for q, v in series.items()})
        except ValueError as exc:
            fit_rows.append([alg, None, None, 0, "", str(exc)])
            continue
        fits[alg] = fit
        fit_rows.append([alg, fit.slope, fit.intercept, len(fit.points), " ".join(map(str, fit.excluded)), ""])
    files["tts_fit.csv"] = _csv(["algorithm", "slope", "intercept", "n_points", "excluded_qubits", "note"], fit_rows)

    files["summary.md"] = _summary(rep, per_q, fits, diff, p_sel, t_sel)

    for name, text in files.items():
        write_atomic(out / name, text)

    if figures:
        from .plots import render_all

        render_all(out)
    return {"fits": fits, "files": sorted(files)}


def _summary(rep: Report, per_q, fits, diff, p_sel, t_sel) -> str:
    lines = [f"# Benchmark summary ({rep.plan['case']})", ""]
    lines.append(f"threshold: {rep.threshold}, samples: QAOA {rep.plan['qaoa_samples']}, SA {rep.plan['sa_samples']}")
    lines.append("")
    lines.append("## Mean best-of-samples AR at the largest resource level")
    for alg in ("qaoa", "sa"):
        recs = rep.by(alg)
        if not recs:
            continue
        smax = max(r.s for r in recs)
        vals = [r.best_ar for r in recs if r.s == smax]
        lines.append(f"- {alg} s={smax}: {np.mean(vals):.4f} (min {min(vals):.4f})")
    exp = [r.expected_ar for r in rep.by("qaoa") if r.expected_ar is not None]
    if exp:
        smax = max(r.s for r in rep.by("qaoa"))
        ex = [r.expected_ar for r in rep.by("qaoa") if r.s == smax]
        lines.append(f"- qaoa s={smax} expected AR: {np.mean(ex):.4f} (min {min(ex):.4f})")
    lines.append("")
    if diff:
        d = np.array(list(diff.values()))
        lines.append(f"## Heatmap difference (QAOA p={p_sel} minus SA {t_sel} steps)")
        lines.append(f"- mean {d.mean():+.4f}, max {d.max():+.4f}, min {d.min():+.4f}")
        lines.append("")
    lines.append("## Time to solution")
    for alg, fit in fits.items():
        lines.append(f"- {alg}: log2(TTS) slope {fit.slope:+.4f} per qubit, intercept {fit.intercept:+.3f}"
                     + (f", excluded qubits {list(fit.excluded)}" if fit.excluded else ""))
    if "qaoa" in per_q and "sa" in per_q:
        common = sorted(set(per_q["qaoa"]) & set(per_q["sa"]))
        wins = sum(1 for q in common if per_q["qaoa"][q][0] <= per_q["sa"][q][0])
        lines.append(f"- QAOA TTS <= SA TTS for {wins} of {len(common)} qubit counts")
        if "qaoa" in fits and "sa" in fits:
            lines.append(f"- slopes finite: {math.isfinite(fits['qaoa'].slope) and math.isfinite(fits['sa'].slope)}")
    lines.append("")
    return "\n".join(lines)
