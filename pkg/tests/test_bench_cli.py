import csv
import json

import pytest

from qusobench.bench import ExperimentPlan, PlanError, run_plan
from qusobench.cli import _ints, main
from qusobench.costtable import load_table

OUTPUTS = [
    "records.csv", "cells.csv", "manifest.json", "timings.csv", "lineplot.csv", "scaling.csv",
    "heatmap.csv", "heatmap_diff.csv", "tts_instances.csv", "tts.csv", "tts_fit.csv", "summary.md",
]


def small_plan(**kw):
    base = dict(qubits=[4, 5, 6], loads=[0.3, 0.8], layers=[1, 8, 32], temperature_steps=[10, 20],
                heatmap_layers=8, heatmap_temperature_steps=10)
    base.update(kw)
    return ExperimentPlan(**base)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    man = run_plan(small_plan(), out)
    return out, man


def test_all_outputs_written(small_run):
    out, man = small_run
    for name in OUTPUTS:
        assert (out / name).stat().st_size > 0, name
    for fig in ("ar_vs_load.png", "ar_vs_resources.png", "heatmaps.png", "heatmap_diff.png", "tts.png"):
        assert (out / "figures" / fig).exists(), fig
    assert all(c["status"] == "ok" for c in man["per_cell"])
    assert len(man["per_cell"]) == 6
    rows = list(csv.DictReader((out / "records.csv").open()))
    # one row per sample: 6 instances, 3 QAOA layer counts and 2 SA step counts, 10 samples each
    assert len(rows) == 6 * (3 + 2) * 10
    assert {r["algorithm"] for r in rows} == {"qaoa", "sa"}


def test_tables_cached_and_match_scenario(small_run):
    out, _ = small_run
    tables = sorted((out / "tables").glob("*.bin"))
    assert len(tables) == 6
    assert load_table(tables[0]).num_qubits in (4, 5, 6)


def test_byte_identical_reruns(small_run, tmp_path):
    out, _ = small_run
    run_plan(small_plan(), tmp_path, figures=False)
    for name in ("records.csv", "cells.csv", "manifest.json", "tts.csv", "lineplot.csv"):
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_stale_cache_marks_cells(small_run, tmp_path):
    out, _ = small_run
    man = run_plan(small_plan(random_costs=True), tmp_path, cache_dir=out / "tables", figures=False)
    assert all(c["status"].startswith("error: ") for c in man["per_cell"])
    assert "different scenario" in man["per_cell"][0]["status"]
    assert (tmp_path / "summary.md").read_text().count("No successful cells") == 1


@pytest.mark.parametrize(
    "kw", [{"qubits": []}, {"qubits": [21]}, {"loads": [0.0]}, {"layers": [0]}, {"threshold": 1.5}]
)
def test_plan_validation(kw):
    with pytest.raises(PlanError):
        small_plan(**kw).validate()


def test_plan_roundtrip():
    p = small_plan(seeds=[1, 2])
    assert ExperimentPlan.from_dict(json.loads(json.dumps(p.to_dict()))) == p
    assert len(p.cells()) == 2 * 3 * 2


def test_int_ranges():
    assert _ints("4:7") == [4, 5, 6, 7]
    assert _ints("10:30:10") == [10, 20, 30]
    assert _ints("pow2:0:3") == [1, 2, 4, 8]
    assert _ints("3,9") == [3, 9]


def test_cli_parse(capsys, tmp_path):
    assert main(["parse", "--json", str(tmp_path / "g.json")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert (info["buses"], info["lines"], info["reference_bus"]) == (57, 78, 57)
    assert len(json.loads((tmp_path / "g.json").read_text())["buses"]) == 57


def test_cli_precompute_qaoa_sa(capsys, tmp_path):
    table = tmp_path / "t.bin"
    assert main(["precompute", "--qubits", "6", "--load", "0.4", "--out", str(table)]) == 0
    pre = json.loads(capsys.readouterr().out)
    assert pre["qubits"] == 6
    assert main(["qaoa", "--table", str(table), "--layers", "16", "--dump", str(tmp_path / "d.csv")]) == 0
    q = json.loads(capsys.readouterr().out)
    assert 0.0 <= q["expected_ar"] <= 1.0 and len(q["samples"]) == 10
    assert (tmp_path / "d.csv").read_text().startswith("bitstring,")
    assert main(["sa", "--table", str(table), "--temperature-steps", "20", "--trace", str(tmp_path / "tr.csv")]) == 0
    s = json.loads(capsys.readouterr().out)
    assert len(s["best_ar"]) == 10
    assert len((tmp_path / "tr.csv").read_text().splitlines()) == 1 + 10 * 20


def test_cli_errors(capsys, tmp_path):
    assert main(["parse", str(tmp_path / "missing.txt")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error"
    assert main(["precompute", "--qubits", "10", "--max-qubits", "8", "--out", str(tmp_path / "x.bin")]) == 2
    assert "2^10" in json.loads(capsys.readouterr().err)["message"]


def test_cli_bench_env_and_report(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("QUSOBENCH_OUTPUT_DIR", str(tmp_path / "envout"))
    args = ["bench", "--qubits", "4:5", "--loads", "0.5,1.0", "--layers", "pow2:0:2",
            "--temperature-steps", "10:20:10", "--heatmap-layers", "4", "--heatmap-temperature-steps", "10",
            "--no-figures"]
    assert main(args) == 0
    out = tmp_path / "envout"
    assert json.loads(capsys.readouterr().out)["cells"] == 4
    first = (out / "tts.csv").read_bytes()
    (out / "tts.csv").unlink()
    assert main(["report", str(out), "--no-figures"]) == 0
    assert (out / "tts.csv").read_bytes() == first
    # re-run from the manifest into another directory
    assert main(["bench", "--plan", str(out / "manifest.json"), "--output-dir", str(tmp_path / "again"),
                 "--no-figures"]) == 0
    assert (tmp_path / "again" / "records.csv").read_bytes() == (out / "records.csv").read_bytes()


def test_cli_bench_partial_failure(capsys, tmp_path):
    base = ["--qubits", "4", "--loads", "0.5", "--layers", "1", "--temperature-steps", "10",
            "--heatmap-layers", "1", "--heatmap-temperature-steps", "10", "--no-figures",
            "--cache-dir", str(tmp_path / "cache")]
    assert main(["bench", *base, "--output-dir", str(tmp_path / "a")]) == 0
    capsys.readouterr()
    assert main(["bench", *base, "--random-costs", "--output-dir", str(tmp_path / "b")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "partial" and len(err["failed_cells"]) == 1


def test_worker_count_does_not_change_outputs(small_run, tmp_path):
    out, _ = small_run
    run_plan(small_plan(), tmp_path, cache_dir=tmp_path / "cache", workers=2, figures=False)
    for name in ("records.csv", "cells.csv", "manifest.json"):
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name
