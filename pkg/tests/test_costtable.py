import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qusobench.costtable import (
    HEADER_SIZE,
    StaleCacheError,
    TableCapacityError,
    TableFormatError,
    build_table,
    load_table,
    save_table,
    table_from_costs,
)
from qusobench.dcflow import solve_flow, solve_flow_dense_oracle
from qusobench.grid import generate_scenario

from conftest import hand_scenario, random_scenario


def test_one_generator_endpoints():
    t = table_from_costs([4.0, 2.0])
    assert t.normalized.tolist() == [1.0, 0.0]
    assert (t.min_index, t.max_index) == (1, 0)
    assert not t.trivial


def test_degenerate_table():
    t = table_from_costs([3.0, 3.0, 3.0, 3.0])
    assert t.normalized.tolist() == [0.0] * 4
    assert t.trivial


def test_triangle_table(triangle):
    # one generator at bus 1 and a unit load at bus 2, slack at bus 3
    s = hand_scenario(triangle, [1], [0.0, 1.0, 0.0])
    t = build_table(s)
    for i in (0, 1):
        assert t.raw[i] == pytest.approx(solve_flow_dense_oracle(s, i).cost, rel=1e-12)
    assert t.raw[1] == pytest.approx(4 / 3, rel=1e-12)
    # dense oracle: load served from slack gives flows (1/3, -1/3, -2/3), also 4/3
    assert t.raw[0] == pytest.approx(4 / 3, rel=1e-12)
    assert t.trivial


def test_power_of_two_required():
    with pytest.raises(ValueError):
        table_from_costs([1.0, 2.0, 3.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, max_buses=30, max_generators=6)
    t = build_table(s)
    for i in range(len(t)):
        ref = solve_flow_dense_oracle(s, i).cost
        assert t.raw[i] == pytest.approx(ref, rel=1e-9, abs=1e-9 * abs(ref) + 1e-12)


def test_matches_solve_flow_ieee57_m12(grid57):
    s = generate_scenario(grid57, 20, 1000.0, 0.6, 15).restrict(12)
    t = build_table(s)
    rng = np.random.default_rng(0)
    for i in rng.integers(0, 4096, 40):
        assert t.raw[i] == pytest.approx(solve_flow(s, int(i)).cost, rel=1e-9)
        assert t.raw[i] == pytest.approx(solve_flow_dense_oracle(s, int(i)).cost, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 8).flatmap(lambda m: st.lists(st.floats(-1e6, 1e6), min_size=1 << m, max_size=1 << m)))
def test_rescale_preserves_order(raw):
    t = table_from_costs(raw)
    raw = np.array(raw)
    assert np.all((t.normalized >= 0) & (t.normalized <= 1))
    assert t.raw[np.argmin(t.normalized)] == raw.min()
    assert raw[t.min_index] == raw.min() and raw[t.max_index] == raw.max()
    if not t.trivial:
        assert t.normalized[t.min_index] == 0.0 and t.normalized[t.max_index] == 1.0


def test_parallel_and_serial_identical(grid57):
    s = generate_scenario(grid57, 14, 1000.0, 0.8, 5, random_costs=True)
    a = build_table(s, workers=1, chunk_bits=14)
    b = build_table(s, workers=4, chunk_bits=6)
    c = build_table(s, workers=3, chunk_bits=9)
    assert a.identical(b) and a.identical(c)


def test_capacity_error(grid57):
    s = generate_scenario(grid57, 10, 1000.0, 0.8, 5)
    with pytest.raises(TableCapacityError, match="2\\^10"):
        build_table(s, max_qubits=8)


def test_penalty_table(triangle):
    s = hand_scenario(triangle, [1, 2], [0.0, 0.0, 1.0], capacity=1.0, penalty=2.0)
    t = build_table(s)
    for i in range(4):
        assert t.raw[i] == pytest.approx(solve_flow_dense_oracle(s, i).cost, rel=1e-12)


def test_save_load_roundtrip(tmp_path, grid57):
    s = generate_scenario(grid57, 8, 1000.0, 0.5, 3)
    t = build_table(s)
    path = tmp_path / "t.bin"
    save_table(t, path)
    assert load_table(path, s).identical(t)
    assert path.stat().st_size == HEADER_SIZE + 2 * 8 * 2**8


def test_file_size_m20(tmp_path):
    t = table_from_costs(np.arange(2**20, dtype=float))
    save_table(t, tmp_path / "big.bin")
    assert (tmp_path / "big.bin").stat().st_size == HEADER_SIZE + 2 * 8 * 2**20


def test_stale_digest(tmp_path, grid57):
    s = generate_scenario(grid57, 6, 1000.0, 0.5, 3)
    save_table(build_table(s), tmp_path / "t.bin")
    other = generate_scenario(grid57, 6, 1000.0, 0.6, 3)
    with pytest.raises(StaleCacheError):
        load_table(tmp_path / "t.bin", other)


def test_truncated(tmp_path, grid57):
    s = generate_scenario(grid57, 6, 1000.0, 0.5, 3)
    path = tmp_path / "t.bin"
    save_table(build_table(s), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(TableFormatError):
        load_table(path)
    path.write_bytes(blob[:10])
    with pytest.raises(TableFormatError):
        load_table(path)
    path.write_bytes(b"X" * len(blob))
    with pytest.raises(TableFormatError):
        load_table(path)
