import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qusobench.metrics import (
    BenchRecord,
    DomainError,
    aggregate,
    approximation_ratio,
    fit_tts_slope,
    heatmap_difference,
    success_probability,
    t_halfwidth,
    time_to_solution,
    tts_candidate,
)

# t_{0.975, 9}, frozen from a 30-digit root of the regularized incomplete beta
T975_9 = 2.2621571627982055


def test_approximation_ratio():
    assert approximation_ratio(0.0) == 1.0
    assert approximation_ratio(1.0) == 0.0
    assert approximation_ratio(0.25) == 0.75
    for bad in (-0.1, 1.5):
        with pytest.raises(DomainError):
            approximation_ratio(bad)


def test_success_probability():
    assert success_probability([1.0, 0.96, 0.5, 0.94], 0.95) == 0.5
    with pytest.raises(ValueError):
        success_probability([], 0.95)


def test_tts_values():
    assert tts_candidate(20, 0.5) == pytest.approx(20 * (math.log(0.01) / math.log(0.5) + 1))
    assert tts_candidate(20, 0.5) == pytest.approx(152.877123795, rel=1e-9)
    assert tts_candidate(7, 1.0) == 7.0
    assert tts_candidate(7, 0.0) == math.inf
    assert time_to_solution({10: 0.0, 20: 0.99}) == pytest.approx(40.0)
    assert time_to_solution([(10, 0.0), (20, 0.0)]) == math.inf
    with pytest.raises(ValueError):
        time_to_solution([])
    with pytest.raises(DomainError):
        tts_candidate(3, 1.2)


@given(st.integers(1, 10**6), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_tts_monotone_in_success(s, p1, p2):
    lo, hi = sorted((p1, p2))
    assert tts_candidate(s, hi) <= tts_candidate(s, lo)
    assert tts_candidate(s, hi) >= s


def test_aggregate_identical_values():
    (a,) = aggregate([0.7] * 5, key=lambda _: "x", value=lambda v: v)
    assert (a.n, a.mean, a.ci95, a.min, a.max) == (5, 0.7, 0.0, 0.7, 0.7)
    (single,) = aggregate([0.3], key=lambda _: 1, value=lambda v: v)
    assert single.degenerate and single.ci95 == 0.0


def test_aggregate_two_values():
    (a,) = aggregate([0.0, 1.0], key=lambda _: 0, value=lambda v: v)
    assert a.mean == 0.5
    # t_{0.975,1} = 12.7062..., sd = 1/sqrt2, n = 2
    assert a.ci95 == pytest.approx(12.706204736174698 * (1 / math.sqrt(2)) / math.sqrt(2), rel=1e-12)


def test_aggregate_ten_values():
    v = [0.91, 0.93, 0.95, 0.9, 0.97, 0.99, 0.92, 0.96, 0.94, 0.98]
    mean = sum(v) / 10
    sd = math.sqrt(sum((x - mean) ** 2 for x in v) / 9)
    (a,) = aggregate(v, key=lambda _: 0, value=lambda x: x)
    assert a.mean == pytest.approx(mean, rel=1e-14)
    assert a.ci95 == pytest.approx(T975_9 * sd / math.sqrt(10), rel=1e-12)
    assert t_halfwidth(v) == a.ci95


def test_aggregate_groups_sorted():
    items = [(2, 1.0), (1, 0.0), (2, 3.0)]
    out = aggregate(items, key=lambda it: it[0], value=lambda it: it[1])
    assert [g.key for g in out] == [(1,), (2,)]
    assert out[1].mean == 2.0
    with pytest.raises(ValueError):
        aggregate([], key=lambda x: x, value=lambda x: x)


@given(st.dictionaries(st.tuples(st.integers(0, 5), st.integers(0, 5)), st.floats(0, 1), max_size=20))
def test_heatmap_antisymmetric(a):
    b = {k: 1.0 - v for k, v in a.items()}
    ab, ba = heatmap_difference(a, b), heatmap_difference(b, a)
    assert ab.keys() == ba.keys() == a.keys()
    assert all(ab[k] == -ba[k] for k in ab)


def test_fit_slopes():
    fit = fit_tts_slope({q: 2.0**q for q in range(4, 13)})
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-10)
    assert fit_tts_slope({4: 8.0, 6: 8.0, 9: 8.0}).slope == pytest.approx(0.0, abs=1e-12)
    fit = fit_tts_slope({4: 16.0, 5: math.inf, 6: 64.0})
    assert fit.excluded == (5,) and fit.slope == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_tts_slope({4: 2.0, 5: math.inf})


def test_bench_record():
    r = BenchRecord("qaoa", 4, 0.5, 15, 8, [0.0, 0.1, 0.02], expected_cost=0.2, exact_success=0.4)
    assert r.best_ar == 1.0
    assert r.mean_ar == pytest.approx(np.mean([1.0, 0.9, 0.98]))
    assert r.expected_ar == pytest.approx(0.8)
    assert r.success(0.95) == pytest.approx(2 / 3)
    assert r.num_samples == 3
    with pytest.raises(DomainError):
        BenchRecord("sa", 4, 0.5, 15, 10, [1.2])
