import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from topoevo.analysis import (Series, confidence_interval_90, first_zero_crossing, inverse_sqrt_fit, is_concave,
                              mann_kendall, pearson, power_law_fit, rho_curve_fit)
from topoevo.rng import stream

X = np.arange(10.0, 141.0, 5.0)
RHO = np.arange(1.0, 4.01, 0.25)


def test_series_validation():
    with pytest.raises(ValueError):
        Series((1, 2), (1, 2))
    with pytest.raises(ValueError):
        Series((1, 3, 2), (1, 2, 3))
    with pytest.raises(ValueError):
        Series((1, 2, 3), (1, 2))


def test_power_law_examples():
    f = power_law_fit(Series(X, 2 * np.sqrt(X)))
    assert f["beta"] == pytest.approx(0.5) and f["alpha"] == pytest.approx(2) and f.r2 == pytest.approx(1)
    assert power_law_fit(Series(X, 3 * X))["beta"] == pytest.approx(1)
    rng = stream(17)
    noisy = np.sqrt(X) + rng.normal(0, 0.01 * np.sqrt(X))
    assert 0.45 <= power_law_fit(Series(X, noisy))["beta"] <= 0.55
    with pytest.raises(ValueError):
        power_law_fit(Series(X, -X))


def test_inverse_sqrt_examples():
    f = inverse_sqrt_fit(Series(X, 68 + 2790 / np.sqrt(X)))
    assert f["a"] == pytest.approx(68) and f["b"] == pytest.approx(2790) and f.r2 == pytest.approx(1)
    flat = inverse_sqrt_fit(Series(X, np.full_like(X, 4.0)))
    assert flat["b"] == pytest.approx(0, abs=1e-9) and flat["a"] == pytest.approx(4)
    three = inverse_sqrt_fit(Series((1.0, 4.0, 9.0), (3.0, 2.0, 5 / 3)))
    assert three.r2 == pytest.approx(1)
    with pytest.raises(ValueError):
        inverse_sqrt_fit(Series((0.0, 1.0, 2.0), (1.0, 2.0, 3.0)))


def test_rho_fits():
    g = rho_curve_fit(Series(RHO, 0.2 - 0.2 / RHO), "gradual")
    assert g["c0"] == pytest.approx(0.2) and g["c1"] == pytest.approx(-0.2)
    r = rho_curve_fit(Series(RHO, (RHO - 1) / np.sqrt(RHO)), "random")
    assert r.coefficients == pytest.approx((0, 1, -1), abs=1e-9)
    c = rho_curve_fit(Series(RHO, np.full_like(RHO, 0.7)), "random")
    assert c.coefficients == pytest.approx((0.7, 0, 0), abs=1e-9)
    with pytest.raises(ValueError):
        rho_curve_fit(Series(RHO, RHO), "cubic")
    with pytest.raises(ValueError):
        rho_curve_fit(Series((0.5, 1, 2), (1, 2, 3)), "gradual")


def _recount(y):
    return sum(np.sign(y[j] - y[i]) for i in range(len(y)) for j in range(i + 1, len(y)))


def test_mann_kendall_examples():
    up = mann_kendall(list(range(12)))
    assert up.s == 66 and up.trend == "increasing"
    flat = mann_kendall([2.0] * 8)
    assert flat.s == 0 and flat.trend == "none" and flat.p == 1
    y = [5, 3, 8, 8, 1, 9, 4, 4, 7, 2, 6]
    res = mann_kendall(y)
    assert res.s == _recount(y)
    # hand-computed variance with ties (two pairs of 8 and 4)
    n = len(y)
    var = (n * (n - 1) * (2 * n + 5) - 2 * (2 * 1 * 9)) / 18
    z = (res.s - np.sign(res.s)) / math.sqrt(var) if res.s else 0.0
    assert res.z == pytest.approx(z)
    assert res.p_increasing + res.p_decreasing == pytest.approx(1)
    with pytest.raises(ValueError):
        mann_kendall([1, 2, 3])


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=30))
def test_mann_kendall_rank_invariance(y):
    a = mann_kendall(y)
    # ranks are an exactly order-preserving transform
    b = mann_kendall(rankdata(y) ** 3 + 10)
    assert a.s == b.s == _recount(y)
    assert a.p == pytest.approx(b.p)


def test_pearson_examples():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1)
    # x = 1..4, y = (1, 3, 2, 5): sxy = 5.5, sxx = 5, syy = 8.75
    assert pearson(x, [1, 3, 2, 5]) == pytest.approx(5.5 / math.sqrt(5 * 8.75))
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [1])


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=20),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariance(pairs, scale, shift):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert pearson(x * scale + shift, y) == pytest.approx(pearson(x, y), abs=1e-9)


def test_confidence_interval():
    assert confidence_interval_90([3.0, 3.0, 3.0]) == (3.0, 0.0)
    mean, half = confidence_interval_90([0.0, 1.0])
    # t quantile for one degree of freedom, 95th percentile
    assert mean == 0.5 and half == pytest.approx(6.313752 * 0.70710678 / math.sqrt(2), rel=1e-6)
    with pytest.raises(ValueError):
        confidence_interval_90([1.0])
    rng = stream(3)
    small = confidence_interval_90(rng.normal(size=100))[1]
    large = confidence_interval_90(rng.normal(size=10000))[1]
    assert 5 < small / large < 20


def test_zero_crossing_and_concavity():
    assert first_zero_crossing([1, 2, 3], [1.0, 0.5, -0.5]) == pytest.approx(2.5)
    assert first_zero_crossing([1, 2, 3], [1.0, 0.5, 0.2]) is None
    assert first_zero_crossing([1, 2, 3], [-1.0, 0.5, 0.2]) == 1
    assert is_concave(np.sqrt(RHO)) and not is_concave(RHO ** 2)
