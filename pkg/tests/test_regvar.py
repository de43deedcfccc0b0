import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simplexpa import ModelParams, limitlaw, regvar
from simplexpa.stats import gamma_cdf, ks_statistic


@pytest.fixture(scope="module")
def x_k1():
    # 2e4 rows at z_big = 1e4 keeps this under a second
    return regvar.sample_x_vector_approx(ModelParams(1, 0.0), np.random.default_rng(77), 20000, z_big=1e4)


def test_g_recursion_and_laplace_at_zero():
    p = ModelParams(2, 1.0)
    assert regvar.g_recursion(p, [0, 0, 0]) == pytest.approx(1.0)
    assert regvar.laplace_limit(p, [0, 0, 0]) == pytest.approx(1.0)
    th = [0.3, 0.1, 2.0]
    g0 = 1.3
    g1 = g0 ** (p.b[1] / p.b[0]) + 0.1
    g2 = g1 ** (p.b[2] / p.b[1]) + 2.0
    assert regvar.g_recursion(p, th) == pytest.approx(g2)
    assert regvar.g_recursion(p, th, m=1) == pytest.approx(g1)
    with pytest.raises(ValueError):
        regvar.laplace_limit(p, [-1, 0, 0])
    with pytest.raises(ValueError):
        regvar.laplace_limit(p, [1, 0])


@given(st.integers(0, 3), st.floats(-0.5, 3.0), st.lists(st.floats(0, 5), min_size=4, max_size=4),
       st.integers(0, 3), st.floats(0.01, 2.0))
def test_laplace_is_decreasing(k, delta, theta, j, bump):
    p = ModelParams(k, delta)
    th = np.array(theta[: k + 1])
    j = j % (k + 1)
    up = th.copy()
    up[j] += bump
    assert 0 < regvar.laplace_limit(p, up) < regvar.laplace_limit(p, th) <= 1


def test_single_coordinate_laplace_is_gamma():
    # only theta_i > 0: transform of Gamma(shape_i, 1)
    p = ModelParams(2, 0.5)
    for i in range(3):
        th = np.zeros(3)
        th[i] = 0.7
        assert regvar.laplace_limit(p, th) == pytest.approx((1.7) ** (-p.marginal_shape(i)), rel=1e-12)


def test_x_vector_marginals(x_k1):
    p = ModelParams(1, 0.0)
    for i in range(2):
        s = p.marginal_shape(i)
        assert ks_statistic(x_k1[:, i], lambda v: gamma_cdf(s, v)) < 0.02
    mc, se = regvar.laplace_monte_carlo(x_k1, [0.5, 1.0])
    assert abs(mc - regvar.laplace_limit(p, [0.5, 1.0])) < 4 * se
    with pytest.raises(ValueError):
        regvar.sample_x_vector_approx(p, np.random.default_rng(0), 5, z_big=1.0)


def test_chi_map():
    p = ModelParams(1, 0.0)
    assert np.allclose(regvar.chi_map(p, 4.0, [1.0, 1.0]), [4.0, 2.0])
    with pytest.raises(ValueError):
        regvar.chi_map(p, 0.0, [1, 1])


def test_tail_box_methods_agree(x_k1):
    p = ModelParams(1, 0.0)
    for box in ((1.0, 1.0), (2.0, 1.0), (1.0, 0.0), (0.0, 1.5)):
        ex = regvar.tail_measure_box(p, box, x_k1)
        qu = regvar.tail_measure_box(p, box, x_k1, method="quadrature")
        assert qu.value == pytest.approx(ex.value, rel=2e-3)
        assert qu.truncation < 1e-3
    with pytest.raises(ValueError):
        regvar.tail_measure_box(p, (0.0, 0.0), x_k1)
    with pytest.raises(ValueError):
        regvar.tail_measure_box(p, (1.0, 1.0), x_k1, method="bogus")


def test_single_axis_box_against_samples(x_k1):
    p = ModelParams(1, 0.0)
    for i, xi in ((0, 1.0), (0, 2.5), (1, 1.0)):
        box = [0.0, 0.0]
        box[i] = xi
        est = regvar.tail_measure_box(p, box, x_k1)
        assert abs(est.value - regvar.single_axis_box(p, i, xi)) < 4 * est.se


def test_box_measure_is_homogeneous(x_k1):
    # scaling the box by chi(t) divides the measure by t ** alpha
    p = ModelParams(1, 0.0)
    box = np.array([1.0, 1.0])
    t = 3.0
    a = regvar.tail_measure_box(p, box, x_k1).value
    b = regvar.tail_measure_box(p, regvar.chi_map(p, t, box), x_k1).value
    assert b == pytest.approx(a * t ** (-p.alpha), rel=1e-10)


def test_empirical_tail_box_converges():
    p = ModelParams(1, 0.0)
    d = limitlaw.sample_limit_degree(p, np.random.default_rng(8), 2 * 10**6).d
    ref = regvar.single_axis_box(p, 0, 1.0)
    est = regvar.empirical_tail_box(p, d, 1e3, [1.0, 0.0])
    se = regvar.empirical_tail_box_se(p, d, 1e3, [1.0, 0.0])
    assert abs(est - ref) < 0.05 * ref + 3 * se
    with pytest.raises(ValueError):
        regvar.empirical_tail_box(p, d, 0.5, [1.0, 1.0])


def test_hill_tail_index():
    p = ModelParams(0, 0.0)
    d = limitlaw.sample_limit_degree(p, np.random.default_rng(9), 10**6).d[:, 0]
    assert regvar.hill_tail_index(d) == pytest.approx(p.tail_index(0), rel=0.15)
    with pytest.raises(ValueError):
        regvar.hill_tail_index(d[:100])


def test_results_csv(tmp_path):
    rows = [{"x": [1.0, 2.0], "h": 100.0, "empirical": 0.3, "quadrature": 0.31, "se": 0.01}]
    regvar.write_results_csv(rows, 1, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x_0,x_1,h,empirical,quadrature,se"
    assert math.isclose(float(lines[1].split(",")[4]), 0.31)
