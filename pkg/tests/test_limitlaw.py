import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simplexpa import ModelParams, limitlaw, recursion
from simplexpa.bicoupling import two_sample_chi2
from simplexpa.stats import EmpiricalDist, chi_square_gof, ks_statistic, tv_distance
from simplexpa.tables import table_from_samples


@given(st.floats(0.05, 20.0), st.floats(0.02, 0.98))
def test_nb_pmf_normalized_and_matches_pgf(r, a):
    ell = np.arange(20000)
    pmf = limitlaw.nb_pmf(r, a, ell)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    for x in (0.2, 0.7):
        assert limitlaw.nb_pgf(r, a, x) == pytest.approx(np.sum(pmf * x**ell), abs=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.02, 0.98))
def test_tnb_pmf_normalized_and_matches_pgf(kappa, a):
    ell = np.arange(0, 40000)
    pmf = limitlaw.tnb_pmf(kappa, a, ell)
    assert pmf[0] == 0
    assert pmf.sum() == pytest.approx(1.0, abs=1e-8)
    for x in (0.3, 0.9):
        assert limitlaw.tnb_pgf(kappa, a, x) == pytest.approx(np.sum(pmf * x**ell), abs=1e-8)


def _gof(samples, pmf_fn, top):
    ell = np.arange(top + 1)
    return chi_square_gof(EmpiricalDist.from_samples(samples), dict(zip(ell.tolist(), pmf_fn(ell).tolist())))


@pytest.mark.parametrize("r,a", [(0.5, 0.3), (1.0, 0.7), (3.5, 0.05)])
def test_nb_sampler(rng, r, a):
    s = limitlaw.sample_nb(r, a, rng, 50000)
    assert _gof(s, lambda e: limitlaw.nb_pmf(r, a, e), int(s.max()) + 20).p_value > 1e-3


@pytest.mark.parametrize("method", ["inverse", "mixture"])
@pytest.mark.parametrize("kappa,a", [(0.5, 0.1), (0.2, 0.8), (0.9, 0.01)])
def test_tnb_sampler(rng, method, kappa, a):
    s = limitlaw.sample_tnb(kappa, a, rng, 50000, method=method)
    assert s.min() >= 1
    assert _gof(s, lambda e: limitlaw.tnb_pmf(kappa, a, e), int(s.max()) + 20).p_value > 1e-3


def test_tnb_arguments():
    g = np.random.default_rng(0)
    with pytest.raises(ValueError):
        limitlaw.sample_tnb(1.0, 0.5, g)
    with pytest.raises(ValueError):
        limitlaw.sample_tnb(0.5, 0.5, g, method="bogus")
    assert isinstance(limitlaw.sample_tnb(0.5, 0.5, g), int)


def test_pareto(rng):
    p = ModelParams(2, 1.0)
    z = limitlaw.sample_pareto(p, rng, 50000)
    assert z.min() >= 1
    assert ks_statistic(z, lambda x: 1 - x ** (-p.alpha)) < 0.01
    assert limitlaw.pareto_from_uniform(p, 1.0) == 1.0


@pytest.mark.parametrize("k,delta,cap", [(0, 0.0, 40), (1, 0.0, 20), (1, 2.5, 20), (2, 1.0, 12)])
def test_limit_sampler_matches_recursion(k, delta, cap):
    p = ModelParams(k, delta)
    s = limitlaw.sample_limit_degree(p, np.random.default_rng(11 + k), 200000)
    d = s.d
    assert np.all(d >= np.array(p.minimal_vector()))
    assert np.all(np.diff(d, axis=1) < 0)
    emp = table_from_samples(p, d)
    ref = recursion.solve_joint_pmf(p, cap)
    assert tv_distance(emp.normalized().restrict(cap), ref) < 0.015
    res = chi_square_gof(emp.as_dict(), ref.as_dict())
    assert res.p_value > 1e-3


def test_chain_and_literal_constructions_agree():
    p = ModelParams(2, 0.0)
    g = np.random.default_rng(5)
    a = limitlaw.sample_limit_degree(p, g, 4000, method="literal").d
    b = limitlaw.sample_limit_degree(p, g, 40000).d
    ca = {tuple(r): c for r, c in zip(*np.unique(a, axis=0, return_counts=True))}
    cb = {tuple(r): c for r, c in zip(*np.unique(b, axis=0, return_counts=True))}
    assert two_sample_chi2(ca, cb) > 1e-3


def test_results_do_not_depend_on_thread_count():
    p = ModelParams(1, 0.0)
    a = limitlaw.sample_limit_degree(p, np.random.default_rng(3), 5000, threads=1, chunk=700)
    b = limitlaw.sample_limit_degree(p, np.random.default_rng(3), 5000, threads=4, chunk=700)
    assert np.array_equal(a.d, b.d) and np.array_equal(a.z, b.z)
    assert len(limitlaw.sample_limit_degree(p, np.random.default_rng(3), 0)) == 0


@pytest.mark.parametrize("z", [1.5, 3.0, 10.0])
def test_compound_sums_are_negative_binomial(z):
    p = ModelParams(2, 1.0)
    g = np.random.default_rng(int(10 * z))
    for m in (1, 2):
        sums = limitlaw.sample_compound_sums(p, m, z, g, 30000)
        for i in range(m):
            r, a = p.nb_shape(i), z ** (-p.b[i] / p.b[0])
            assert _gof(sums[:, i], lambda e: limitlaw.nb_pmf(r, a, e), int(sums[:, i].max()) + 30).p_value > 1e-3


def test_nested_vector_pgf(rng):
    p = ModelParams(2, 0.0)
    z, x = 4.0, np.array([0.7, 0.5])
    v = limitlaw.sample_N_vector(2, z, p, rng, size=40000)
    vals = np.prod(x ** v, axis=1)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - limitlaw.conditional_N_pgf(p, 2, z, x)) < 4 * se
    with pytest.raises(ValueError):
        limitlaw.sample_N_vector(3, z, p, rng)
    with pytest.raises(ValueError):
        limitlaw.sample_N_vector(1, 1.0, p, rng)


@pytest.mark.parametrize("k,delta", [(0, 0.0), (1, 0.0), (1, -0.5), (2, 1.0)])
def test_pgf_quadrature(k, delta):
    p = ModelParams(k, delta)
    assert limitlaw.pgf_numeric(p, np.ones(k + 1)) == pytest.approx(1.0, abs=1e-8)
    cap = {0: 400, 1: 150, 2: 40}[k]
    table = recursion.solve_joint_pmf(p, cap)
    tail = 1.0 - table.total()
    for x in ([0.5] * (k + 1), [0.9] * (k + 1), [0.2] + [0.95] * k):
        val, err = limitlaw.pgf_numeric(p, x, full_output=True)
        assert err < 1e-8
        assert abs(val - limitlaw.pgf_table_sum(table, x)) <= tail + 1e-9
    with pytest.raises(ValueError):
        limitlaw.pgf_numeric(p, [0.0] * (k + 1))
    with pytest.raises(ValueError):
        limitlaw.pgf_numeric(p, [0.5] * (k + 2))


def test_pgf_monte_carlo(rng):
    p = ModelParams(1, 1.0)
    s = limitlaw.sample_limit_degree(p, rng, 100000)
    for x in ((0.3, 0.9), (0.8, 0.8)):
        mc, se = limitlaw.pgf_monte_carlo(s, x)
        assert abs(mc - limitlaw.pgf_numeric(p, x)) < 4 * se


@pytest.mark.parametrize("k,delta", [(1, 0.0), (2, 1.0), (3, -0.5)])
def test_marginal_mixture(k, delta):
    p = ModelParams(k, delta)
    values = np.arange(k + 1, k + 40)
    m0 = limitlaw.marginal_limit_check(p, 0)
    assert np.allclose(m0.pmf(values), recursion.marginal_closed_form(p, values), rtol=1e-8, atol=1e-15)
    for i in range(k + 1):
        mi = limitlaw.marginal_limit_check(p, i)
        v = np.arange(k - i + 1, k - i + 60)
        assert np.allclose(mi.pmf(v), mi.pmf_closed_form(v), rtol=1e-8, atol=1e-15)
        assert mi.pmf([k - i]) == 0.0
    with pytest.raises(ValueError):
        limitlaw.marginal_limit_check(p, k + 1)


def test_marginals_of_samples(rng):
    p = ModelParams(2, 0.0)
    d = limitlaw.sample_limit_degree(p, rng, 100000).d
    for i in range(3):
        mix = limitlaw.marginal_limit_check(p, i)
        top = int(np.quantile(d[:, i], 0.999))
        assert _gof(d[:, i], lambda e: mix.pmf_closed_form(e), top).p_value > 1e-3


def test_limit_samples_csv(tmp_path, rng):
    s = limitlaw.sample_limit_degree(ModelParams(1, 0.0), rng, 10)
    s.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "z,d_0,d_1" and len(lines) == 11
