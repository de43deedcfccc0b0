import math

import pytest
from hypothesis import given, strategies as st

from simplexpa import MAX_K, ModelParams, ParameterError


def test_constants_k1_delta0():
    p = ModelParams(1, 0.0)
    assert p.b == (2.0, 1.0)
    assert p.tau == 3.0
    assert p.alpha == 1.5
    assert p.minimal_vector() == (2, 1)
    assert p.n_simplices(1000) == 2003
    assert p.degree_sum(1000) == 3003


@pytest.mark.parametrize("k,delta", [(-1, 0.0), (0, -1.0), (1, -2.0), (MAX_K + 1, 0.0), (1, math.nan), (1.5, 0.0)])
def test_rejects_invalid(k, delta):
    with pytest.raises(ParameterError):
        ModelParams(k, delta)


def test_max_k_is_configurable():
    assert ModelParams(7, 0.0, max_k=8).k == 7


@given(st.integers(0, MAX_K), st.floats(-0.99, 10.0))
def test_exponent_identities(k, delta):
    p = ModelParams(k, delta)
    assert p.b[k] == pytest.approx(1.0)
    assert p.tau == pytest.approx(p.b[0] + 1 + delta)
    for m in range(k + 1):
        assert p.marginal_shape(m) == pytest.approx((k - m + 1) * p.nb_shape(m))
        assert p.tail_index(m) >= p.alpha - 1e-12
    n = 17
    assert p.total_weight(n) == pytest.approx(p.degree_sum(n) + delta * p.n_simplices(n))
