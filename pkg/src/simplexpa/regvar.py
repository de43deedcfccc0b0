"""Regular-variation limits: Laplace transforms, Gamma marginals, tail boxes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import limitlaw
from ._textio import text_output
from .params import ModelParams
from .stats import gamma_sf, hill_estimator

DEFAULT_Z_BIG = 1e6


def g_recursion(params: ModelParams, theta, m: int | None = None) -> float:
    """``g_0 = 1 + theta_0``, ``g_j = g_{j-1} ** (b_j / b_{j-1}) + theta_j``."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    m = params.k if m is None else int(m)
    if not 0 <= m <= params.k or theta.size < m + 1:
        raise ValueError("need theta_0..theta_m with 0 <= m <= k")
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    b = params.b
    g = 1.0 + theta[0]
    for j in range(1, m + 1):
        g = g ** (b[j] / b[j - 1]) + theta[j]
    return float(g)


def laplace_limit(params: ModelParams, theta) -> float:
    """``prod_m g_m ** (-(1 + delta) / b_m)``."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != params.k + 1:
        raise ValueError(f"need {params.k + 1} arguments")
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    b, d = params.b, params.delta
    g = 1.0 + theta[0]
    logv = -(1.0 + d) / b[0] * math.log(g)
    for m in range(1, params.k + 1):
        g = g ** (b[m] / b[m - 1]) + theta[m]
        logv -= (1.0 + d) / b[m] * math.log(g)
    return math.exp(logv)


def sample_x_vector_approx(params: ModelParams, rng: np.random.Generator, size: int = 1,
                           z_big: float = DEFAULT_Z_BIG, threads: int = 1) -> np.ndarray:
    """Limit vectors at fixed ``Z = z_big``, coordinate ``i`` scaled by
    ``z_big ** (-b_i / b_0)``.  Rows approximate the Gamma-structured vector
    with a bias that vanishes as ``z_big`` grows."""
    if z_big <= 1:
        raise ValueError("z_big must exceed 1")
    d = limitlaw.sample_fixed_z(params, z_big, rng, size, threads=threads)
    scale = np.array([z_big ** (-bi / params.b[0]) for bi in params.b])
    return d * scale


def laplace_monte_carlo(samples: np.ndarray, theta) -> tuple[float, float]:
    v = np.exp(-(samples @ np.asarray(theta, dtype=np.float64)))
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def chi_map(params: ModelParams, x: float, y) -> np.ndarray:
    """``(x y_0, x ** (b_1/b_0) y_1, ..., x ** (b_k/b_0) y_k)``."""
    if x <= 0:
        raise ValueError("x must be positive")
    y = np.asarray(y, dtype=np.float64)
    pw = np.array([bi / params.b[0] for bi in params.b])
    return x**pw * y


@dataclass(frozen=True)
class TailEstimate:
    value: float
    se: float
    method: str
    truncation: float = 0.0


def _check_box(params: ModelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != params.k + 1:
        raise ValueError(f"need {params.k + 1} box corners")
    if np.any(x < 0):
        raise ValueError("box corners must be nonnegative")
    if not np.any(x > 0):
        raise ValueError("the tail measure of the full orthant is infinite; give some x_i > 0")
    return x


def _exceed_power(params: ModelParams, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Per-sample ``min_{i: x_i > 0} (S_i / x_i) ** (tau / b_i)``."""
    act = np.flatnonzero(x > 0)
    expo = np.array([params.tail_index(i) for i in act])
    return np.min((samples[:, act] / x[act]) ** expo, axis=1)


def tail_measure_box(params: ModelParams, x, samples: np.ndarray, method: str = "exact",
                     grid: int = 400, tail_tol: float = 1e-4) -> TailEstimate:
    """Tail measure of ``{y : y_i > x_i for all i}``; ``x_i = 0`` drops coordinate ``i``.

    ``samples`` are rows of the Gamma-structured vector (for example from
    ``sample_x_vector_approx``).  The outer integral over the Pareto scale
    is done in closed form (``exact``) or by Simpson's rule on a log grid
    (``quadrature``).
    """
    x = _check_box(params, x)
    samples = np.asarray(samples, dtype=np.float64)
    if method == "exact":
        v = _exceed_power(params, x, samples)
        return TailEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), method)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    alpha = params.alpha
    act = np.flatnonzero(x > 0)
    # u >= ustar is exactly the exceedance event of a sample
    ustar = np.max((x[act] / samples[:, act]) ** (params.b[0] / np.array([params.b[i] for i in act])),
                   axis=1)
    logu = np.sort(np.log(ustar))
    # lower cut: single-axis bound  alpha int_0^u P(S_j > x_j u^{-c_j}) u^{-1-alpha} du
    j = int(act[0])
    shape, cj = params.marginal_shape(j), params.b[j] / params.b[0]

    def lower_bound(v):
        f = lambda w: alpha * math.exp(-alpha * w) * gamma_sf(shape, x[j] * math.exp(-cj * w))  # noqa: E731
        return integrate.quad(f, -60.0, v, limit=200)[0]

    v_lo = math.log(max(np.quantile(ustar, 1e-4), 1e-300))
    while lower_bound(v_lo) > tail_tol * 1e-2 and v_lo > -50:
        v_lo -= 1.0
    v_hi = max(logu[-1] if logu.size else 0.0, v_lo + 1.0)
    v_hi = max(v_hi, -math.log(tail_tol) / alpha)
    vg = np.linspace(v_lo, v_hi, 2 * (grid // 2) + 1)
    prob = np.searchsorted(logu, vg, side="right") / logu.size
    inner = alpha * np.exp(-alpha * vg) * prob
    val = float(integrate.simpson(inner, x=vg))
    upper_tail = math.exp(-alpha * v_hi)
    lower_tail = lower_bound(v_lo)
    # SE from the exact-outer estimator on the same samples
    se = float(np.std(ustar ** (-alpha), ddof=1) / math.sqrt(ustar.size))
    return TailEstimate(val + upper_tail, se, method, truncation=upper_tail + lower_tail)


def single_axis_box(params: ModelParams, i: int, xi: float) -> float:
    """Tail measure of ``{y_i > xi}``: ``Gamma(s + tau/b_i) / Gamma(s) * xi ** (-tau/b_i)``
    with ``s`` the Gamma shape of coordinate ``i``."""
    s = params.marginal_shape(i)
    a = params.tail_index(i)
    return math.exp(gammaln(s + a) - gammaln(s)) * xi ** (-a)


def empirical_tail_box(params: ModelParams, d: np.ndarray, h: float, x) -> float:
    """``h`` times the frequency of ``d_m > x_m h ** (b_m / tau)`` for all m."""
    if h < 1:
        raise ValueError("h must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    thr = x * h ** (np.asarray(params.b) / params.tau)
    hit = np.all(np.asarray(d) > thr, axis=1)
    return float(h * hit.mean())


def empirical_tail_box_se(params: ModelParams, d: np.ndarray, h: float, x) -> float:
    est = empirical_tail_box(params, d, h, x)
    p = est / h
    return float(h * math.sqrt(max(p * (1 - p), 0.0) / len(d)))


def hill_tail_index(values, top_fraction: float = 0.01) -> float:
    values = np.asarray(values).reshape(-1)
    if values.size < 10**4:
        raise ValueError("need at least 10^4 samples")
    top = int(math.ceil(top_fraction * values.size))
    return hill_estimator(values, top)


def write_results_csv(rows: list[dict], k: int, path) -> None:
    with text_output(path) as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i}" for i in range(k + 1)] + ["h", "empirical", "quadrature", "se"])
        for r in rows:
            w.writerow(list(r["x"]) + [r["h"], repr(r["empirical"]), repr(r["quadrature"]), repr(r["se"])])
