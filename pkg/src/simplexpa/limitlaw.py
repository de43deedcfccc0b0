"""Samplers for the limiting degree vector and its generating function.

Conditionally on a Pareto draw ``z``, the limit vector is built from
negative binomial counts ``T_m`` and compound sums of extended truncated
negative binomial (TNB) variables.  Because compound sums are additive in
the number of summands, the contributions of every level ``m > i`` to
coordinate ``i`` can be pushed down one level at a time:

    Y_k = T_k,    Y_i = T_i + sum_{j <= Y_{i+1}} TNB(b_{i+1}/b_i, a_i),

with ``a_i = z ** (-b_i / b_0)`` and ``D_i = k - i + 1 + Y_i``.  This is the
default (``method="chain"``).  ``method="literal"`` builds every nested
vector explicitly and is kept for cross-checks.

Fast paths draw TNB variables from the exact mixture

    TNB(kappa, a) = 1 + Poisson(G * R),  G ~ Gamma(1 - kappa),
    R = expm1(-log1p(V * expm1(kappa * log a)) / kappa),  V ~ U(0, 1),

so a sum of ``n`` draws costs ``n`` Gamma/uniform pairs and one Poisson.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate
from scipy.special import betaln, gammaln

from ._textio import text_output
from .params import ModelParams
from .parallel import DEFAULT_CHUNK, child_sequences, chunk_bounds, ordered_map

TNB_MAX_ITER = 10**9
TNB_MASS_GUARD = 1e-12


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------- pmfs / pgfs

def nb_pmf(r: float, a: float, ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=np.float64)
    logp = gammaln(ell + r) - gammaln(ell + 1) - gammaln(r) + r * np.log(a) + ell * np.log1p(-a)
    return np.exp(logp)


def nb_pgf(r: float, a: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (x * (1.0 - 1.0 / a) + 1.0 / a) ** (-r)


def tnb_pmf(kappa: float, a: float, ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=np.float64)
    logp = (math.log(kappa) + gammaln(ell - kappa) - gammaln(ell + 1) - gammaln(1.0 - kappa)
            + ell * math.log1p(-a) - math.log(-math.expm1(kappa * math.log(a))))
    return np.where(ell >= 1, np.exp(logp), 0.0)


def tnb_pgf(kappa: float, a: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (1.0 - (1.0 - (1.0 - a) * x) ** kappa) / (1.0 - a**kappa)


def _check_tnb(kappa: float, a: float) -> None:
    if not (0.0 < kappa < 1.0 and 0.0 < a < 1.0):
        raise ValueError(f"TNB needs kappa, a in (0, 1), got kappa={kappa}, a={a}")


# ---------------------------------------------------------------- compiled

@njit(cache=True, nogil=True)
def _nb_draw(g, shape, odds):
    # odds = (1 - a) / a
    if odds <= 0.0:
        return 0
    return g.poisson(g.standard_gamma(shape) * odds)


@njit(cache=True, nogil=True)
def _tnb_sum(g, count, kappa, em):
    # em = expm1(kappa * log a) in (-1, 0)
    if count <= 0:
        return 0
    lam = 0.0
    shape = 1.0 - kappa
    for _ in range(count):
        lam += g.standard_gamma(shape) * np.expm1(-np.log1p(g.random() * em) / kappa)
    return count + g.poisson(lam)


@njit(cache=True, nogil=True)
def _chain_kernel(g, logz, top, add_nb, nb_shape, expo, kappa, out):
    """Row r: level ``top`` starts with an NB draw, then each lower level
    adds the TNB compound sum of the level above (plus a fresh NB draw when
    ``add_nb``)."""
    for r in range(logz.shape[0]):
        lz = logz[r]
        y = _nb_draw(g, nb_shape[top], np.expm1(expo[top] * lz))
        out[r, top] = y
        for i in range(top - 1, -1, -1):
            em = np.expm1(-kappa[i] * expo[i] * lz)
            y = _tnb_sum(g, y, kappa[i], em)
            if add_nb:
                y += _nb_draw(g, nb_shape[i], np.expm1(expo[i] * lz))
            out[r, i] = y


@njit(cache=True, nogil=True)
def _tnb_inverse_kernel(kappa, a, u, out, max_iter, guard):
    q = 1.0 - a
    first = kappa * q / (-np.expm1(kappa * np.log(a)))
    for j in range(u.shape[0]):
        target = u[j]
        p = first
        cum = p
        ell = 1
        while cum < target and ell < max_iter:
            p *= q * (ell - kappa) / (ell + 1.0)
            ell += 1
            cum += p
            if p == 0.0 or cum >= 1.0 - guard:
                break
        out[j] = ell


# ---------------------------------------------------------------- samplers

def pareto_from_uniform(params: ModelParams, u):
    """``z = u ** (-b_0 / tau)`` for ``u`` in (0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    out = u ** (-params.b[0] / params.tau)
    return float(out) if out.ndim == 0 else out


def sample_pareto(params: ModelParams, rng: np.random.Generator, size=None):
    u = 1.0 - rng.random(size)
    return pareto_from_uniform(params, u)


def sample_nb(r: float, a, rng: np.random.Generator, size=None):
    """Negative binomial with shape ``r`` and success probability ``a``
    via its Gamma-Poisson mixture."""
    if r <= 0:
        raise ValueError("shape must be positive")
    a = np.asarray(a, dtype=np.float64)
    if np.any((a <= 0) | (a > 1)):
        raise ValueError("success probability must be in (0, 1]")
    g = rng.gamma(r, 1.0, size=size if size is not None else a.shape)
    return rng.poisson(g * (1.0 - a) / a)


def sample_tnb(kappa: float, a: float, rng: np.random.Generator, size=None, method: str = "inverse"):
    """TNB draws on {1, 2, ...}.

    ``inverse`` walks the pmf ratio ``p(l+1)/p(l) = (1-a)(l-kappa)/(l+1)``;
    ``mixture`` uses the Gamma-Poisson representation.
    """
    _check_tnb(kappa, a)
    n = 1 if size is None else int(np.prod(size))
    if method == "inverse":
        u = rng.random(n)
        out = np.empty(n, dtype=np.int64)
        _tnb_inverse_kernel(kappa, a, u, out, TNB_MAX_ITER, TNB_MASS_GUARD)
    elif method == "mixture":
        g = rng.gamma(1.0 - kappa, 1.0, size=n)
        v = rng.random(n)
        em = math.expm1(kappa * math.log(a))
        out = 1 + rng.poisson(g * np.expm1(-np.log1p(v * em) / kappa))
    else:
        raise ValueError(f"unknown TNB method {method!r}")
    return int(out[0]) if size is None else out.reshape(size)


def sample_N_vector(m: int, z: float, params: ModelParams, rng: np.random.Generator,
                    size: int | None = None, method: str = "inverse") -> np.ndarray:
    """Nested TNB vector of length ``m`` given ``z`` (coordinates 0..m-1)."""
    k = params.k
    if not 1 <= m <= k:
        raise ValueError(f"m must lie in 1..{k}")
    if z <= 1:
        raise ValueError("z must exceed 1")
    b = params.b
    n = 1 if size is None else int(size)
    out = np.zeros((n, m), dtype=np.int64)
    top = sample_tnb(b[m] / b[m - 1], z ** (-b[m - 1] / b[0]), rng, size=n, method=method)
    out[:, m - 1] = top
    if m > 1:
        total = int(top.sum())
        inner = sample_N_vector(m - 1, z, params, rng, size=total, method=method)
        owner = np.repeat(np.arange(n), top)
        for i in range(m - 1):
            out[:, i] = np.bincount(owner, weights=inner[:, i], minlength=n).astype(np.int64)
    return out[0] if size is None else out


@dataclass
class LimitSamples:
    """Rows of the limiting degree vector with their latent Pareto draws."""

    params: ModelParams
    z: np.ndarray
    d: np.ndarray

    def __len__(self):
        return self.z.size

    def to_csv(self, path) -> None:
        k = self.params.k
        with text_output(path) as fh:
            w = csv.writer(fh)
            w.writerow(["z"] + [f"d_{i}" for i in range(k + 1)])
            for zz, row in zip(self.z.tolist(), self.d.tolist()):
                w.writerow([repr(zz)] + row)


def _chain_arrays(params: ModelParams):
    k, b = params.k, params.b
    nb_shape = np.array([params.nb_shape(m) for m in range(k + 1)])
    expo = np.array([b[m] / b[0] for m in range(k + 1)])
    kappa = np.array([b[i + 1] / b[i] for i in range(k)] + [0.5])
    return nb_shape, expo, kappa


def _run_chain(params, logz, top, add_nb, g):
    nb_shape, expo, kappa = _chain_arrays(params)
    out = np.zeros((logz.size, params.k + 1), dtype=np.int64)
    _chain_kernel(g, np.ascontiguousarray(logz, dtype=np.float64), top, add_nb,
                  nb_shape, expo, kappa, out)
    return out


def _chunked(params, n, rng, body, threads, chunk):
    bounds = chunk_bounds(n, chunk)
    seqs = child_sequences(rng, len(bounds))

    def work(j):
        lo, hi = bounds[j]
        g = np.random.default_rng(seqs[j])
        return body(hi - lo, g)

    parts = ordered_map(work, list(range(len(bounds))), threads)
    return parts


def sample_limit_degree(params: ModelParams, rng: np.random.Generator, size: int = 1,
                        method: str = "chain", threads: int = 1,
                        chunk: int = DEFAULT_CHUNK) -> LimitSamples:
    """``size`` draws of the limiting degree vector."""
    k = params.k
    offset = np.array(params.minimal_vector(), dtype=np.int64)
    if method == "chain":
        def body(m, g):
            u = 1.0 - g.random(m)
            logz = -(params.b[0] / params.tau) * np.log(u)
            y = _run_chain(params, logz, k, True, g)
            return np.exp(logz), y + offset

        parts = _chunked(params, int(size), rng, body, threads, chunk)
        if not parts:
            return LimitSamples(params, np.zeros(0), np.zeros((0, k + 1), dtype=np.int64))
        return LimitSamples(params, np.concatenate([p[0] for p in parts]),
                            np.vstack([p[1] for p in parts]))
    if method == "literal":
        z = sample_pareto(params, rng, size)
        d = np.empty((int(size), k + 1), dtype=np.int64)
        for r in range(int(size)):
            d[r] = _literal_row(params, float(z[r]), rng)
        return LimitSamples(params, np.asarray(z), d)
    raise ValueError(f"unknown method {method!r}")


def _literal_row(params: ModelParams, z: float, rng) -> np.ndarray:
    k, b = params.k, params.b
    t = np.array([sample_nb(params.nb_shape(m), z ** (-b[m] / b[0]), rng) for m in range(k + 1)])
    d = np.array(params.minimal_vector(), dtype=np.int64) + t
    if z > 1:
        for m in range(1, k + 1):
            if t[m] > 0:
                vecs = sample_N_vector(m, z, params, rng, size=int(t[m]))
                d[:m] += vecs.sum(axis=0)
    return d


def sample_compound_sums(params: ModelParams, m: int, z: float, rng: np.random.Generator,
                         size: int, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Rows of ``sum_{j <= T_m} N^{(m)}_{i,j}`` for ``i = 0..m-1`` at fixed ``z``."""
    if not 1 <= m <= params.k:
        raise ValueError(f"m must lie in 1..{params.k}")
    logz = math.log(z)

    def body(n, g):
        y = _run_chain(params, np.full(n, logz), m, False, g)
        return y[:, :m]

    return np.vstack(_chunked(params, int(size), rng, body, threads, chunk))


def sample_fixed_z(params: ModelParams, z: float, rng: np.random.Generator, size: int,
                   threads: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Limit vectors (with offsets) conditionally on ``Z = z``."""
    logz = math.log(z)
    offset = np.array(params.minimal_vector(), dtype=np.int64)

    def body(n, g):
        return _run_chain(params, np.full(n, logz), params.k, True, g) + offset

    return np.vstack(_chunked(params, int(size), rng, body, threads, chunk))


# ---------------------------------------------------------------- pgf

def conditional_N_pgf(params: ModelParams, m: int, z: float, x) -> float:
    """``E prod_{i<m} x_i ** N^{(m)}_i`` given ``z``."""
    b = params.b
    x = np.asarray(x, dtype=np.float64)
    h = x[0] + z * (1.0 - x[0])
    for j in range(1, m):
        h = (1.0 - x[j]) * z ** (b[j] / b[0]) + x[j] * h ** (b[j] / b[j - 1])
    c = z ** (-b[m] / b[0])
    return float((1.0 - c * h ** (b[m] / b[m - 1])) / (1.0 - c))


def _log_integrand(params: ModelParams, x: np.ndarray):
    k, d, b = params.k, params.delta, params.b
    alpha = params.alpha
    power = alpha - 1.0 + (k + 1) * (1.0 + d) / b[0]

    def f(t):
        h = x[0] * t + (1.0 - x[0])
        acc = -(1.0 + d) / b[0] * math.log(h)
        for m in range(1, k + 1):
            h = (1.0 - x[m]) + x[m] * h ** (b[m] / b[m - 1])
            acc -= (1.0 + d) / b[m] * math.log(h)
        return math.log(alpha) + power * math.log(t) + acc

    return f


def pgf_numeric(params: ModelParams, x, full_output: bool = False, epsrel: float = 1e-8):
    """Joint pgf of the limit vector by quadrature over ``t = 1/z`` in (0, 1]."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    k = params.k
    if x.size != k + 1:
        raise ValueError(f"need {k + 1} arguments")
    if np.any(x <= 0) or np.any(x > 1):
        raise ValueError("arguments must lie in (0, 1]")
    logf = _log_integrand(params, x)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(lambda t: math.exp(logf(t)) if t > 0 else 0.0, 0.0, 1.0,
                                      epsabs=0.0, epsrel=epsrel, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge at x={x.tolist()}: {exc}") from exc
    pref = float(np.prod(x ** np.array(params.minimal_vector(), dtype=np.float64)))
    if full_output:
        return pref * val, pref * err
    return pref * val


def pgf_monte_carlo(samples: LimitSamples, x) -> tuple[float, float]:
    """Sample mean of ``prod x_i ** d_i`` and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    vals = np.exp(samples.d @ np.log(x))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def pgf_table_sum(table, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(table.values * np.exp(table.vectors @ np.log(x))))


# ---------------------------------------------------------------- marginals

@dataclass(frozen=True)
class MarginalMixture:
    """Coordinate ``i`` of the limit: ``offset + NB(shape, U)`` where
    ``U = Z ** (-b_i / b_0)`` has density ``rate * u ** (rate - 1)`` on (0, 1)."""

    params: ModelParams
    i: int
    shape: float
    rate: float
    offset: int

    def pmf(self, values, epsrel: float = 1e-10) -> np.ndarray:
        values = np.atleast_1d(np.asarray(values, dtype=np.int64))
        out = np.zeros(values.size)
        r, c = self.shape, self.rate
        for j, v in enumerate(values.tolist()):
            ell = v - self.offset
            if ell < 0:
                continue
            lc = gammaln(ell + r) - gammaln(ell + 1) - gammaln(r) + math.log(c)
            e1 = r + c - 1.0

            def f(u, ell=ell, lc=lc, e1=e1):
                if u <= 0.0 or u >= 1.0:
                    return 0.0
                return math.exp(lc + e1 * math.log(u) + ell * math.log1p(-u))

            peak = e1 / (e1 + ell) if e1 > 0 and ell > 0 else None
            pts = [peak] if peak is not None and 0 < peak < 1 else None
            val, _ = integrate.quad(f, 0.0, 1.0, points=pts, epsabs=0.0, epsrel=epsrel, limit=200)
            out[j] = val
        return out

    def pmf_closed_form(self, values) -> np.ndarray:
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        ell = values - self.offset
        r, c = self.shape, self.rate
        with np.errstate(invalid="ignore"):
            logp = (math.log(c) + gammaln(ell + r) - gammaln(ell + 1) - gammaln(r)
                    + betaln(r + c, ell + 1))
        return np.where(ell >= 0, np.exp(logp), 0.0)


def marginal_limit_check(params: ModelParams, i: int) -> MarginalMixture:
    if not 0 <= i <= params.k:
        raise ValueError(f"coordinate must lie in 0..{params.k}")
    return MarginalMixture(params, i, params.marginal_shape(i), params.tail_index(i),
                           params.k - i + 1)
