"""Distances, goodness-of-fit and tail estimators."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

_EPS = 1e-15
_FPMIN = 1e-300
_MAXITER = 100000


@dataclass
class EmpiricalDist:
    counts: dict
    total: int

    def __post_init__(self):
        s = sum(self.counts.values())
        if s != self.total:
            raise ValueError(f"counts sum to {s}, not {self.total}")

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalDist":
        arr = np.asarray(samples)
        if arr.ndim == 1:
            keys, cnt = np.unique(arr, return_counts=True)
            counts = {k.item(): int(c) for k, c in zip(keys, cnt)}
        else:
            keys, cnt = np.unique(arr, axis=0, return_counts=True)
            counts = {tuple(r): int(c) for r, c in zip(keys.tolist(), cnt)}
        return cls(counts, int(cnt.sum()))

    def pmf(self) -> dict:
        return {k: c / self.total for k, c in self.counts.items()}


def _as_mapping(p) -> Mapping:
    if isinstance(p, Mapping):
        return p
    if hasattr(p, "as_dict"):
        return p.as_dict()
    if isinstance(p, EmpiricalDist):
        return p.pmf()
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    return dict(enumerate(arr.tolist()))


def tv_distance(p, q) -> float:
    """Half the L1 distance; keys missing from one side count as zero."""
    if isinstance(p, EmpiricalDist):
        p = p.pmf()
    if isinstance(q, EmpiricalDist):
        q = q.pmf()
    pm, qm = _as_mapping(p), _as_mapping(q)
    keys = set(pm) | set(qm)
    return 0.5 * sum(abs(pm.get(x, 0.0) - qm.get(x, 0.0)) for x in keys)


def _gamma_series(a, x):
    """Lower regularized series; valid for x < a + 1."""
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    active = np.ones(a.shape, dtype=bool)
    for _ in range(_MAXITER):
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        active &= np.abs(term) >= np.abs(total) * _EPS
        if not active.any():
            break
    return total * np.exp(-x + a * np.log(x) - gammaln(a))


def _gamma_contfrac(a, x):
    """Upper regularized continued fraction (modified Lentz); valid for x >= a + 1."""
    b = x + 1.0 - a
    c = np.full(a.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, _MAXITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        step = d * c
        h = np.where(active, h * step, h)
        active &= np.abs(step - 1.0) >= _EPS
        if not active.any():
            break
    return np.exp(-x + a * np.log(x) - gammaln(a)) * h


def _regularized(shape, x):
    a, xv = np.broadcast_arrays(np.asarray(shape, dtype=np.float64), np.asarray(x, dtype=np.float64))
    a = a.astype(np.float64).copy()
    xv = xv.astype(np.float64).copy()
    if np.any(a <= 0):
        raise ValueError("shape must be positive")
    if np.any(xv < 0) or np.any(np.isnan(xv)):
        raise ValueError("x must be nonnegative")
    lower = np.zeros(a.shape)
    upper = np.ones(a.shape)
    pos = xv > 0
    ser = pos & (xv < a + 1.0)
    cf = pos & ~ser
    if ser.any():
        lower[ser] = _gamma_series(a[ser], xv[ser])
        upper[ser] = 1.0 - lower[ser]
    if cf.any():
        big = np.isinf(xv[cf])
        uq = np.zeros(big.shape)
        if (~big).any():
            uq[~big] = _gamma_contfrac(a[cf][~big], xv[cf][~big])
        upper[cf] = uq
        lower[cf] = 1.0 - uq
    return lower, upper


def gamma_cdf(shape, x):
    """Regularized lower incomplete gamma ``P(shape, x)``."""
    lo, _ = _regularized(shape, x)
    return float(lo) if lo.ndim == 0 else lo


def gamma_sf(shape, x):
    """Regularized upper incomplete gamma ``Q(shape, x)``, accurate in the tail."""
    _, up = _regularized(shape, x)
    return float(up) if up.ndim == 0 else up


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    cells: int


def chi_square_gof(observed, expected, min_cell: float = 5.0, ddof: int = 0) -> ChiSquareResult:
    """Pearson test of counts against a pmf.

    ``observed`` maps keys to counts (or is an ``EmpiricalDist``); ``expected``
    maps keys to probabilities.  Observations outside the expected keys and
    any missing expected mass form one remainder cell.  Adjacent cells (in
    sorted key order) are pooled until each expects at least ``min_cell``.
    """
    obs = observed.counts if isinstance(observed, EmpiricalDist) else dict(observed)
    exp_map = dict(_as_mapping(expected))
    total = float(sum(obs.values()))
    if total <= 0:
        raise ValueError("no observations")
    keys = sorted(exp_map)
    o = [float(obs.get(x, 0)) for x in keys]
    e = [exp_map[x] * total for x in keys]
    rest_o = total - sum(o)
    rest_e = max(total - sum(e), 0.0)
    if rest_o > 0 or rest_e > 1e-9 * total:
        o.append(rest_o)
        e.append(rest_e)

    pooled_o, pooled_e = [], []
    acc_o = acc_e = 0.0
    for oi, ei in zip(o, e):
        acc_o += oi
        acc_e += ei
        if acc_e >= min_cell:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if pooled_e:
            pooled_o[-1] += acc_o
            pooled_e[-1] += acc_e
        else:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
    if len(pooled_e) < 2:
        raise ValueError("all expected mass pooled into a single cell")
    po = np.array(pooled_o)
    pe = np.array(pooled_e)
    if np.any(pe <= 0):
        return ChiSquareResult(math.inf, len(pe) - 1 - ddof, 0.0, len(pe))
    stat = float(np.sum((po - pe) ** 2 / pe))
    dof = len(pe) - 1 - ddof
    if dof < 1:
        raise ValueError("no degrees of freedom left")
    return ChiSquareResult(stat, dof, float(gamma_sf(dof / 2.0, stat / 2.0)), len(pe))


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def hill_estimator(samples, top_count: int) -> float:
    """Tail index from the ``top_count`` largest order statistics.

    Returns ``inf`` when the top set is constant.
    """
    top_count = int(top_count)
    if top_count < 10:
        raise ValueError("top_count must be at least 10")
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size <= top_count:
        raise ValueError(f"need more than {top_count} samples, got {x.size}")
    part = np.partition(x, x.size - top_count - 1)[x.size - top_count - 1:]
    thresh = part[0]
    top = part[1:]
    if thresh <= 0:
        raise ValueError("non-positive values among the top order statistics")
    h = float(np.mean(np.log(top) - math.log(thresh)))
    return math.inf if h == 0 else 1.0 / h
