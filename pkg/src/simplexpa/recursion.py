"""Limiting joint and marginal pmfs of the degree vector.

The joint pmf is solved slice by slice in the top coordinate ``i_0``: every
term on the right-hand side refers to slice ``i_0 - 1`` apart from the entry
itself, which is moved to the left-hand side.  Each slice is a dense
``(cap+1)^k`` array; entries outside ``i_0 > i_1 > ... > i_k >= 1`` are zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._textio import text_output
from .params import ModelParams
from .tables import PmfTable

DENSE_LIMIT = 2 * 10**8


class CapError(ValueError):
    pass


def _shift_down(arr: np.ndarray, axes) -> np.ndarray:
    """``out[j] = arr[j - 1]`` along each axis in ``axes``, zero-filled."""
    out = arr
    for ax in axes:
        sl_dst = [slice(None)] * arr.ndim
        sl_src = [slice(None)] * arr.ndim
        sl_dst[ax] = slice(1, None)
        sl_src[ax] = slice(None, -1)
        shifted = np.zeros_like(out)
        shifted[tuple(sl_dst)] = out[tuple(sl_src)]
        out = shifted
    return out


def _check_cap(params: ModelParams, cap: int) -> int:
    cap = int(cap)
    if cap < params.k + 1:
        raise CapError(f"cap={cap} is below the minimal top degree {params.k + 1}")
    return cap


def solve_joint_pmf(params: ModelParams, cap: int) -> PmfTable:
    """Joint limiting pmf on all vectors with ``i_0 <= cap``."""
    cap = _check_cap(params, cap)
    k, d, tau, b = params.k, params.delta, params.tau, params.b
    if k == 0:
        vals = np.zeros(cap + 1)
        for a in range(1, cap + 1):
            rhs = (a - 1 + d) / tau * vals[a - 1] + (1.0 if a == 1 else 0.0)
            vals[a] = rhs * tau / (tau + a * b[0] + d)
        iv = np.arange(1, cap + 1)
        return PmfTable(params, iv[:, None], vals[1:], cap)

    if (cap + 1) ** k > DENSE_LIMIT:
        raise CapError(f"cap={cap} is too large for k={k}")
    shape = (cap + 1,) * k
    grid = np.indices(shape, dtype=np.int64)  # grid[j] holds i_{j+1}
    lower_ok = grid[k - 1] >= 1
    for j in range(k - 1):
        lower_ok &= grid[j] > grid[j + 1]

    # c_m for m >= 1 does not depend on i_0
    coef_low = [None] + [
        ((grid[m - 1] - 1 - k + m) * b[m] - (grid[m] - k + m + 1) * b[m + 1]) / tau
        for m in range(1, k)
    ]
    coef_all = (grid[k - 1] - 1 + d) / tau
    minimal = tuple(k - j for j in range(k))  # (i_1..i_k) of the minimal vector

    vecs, vals = [], []
    prev = np.zeros(shape)
    for a in range(k + 1, cap + 1):
        valid = lower_ok & (grid[0] < a)
        rhs = coef_all * _shift_down(prev, range(k))
        c0 = ((a - 1 - k) * b[0] - (grid[0] - k + 1) * b[1]) / tau
        rhs += c0 * prev
        for m in range(1, k):
            rhs += coef_low[m] * _shift_down(prev, range(m))
        if a == k + 1:
            rhs[minimal] += 1.0
        cur = np.where(valid, rhs * tau / (tau + (a - k) * b[0] + d), 0.0)
        idx = np.argwhere(valid)
        vecs.append(np.column_stack([np.full(idx.shape[0], a), idx]))
        vals.append(cur[valid])
        prev = cur
    return PmfTable(params, np.vstack(vecs), np.concatenate(vals), cap)


@dataclass(frozen=True)
class MarginalTable:
    """Marginal pmf of the top coordinate on ``k+1..cap``."""

    params: ModelParams
    cap: int
    values: np.ndarray  # values[j] is the mass at i = k + 1 + j

    def __getitem__(self, i: int) -> float:
        j = int(i) - self.params.k - 1
        if j < 0 or j >= self.values.size:
            return 0.0
        return float(self.values[j])

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.params.k + 1, self.cap + 1)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.support, self.values)}

    def alpha(self, i: int) -> float:
        return i - self.params.k - 1 + self.params.delta / self.params.b[0]

    def beta(self, i: int) -> float:
        p = self.params
        return i - p.k + (p.k + 2) * (1 + p.delta) / p.b[0]


def _base_mass(params: ModelParams) -> float:
    k, d = params.k, params.delta
    return params.tau / (params.b[0] + (k + 2) * (1 + d))


def solve_marginal_pmf(params: ModelParams, cap: int) -> MarginalTable:
    cap = _check_cap(params, cap)
    k, d, b0 = params.k, params.delta, params.b[0]
    out = np.empty(cap - k)
    out[0] = _base_mass(params)
    for j in range(1, out.size):
        i = k + 1 + j
        out[j] = ((i - k - 1) * b0 + d) / ((i - k) * b0 + (k + 2) * (1 + d)) * out[j - 1]
    return MarginalTable(params, cap, out)


def marginal_closed_form(params: ModelParams, i) -> np.ndarray | float:
    """Gamma-ratio form of the top-coordinate marginal, via log-Gamma."""
    k, d, b0 = params.k, params.delta, params.b[0]
    i_arr = np.asarray(i, dtype=np.float64)
    if np.any(i_arr < k + 1):
        raise ValueError(f"marginal support starts at {k + 1}")
    alpha = lambda x: x - k - 1 + d / b0  # noqa: E731
    beta = lambda x: x - k + (k + 2) * (1 + d) / b0  # noqa: E731
    logv = (np.log(_base_mass(params))
            + gammaln(beta(k + 2)) - gammaln(alpha(k + 2))
            + gammaln(alpha(i_arr + 1)) - gammaln(beta(i_arr + 1)))
    out = np.exp(logv)
    return float(out) if out.ndim == 0 else out


def marginalize(table: PmfTable, axis: int) -> dict[int, float]:
    return table.marginal(axis)


def cap_for_mass(params: ModelParams, mass: float = 0.99, limit: int = 10**7) -> int:
    """Smallest cap whose top-coordinate marginal mass reaches ``mass``.

    The marginal tail decays like ``i ** (-tau / b_0)``, so the cap grows
    like ``(1 - mass) ** (-b_0 / tau)``.  The joint table carries the same
    mass at that cap since every coordinate is bounded by ``i_0``.
    """
    k = params.k
    chunk = 1024
    start = k + 1
    acc = 0.0
    while start <= limit:
        i = np.arange(start, start + chunk)
        cs = acc + np.cumsum(marginal_closed_form(params, i))
        hit = np.flatnonzero(cs >= mass)
        if hit.size:
            return int(i[hit[0]])
        acc = float(cs[-1])
        start += chunk
        chunk *= 2
    raise CapError(f"mass {mass} not reached below {limit}")


def write_marginal_csv(table: MarginalTable, path) -> None:
    with text_output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["i", "probability"])
        for i, v in zip(table.support.tolist(), table.values.tolist()):
            w.writerow([i, repr(v)])
