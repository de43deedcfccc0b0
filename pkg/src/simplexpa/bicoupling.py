"""Continuous-time birth-immigration (B.I.) representation of the growth.

Each k-simplex label carries a pure birth process started at 1 when the
label is born, jumping from ``x`` to ``x + 1`` at rate ``x + delta``.  A jump
of label ``j`` is an attachment to simplex ``j``.  Two constructions:

``embedded``
    The discrete selection chain of ``model`` plus independent exponential
    holding times with rate equal to the total weight.  The selection
    stream is consumed exactly as ``model.run`` consumes it.
``clocks``
    One exponential clock per live process, held in a binary heap.

Value of a label at time ``T_n`` is ``1 +`` the number of times it was
chosen in steps ``1..n``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels as K
from . import model
from ._textio import text_output
from .params import ModelParams
from .stats import gamma_cdf, gamma_sf, tv_distance
from .tables import table_from_samples


class CouplingError(ValueError):
    pass


@dataclass
class BITrajectory:
    params: ModelParams
    state: model.GrowthState
    jump_times: np.ndarray
    method: str
    _values: np.ndarray | None = field(default=None, repr=False)
    _heap: tuple | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return self.state.step

    def values(self, n: int | None = None) -> np.ndarray:
        """B.I. values at ``T_n`` of the labels alive then (index ``label - 1``)."""
        n = self.steps if n is None else int(n)
        if not 0 <= n <= self.steps:
            raise ValueError(f"n must lie in 0..{self.steps}")
        L = self.params.n_simplices(n)
        chosen = self.state.chosen_labels()[:n] - 1
        return 1 + np.bincount(chosen, minlength=L)[:L]

    def birth_index(self, label: int) -> int:
        return self.state.birth_step(label)

    def labels(self) -> range:
        return range(1, self.state.n_labels + 1)


def _clock_buffers(state: model.GrowthState, params: ModelParams, rng):
    L0 = state.n_labels
    cap_labels = state._verts.shape[0]
    ht = np.zeros(cap_labels)
    hl = np.zeros(cap_labels, dtype=np.int64)
    size = 0
    init = rng.standard_exponential(L0)
    for lab in range(L0):
        size = K.heap_push(ht, hl, size, init[lab] / (1.0 + params.delta), lab)
    vals = np.zeros(cap_labels, dtype=np.int64)
    vals[:L0] = 1
    return vals, (ht, hl, np.array([size], dtype=np.int64))


def simulate_bi(params: ModelParams, steps: int, rng: np.random.Generator,
                method: str = "embedded") -> BITrajectory:
    state = model.new_complex(params)
    if method == "embedded":
        traj = BITrajectory(params, state, np.zeros(1), method)
    elif method == "clocks":
        vals, heap = _clock_buffers(state, params, rng)
        traj = BITrajectory(params, state, np.zeros(1), method, vals, heap)
    else:
        raise ValueError(f"unknown method {method!r}")
    return extend(traj, steps, rng)


def extend(traj: BITrajectory, steps: int, rng: np.random.Generator) -> BITrajectory:
    """Advance ``traj`` by ``steps`` events (in place)."""
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return traj
    p = traj.params
    st = traj.state
    n0 = st.step
    if traj.method == "embedded":
        uniforms = rng.random(steps)
        holds = rng.standard_exponential(steps)
        model.run_with_uniforms(st, uniforms)
        rates = p.tau * (np.arange(n0, n0 + steps) + 1.0) + p.delta
        times = traj.jump_times[-1] + np.cumsum(holds / rates)
        traj.jump_times = np.concatenate([traj.jump_times, times])
        return traj

    old_cap = st._verts.shape[0]
    st.reserve(n0 + steps)
    new_cap = st._verts.shape[0]
    ht, hl, hsize = traj._heap
    if new_cap != old_cap:
        ht = np.concatenate([ht, np.zeros(new_cap - old_cap)])
        hl = np.concatenate([hl, np.zeros(new_cap - old_cap, dtype=np.int64)])
        traj._values = np.concatenate([traj._values, np.zeros(new_cap - old_cap, dtype=np.int64)])
    expo = rng.standard_exponential(steps * (p.k + 2))
    jt = np.zeros(n0 + steps + 1)
    jt[: n0 + 1] = traj.jump_times
    K.grow_clocks(expo, p.k, p.delta, st._verts, st._birth, st._faces, st._fdeg, st._fen,
                  st._ctr, st._maptab, st._newid, st._chosen, traj._values, ht, hl, hsize, jt)
    traj._heap = (ht, hl, hsize)
    traj.jump_times = jt
    return traj


def _void_rows(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    return a.view(np.dtype((np.void, a.dtype.itemsize * a.shape[1]))).reshape(-1)


def dtilde(traj: BITrajectory, n: int | None = None, method: str = "containment") -> np.ndarray:
    """Rows ``k - m + (sum of values over labels containing the m-suffix) / (k - m + 1)``
    for every label alive at ``T_n``.

    ``containment`` sums B.I. values over containing simplices; ``ledger``
    reads the degree ledger and is only available at the current step.
    """
    p = traj.params
    k = p.k
    n = traj.steps if n is None else int(n)
    if method == "ledger":
        if n != traj.steps:
            raise ValueError("the ledger only holds the current step")
        return traj.state.all_degree_vectors()
    if method != "containment":
        raise ValueError(f"unknown method {method!r}")
    L = p.n_simplices(n)
    vals = traj.values(n)
    V = traj.state._verts[:L]
    out = np.zeros((L, k + 1), dtype=np.int64)
    for m in range(k + 1):
        combos = list(combinations(range(k + 1), m + 1))
        sub = np.vstack([V[:, list(c)] for c in combos])
        w = np.tile(vals, len(combos))
        keys = np.concatenate([_void_rows(sub), _void_rows(V[:, k - m:])])
        _, inv = np.unique(keys, return_inverse=True)
        inv = inv.reshape(-1)
        sums = np.bincount(inv[: sub.shape[0]], weights=w, minlength=int(inv.max()) + 1)
        tot = np.rint(sums[inv[sub.shape[0]:]]).astype(np.int64)
        if np.any(tot % (k - m + 1)):
            raise ArithmeticError(f"containment sum at m={m} is not divisible by {k - m + 1}")
        out[:, m] = k - m + tot // (k - m + 1)
    return out


def dtilde_label(traj: BITrajectory, label: int, n: int | None = None) -> tuple[int, ...]:
    """Containment vector of one label, by direct scan."""
    p = traj.params
    n = traj.steps if n is None else int(n)
    if not 1 <= label <= p.n_simplices(n):
        raise KeyError(f"label {label} is not alive at step {n}")
    L = p.n_simplices(n)
    vals = traj.values(n)
    out = np.zeros(p.k + 1, dtype=np.int64)
    ok = K.containment_dtilde(p.k, traj.state._verts[:L], vals, L, label - 1, out)
    if not ok:
        raise ArithmeticError("containment sum is not divisible")
    return tuple(int(x) for x in out)


def scaling_statistic(traj: BITrajectory, n: int) -> float:
    """``n ** (1/tau) * exp(-T_n)``."""
    if not 1 <= n <= traj.steps:
        raise ValueError(f"n must lie in 1..{traj.steps}")
    return float(math.exp(math.log(n) / traj.params.tau - traj.jump_times[n]))


def scaling_statistic_samples(params: ModelParams, n: int, replicates: int,
                              rng: np.random.Generator, chunk: int = 256) -> np.ndarray:
    """Independent draws of ``n ** (1/tau) * exp(-T_n)``.

    Holding times do not depend on which labels jump, so ``T_n`` is a sum of
    independent exponentials with rates ``tau (j + 1) + delta``.
    """
    inv_rates = 1.0 / (params.tau * (np.arange(n) + 1.0) + params.delta)
    out = np.empty(int(replicates))
    for lo in range(0, int(replicates), chunk):
        hi = min(lo + chunk, int(replicates))
        e = rng.standard_exponential((hi - lo, n))
        out[lo:hi] = np.exp(math.log(n) / params.tau - e @ inv_rates)
    return out


def scaling_limit_cdf(params: ModelParams, y):
    """CDF of ``G ** (1/tau)`` with ``G ~ Gamma(1 + delta/tau, 1)``."""
    y = np.asarray(y, dtype=np.float64)
    return gamma_cdf(1.0 + params.delta / params.tau, np.maximum(y, 0.0) ** params.tau)


def scaled_fixed_degrees(traj: BITrajectory, n: int, label: int) -> np.ndarray:
    """``n ** (-1/tau)`` times the containment vector of ``label`` at ``T_n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    v = np.array(dtilde_label(traj, label, n), dtype=np.float64)
    return v * n ** (-1.0 / traj.params.tau)


@dataclass(frozen=True)
class CouplingReport:
    n: int
    replicates: int
    tv: float
    chi2_p_value: float
    indivisible: int
    model_support: int
    bi_support: int


def coupling_samples(params: ModelParams, n: int, replicates: int, rng: np.random.Generator,
                     label: int = 1) -> tuple[np.ndarray, np.ndarray, int]:
    """Degree vectors of ``label`` at step ``n`` from the growth model and
    containment vectors from independent clock-driven B.I. runs."""
    if not 1 <= label <= params.n_simplices(n):
        raise KeyError(f"label {label} does not exist at step {n}")
    reps = int(replicates)
    a = model.label_vector_samples(params, n, label, rng.random((reps, n)))
    t = model._template(params)
    b = np.zeros((reps, params.k + 1), dtype=np.int64)
    expo = rng.standard_exponential((reps, (params.k + 2) * (n + 1)))
    bad = K.clock_dtilde_batch(expo, params.k, params.delta, t.verts, t.faces, t.fdeg, t.fen,
                               t.maptab, label - 1, b)
    return a, b, int(bad)


def coupling_check(params: ModelParams, n: int, replicates: int, rng: np.random.Generator,
                   label: int = 1) -> CouplingReport:
    if replicates < 100:
        raise CouplingError("need at least 100 replicates")
    a, b, bad = coupling_samples(params, n, replicates, rng, label)
    ta = table_from_samples(params, a)
    tb = table_from_samples(params, b)
    tv = tv_distance(ta.normalized(), tb.normalized())
    p = two_sample_chi2(ta.as_dict(), tb.as_dict())
    return CouplingReport(n, int(replicates), tv, p, bad, len(ta), len(tb))


def two_sample_chi2(ca: dict, cb: dict, min_cell: float = 5.0) -> float:
    """Homogeneity test of two count tables; returns the p-value.

    Cells in sorted key order are pooled until the smaller sample expects
    at least ``min_cell`` in each.
    """
    na, nb = sum(ca.values()), sum(cb.values())
    keys = sorted(set(ca) | set(cb))
    cells: list[list[float]] = []
    acc = [0.0, 0.0]
    for x in keys:
        acc[0] += ca.get(x, 0)
        acc[1] += cb.get(x, 0)
        if (acc[0] + acc[1]) / (na + nb) * min(na, nb) >= min_cell:
            cells.append(acc)
            acc = [0.0, 0.0]
    if acc[0] + acc[1] > 0:
        if cells:
            cells[-1][0] += acc[0]
            cells[-1][1] += acc[1]
        else:
            cells.append(acc)
    if len(cells) < 2:
        return 1.0
    stat = 0.0
    for oa, ob in cells:
        pooled = (oa + ob) / (na + nb)
        stat += (oa - pooled * na) ** 2 / (pooled * na) + (ob - pooled * nb) ** 2 / (pooled * nb)
    return float(gamma_sf((len(cells) - 1) / 2.0, stat / 2.0))


def write_trajectory_csv(traj: BITrajectory, path) -> None:
    with text_output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["event_index", "T_n", "chosen_label"])
        for n, c in enumerate(traj.state.chosen_labels().tolist(), start=1):
            w.writerow([n, repr(float(traj.jump_times[n])), c])
