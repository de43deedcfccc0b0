"""End-to-end validation suites with fixed seeds and stated tolerances.

Every suite returns a ``SuiteResult``; ``run_suites`` runs a selection in
the canonical order.  Suite ``i`` draws from ``replicate_rng(seed, i)`` so
adding or removing suites never shifts another suite's stream.
"""

from __future__ import annotations

import functools
import math
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from . import bicoupling, limitlaw, model, recursion, regvar
from .params import ModelParams
from .parallel import replicate_rng
from .tables import table_from_samples
from .stats import EmpiricalDist, chi_square_gof, gamma_cdf, ks_statistic, tv_distance

DEFAULT_SEED = 20240607
K_GRID = (0, 1, 2, 3)
DELTA_GRID = (-0.5, 0.0, 1.0, 2.5)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict
    tolerance: dict
    seed: int
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)} (tol {_fmt(self.tolerance.get(k))})" for k, v in self.measured.items())
        return f"{head} {self.name}: {parts} [{self.seconds:.1f}s]"


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


# ---------------------------------------------------------------- suites

def suite_identities(rng, threads=1) -> tuple[bool, dict, dict, dict]:
    """Counting identities checked inside the kernel at every step."""
    n, seeds = 10**4, 10
    failures = []
    checked = 0
    for k, d in product(K_GRID, DELTA_GRID):
        p = ModelParams(k, d)
        for s in range(seeds):
            g = np.random.default_rng(rng.integers(2**63))
            st = model.new_complex(p)
            try:
                model.run(st, n, g, check=True)
            except model.InvariantError as exc:
                failures.append(f"k={k} delta={d} seed#{s}: {exc}")
                continue
            rep = model.invariant_report(st)
            if not rep["ok"]:
                failures.append(f"k={k} delta={d} seed#{s}: final report {rep}")
            checked += 1
    return (not failures, {"violations": len(failures)}, {"violations": 0},
            {"runs": checked, "steps_per_run": n, "failures": failures[:5]})


def suite_recursion(rng, threads=1):
    base_err = 0.0
    closed_err = 0.0
    for k, d in product(K_GRID, DELTA_GRID):
        p = ModelParams(k, d)
        t = recursion.solve_joint_pmf(p, 60)
        want = p.tau / (p.tau + p.b[0] + d)
        base_err = max(base_err, abs(t[p.minimal_vector()] - want))
        marg = recursion.marginalize(t, 0)
        iv = np.arange(k + 1, 61)
        cf = recursion.marginal_closed_form(p, iv)
        from_joint = np.array([marg.get(int(i), 0.0) for i in iv])
        from_rec = recursion.solve_marginal_pmf(p, 60).values
        closed_err = max(closed_err, float(np.max(np.abs(from_joint - cf))),
                         float(np.max(np.abs(from_rec - cf))))
    p = ModelParams(1, 0.0)
    t = recursion.solve_joint_pmf(p, 4)
    fixed = {"p(2,1)": t[(2, 1)], "p(3,1)": t[(3, 1)], "p(3,2)": t[(3, 2)]}
    fixed_err = max(abs(fixed["p(2,1)"] - 0.6), abs(fixed["p(3,1)"] - 3 / 35),
                    abs(fixed["p(3,2)"] - 3 / 35))
    ok = base_err < 1e-12 and fixed_err < 1e-12 and closed_err < 1e-10
    return (ok, {"base_case_error": base_err, "fixed_values_error": fixed_err,
                 "closed_form_error": closed_err},
            {"base_case_error": 1e-12, "fixed_values_error": 1e-12, "closed_form_error": 1e-10},
            fixed)


def suite_slln(rng, threads=1):
    p = ModelParams(1, 0.0)
    n, top = 2 * 10**5, 20
    st = model.run(model.new_complex(p), n, rng, check=False)
    emp = model.empirical_pmf(st).restrict(top)
    ref = recursion.solve_joint_pmf(p, top)
    tv = tv_distance(emp, ref)
    return tv < 0.02, {"tv": tv}, {"tv": 0.02}, {"n": n, "max_i0": top}


def _sampler_tv(p, size, cap, rng, threads):
    s = limitlaw.sample_limit_degree(p, rng, size, threads=threads)
    emp = table_from_samples(p, s.d).normalized().restrict(cap)
    return tv_distance(emp, recursion.solve_joint_pmf(p, cap))


def suite_sampler(rng, threads=1):
    size = 10**6
    tv1 = _sampler_tv(ModelParams(1, 0.0), size, 20, rng, threads)
    tv2 = _sampler_tv(ModelParams(2, 1.0), size, 15, rng, threads)
    return (tv1 < 0.01 and tv2 < 0.015, {"tv_k1_d0": tv1, "tv_k2_d1": tv2},
            {"tv_k1_d0": 0.01, "tv_k2_d1": 0.015}, {"samples": size, "caps": [20, 15]})


def suite_compound(rng, threads=1):
    size = 10**5
    rows = []
    for k, d in product((1, 2), (0.0, 1.0)):
        p = ModelParams(k, d)
        for z in (1.5, 3.0, 10.0):
            for m in range(1, k + 1):
                sums = limitlaw.sample_compound_sums(p, m, z, rng, size, threads=threads)
                for i in range(m):
                    r, a = p.nb_shape(i), z ** (-p.b[i] / p.b[0])
                    obs = EmpiricalDist.from_samples(sums[:, i])
                    top = int(sums[:, i].max()) + 50
                    ell = np.arange(top + 1)
                    exp = dict(zip(ell.tolist(), limitlaw.nb_pmf(r, a, ell).tolist()))
                    res = chi_square_gof(obs, exp)
                    rows.append({"k": k, "delta": d, "z": z, "m": m, "i": i, "p_value": res.p_value})
    pmin = min(r["p_value"] for r in rows)
    # many tests at level 1e-3: a single rejection is reported as such
    return pmin > 1e-3, {"min_p_value": pmin}, {"min_p_value": 1e-3}, {"tests": rows}


def suite_pgf(rng, threads=1):
    worst_table, worst_mc = -math.inf, 0.0
    rows = []
    for k, d in ((0, 0.0), (1, 0.0), (2, 1.0)):
        p = ModelParams(k, d)
        cap = recursion.cap_for_mass(p, 0.999) if k < 2 else 40
        table = recursion.solve_joint_pmf(p, cap)
        tail = max(0.0, 1.0 - table.total())
        samples = limitlaw.sample_limit_degree(p, rng, 2 * 10**5, threads=threads)
        for x in product((0.3, 0.6, 0.9), repeat=k + 1):
            num = limitlaw.pgf_numeric(p, x)
            tsum = limitlaw.pgf_table_sum(table, x)
            mc, se = limitlaw.pgf_monte_carlo(samples, x)
            # table terms are all below x ** d <= 1, so the truncation error is at most the tail mass
            table_excess = abs(num - tsum) - tail
            z_mc = abs(num - mc) / se if se > 0 else 0.0
            worst_table = max(worst_table, table_excess)
            worst_mc = max(worst_mc, z_mc)
            rows.append({"k": k, "delta": d, "x": list(x), "numeric": num, "table": tsum,
                         "tail_mass": tail, "mc": mc, "se": se,
                         "table_ok": table_excess < 1e-4, "mc_ok": z_mc < 3})
    ok = all(r["table_ok"] and r["mc_ok"] for r in rows)
    return ok, {"worst_table_gap_beyond_tail": worst_table, "worst_mc_z": worst_mc}, \
        {"worst_table_gap_beyond_tail": 1e-4, "worst_mc_z": 3.0}, \
        {"max_abs_table_gap": max(abs(r["numeric"] - r["table"]) for r in rows), "points": rows}


X_SAMPLE_SIZE = 10**5
GAMMA_PARAMS = ((0, 0.0), (1, 0.0))


@functools.lru_cache(maxsize=8)
def _x_samples(k: int, delta: float, seed: int, size: int, threads: int = 1) -> np.ndarray:
    """Shared by the gamma and tail-box suites; the thread count does not change the draws."""
    p = ModelParams(k, delta)
    return regvar.sample_x_vector_approx(p, replicate_rng(seed, 1000 + 10 * k), size,
                                         regvar.DEFAULT_Z_BIG, threads=threads)


def suite_gamma(rng, threads=1, seed=DEFAULT_SEED):
    worst_ks = worst_z = 0.0
    rows = []
    for k, d in GAMMA_PARAMS:
        p = ModelParams(k, d)
        x = _x_samples(k, d, seed, X_SAMPLE_SIZE, threads)
        for i in range(k + 1):
            s = p.marginal_shape(i)
            ks = ks_statistic(x[:, i], lambda v, s=s: gamma_cdf(s, v))
            worst_ks = max(worst_ks, ks)
            rows.append({"k": k, "delta": d, "coordinate": i, "shape": s, "ks": ks})
        for theta in product((0.25, 1.0, 4.0), repeat=k + 1):
            mc, se = regvar.laplace_monte_carlo(x, theta)
            want = regvar.laplace_limit(p, theta)
            zz = abs(mc - want) / se
            worst_z = max(worst_z, zz)
            rows.append({"k": k, "delta": d, "theta": list(theta), "laplace": want, "mc": mc, "se": se})
    ok = worst_ks < 0.01 and worst_z < 3.0
    return ok, {"worst_ks": worst_ks, "worst_laplace_z": worst_z}, \
        {"worst_ks": 0.01, "worst_laplace_z": 3.0}, \
        {"z_big": regvar.DEFAULT_Z_BIG, "samples": X_SAMPLE_SIZE, "rows": rows}


def suite_hill(rng, threads=1):
    size = 10**6
    d0 = limitlaw.sample_limit_degree(ModelParams(0, 0.0), rng, size, threads=threads).d
    d1 = limitlaw.sample_limit_degree(ModelParams(1, 0.0), rng, size, threads=threads).d
    est = {
        "k0_coord0": regvar.hill_tail_index(d0[:, 0]),
        "k1_coord0": regvar.hill_tail_index(d1[:, 0]),
        "k1_coord1": regvar.hill_tail_index(d1[:, 1]),
    }
    target = {"k0_coord0": (2.0, 0.15), "k1_coord0": (1.5, 0.15), "k1_coord1": (3.0, 0.20)}
    rel = {key: abs(est[key] / target[key][0] - 1.0) for key in est}
    ok = all(rel[key] <= target[key][1] for key in est)
    return ok, {f"rel_err_{key}": rel[key] for key in est}, \
        {f"rel_err_{key}": target[key][1] for key in est}, {"estimates": est, "top_fraction": 0.01}


TAIL_BOXES = ((1.0, 1.0), (2.0, 1.0), (1.0, 2.0))


def suite_tailbox(rng, threads=1, seed=DEFAULT_SEED):
    p = ModelParams(1, 0.0)
    d = limitlaw.sample_limit_degree(p, rng, 10**7, threads=threads).d
    x = _x_samples(1, 0.0, seed, X_SAMPLE_SIZE, threads)
    rows = []
    for box in TAIL_BOXES:
        ref = regvar.tail_measure_box(p, box, x, method="quadrature")
        e2 = regvar.empirical_tail_box(p, d, 1e2, box)
        e3 = regvar.empirical_tail_box(p, d, 1e3, box)
        rows.append({"x": list(box), "measure": ref.value, "se": ref.se, "h100": e2, "h1000": e3,
                     "rel_h100": abs(e2 / ref.value - 1), "rel_h1000": abs(e3 / ref.value - 1)})
    worst = max(r["rel_h1000"] for r in rows)
    monotone = all(r["rel_h1000"] <= r["rel_h100"] for r in rows)
    return worst < 0.2 and monotone, {"worst_rel_h1000": worst, "shrinks_with_h": monotone}, \
        {"worst_rel_h1000": 0.2, "shrinks_with_h": True}, {"boxes": rows, "limit_samples": 10**7}


def suite_coupling(rng, threads=1):
    p = ModelParams(1, 0.0)
    rep = bicoupling.coupling_check(p, 15, 10**5, rng)
    mismatches = 0
    for s in range(100):
        seed = int(rng.integers(2**63))
        st = model.run(model.new_complex(p), 1000, np.random.default_rng(seed))
        traj = bicoupling.simulate_bi(p, 1000, np.random.default_rng(seed))
        if not np.array_equal(st.chosen_labels(), traj.state.chosen_labels()):
            mismatches += 1
    ok = rep.tv < 0.02 and mismatches == 0 and rep.indivisible == 0
    return ok, {"tv": rep.tv, "shared_stream_mismatches": mismatches}, \
        {"tv": 0.02, "shared_stream_mismatches": 0}, asdict(rep)


SCALING_PARAMS = ((1, 0.0), (2, 1.0))


def suite_scaling(rng, threads=1):
    out = {}
    for k, d in SCALING_PARAMS:
        p = ModelParams(k, d)
        s = bicoupling.scaling_statistic_samples(p, 10**4, 10**4, rng)
        out[f"ks_k{k}_d{d:g}"] = ks_statistic(s, lambda y, p=p: bicoupling.scaling_limit_cdf(p, y))
    return all(v < 0.05 for v in out.values()), out, {key: 0.05 for key in out}, \
        {"n": 10**4, "replicates": 10**4}


STABILIZATION_PATHS = 16


def _ratio_drift(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Relative change of ``coordinate m / coordinate k`` for ``m < k``."""
    ra = a[:-1] / a[-1]
    rb = b[:-1] / b[-1]
    return np.abs(rb / ra - 1.0)


def _two_sample_ks(a, b) -> float:
    grid = np.sort(np.concatenate([a, b]))
    fa = np.searchsorted(np.sort(a), grid, side="right") / a.size
    fb = np.searchsorted(np.sort(b), grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def suite_stabilization(rng, threads=1):
    n1, n2 = 10**4, 10**5
    drift, corrected, scalar = [], [], []
    for k, d in SCALING_PARAMS:
        p = ModelParams(k, d)
        rates = np.array(p.b) / p.tau
        for _ in range(STABILIZATION_PATHS):
            traj = bicoupling.simulate_bi(p, n2, rng)
            s1, s2 = bicoupling.scaling_statistic(traj, n1), bicoupling.scaling_statistic(traj, n2)
            scalar.append(abs(s2 / s1 - 1.0))
            for label in range(1, k + 3):
                a = bicoupling.scaled_fixed_degrees(traj, n1, label)
                b = bicoupling.scaled_fixed_degrees(traj, n2, label)
                drift.extend(_ratio_drift(a, b).tolist())
                # same vectors rescaled per coordinate by n ** (-b_m / tau)
                ca = a * n1 ** (1.0 / p.tau - rates)
                cb = b * n2 ** (1.0 / p.tau - rates)
                corrected.extend(_ratio_drift(ca, cb).tolist())
    # single-coordinate case: distribution of the scaled degree of label 1 at both n
    p0 = ModelParams(0, 0.0)
    snap = np.array([[bicoupling.scaled_fixed_degrees(t, n, 1)[0] for n in (n1, n2)]
                     for t in (bicoupling.simulate_bi(p0, n2, rng) for _ in range(200))])
    ks0 = _two_sample_ks(snap[:, 0], snap[:, 1])
    med = float(np.median(drift))
    med_scalar = float(np.median(scalar))
    ok = med < 0.10 and med_scalar < 0.10
    pred = {}
    for k, d in SCALING_PARAMS:
        p = ModelParams(k, d)
        pred[f"k{k}_d{d:g}"] = [(n2 / n1) ** ((p.b[m] - p.b[k]) / p.tau) - 1.0 for m in range(k)]
    return ok, {"median_ratio_drift": med, "median_scalar_drift": med_scalar}, \
        {"median_ratio_drift": 0.10, "median_scalar_drift": 0.10}, \
        {"n": [n1, n2], "paths_per_params": STABILIZATION_PATHS,
         "k0_two_sample_ks": ks0, "k0_frac_below_0.01": float(np.mean(snap[:, 1] < 0.01)),
         "median_drift_per_coordinate_rescaling": float(np.median(corrected)),
         "drift_if_coordinate_m_grows_like_n_pow_b_m_over_tau": pred}


SUITES: dict[str, Callable] = {
    "identities": suite_identities,
    "recursion": suite_recursion,
    "slln": suite_slln,
    "sampler": suite_sampler,
    "compound": suite_compound,
    "pgf": suite_pgf,
    "gamma": suite_gamma,
    "hill": suite_hill,
    "tailbox": suite_tailbox,
    "coupling": suite_coupling,
    "scaling": suite_scaling,
    "stabilization": suite_stabilization,
}
_NEEDS_SEED = {"gamma", "tailbox"}


def run_suite(name: str, seed: int = DEFAULT_SEED, threads: int = 1) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    index = list(SUITES).index(name)
    rng = replicate_rng(seed, index)
    kwargs = {"seed": seed} if name in _NEEDS_SEED else {}
    t0 = time.perf_counter()
    ok, measured, tol, details = SUITES[name](rng, threads, **kwargs)
    return SuiteResult(name, bool(ok), measured, tol, int(seed), details, time.perf_counter() - t0)


def run_suites(names=None, seed: int = DEFAULT_SEED, threads: int = 1) -> list[SuiteResult]:
    names = list(SUITES) if not names else list(names)
    for nm in names:
        if nm not in SUITES:
            raise KeyError(f"unknown suite {nm!r}; choose from {', '.join(SUITES)}")
    return [run_suite(nm, seed, threads) for nm in names]


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report(results: list[SuiteResult]) -> dict:
    from .model import SCHEMA
    return _json_safe({
        "schema": SCHEMA,
        "passed": all(r.passed for r in results),
        "suites": [r.to_dict() for r in results],
    })
