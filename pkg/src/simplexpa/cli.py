"""Command-line entry point.

Every subcommand takes the same flags.  Values come from the command line,
then from a JSON config file (``--config``), then from ``DEFAULTS``.
Reports go to ``--out`` (or standard output); one-line summaries go to
standard error.  Exit status: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import bicoupling, limitlaw, model, recursion, regvar, validation
from ._textio import text_output
from .model import SCHEMA
from .params import ModelParams, ParameterError

SUBCOMMANDS = ("simulate", "recursion", "limit-sample", "pgf", "tail", "bi", "validate")

DEFAULTS = {
    "k": 1,
    "delta": 0.0,
    "n": 1000,
    "samples": 10000,
    "seed": validation.DEFAULT_SEED,
    "replicates": 0,
    "cap": None,
    "out": None,
    "format": "json",
    "suite": None,
    "threads": 1,
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    k: int
    delta: float
    n: int
    samples: int
    seed: int
    replicates: int
    cap: int | None
    out: str | None
    format: str
    suite: list[str] | None
    threads: int

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.k, self.delta)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=int, help="simplex dimension")
    common.add_argument("--delta", type=float, help="attachment offset, > -1")
    common.add_argument("--n", type=int, help="growth steps")
    common.add_argument("--samples", type=int, help="Monte Carlo draws")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--replicates", type=int, help="independent replicate runs")
    common.add_argument("--cap", type=int, help="largest top degree kept in exact tables")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--suite", action="append",
                        help=f"validation suite, repeatable or comma-separated: {', '.join(validation.SUITES)}")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on this)")
    common.add_argument("--config", help="JSON file of flag values")
    ap = argparse.ArgumentParser(prog="simplexpa", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    helps = {
        "simulate": "grow a complex and write its degree-vector counts",
        "recursion": "solve the limiting joint and marginal pmfs",
        "limit-sample": "draw limiting degree vectors",
        "pgf": "joint pgf by quadrature, table sum and Monte Carlo",
        "tail": "tail-measure boxes against scaled empirical frequencies",
        "bi": "continuous-time birth-immigration trajectory",
        "validate": "run the validation suites",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return ap


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _split_suites(raw) -> list[str] | None:
    if raw is None:
        return None
    items = [raw] if isinstance(raw, str) else list(raw)
    names = [s.strip() for item in items for s in str(item).split(",") if s.strip()]
    return names or None


def build_config(argv=None) -> RunConfig:
    args = _parser().parse_args(argv)
    values = dict(DEFAULTS)
    values.update(_load_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    cfg = RunConfig(subcommand=args.subcommand, suite=_split_suites(values.pop("suite")), **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.params
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.n < 0:
        raise UsageError("--n must be nonnegative")
    if cfg.samples < 1:
        raise UsageError("--samples must be positive")
    if cfg.replicates < 0:
        raise UsageError("--replicates must be nonnegative")
    if cfg.threads < 1:
        raise UsageError("--threads must be positive")
    if cfg.format not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    if cfg.cap is not None and cfg.cap < cfg.k + 1:
        raise UsageError(f"--cap must be at least k+1 = {cfg.k + 1}")
    if cfg.suite:
        bad = [s for s in cfg.suite if s not in validation.SUITES]
        if bad:
            raise UsageError(f"unknown suite {', '.join(bad)}; choose from {', '.join(validation.SUITES)}")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit_json(cfg: RunConfig, payload: dict) -> None:
    body = json.dumps({"schema": SCHEMA, **payload}, indent=1, allow_nan=False) + "\n"
    if cfg.out is None:
        sys.stdout.write(body)
    else:
        Path(cfg.out).write_text(body)


def _emit_csv(cfg: RunConfig, writer) -> None:
    writer(sys.stdout if cfg.out is None else cfg.out)


def _aux_path(cfg: RunConfig, suffix: str) -> str | None:
    if cfg.out is None:
        return None
    p = Path(cfg.out)
    return str(p.with_name(p.stem + suffix + p.suffix))


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg: RunConfig) -> int:
    st = model.run(model.new_complex(cfg.params), cfg.n, cfg.rng(), check=True)
    rep = model.invariant_report(st)
    if cfg.format == "json":
        _emit_json(cfg, {**model.snapshot(st), "schema": SCHEMA, "seed": cfg.seed, "invariants": rep})
    else:
        _emit_csv(cfg, lambda t: model.degree_counts(st).to_csv(t, "count", integer=True))
    _note(f"simulate k={cfg.k} delta={cfg.delta:g} n={cfg.n}: {rep['labels']} k-simplices, "
          f"k-degree sum {rep['k_degree_sum']}, invariants {'ok' if rep['ok'] else 'VIOLATED'}")
    return 0 if rep["ok"] else 1


def _cap(cfg: RunConfig) -> int:
    return cfg.cap if cfg.cap is not None else recursion.cap_for_mass(cfg.params)


def cmd_recursion(cfg: RunConfig) -> int:
    p = cfg.params
    cap = _cap(cfg)
    try:
        joint = recursion.solve_joint_pmf(p, cap)
    except recursion.CapError as exc:
        raise UsageError(str(exc)) from exc
    marg = recursion.solve_marginal_pmf(p, cap)
    closed = recursion.marginal_closed_form(p, marg.support)
    from_joint = recursion.marginalize(joint, 0)
    mismatch = max(
        float(np.max(np.abs(marg.values - closed))),
        max(abs(from_joint.get(int(i), 0.0) - float(c)) for i, c in zip(marg.support, closed)),
    )
    consistent = mismatch <= 1e-10
    base = joint[p.minimal_vector()]
    if cfg.format == "json":
        _emit_json(cfg, {
            "k": p.k, "delta": p.delta, "cap": cap, "base_case": base,
            "captured_mass": joint.total(), "marginal_mismatch": mismatch, "consistent": consistent,
            "joint": [{"vector": v, "probability": x}
                      for v, x in zip(joint.sorted().vectors.tolist(), joint.sorted().values.tolist())],
            "marginal": [{"i": i, "probability": x} for i, x in marg.as_dict().items()],
        })
    else:
        _emit_csv(cfg, joint.to_csv)
        aux = _aux_path(cfg, "_marginal")
        if aux is not None:
            recursion.write_marginal_csv(marg, aux)
    vec = ",".join(str(x) for x in p.minimal_vector())
    _note(f"p({vec})={base:.12g}; cap {cap} holds mass {joint.total():.6f}; "
          f"marginal {'consistent' if consistent else 'INCONSISTENT'} (max gap {mismatch:.2e})")
    return 0 if consistent else 1


def cmd_limit_sample(cfg: RunConfig) -> int:
    s = limitlaw.sample_limit_degree(cfg.params, cfg.rng(), cfg.samples, threads=cfg.threads)
    if cfg.format == "json":
        _emit_json(cfg, {"k": cfg.k, "delta": cfg.delta, "seed": cfg.seed, "samples": [
            {"z": z, "d": d} for z, d in zip(s.z.tolist(), s.d.tolist())]})
    else:
        _emit_csv(cfg, s.to_csv)
    means = ", ".join(f"{v:.3f}" for v in s.d.mean(axis=0))
    _note(f"limit-sample k={cfg.k} delta={cfg.delta:g}: {len(s)} draws, coordinate means ({means})")
    return 0


PGF_GRID = (0.3, 0.6, 0.9)


def cmd_pgf(cfg: RunConfig) -> int:
    p = cfg.params
    cap = _cap(cfg)
    table = recursion.solve_joint_pmf(p, cap)
    tail = max(0.0, 1.0 - table.total())
    s = limitlaw.sample_limit_degree(p, cfg.rng(), cfg.samples, threads=cfg.threads)
    rows = []
    for x in product(PGF_GRID, repeat=p.k + 1):
        num = limitlaw.pgf_numeric(p, x)
        mc, se = limitlaw.pgf_monte_carlo(s, x)
        rows.append({"x": list(x), "numeric": num, "table_sum": limitlaw.pgf_table_sum(table, x),
                     "tail_mass": tail, "monte_carlo": mc, "se": se})
    ok = all(abs(r["numeric"] - r["table_sum"]) < 1e-4 + tail for r in rows)
    if cfg.format == "json":
        _emit_json(cfg, {"k": p.k, "delta": p.delta, "cap": cap, "seed": cfg.seed, "points": rows})
    else:
        def write(target):
            with text_output(target) as fh:
                w = csv.writer(fh)
                w.writerow([f"x_{i}" for i in range(p.k + 1)]
                           + ["numeric", "table_sum", "tail_mass", "monte_carlo", "se"])
                for r in rows:
                    w.writerow(r["x"] + [repr(r[c]) for c in ("numeric", "table_sum", "tail_mass",
                                                               "monte_carlo", "se")])
        _emit_csv(cfg, write)
    worst = max(abs(r["numeric"] - r["monte_carlo"]) / r["se"] for r in rows if r["se"] > 0) \
        if any(r["se"] > 0 for r in rows) else 0.0
    _note(f"pgf k={p.k} delta={p.delta:g}: {len(rows)} points, table agreement "
          f"{'ok' if ok else 'FAILED'}, worst Monte Carlo gap {worst:.2f} SE")
    return 0 if ok else 1


def _tail_boxes(k: int) -> list[tuple[float, ...]]:
    unit = (1.0,) * (k + 1)
    return [unit] + [tuple(2.0 if j == i else 1.0 for j in range(k + 1)) for i in range(k + 1)]


def cmd_tail(cfg: RunConfig) -> int:
    """Measure from ``--samples`` limit vectors at large fixed ``z``; empirical
    frequencies from ``100 * --samples`` limit-degree draws."""
    p = cfg.params
    rng = cfg.rng()
    x = regvar.sample_x_vector_approx(p, rng, cfg.samples, threads=cfg.threads)
    d = limitlaw.sample_limit_degree(p, rng, 100 * cfg.samples, threads=cfg.threads).d
    rows = []
    for box in _tail_boxes(p.k):
        est = regvar.tail_measure_box(p, box, x, method="quadrature")
        for h in (1e2, 1e3):
            rows.append({"x": list(box), "h": h, "empirical": regvar.empirical_tail_box(p, d, h, box),
                         "quadrature": est.value, "se": est.se})
    if cfg.format == "json":
        _emit_json(cfg, {"k": p.k, "delta": p.delta, "seed": cfg.seed, "z_big": regvar.DEFAULT_Z_BIG,
                         "boxes": rows})
    else:
        _emit_csv(cfg, lambda t: regvar.write_results_csv(rows, p.k, t))
    worst = max(abs(r["empirical"] / r["quadrature"] - 1) for r in rows if r["h"] == 1e3)
    _note(f"tail k={p.k} delta={p.delta:g}: {len(rows) // 2} boxes, worst relative gap at h=1e3 {worst:.3f}")
    return 0


def cmd_bi(cfg: RunConfig) -> int:
    p = cfg.params
    rng = cfg.rng()
    traj = bicoupling.simulate_bi(p, cfg.n, rng)
    stat = bicoupling.scaling_statistic(traj, cfg.n) if cfg.n >= 1 else None
    values_sum = int(traj.values().sum())
    ok = values_sum == p.degree_sum(cfg.n)
    coupling = None
    if cfg.replicates:
        if cfg.n > 30:
            raise UsageError("the coupling comparison needs --n <= 30")
        try:
            coupling = asdict(bicoupling.coupling_check(p, cfg.n, cfg.replicates, rng))
        except bicoupling.CouplingError as exc:
            raise UsageError(str(exc)) from exc
    if cfg.format == "json":
        first = {str(j): list(bicoupling.dtilde_label(traj, j)) for j in range(1, p.k + 3)}
        _emit_json(cfg, {
            "k": p.k, "delta": p.delta, "n": cfg.n, "seed": cfg.seed,
            "T_n": float(traj.jump_times[-1]), "scaling_statistic": stat,
            "value_sum": values_sum, "value_sum_expected": p.degree_sum(cfg.n),
            "initial_label_vectors": first,
            "events": [{"event_index": i + 1, "T_n": float(traj.jump_times[i + 1]), "chosen_label": int(c)}
                       for i, c in enumerate(traj.state.chosen_labels().tolist())],
            "coupling": coupling,
        })
    else:
        _emit_csv(cfg, lambda t: bicoupling.write_trajectory_csv(traj, t))
    msg = f"bi k={p.k} delta={p.delta:g} n={cfg.n}: T_n={traj.jump_times[-1]:.6f}"
    if stat is not None:
        msg += f", n^(1/tau) exp(-T_n)={stat:.6f}"
    if coupling is not None:
        msg += f", coupling TV={coupling['tv']:.4f} (p={coupling['chi2_p_value']:.3g})"
    _note(msg)
    return 0 if ok else 1


def cmd_validate(cfg: RunConfig) -> int:
    results = []
    for name in cfg.suite or list(validation.SUITES):
        r = validation.run_suite(name, cfg.seed, cfg.threads)
        _note(r.summary())
        results.append(r)
    rep = validation.report(results)
    if cfg.format == "json":
        _emit_json(cfg, {k: v for k, v in rep.items() if k != "schema"})
    else:
        def write(target):
            with text_output(target) as fh:
                w = csv.writer(fh)
                w.writerow(["suite", "passed", "measure", "value", "tolerance", "seed"])
                for r in results:
                    for key, v in r.measured.items():
                        w.writerow([r.name, r.passed, key, v, r.tolerance.get(key), r.seed])
        _emit_csv(cfg, write)
    failed = [r.name for r in results if not r.passed]
    _note(f"validate: {len(results) - len(failed)}/{len(results)} suites passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "recursion": cmd_recursion,
    "limit-sample": cmd_limit_sample,
    "pgf": cmd_pgf,
    "tail": cmd_tail,
    "bi": cmd_bi,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    try:
        cfg = build_config(argv)
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"simplexpa: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except OSError as exc:
        print(f"simplexpa: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
