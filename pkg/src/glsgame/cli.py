"""Command-line experiment harness.

Subcommands: equilibrium, design, sweep, poa, ols, equivalence, simulate.
Every command reads a config file (grammar in the README), writes CSV tables
into --out, and optionally emits SVG plots.  CSV output is byte-identical
for identical config and seed: rows are sorted, floats use their shortest
round-trip representation, and the trailing metadata line carries only the
tool version, the config hash and the seed.

Exit codes: 0 ok, 2 config error, 3 non-convergence, 4 precondition violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, analysis, estimator, solver
from .config import load_game_config, sweep_population
from .errors import (
    BadExponents,
    BoundFactorUndefined,
    ConfigError,
    CountMismatch,
    DegenerateMoment,
    DuplicatePoint,
    ExactTooLarge,
    InfiniteValue,
    InvalidCost,
    InvalidScalarization,
    NonMonomial,
    NonPositiveValue,
    NotConverged,
    SingularDrawMass,
    SingularInformation,
    TooManyDegenerateDraws,
    TooManyVariables,
    ZeroMass,
    ZeroPrecision,
    ZeroProbability,
)

PRECONDITION_ERRORS = (
    ZeroPrecision,
    BoundFactorUndefined,
    TooManyDegenerateDraws,
    SingularDrawMass,
    CountMismatch,
    ExactTooLarge,
    ZeroMass,
    NonMonomial,
    BadExponents,
    NonPositiveValue,
    InvalidCost,
    InvalidScalarization,
    SingularInformation,
    ZeroProbability,
    DegenerateMoment,
    DuplicatePoint,
    TooManyVariables,
    InfiniteValue,
)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(out_dir, name, header, rows, cfg_hash, seed):
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        handle.write(f"# glsgame={__version__} config=sha256:{cfg_hash} seed={seed}\n")
    return path


def _point_rows(space):
    return [(i, space.point_label(i)) for i in range(space.m)]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_equilibrium(args):
    cfg = load_game_config(args.config, seed=args.seed)
    res = solver.minimize_potential(cfg.space, cfg.population, cfg.scalarization,
                                    cfg.solver_options)
    nu = analysis.equilibrium_design_measure(cfg.space, cfg.population, res.profile)
    normalized = nu.nu / nu.b if nu.b > 0 else np.zeros_like(nu.nu)
    n_types = cfg.population.n_types
    header = ["point_index", "point", "mu", "nu_eq", "nu_eq_normalized"] + [
        f"lambda_type{t}" for t in range(n_types)
    ]
    rows = []
    for i, label in _point_rows(cfg.space):
        rows.append([i, label, cfg.space.mu[i], nu.nu[i], normalized[i]]
                    + [res.profile.lam[t, i] for t in range(n_types)])
    _write_csv(args.out, "equilibrium.csv", header, rows, cfg.sha256, args.seed)
    _write_csv(
        args.out, "summary.csv",
        ["potential", "estimation_cost", "kkt_residual", "iterations", "converged"],
        [[res.potential_value, res.estimation_cost, res.kkt_residual,
          res.iterations, res.converged]],
        cfg.sha256, args.seed,
    )
    if args.svg:
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.bar(range(cfg.space.m), normalized, color="#1f77b4")
        ax.set_xticks(range(cfg.space.m))
        ax.set_xticklabels([label for _, label in _point_rows(cfg.space)],
                           rotation=90, fontsize=6)
        ax.set_ylabel("normalized equilibrium measure")
        fig.tight_layout()
        fig.savefig(os.path.join(args.out, "equilibrium.svg"))
        plt.close(fig)
    return 0 if res.converged else 3


def cmd_design(args):
    cfg = load_game_config(args.config, seed=args.seed, need_population=False)
    res = solver.solve_optimal_design(cfg.space, cfg.scalarization, cfg.solver_options)
    rows = [[i, label, res.measure.nu[i], res.criterion]
            for i, label in _point_rows(cfg.space)]
    _write_csv(args.out, "design.csv", ["point_index", "point", "weight", "criterion"],
               rows, cfg.sha256, args.seed)
    _write_csv(
        args.out, "summary.csv",
        ["criterion", "duality_gap", "iterations", "converged"],
        [[res.criterion, res.duality_gap, res.iterations, res.converged]],
        cfg.sha256, args.seed,
    )
    return 0 if res.converged else 3


def _p_label(p):
    if isinstance(p, tuple):
        hi = "inf" if math.isinf(p[1]) else repr(float(p[1]))
        return f"{float(p[0])!r}:{hi}"
    return repr(float(p))


def _p_bounds(family, p):
    if family == "monomial":
        return float(p), float(p)
    if family == "cosh":
        return 2.0, math.inf
    return float(p[0]), float(p[1])


def _sort_key(p):
    if isinstance(p, tuple):
        return (float(p[0]), float(p[1]) if math.isfinite(p[1]) else 1e300)
    return (float(p), float(p))


def cmd_sweep(args):
    cfg = load_game_config(args.config, seed=args.seed, need_population=False,
                           need_sweep=True)
    sweep = cfg.sweep
    scal_for_q = {}
    from .model import Scalarization

    def scal_of(q):
        if q not in scal_for_q:
            scal_for_q[q] = cfg.scalarization if q == cfg.scalarization.q else (
                Scalarization.trace() if q == 1.0 else Scalarization.pow_trace(q))
        return scal_for_q[q]

    tasks = [(p, q, n) for p, q in sweep.series() for n in sweep.n_grid]

    def solve_point(task):
        p, q, n = task
        scal = scal_of(q)
        pop = sweep_population(sweep.family, p, n)
        res = solver.minimize_potential(cfg.space, pop, scal, cfg.solver_options)
        nu = analysis.equilibrium_design_measure(cfg.space, pop, res.profile)
        total_cost = estimator.social_cost(cfg.space, pop, res.profile, scal)
        return (p, q, n, res, nu.b, total_cost)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            solved = list(pool.map(solve_point, tasks))
    else:
        solved = [solve_point(t) for t in tasks]
    solved.sort(key=lambda rec: (rec[2], _sort_key(rec[0]), rec[1]))

    predicted = {}
    if sweep.family == "monomial":
        for p, q in sweep.series():
            scal = scal_of(q)
            single = solver.minimize_potential(
                cfg.space, sweep_population("monomial", p, 1), scal, cfg.solver_options)
            predicted[(p, q)] = (single.profile, single.estimation_cost, single.converged)

    rows = []
    all_converged = True
    series_points = {}
    for p, q, n, res, total_precision, total_cost in solved:
        all_converged &= res.converged
        series_points.setdefault((p, q), []).append((n, res.estimation_cost))
        pred_cost = None
        degr = None
        if sweep.family == "monomial":
            single_profile, single_cost, single_ok = predicted[(p, q)]
            all_converged &= single_ok
            pred_cost = n ** (-q * (p - 1.0) / (p + q)) * single_cost
            degr = analysis.degradation_ratio(n, p, q)
        rows.append([n, _p_label(p), q, res.estimation_cost, pred_cost, degr,
                     total_cost, total_precision, res.kkt_residual])
    _write_csv(
        args.out, "sweep.csv",
        ["n", "p", "q", "estimation_cost", "predicted_scaling_cost",
         "degradation_ratio_rate", "total_cost", "total_precision", "kkt_residual"],
        rows, cfg.sha256, args.seed,
    )

    rate_rows = []
    for (p, q), pts in sorted(series_points.items(), key=lambda kv: (_sort_key(kv[0][0]), kv[0][1])):
        fit = analysis.rate_fit(pts)
        p_lo, p_hi = _p_bounds(sweep.family, p)
        bounds = analysis.asymptotic_bounds(p_lo, p_hi, q)
        if math.isinf(p_hi):
            # unbounded upper degree: only the upper-bound exponent is reported
            alpha, lower = None, None
        else:
            alpha, lower = bounds.alpha, bounds.lower_exponent
        rate_rows.append([_p_label(p), q, fit.slope, fit.intercept, fit.residual,
                          bounds.upper_exponent, alpha, lower])
    _write_csv(
        args.out, "rates.csv",
        ["p", "q", "slope", "intercept", "max_log_residual",
         "upper_exponent", "alpha", "lower_exponent"],
        rate_rows, cfg.sha256, args.seed,
    )

    if args.svg:
        _sweep_svg(args, sweep, series_points)
    return 0 if all_converged else 3


def _sweep_svg(args, sweep, series_points):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for (p, q), pts in sorted(series_points.items(),
                              key=lambda kv: (_sort_key(kv[0][0]), kv[0][1])):
        ns = np.array([n for n, _ in pts], dtype=float)
        cs = np.array([c for _, c in pts], dtype=float)
        scale = cs[0] if args.normalize else 1.0
        line, = ax.loglog(ns, cs / scale, "o-", label=f"p={_p_label(p)}, q={q}")
        p_lo, p_hi = _p_bounds(sweep.family, p)
        bounds = analysis.asymptotic_bounds(p_lo, p_hi, q)
        anchor = cs[0] / scale
        refs = [("upper", bounds.upper_exponent, ":")]
        if math.isfinite(p_hi):
            refs.append(("lower", bounds.lower_exponent, "--"))
            refs.append(("all-p_max", q * (p_hi - 1.0) / (p_hi + q), "-."))
        for _name, exponent, style in refs:
            ax.loglog(ns, anchor * (ns / ns[0]) ** -exponent, style,
                      color=line.get_color(), alpha=0.5, linewidth=0.8)
    ax.set_xlabel("players n")
    ax.set_ylabel("estimation cost" + (" (normalized)" if args.normalize else ""))
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(args.out, "sweep.svg"))
    plt.close(fig)


def cmd_poa(args):
    cfg = load_game_config(args.config, seed=args.seed, need_population=False)
    rows = []
    if cfg.sweep is not None:
        series = list(cfg.sweep.series())
        if len(series) != 1:
            raise ConfigError("poa sweeps take exactly one (p, q) series")
        p, q = series[0]
        from .model import Scalarization

        scal = Scalarization.trace() if q == 1.0 else Scalarization.pow_trace(q)
        for n in cfg.sweep.n_grid:
            pop = sweep_population(cfg.sweep.family, p, n)
            rep = analysis.poa_report(cfg.space, pop, scal, cfg.solver_options)
            rows.append([n, rep.poa, rep.bound, rep.ratio_to_bound])
    else:
        if cfg.population is None:
            raise ConfigError("poa needs a [population] or a [sweep] section")
        rep = analysis.poa_report(cfg.space, cfg.population, cfg.scalarization,
                                  cfg.solver_options)
        rows.append([cfg.population.n, rep.poa, rep.bound, rep.ratio_to_bound])
    _write_csv(args.out, "poa.csv", ["n", "poa", "bound", "ratio_to_bound"],
               rows, cfg.sha256, args.seed)
    return 0


def cmd_ols(args):
    cfg = load_game_config(args.config, seed=args.seed, need_population=False)
    raw = cfg.raw
    family = raw.get("ols", "family")
    mode = raw.get("ols", "mode", "exact")
    if mode not in ("exact", "monte_carlo"):
        raise ConfigError(f"unknown ols mode '{mode}'", raw.line_of("ols", "mode"))
    samples = int(raw.get("ols", "samples", "10000"))
    rows = []
    if family == "counterexample":
        p = float(raw.get("ols", "p", "3"))
        n_text = raw.get("ols", "n", "9, 99, 999")
        n_values = [int(v) for v in n_text.replace(",", " ").split()]
        for n in sorted(n_values):
            pop, profile = analysis.solve_ols_counterexample(n, p)
            c_ols = estimator.ols_cost(cfg.space, pop, profile, cfg.scalarization,
                                       mode=mode, samples=samples, seed=args.seed)
            gls_eq = solver.minimize_potential(cfg.space, pop, cfg.scalarization,
                                               cfg.solver_options)
            rows.append([n, c_ols, gls_eq.estimation_cost,
                         analysis.ols_counterexample_reference(n, p)])
    elif family is None:
        if cfg.population is None:
            raise ConfigError("ols needs [population] or ols.family = counterexample")
        eq = solver.minimize_potential(cfg.space, cfg.population, cfg.scalarization,
                                       cfg.solver_options)
        if not eq.converged:
            raise NotConverged("equilibrium solve did not converge")
        c_ols = estimator.ols_cost(cfg.space, cfg.population, eq.profile,
                                   cfg.scalarization, mode=mode, samples=samples,
                                   seed=args.seed)
        rows.append([cfg.population.n, c_ols, eq.estimation_cost, None])
    else:
        raise ConfigError(f"unknown ols family '{family}'", raw.line_of("ols", "family"))
    _write_csv(
        args.out, "ols.csv",
        ["n", "c_ols_at_equilibrium", "c_gls_counterpart", "reference_formula_value"],
        rows, cfg.sha256, args.seed,
    )
    return 0


def cmd_equivalence(args):
    cfg = load_game_config(args.config, seed=args.seed)
    raw = cfg.raw
    epsilon = args.epsilon if args.epsilon is not None else float(
        raw.get("equivalence", "epsilon", "0.25"))
    trials = args.trials if args.trials is not None else int(
        raw.get("equivalence", "trials", "50"))
    report = analysis.equivalence_check(cfg.space, cfg.population, cfg.scalarization,
                                        epsilon, trials, args.seed, cfg.solver_options)
    rows = []
    for i, trial in enumerate(report.trials):
        rows.append([i, trial.phi_ci_eq, trial.phi_ci_at_model_eq, trial.phi_at_ci_eq,
                     trial.sandwich_lower_ok, trial.sandwich_upper_ok,
                     trial.exchange_ci_ok, trial.exchange_model_ok, trial.passed])
    _write_csv(
        args.out, "equivalence.csv",
        ["trial", "phi_ci_eq", "phi_ci_at_model_eq", "phi_at_ci_eq",
         "sandwich_lower_ok", "sandwich_upper_ok", "exchange_ci_ok",
         "exchange_model_ok", "passed"],
        rows, cfg.sha256, args.seed,
    )
    _write_csv(
        args.out, "summary.csv",
        ["pass_rate", "probability_floor", "trials", "epsilon", "phi_model",
         "r_plus", "r_minus"],
        [[report.pass_fraction, report.probability_floor, trials, epsilon,
          report.phi_model, report.r_plus, report.r_minus]],
        cfg.sha256, args.seed,
    )
    return 0


def cmd_simulate(args):
    cfg = load_game_config(args.config, seed=args.seed)
    raw = cfg.raw
    beta_text = raw.get("simulate", "beta")
    if beta_text is None:
        beta = np.zeros(cfg.space.d)
    else:
        beta = np.array([float(tok) for tok in beta_text.replace(",", " ").split()])
        if beta.size != cfg.space.d:
            raise ConfigError(f"beta has {beta.size} entries for d={cfg.space.d}",
                              raw.line_of("simulate", "beta"))
    trials = args.trials if args.trials is not None else int(
        raw.get("simulate", "trials", "100000"))
    eq = solver.minimize_potential(cfg.space, cfg.population, cfg.scalarization,
                                   cfg.solver_options)
    profile_text = raw.get("simulate", "profile")
    if profile_text == "equilibrium" or profile_text is None:
        profile = eq.profile
    else:
        values = [float(tok) for tok in profile_text.replace(",", " ").split()]
        profile = np.array(values).reshape(cfg.population.n_types, cfg.space.m)
    sim = estimator.simulate_gls(cfg.space, cfg.population, profile, beta,
                                 trials, args.seed)
    rows = []
    d = cfg.space.d
    for i in range(d):
        for j in range(d):
            se = sim.cov_stderr[i, j]
            z = (sim.empirical_cov[i, j] - sim.theoretical_cov[i, j]) / se if se > 0 else 0.0
            rows.append(["cov", i, j, sim.empirical_cov[i, j],
                         sim.theoretical_cov[i, j], z])
    for i in range(d):
        se = sim.beta_stderr[i]
        z = (sim.mean_beta[i] - sim.beta[i]) / se if se > 0 else 0.0
        rows.append(["bias", i, None, sim.mean_beta[i] - sim.beta[i], 0.0, z])
    rows.append(["degenerate_draws", None, None, float(sim.degenerate_draws), 0.0, 0.0])
    _write_csv(
        args.out, "simulate.csv",
        ["quantity", "i", "j", "empirical", "theoretical", "z_score"],
        rows, cfg.sha256, args.seed,
    )
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser():
    parser = argparse.ArgumentParser(
        prog="glsgame",
        description="Equilibria, optimal design and rate experiments for "
                    "strategic data provision in GLS regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **extra):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the game config")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--jobs", type=int, default=1)
        cmd.add_argument("--normalize", action="store_true",
                         help="normalize sweep series to coincide at the smallest n")
        cmd.add_argument("--svg", action="store_true", help="also emit SVG plots")
        for flag, kwargs in extra.items():
            cmd.add_argument(flag, **kwargs)
        cmd.set_defaults(func=func)
        return cmd

    add("equilibrium", cmd_equilibrium)
    add("design", cmd_design)
    add("sweep", cmd_sweep)
    add("poa", cmd_poa)
    add("ols", cmd_ols)
    add("equivalence", cmd_equivalence,
        **{"--epsilon": dict(type=float, default=None),
           "--trials": dict(type=int, default=None)})
    add("simulate", cmd_simulate, **{"--trials": dict(type=int, default=None)})
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 3
    except PRECONDITION_ERRORS as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
