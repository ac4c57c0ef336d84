"""Command-line experiment runner.

Every subcommand expands its flags into a list of independent runs, executes
them (optionally in a process pool) and writes one CSV trace plus one
``key=value`` metadata sidecar per run into ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (SmoothingSeries, TikhonovProblem, at_bound_matrices, smoothing_derivative,
                       smoothing_value, tikhonov_solution)
from .caputo import FracParams, gamma_shift, scaled_cfd_series
from .data import (FunctionApproxTask, RandomProblemSpec, gen_function_approx, gen_gaussian_lsq,
                   gen_illcond, init_network, load_regression, rng_streams)
from .errors import (CacheMissing, ConfigError, DegenerateDirection, DimensionMismatch, DomainError,
                     EmptyDataset, NoConvergence, NonFiniteIterate, NotSPD, ParseError, PoleError)
from .linalg import condition_number, extreme_singular_values, spd_solve
from .objectives import LANDSCAPE_QUARTIC, TwoLayerTanhNet, taylor_coefficients
from .optimizers import (AT, GD, NA, ExactQuadratic, Fixed, GridBest32, ScaledFixed, Trace, run,
                         run_nn_training)

log = logging.getLogger("cfgd")

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

CONFIG_ERRORS = (ConfigError, DomainError, DimensionMismatch)
DATA_ERRORS = (ParseError, EmptyDataset, OSError)
NUMERIC_ERRORS = (NonFiniteIterate, NoConvergence, NotSPD, DegenerateDirection, PoleError, CacheMissing)


# --- flag parsing helpers ------------------------------------------------------


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_eta(text: str):
    """'exact', 'grid32' or 'fixed:<value>'."""
    if text == "exact":
        return ExactQuadratic()
    if text == "grid32":
        return GridBest32()
    kind, sep, val = text.partition(":")
    if kind == "fixed" and sep:
        try:
            return Fixed(float(val))
        except ValueError:
            pass
    raise ConfigError(f"--eta must be exact, grid32 or fixed:<value>, got {text!r}")


def resolve_gammas(args, default_gammas) -> list[float]:
    """Turn --gamma or --beta lists into gammas (exactly one may be given)."""
    if args.gamma is not None and args.beta is not None:
        raise ConfigError("give --gamma or --beta, not both")
    if args.beta is not None:
        return [b - gamma_shift(args.alpha) for b in args.beta]
    if args.gamma is not None:
        return list(args.gamma)
    return list(default_gammas)


def tag(value: float) -> str:
    return f"{value:g}".replace("-", "m").replace(".", "p")


# --- jobs ----------------------------------------------------------------------


@dataclass
class Job:
    name: str
    kind: str
    options: dict = field(default_factory=dict)


@dataclass
class Result:
    name: str
    csv: str
    meta: dict
    error: str | None = None


def _finish(name, trace: Trace, meta: dict, error=None) -> Result:
    merged = {"schema_version": SCHEMA_VERSION, "package_version": __version__}
    merged.update(trace.metadata)
    merged.update(meta)
    if error is not None:
        merged["error"] = error
    return Result(name, trace.csv_text(), merged, error)


def _quad_random_job(o) -> Result:
    spec = RandomProblemSpec(o["d"], o["m"], o["seed"])
    obj = gen_gaussian_lsq(spec)
    x0 = rng_streams(o["seed"])["x0"].standard_normal(o["d"])
    c = np.ones(o["d"])
    gamma = o["gamma"]
    x_star = spd_solve(obj.A, -obj.b)
    x_tik = tikhonov_solution(TikhonovProblem(obj.W, obj.y, gamma, c))
    schedule = GD() if gamma == 0.0 else NA(FracParams.from_gamma(o["alpha"], gamma), c)
    policy = o["policy"]
    if isinstance(policy, Fixed):
        policy = ScaledFixed(policy.eta)
    trace = run(schedule, obj, policy, x0, o["iters"], grad_tol=None, x_star=x_star, x_tik=x_tik,
                keep_iterates=False, seed=o["seed"])
    return _finish(o["name"], trace, {"gamma": gamma, "terminal": "ones",
                                      "cond_A": condition_number(obj.A)})


def _bound_column(obj, gamma, eta, history, x0, x_star, k_max):
    """Adaptive-terminal error bound at k = 0..k_max for a fixed stepsize."""
    L = len(history)
    mats = at_bound_matrices(obj.A, gamma, eta, L, k_max)
    # init_errors[j] = ||x^(-j) - x*||, j = 0..L; history is oldest first
    init = [np.linalg.norm(x0 - x_star)] + [np.linalg.norm(h - x_star) for h in reversed(history)]
    return [None] + [mats.bound(k, init) for k in range(1, k_max + 1)]


def _illcond_job(o) -> Result:
    d, m, seed = o["d"], o["m"], o["seed"]
    obj = gen_illcond(RandomProblemSpec(d, m, seed, "illcond"))
    rng = rng_streams(seed)
    x0 = rng["x0"].uniform(-1.0, 1.0, d)
    history = [rng["history"].standard_normal(d) for _ in range(o["L"])]
    x_star = spd_solve(obj.A, -obj.b)
    gamma = o["gamma"]
    schedule = AT(FracParams.from_gamma(o["alpha"], gamma), history)
    trace = run(schedule, obj, o["policy"], x0, o["iters"], grad_tol=None, x_star=x_star,
                dist_tol=o.get("dist_tol"), keep_iterates=False, seed=seed)
    meta = {"cond_A": condition_number(obj.A), "x0": "uniform[-1,1]", "history": "normal"}
    if isinstance(o["policy"], Fixed):
        k_max = min(o["bound_iters"], trace.iterations)
        if k_max >= 1:
            col = _bound_column(obj, gamma, o["policy"].eta, history, x0, x_star, k_max)
            trace.columns["at_bound"] = col + [None] * (len(trace) - len(col))
    return _finish(o["name"], trace, meta)


def _regress_job(o) -> Result:
    seed = o["seed"]
    if o["data"] is not None:
        ds = load_regression(o["data"], o["format"], o["target_col"], o["n_features"])
        obj = ds.to_least_squares()
        meta = {"dataset": os.path.basename(o["data"]), "examples": ds.n_examples,
                "features": ds.n_features}
        if ds.warnings:
            meta["warnings"] = "; ".join(ds.warnings)
    else:
        obj = gen_illcond(RandomProblemSpec(o["d"], o["m"], seed, "illcond"))
        meta = {"dataset": "surrogate_illcond"}
    d = obj.dim
    smin, smax = extreme_singular_values(obj.W)
    if smin > 0:
        meta["cond_W"] = smax / smin
    if not obj.full_rank:
        raise NotSPD("W W^T is singular; the stationary point is not unique")
    x_star = spd_solve(obj.A, -obj.b)
    x0 = rng_streams(seed)["x0"].uniform(-10.0, 10.0, d)
    if o["gamma"] is None:
        schedule = GD()
    else:
        schedule = AT(FracParams.from_gamma(o["alpha"], o["gamma"]), [np.zeros(d)])
    trace = run(schedule, obj, o["policy"], x0, o["iters"], grad_tol=None, x_star=x_star,
                dist_tol=o.get("dist_tol"), keep_iterates=False, seed=seed)
    return _finish(o["name"], trace, meta)


def _nn_job(o) -> Result:
    task = FunctionApproxTask(o["target"], o["m"], o["test_size"], o["seed"])
    z, y, zt, yt = gen_function_approx(task)
    net = TwoLayerTanhNet(z, y, o["n"])
    x0 = init_network(o["n"], o["seed"])
    if o["gamma"] is None:
        schedule = GD()
    else:
        hist_rng = rng_streams(o["seed"])["history"]
        schedule = AT(FracParams(o["alpha"], o["beta"]), [hist_rng.standard_normal(net.dim)])
    meta = {"target": o["target"], "init": "a1,a2~U[-1,1];a3=0",
            "history": "none" if o["gamma"] is None else "normal"}
    try:
        trace = run_nn_training(net, schedule, o["quad_points"], o["iters"], x0, test_z=zt,
                                test_y=yt, seed=o["seed"])
    except NonFiniteIterate as err:
        return _finish(o["name"], err.trace, meta, error=str(err))
    return _finish(o["name"], trace, meta)


def landscape_table(alpha, beta, c, x, zs):
    """Columns z, f(z), F(z), f_lin(z), F_lin(z) for the quartic and its smoothing."""
    coeffs = taylor_coefficients(LANDSCAPE_QUARTIC, c)
    series = SmoothingSeries(alpha, beta, c, tuple(coeffs), K=LANDSCAPE_QUARTIC.degree())
    f = LANDSCAPE_QUARTIC(zs)
    F = smoothing_value(series, zs)
    df = LANDSCAPE_QUARTIC.deriv()(x)
    slope = scaled_cfd_series(coeffs, alpha, beta, c, x)
    f_lin = LANDSCAPE_QUARTIC(x) + df * (zs - x)
    F_lin = smoothing_value(series, x) + slope * (zs - x)
    return np.column_stack([zs, f, F, f_lin, F_lin]), slope, smoothing_derivative(series, x)


def _fmt(v) -> str:
    return f"{v:.17g}"


def _landscape_job(o) -> Result:
    zs = np.linspace(o["zmin"], o["zmax"], o["points"])
    table, slope, dF = landscape_table(o["alpha"], o["beta"], o["c"], o["x"], zs)
    lines = ["z,f,F,f_lin,F_lin"] + [",".join(_fmt(v) for v in row) for row in table]
    meta = {"schema_version": SCHEMA_VERSION, "package_version": __version__, "alpha": o["alpha"],
            "beta": o["beta"], "gamma": o["beta"] - gamma_shift(o["alpha"]), "c": o["c"],
            "x": o["x"], "scaled_cfd_at_x": _fmt(slope), "smoothing_derivative_at_x": _fmt(dF)}
    return Result(o["name"], "\n".join(lines) + "\n", meta)


RUNNERS = {"quad-random": _quad_random_job, "quad-illcond": _illcond_job, "regress": _regress_job,
           "nn": _nn_job, "landscape": _landscape_job}


def execute(job: Job) -> Result:
    opts = dict(job.options, name=job.name)
    return RUNNERS[job.kind](opts)


# --- job expansion ---------------------------------------------------------------


def _common(args) -> dict:
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.iters < 0:
        raise ConfigError("--iters must be non-negative")
    return {"alpha": args.alpha, "iters": args.iters, "seed": args.seed}


def jobs_quad_random(args) -> list[Job]:
    base = _common(args)
    policy = parse_eta(args.eta or "fixed:1")
    if isinstance(policy, Fixed) and not 0.0 < policy.eta < 2.0:
        raise ConfigError("normalized stepsize for quad-random must lie in (0, 2)")
    gammas = resolve_gammas(args, [0.0, 0.15, 0.25, 0.5, 0.75, 1.0, 10.0])
    jobs = []
    for g in gammas:
        if g < 0:
            raise ConfigError(f"quad-random needs gamma >= 0, got {g}")
        opts = dict(base, d=args.d, m=args.m, gamma=g, policy=policy)
        jobs.append(Job(f"quad_random_gamma{tag(g)}", "quad-random", opts))
    return jobs


def jobs_quad_illcond(args) -> list[Job]:
    base = _common(args)
    policy = parse_eta(args.eta or "exact")
    gammas = resolve_gammas(args, [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0])
    Ls = args.L or [1]
    if any(L < 1 for L in Ls):
        raise ConfigError("--L must be >= 1")
    if args.d > args.m:
        raise ConfigError("quad-illcond needs --d <= --m")
    jobs = []
    for L in Ls:
        for g in gammas:
            opts = dict(base, d=args.d, m=args.m, gamma=g, L=L, policy=policy,
                        dist_tol=args.dist_tol, bound_iters=args.bound_iters)
            jobs.append(Job(f"quad_illcond_L{L}_gamma{tag(g)}", "quad-illcond", opts))
    return jobs


def jobs_regress(args) -> list[Job]:
    base = _common(args)
    policy = parse_eta(args.eta or "exact")
    if args.data is None and not args.surrogate:
        raise ConfigError("regress needs --data PATH or --surrogate")
    gammas = resolve_gammas(args, [-20.0, -50.0, -100.0])
    opts = dict(base, data=args.data, format=args.format, target_col=args.target_col,
                n_features=args.n_features, d=args.d, m=args.m, policy=policy,
                dist_tol=args.dist_tol)
    jobs = [Job("regress_gd", "regress", dict(opts, gamma=None))]
    for g in gammas:
        jobs.append(Job(f"regress_gamma{tag(g)}", "regress", dict(opts, gamma=g)))
    return jobs


def jobs_nn(args) -> list[Job]:
    base = _common(args)
    if args.eta not in (None, "grid32"):
        raise ConfigError("nn training uses the grid32 policy with exact coefficient steps")
    s_values = args.quad_points or [10]
    if any(s < 1 for s in s_values):
        raise ConfigError("--quad-points must be >= 1")
    if args.gamma is not None and args.beta is not None:
        raise ConfigError("give --gamma or --beta, not both")
    if args.beta is not None:
        pairs = [(b - gamma_shift(args.alpha), b) for b in args.beta]
    else:
        pairs = [(g, g + gamma_shift(args.alpha)) for g in (args.gamma or [70.0])]
    common = dict(base, target=args.target, m=args.m, n=args.n, test_size=args.test_size)
    jobs = [Job("nn_gd", "nn", dict(common, gamma=None, beta=None, quad_points=1))]
    for g, b in pairs:
        for s in s_values:
            # gamma = 0 is plain gradient descent by convention
            if g == 0.0:
                opts = dict(common, gamma=None, beta=None, quad_points=s)
            else:
                opts = dict(common, gamma=g, beta=b, quad_points=s)
            jobs.append(Job(f"nn_gamma{tag(g)}_s{s}", "nn", opts))
    return jobs


def jobs_landscape(args) -> list[Job]:
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.gamma is not None and args.beta is not None:
        raise ConfigError("give --gamma or --beta, not both")
    if args.gamma is not None:
        betas = [g + gamma_shift(args.alpha) for g in args.gamma]
    else:
        betas = args.beta or [1.0]
    if args.points < 2 or not args.zmin < args.zmax:
        raise ConfigError("need --points >= 2 and --zmin < --zmax")
    jobs = []
    for b in betas:
        for x in args.x:
            opts = {"alpha": args.alpha, "beta": b, "c": args.c, "x": x, "zmin": args.zmin,
                    "zmax": args.zmax, "points": args.points}
            jobs.append(Job(f"landscape_beta{tag(b)}_x{tag(x)}", "landscape", opts))
    return jobs


EXPANDERS = {"quad-random": jobs_quad_random, "quad-illcond": jobs_quad_illcond,
             "regress": jobs_regress, "nn": jobs_nn, "landscape": jobs_landscape}


# --- argument parser ---------------------------------------------------------------


def _add_common(p, alpha_default, iters_default, with_dims=None):
    p.add_argument("--alpha", type=float, default=alpha_default, help="fractional order in (0, 1)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float_list, help="comma-separated gamma values")
    g.add_argument("--beta", type=float_list, help="comma-separated beta values (gamma is derived)")
    p.add_argument("--L", type=int_list, help="comma-separated terminal lags")
    p.add_argument("--quad-points", type=int_list, help="comma-separated Gauss-Jacobi point counts")
    p.add_argument("--iters", type=int, default=iters_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", help="exact | grid32 | fixed:<value>")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    if with_dims:
        p.add_argument("--d", type=int, default=with_dims[0])
        p.add_argument("--m", type=int, default=with_dims[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfgd", description="Caputo fractional gradient descent experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quad-random", help="NA-CFGD on a random Gaussian least-squares problem")
    _add_common(p, 0.5, 1000, (100, 100))

    p = sub.add_parser("quad-illcond", help="AT-CFGD on an ill-conditioned least-squares problem")
    _add_common(p, 0.5, 20000, (20, 20))
    p.add_argument("--dist-tol", type=float, default=None, help="stop once ||x - x*|| reaches this")
    p.add_argument("--bound-iters", type=int, default=50,
                   help="iterations covered by the error-bound column under a fixed stepsize")

    p = sub.add_parser("regress", help="AT-CFGD vs GD on a regression dataset or its surrogate")
    _add_common(p, 0.5, 20000, (20, 20))
    p.add_argument("--data", help="dataset file (libsvm or csv)")
    p.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    p.add_argument("--target-col", type=int, default=-1)
    p.add_argument("--n-features", type=int, default=None)
    p.add_argument("--surrogate", action="store_true", help="use an ill-conditioned synthetic problem")
    p.add_argument("--dist-tol", type=float, default=1e-8)

    p = sub.add_parser("nn", help="train a two-layer tanh network with GD and AT-CFGD")
    _add_common(p, 0.7, 2000)
    p.add_argument("--target", choices=("h1", "h2", "h3"), default="h1")
    p.add_argument("--m", type=int, default=100, help="training points")
    p.add_argument("--n", type=int, default=50, help="hidden width")
    p.add_argument("--test-size", type=int, default=10_000)

    p = sub.add_parser("landscape", help="sample the quartic, its smoothing and both linearizations")
    p.add_argument("--alpha", type=float, default=0.66)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float_list)
    g.add_argument("--beta", type=float_list)
    p.add_argument("--c", type=float, default=-1.0)
    p.add_argument("--x", type=float_list, default=[-2.7, 0.7])
    p.add_argument("--zmin", type=float, default=-6.0)
    p.add_argument("--zmax", type=float, default=7.0)
    p.add_argument("--points", type=int, default=261)
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _write(out_dir, result: Result):
    with open(os.path.join(out_dir, result.name + ".csv"), "w", newline="") as f:
        f.write(result.csv)
    with open(os.path.join(out_dir, result.name + ".meta"), "w") as f:
        f.write("".join(f"{k}={v}\n" for k, v in sorted(result.meta.items())))


def run_jobs(jobs, n_workers: int = 1) -> list[Result]:
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(execute, jobs))
    return [execute(j) for j in jobs]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        jobs = EXPANDERS[args.command](args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        results = run_jobs(jobs, args.jobs)
    except CONFIG_ERRORS as err:
        print(f"cfgd: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as err:
        print(f"cfgd: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as err:
        print(f"cfgd: numerical failure: {err}", file=sys.stderr)
        partial = getattr(err, "trace", None)
        if partial is not None:
            _write(args.out, _finish(f"{args.command.replace('-', '_')}_partial", partial, {},
                                     error=str(err)))
        return EXIT_NUMERIC
    status = EXIT_OK
    for res in results:
        _write(args.out, res)
        log.info("wrote %s", res.name)
        if res.error is not None:
            print(f"cfgd: numerical failure in {res.name}: {res.error}", file=sys.stderr)
            status = EXIT_NUMERIC
    return status


if __name__ == "__main__":
    sys.exit(main())
