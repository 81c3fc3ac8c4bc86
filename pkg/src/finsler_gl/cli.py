"""Command-line interface.

Exit codes: 0 success, 1 bad input or violated precondition (a JSON error
object is printed), 2 solver failure (shooting did not converge or the
integrator broke down), 3 a ``verify`` or ``compare`` check failed.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import sampling
from .closed_form import (one_parameter_geodesic, partial_isometry_geodesic,
                          riemannian_exp, riemannian_geodesic)
from .errors import FinslerError, IntegrationError, NotConvergedError, PreconditionError
from .flow import IntegratorConfig, geodesic_ivp
from .io import (bvp_to_dict, dumps, load_matrix, matrix_to_json, parse_matrix,
                 trajectory_to_csv, trajectory_to_dict)
from .linalg import adjoint, op_norm, p_norm
from .shooting import ShootingConfig, geodesic_bvp
from .spectral import equivariance_check, spectral_report
from .variational import PMetric, el_residual_path, legendre

COMMANDS = ("geodesic", "exp", "log", "distance", "verify", "spectral", "compare")
CASES = ("riemannian", "normal", "partial-isometry")
MATRIX_ARGS = ("g0", "v0", "g1")
DEFAULT_N = 4

# verify thresholds
DRIFT_TOL = 1e-8
MOMENTUM_TOL = 1e-9
EL_TOL = 1e-5
COMPARE_TOL = 1e-6


class UsageError(PreconditionError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="finsler-gl", description=(
        "Geodesics, distances and conserved quantities of the left-invariant "
        "p-norm metrics on GL(N)."))
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--p", type=int, default=2, help="even exponent of the metric (default 2)")
    parser.add_argument("--N", type=int, default=None, help="matrix size for random inputs (default 4)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", "-o", default=None, help="write to this file instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--stream", choices=("g", "v", "w"), default="g",
                        help="matrix stream exported as CSV")
    parser.add_argument("--T", type=float, default=1.0, help="final time")
    parser.add_argument("--step", type=float, default=1e-3, help="integrator step")
    parser.add_argument("--method", choices=("rk4_fixed", "rk45_adaptive"), default="rk4_fixed")
    parser.add_argument("--trials", type=int, default=10, help="random trials for verify")
    parser.add_argument("--case", choices=CASES + ("all",), default="all",
                        help="special case for compare")
    parser.add_argument("--max-iters", type=int, default=50, help="shooting iterations")
    parser.add_argument("--residual-tol", type=float, default=1e-10)
    for name in MATRIX_ARGS:
        parser.add_argument(f"--{name}", default=None,
                            help=f"{name} as JSON rows of [re, im] pairs, or identity/zero")
        parser.add_argument(f"--{name}-file", default=None, help=f"read {name} from a JSON file")
    return parser


def _matrices(args):
    """Parse matrix options; ``N`` comes from ``--N`` or the first explicit matrix."""
    raw = {}
    for name in MATRIX_ARGS:
        inline, path = getattr(args, name), getattr(args, f"{name}_file")
        if inline is not None and path is not None:
            raise UsageError(f"give --{name} or --{name}-file, not both")
        raw[name] = (inline, path)
    n = args.N
    parsed = {}
    for name, (inline, path) in raw.items():
        if path is not None:
            parsed[name] = load_matrix(path, n)
        elif inline is not None and inline.strip().lower() not in ("identity", "eye", "zero"):
            parsed[name] = parse_matrix(inline, n)
        else:
            continue
        n = parsed[name].shape[0] if n is None else n
    n = DEFAULT_N if n is None else n
    for name, (inline, _) in raw.items():
        if name not in parsed and inline is not None:
            parsed[name] = parse_matrix(inline, n)
    return n, parsed


def _validate(args):
    if args.N is not None and args.N < 1:
        raise UsageError("--N must be >= 1")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    metric = PMetric(args.p)
    integ = IntegratorConfig(method=args.method, step=args.step)
    if not args.T > 0:
        raise UsageError("--T must be positive")
    if args.format == "csv" and args.command not in ("geodesic", "log", "distance"):
        raise UsageError(f"csv output is not available for {args.command}")
    return metric, integ


def _rng(seed, *extra):
    return np.random.default_rng([seed, *extra])


def _emit_trajectory(traj, args, extra=None):
    if args.format == "csv":
        return trajectory_to_csv(traj, args.stream)
    doc = trajectory_to_dict(traj)
    doc.update(extra or {})
    return dumps(doc)


def cmd_geodesic(args, metric, integ):
    n, mats = _matrices(args)
    g0 = mats.get("g0", np.eye(n, dtype=complex))
    v0 = mats["v0"] if "v0" in mats else sampling.velocity(_rng(args.seed), n)
    traj = geodesic_ivp(g0, v0, metric, args.T, integ)
    return _emit_trajectory(traj, args), 0


def cmd_exp(args, metric, integ):
    n, mats = _matrices(args)
    if "v0" not in mats:
        raise UsageError("exp needs --v0")
    g0 = mats.get("g0", np.eye(n, dtype=complex))
    if metric.p == 2:
        result = riemannian_exp(g0, mats["v0"])
    else:
        result = geodesic_ivp(g0, mats["v0"], metric, 1.0, integ).endpoint
    return dumps({"command": "exp", "p": metric.p, "N": n, "result": matrix_to_json(result)}), 0


def _bvp(args, metric, integ):
    n, mats = _matrices(args)
    if "g1" not in mats:
        raise UsageError(f"{args.command} needs --g1")
    g0 = mats.get("g0", np.eye(n, dtype=complex))
    cfg = ShootingConfig(max_iters=args.max_iters, residual_tol=args.residual_tol, seed=args.seed)
    return geodesic_bvp(g0, mats["g1"], metric, cfg, integ)


def _bvp_output(result, args, summary):
    code = 0 if result.converged else 2
    if args.format == "csv":
        return trajectory_to_csv(result.trajectory, args.stream), code
    return dumps({"command": args.command, **summary}), code


def cmd_log(args, metric, integ):
    result = _bvp(args, metric, integ)
    return _bvp_output(result, args, {
        "p": metric.p,
        "result": matrix_to_json(result.v0),
        "converged": result.converged,
        "endpoint_residual": result.endpoint_residual,
        "iters": result.iters,
    })


def cmd_distance(args, metric, integ):
    result = _bvp(args, metric, integ)
    return _bvp_output(result, args, bvp_to_dict(result, include_trajectory=False))


def _verify_one(metric, integ, T, rng, n):
    g0 = sampling.invertible(rng, n)
    v0 = sampling.velocity(rng, n)
    traj = geodesic_ivp(g0, v0, metric, T, integ)
    d = traj.diagnostics
    w_err = float(np.max(op_norm(legendre(traj.v, metric) - traj.w)) / (1.0 + op_norm(traj.w[0])))
    checks = {
        "spectrum_drift": (d.spectrum_drift, d.spectrum_drift <= DRIFT_TOL),
        "skew_drift": (d.skew_drift, d.skew_drift <= DRIFT_TOL),
        "speed_drift": (d.speed_drift, d.speed_drift <= DRIFT_TOL),
        "momentum_norm_drift": (d.momentum_norm_drift, d.momentum_norm_drift <= DRIFT_TOL),
        "multiplicity_stable": (d.multiplicity_stable, d.multiplicity_stable),
        "momentum_consistency": (w_err, w_err <= MOMENTUM_TOL),
    }
    if len(traj.times) >= 3:
        el = float(np.max(op_norm(el_residual_path(traj.times, traj.v, metric))))
        checks["el_residual"] = (el, el <= EL_TOL)
    # reported only: chord ||g0^{-1} g(T) - 1||_p against the length T ||v0||_p
    chord = p_norm(np.linalg.solve(g0, traj.endpoint) - np.eye(n), metric.p)
    info = {"chord": chord, "length": T * p_norm(v0, metric.p), "rank_leak": d.rank_leak}
    return checks, info


def cmd_verify(args, metric, integ):
    n = args.N or DEFAULT_N
    threads = _threads()

    def trial(k):
        return _verify_one(metric, integ, args.T, _rng(args.seed, k), n)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(trial, range(args.trials)))
    rows = []
    failed = 0
    for k, (checks, info) in enumerate(results):
        ok = all(passed for _, passed in checks.values())
        failed += not ok
        rows.append({
            "trial": k,
            "pass": ok,
            "checks": {name: {"value": value, "pass": bool(passed)}
                       for name, (value, passed) in checks.items()},
            "reported": info,
        })
    names = list(results[0][0])
    summary = {name: {
        "max": max(float(r[0][name][0]) for r in results),
        "failures": sum(not r[0][name][1] for r in results),
    } for name in names}
    doc = {
        "command": "verify", "p": metric.p, "N": n, "seed": args.seed,
        "trials": args.trials, "step": integ.step, "T": args.T,
        "thresholds": {"drift": DRIFT_TOL, "momentum_consistency": MOMENTUM_TOL,
                       "el_residual": EL_TOL},
        "summary": summary, "failed_trials": failed, "pass": failed == 0,
        "table": rows,
    }
    return dumps(doc), 0 if failed == 0 else 3


def _threads():
    raw = os.environ.get("FINSLER_GL_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"FINSLER_GL_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("FINSLER_GL_THREADS must be >= 1")
    return value


def compare_case(case, metric, n, rng, integ, T=1.0):
    """Closed-form endpoint against the integrated one for a special case.

    The ``riemannian`` case always uses ``p = 2``.
    """
    g0 = sampling.invertible(rng, n)
    if case == "riemannian":
        metric = PMetric(2)
        v0 = sampling.velocity(rng, n)
        exact = riemannian_geodesic(g0, v0, T)
    elif case == "normal":
        v0 = sampling.normal(rng, n)
        v0 = v0 / max(op_norm(v0), 1.0)
        exact = one_parameter_geodesic(g0, v0, T)
    elif case == "partial-isometry":
        v0 = sampling.partial_isometry(rng, n)
        exact = partial_isometry_geodesic(g0, v0, T)
    else:
        raise UsageError(f"unknown case {case!r}")
    endpoint = geodesic_ivp(g0, v0, metric, T, integ).endpoint
    delta = float(np.max(np.abs(endpoint - exact)))
    rel = float(np.linalg.norm(endpoint - exact) / np.linalg.norm(exact))
    return {"p": metric.p, "endpoint_delta": delta, "relative_delta": rel}


def cmd_compare(args, metric, integ):
    n = args.N or DEFAULT_N
    cases = CASES if args.case == "all" else (args.case,)
    out = {case: compare_case(case, metric, n, _rng(args.seed, k), integ, args.T)
           for k, case in enumerate(cases)}
    worst = max(c["endpoint_delta"] for c in out.values())
    doc = {"command": "compare", "p": metric.p, "N": n, "seed": args.seed, "cases": out,
           "max_endpoint_delta": worst, "tolerance": COMPARE_TOL, "pass": worst <= COMPARE_TOL}
    return dumps(doc), 0 if worst <= COMPARE_TOL else 3


def cmd_spectral(args, metric, integ):
    n, mats = _matrices(args)
    v0 = mats["v0"] if "v0" in mats else sampling.velocity(_rng(args.seed), n)
    w0 = legendre(v0, metric)
    b0 = adjoint(w0) @ w0
    k = w0 - adjoint(w0)
    doc = spectral_report(b0, k, metric.alpha, args.T, integ)
    traj = geodesic_ivp(np.eye(n, dtype=complex), v0, metric, args.T, integ)
    doc.update({"command": "spectral", "p": metric.p, "N": n, "alpha": metric.alpha,
                "equivariance": equivariance_check(traj).as_dict()})
    return dumps(doc), 0


HANDLERS = {
    "geodesic": cmd_geodesic, "exp": cmd_exp, "log": cmd_log, "distance": cmd_distance,
    "verify": cmd_verify, "spectral": cmd_spectral, "compare": cmd_compare,
}


def _error(kind, exc):
    return dumps({"error": {"type": kind, "class": type(exc).__name__, "message": str(exc)}})


def run(argv=None):
    """Execute one command; returns ``(exit_code, text)`` without side effects
    other than writing ``--output``."""
    try:
        args = build_parser().parse_args(argv)
        metric, integ = _validate(args)
        text, code = HANDLERS[args.command](args, metric, integ)
    except (NotConvergedError, IntegrationError) as exc:
        return 2, _error("solver", exc)
    except (PreconditionError, FinslerError) as exc:
        return 1, _error("precondition", exc)
    if args.output:
        try:
            with open(args.output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            return 1, _error("io", exc)
        return code, ""
    return code, text


def main(argv=None):
    code, text = run(argv)
    if text:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
