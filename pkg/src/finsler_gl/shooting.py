"""Boundary value problems: geodesic shooting, Riemannian logarithm, distance.

The unknown is the initial left-translated velocity ``v0`` (``2 N^2`` real
parameters).  The problem is solved after left translation by ``g0^{-1}``:
the geodesic from ``g0`` is ``g0`` times the geodesic from the identity, so
only the target ``g0^{-1} g1`` matters.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .closed_form import riemannian_geodesic, riemannian_velocity
from .errors import BranchCutError, NotConvergedError, PreconditionError
from .flow import (DEFAULT_INTEGRATOR, Trajectory, _grid, check_invertible,
                   conservation_report, geodesic_endpoints, geodesic_ivp)
from .linalg import adjoint, as_matrix, expm, logm_principal, op_norm, p_norm
from .variational import PMetric, _metric

log = logging.getLogger(__name__)

# integration step of the surrogate map used for Jacobians in p > 2 shooting
JACOBIAN_STEP = 1e-2


@dataclass(frozen=True)
class ShootingConfig:
    max_iters: int = 50
    residual_tol: float = 1e-10
    jacobian_step: float = 1e-6
    damping: float = 1e-3
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise PreconditionError("residual_tol must be positive")
        if self.max_iters < 1:
            raise PreconditionError("max_iters must be >= 1")


DEFAULT_SHOOTING = ShootingConfig()


@dataclass(frozen=True)
class BvpResult:
    v0: np.ndarray
    endpoint_residual: float
    distance: float
    trajectory: Trajectory
    converged: bool
    iters: int = 0


def _pack(v):
    return np.concatenate([v.real.ravel(), v.imag.ravel()])


def _unpack(x, n):
    k = n * n
    return (x[:k] + 1j * x[k:]).reshape(n, n)


def _relative(diff, ref):
    return float(np.linalg.norm(diff) / np.linalg.norm(ref))


def levenberg_marquardt(endpoints, target, v_start, cfg, jacobian_map=None):
    """Damped Gauss-Newton on ``endpoints(v) - target``.

    ``endpoints`` maps a stack ``(k, N, N)`` of velocities to the stack of
    endpoints.  The Jacobian comes from forward differences; all ``2 N^2 + 1``
    evaluations are passed in one call.  If ``jacobian_map`` (a cheaper
    approximation of ``endpoints``) is given, the Jacobian is taken from it
    and refreshed every iteration; otherwise it is reused with Broyden
    updates while the residual keeps contracting.

    Returns ``(v, rel_residual, iters)``.
    """
    n = target.shape[0]
    x = _pack(as_matrix(v_start))
    dim = x.size
    lam = cfg.damping
    scale = np.linalg.norm(_pack(target))
    r = _pack(endpoints(_unpack(x, n)[None])[0] - target)
    rel = np.linalg.norm(r) / scale
    it = 0
    stop_at = 0.1 * cfg.residual_tol
    jac = None
    while it < cfg.max_iters and rel > stop_at:
        it += 1
        fresh = jac is None or jacobian_map is not None
        if fresh:
            if jacobian_map is None:
                jac = _fd_jacobian(endpoints, target, x, r, n, cfg.jacobian_step)
            else:
                base = _pack(jacobian_map(_unpack(x, n)[None])[0] - target)
                jac = _fd_jacobian(jacobian_map, target, x, base, n, cfg.jacobian_step)
        jtj = jac.T @ jac
        grad = jac.T @ r
        step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-12), -grad)
        r_new = _pack(endpoints(_unpack(x + step, n)[None])[0] - target)
        ratio = np.linalg.norm(r_new) / np.linalg.norm(r)
        if ratio < 1.0:
            # Broyden rank-one update keeps the reused Jacobian consistent
            jac = jac + np.outer(r_new - r - jac @ step, step) / (step @ step)
            x, r = x + step, r_new
            lam = max(lam / 10.0, 1e-12)
            if ratio > 0.25:
                jac = None
        elif fresh:
            lam *= 10.0
            if lam > 1e8:
                break
        else:
            jac = None
        rel = np.linalg.norm(r) / scale
        log.debug("iter %d rel=%.3e lambda=%.1e", it, rel, lam)
    return _unpack(x, n), float(rel), it


def _fd_jacobian(endpoints, target, x, r, n, rel_step):
    h = rel_step * (1.0 + op_norm(_unpack(x, n)))
    probes = x[None, :] + h * np.eye(x.size)
    ends = endpoints(np.stack([_unpack(p, n) for p in probes]))
    jac = np.stack([_pack(e - target) for e in ends], axis=1)
    return (jac - r[:, None]) / h


def _initial_guess(target):
    try:
        return logm_principal(target)
    except BranchCutError:
        return None


def _starts(target, guess, m, cfg):
    """Primary guess followed by random starts scaled by the chord length."""
    rng = np.random.default_rng(cfg.seed)
    n = target.shape[0]
    chord = p_norm(target - np.eye(n), m.p)
    starts = [] if guess is None else [guess]
    for _ in range(cfg.restarts):
        z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)
        z *= max(chord, 1e-3) / p_norm(z, m.p)
        starts.append(z if guess is None else guess + 0.5 * z)
    return starts


def _multi_start(endpoints, target, m, cfg, jacobian_map=None):
    guess = _initial_guess(target)
    starts = _starts(target, guess, m, cfg)
    well_separated = guess is None or op_norm(guess) > 1.0
    best = None
    for k, start in enumerate(starts):
        v, rel, iters = levenberg_marquardt(endpoints, target, start, cfg, jacobian_map)
        cand = (rel <= cfg.residual_tol, v, rel, iters)
        if best is None or _better(cand, best, m):
            best = cand
        if best[0] and not well_separated:
            break
        log.debug("start %d rel=%.3e", k, rel)
    return best[1], best[2], best[3]


def _better(a, b, m):
    if a[0] != b[0]:
        return a[0]
    if a[0]:
        return p_norm(a[1], m.p) < p_norm(b[1], m.p)
    return a[2] < b[2]


def _closed_form_trajectory(g0, v0, integ):
    times = _grid(1.0, integ.step)
    gs = riemannian_geodesic(g0, v0, times)
    vs = riemannian_velocity(v0, times)
    traj = Trajectory(metric=PMetric(2), times=times, g=gs, v=vs, w=vs.copy())
    return replace(traj, diagnostics=conservation_report(traj))


def _result(g1, v0, traj, m, cfg, iters):
    res = _relative(traj.endpoint - g1, g1)
    return BvpResult(
        v0=v0,
        endpoint_residual=res,
        distance=p_norm(v0, m.p),
        trajectory=traj,
        converged=bool(res <= cfg.residual_tol),
        iters=iters,
    )


def _validate(g0, g1):
    g0 = as_matrix(g0)
    g1 = as_matrix(g1)
    if g0.shape != g1.shape:
        raise PreconditionError("endpoints have different shapes")
    check_invertible(g0, what="g0")
    check_invertible(g1, what="g1")
    return g0, g1


def riemannian_log(g0, g1, cfg=DEFAULT_SHOOTING, integ=DEFAULT_INTEGRATOR):
    """Velocity ``v`` with ``riemannian_exp(g0, v) = g1`` (the p = 2 case).

    The returned trajectory samples the closed-form geodesic on the grid of
    ``integ``.
    """
    g0, g1 = _validate(g0, g1)
    target = np.linalg.solve(g0, g1)

    def endpoints(vs):
        return expm(adjoint(vs)) @ expm(vs - adjoint(vs))

    v0, _, iters = _multi_start(endpoints, target, PMetric(2), cfg)
    traj = _closed_form_trajectory(g0, v0, integ)
    return _result(g1, v0, traj, PMetric(2), cfg, iters)


def geodesic_bvp(g0, g1, m, cfg=DEFAULT_SHOOTING, integ=DEFAULT_INTEGRATOR):
    """Geodesic of the ``p``-metric joining ``g0`` to ``g1`` by shooting.

    For ``p = 2`` this delegates to :func:`riemannian_log`.  Otherwise the
    endpoint of :func:`geodesic_ivp` is matched by damped Gauss-Newton.
    Non-convergence is reported through ``converged=False``.
    """
    m = _metric(m)
    if m.p == 2:
        return riemannian_log(g0, g1, cfg, integ)
    g0, g1 = _validate(g0, g1)
    target = np.linalg.solve(g0, g1)
    eye = np.eye(g0.shape[0], dtype=complex)

    def endpoints(vs):
        return geodesic_endpoints(eye, vs, m, 1.0, integ)

    jacobian_map = None
    if integ.method == "rk4_fixed" and integ.step < JACOBIAN_STEP:
        coarse = replace(integ, step=JACOBIAN_STEP)

        def jacobian_map(vs):
            return geodesic_endpoints(eye, vs, m, 1.0, coarse)

    v0, _, iters = _multi_start(endpoints, target, m, cfg, jacobian_map)
    traj = geodesic_ivp(g0, v0, m, 1.0, integ)
    return _result(g1, v0, traj, m, cfg, iters)


def distance(g0, g1, m, cfg=DEFAULT_SHOOTING, integ=DEFAULT_INTEGRATOR):
    """Distance ``d_p(g0, g1)``, the (constant) speed ``||v0||_p`` of the
    connecting geodesic.

    Raises
    ------
    NotConvergedError
        When shooting fails; the :class:`BvpResult` is attached.
    """
    result = geodesic_bvp(g0, g1, m, cfg, integ)
    if not result.converged:
        raise NotConvergedError(
            f"shooting did not converge (residual {result.endpoint_residual:.3e})", result)
    return result.distance
