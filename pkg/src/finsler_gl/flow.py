"""Initial value problem for p-geodesics.

The momentum ``w`` follows the Hamilton flow ``w' = |w|^q - |w*|^q``; the
velocity ``v`` is recovered from ``w`` by the inverse Legendre transform and
the group element follows ``g' = g v``.  Both equations are advanced
together with the same Runge-Kutta stages.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.integrate

from .errors import IntegrationError, PreconditionError, SingularDriftError
from .linalg import TOL_RANK, adjoint, as_matrix, cluster_eigenvalues, op_norm
from .variational import DiscretePath, PMetric, _metric, flow_field, legendre

METHODS = ("rk4_fixed", "rk45_adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4_fixed"
    step: float = 1e-3
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise PreconditionError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.step > 0 or not self.abs_tol > 0 or not self.rel_tol > 0:
            raise PreconditionError("step and tolerances must be positive")
        if self.max_steps < 1:
            raise PreconditionError("max_steps must be >= 1")


DEFAULT_INTEGRATOR = IntegratorConfig()


@dataclass(frozen=True)
class ConservationReport:
    """Worst deviation of each conserved quantity from its value at t=0.

    ``spectrum_drift`` compares the sorted eigenvalues of ``w*w``,
    ``skew_drift`` the skew-adjoint part of ``w`` (operator norm),
    ``speed_drift`` the speed ``||v||_p`` and ``momentum_norm_drift`` the
    dual norm ``||w||_q``.  ``rank_leak`` is the largest singular value of
    ``w`` outside its initial rank, relative to ``||w||``; it is zero on
    exact solutions.
    """

    spectrum_drift: float
    skew_drift: float
    speed_drift: float
    multiplicity_stable: bool
    momentum_norm_drift: float = 0.0
    rank_leak: float = 0.0

    def as_dict(self):
        return {
            "spectrum_drift": self.spectrum_drift,
            "skew_drift": self.skew_drift,
            "speed_drift": self.speed_drift,
            "multiplicity_stable": self.multiplicity_stable,
            "momentum_norm_drift": self.momentum_norm_drift,
            "rank_leak": self.rank_leak,
        }


@dataclass(frozen=True)
class Trajectory:
    metric: PMetric
    times: np.ndarray
    g: np.ndarray
    v: np.ndarray
    w: np.ndarray
    diagnostics: ConservationReport = field(default=None, compare=False)

    @property
    def dim(self):
        return self.g.shape[-1]

    @property
    def endpoint(self):
        return self.g[-1]

    def path(self):
        return DiscretePath(self.times, self.g)


def _rank_of(w, tol_rank=TOL_RANK):
    s = np.linalg.svd(w, compute_uv=False)
    return int(np.sum(s > tol_rank * s[0])) if s[0] > 0 else 0


def _joint_field(m, rank):
    def fun(y):
        w = y[..., 0, :, :]
        g = y[..., 1, :, :]
        rhs, v = flow_field(w, m, rank=rank)
        return np.stack([rhs, g @ v], axis=-3), v
    return fun


def _grid(T, step):
    n = max(1, int(np.ceil(T / step - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def _rk4(fun, y0, times, keep_nodes=True):
    """Classical RK4 on a fixed grid; ``fun`` returns ``(y', aux)``."""
    y = y0
    k1, aux = fun(y)
    ys, auxs = [y], [aux]
    for t0, t1 in zip(times[:-1], times[1:]):
        h = t1 - t0
        k2, _ = fun(y + 0.5 * h * k1)
        k3, _ = fun(y + 0.5 * h * k2)
        k4, _ = fun(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k1, aux = fun(y)
        if keep_nodes:
            ys.append(y)
            auxs.append(aux)
    if not keep_nodes:
        ys, auxs = [y0, y], [auxs[0], aux]
    return np.stack(ys), np.stack(auxs)


def _rk45(fun, y0, T, cfg):
    shape = y0.shape

    def flat(t, y):
        return fun(y.reshape(shape))[0].ravel()

    solver = scipy.integrate.RK45(
        flat, 0.0, y0.ravel(), T, first_step=min(cfg.step, T),
        rtol=cfg.rel_tol, atol=cfg.abs_tol)
    times, ys = [0.0], [y0]
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded at t={solver.t:.6g}")
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationError(f"adaptive step failed: {msg}")
        y = solver.y.reshape(shape)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={solver.t:.6g}")
        times.append(solver.t)
        ys.append(y)
    ys = np.stack(ys)
    auxs = np.stack([fun(y)[1] for y in ys])
    return np.asarray(times), ys, auxs


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise IntegrationError("integration produced NaN or overflow")


def integrate_hamilton(w0, m, T, cfg=DEFAULT_INTEGRATOR):
    """Solve ``w' = |w|^q - |w*|^q`` on ``[0, T]``.

    Returns a list of ``(t, w(t))`` pairs on the integrator's grid.
    """
    m = _metric(m)
    w0 = as_matrix(w0)
    if not T > 0:
        raise PreconditionError("T must be positive")

    def fun(w):
        return flow_field(w, m)[0], np.zeros(0)

    if cfg.method == "rk4_fixed":
        times = _grid(T, cfg.step)
        ws, _ = _rk4(fun, w0, times)
    else:
        times, ws, _ = _rk45(fun, w0, T, cfg)
    _check_finite(ws)
    return list(zip(times.tolist(), ws))


def _integrate_joint(g0, w0, m, T, cfg, rank, keep_nodes=True):
    y0 = np.stack(np.broadcast_arrays(w0, g0), axis=-3).astype(complex)
    fun = _joint_field(m, rank)
    if cfg.method == "rk4_fixed":
        times = _grid(T, cfg.step)
        ys, vs = _rk4(fun, y0, times, keep_nodes=keep_nodes)
        if not keep_nodes:
            times = times[[0, -1]]
    else:
        if y0.ndim != 3:
            raise PreconditionError("adaptive integration does not support stacked inputs")
        times, ys, vs = _rk45(fun, y0, T, cfg)
    _check_finite(ys)
    return times, ys[..., 0, :, :], ys[..., 1, :, :], vs


def check_invertible(g, tol_rank=TOL_RANK, what="group element"):
    s = np.linalg.svd(g, compute_uv=False)
    if not s[-1] > tol_rank * s[0]:
        ratio = s[-1] / s[0] if s[0] > 0 else 0.0
        raise PreconditionError(f"{what} is not invertible (sigma_min/sigma_max={ratio:.2e})")


def geodesic_ivp(g0, v0, m, T=1.0, cfg=DEFAULT_INTEGRATOR, cluster_tol=1e-8):
    """Geodesic with ``g(0) = g0`` and left-translated velocity ``v(0) = v0``.

    Pipeline: Legendre transform, joint integration of ``(w, g)``, inverse
    Legendre transform at every stage, conservation diagnostics.

    Raises
    ------
    SingularDriftError
        If some node ``g(t)`` has condition number above ``1 / TOL_RANK``.
    """
    m = _metric(m)
    g0 = as_matrix(g0)
    v0 = as_matrix(v0)
    if g0.shape != v0.shape:
        raise PreconditionError("g0 and v0 must have the same shape")
    check_invertible(g0)
    if not T > 0:
        raise PreconditionError("T must be positive")
    w0 = legendre(v0, m)
    rank = _rank_of(w0)
    times, ws, gs, vs = _integrate_joint(g0, w0, m, T, cfg, rank)
    s = np.linalg.svd(gs, compute_uv=False)
    bad = s[:, -1] <= TOL_RANK * s[:, 0]
    if np.any(bad):
        raise SingularDriftError(f"g(t) lost invertibility at t={times[np.argmax(bad)]:.6g}")
    traj = Trajectory(metric=m, times=np.asarray(times), g=gs, v=vs, w=ws)
    return replace(traj, diagnostics=conservation_report(traj, cluster_tol))


def geodesic_endpoints(g0, v0s, m, T=1.0, cfg=DEFAULT_INTEGRATOR):
    """Endpoints ``g(T)`` for a stack of initial velocities ``v0s``.

    Fixed-step only; every member is integrated on the same grid, so the
    result is identical to calling :func:`geodesic_ivp` member by member.
    """
    m = _metric(m)
    v0s = np.asarray(v0s, dtype=complex)
    if cfg.method != "rk4_fixed":
        return np.stack([geodesic_ivp(g0, v, m, T, cfg).endpoint for v in v0s])
    ws = legendre(v0s, m)
    ranks = {_rank_of(w) for w in ws}
    if len(ranks) != 1:
        return np.stack([geodesic_ivp(g0, v, m, T, cfg).endpoint for v in v0s])
    g0 = np.broadcast_to(as_matrix(g0), v0s.shape)
    _, _, gs, _ = _integrate_joint(g0, ws, m, T, cfg, ranks.pop(), keep_nodes=False)
    return gs[-1]


def conservation_report(traj, cluster_tol=1e-8):
    """Drift of the conserved quantities along a trajectory."""
    m = traj.metric
    if len(traj.times) == 0:
        raise PreconditionError("empty trajectory")
    s_w = np.linalg.svd(traj.w, compute_uv=False)
    eig = s_w**2
    spectrum_drift = float(np.max(np.abs(eig - eig[0])))
    k = 0.5 * (traj.w - adjoint(traj.w))
    skew_drift = float(np.max(op_norm(k - k[0])))
    s_v = np.linalg.svd(traj.v, compute_uv=False)
    speed = np.mean(s_v**m.p, axis=-1) ** (1.0 / m.p)
    speed_drift = float(np.max(np.abs(speed - speed[0])))
    qnorm = np.mean(s_w**m.q, axis=-1) ** (1.0 / m.q)
    qnorm_drift = float(np.max(np.abs(qnorm - qnorm[0])))
    sig0 = cluster_eigenvalues(eig[0], cluster_tol).multiplicities
    stable = all(cluster_eigenvalues(e, cluster_tol).multiplicities == sig0 for e in eig[1:])
    rank = _rank_of(traj.w[0])
    if 0 < rank < traj.dim:
        rank_leak = float(np.max(s_w[:, rank] / s_w[:, 0]))
    else:
        rank_leak = 0.0
    return ConservationReport(
        spectrum_drift=spectrum_drift,
        skew_drift=skew_drift,
        speed_drift=speed_drift,
        multiplicity_stable=bool(stable),
        momentum_norm_drift=qnorm_drift,
        rank_leak=rank_leak,
    )
