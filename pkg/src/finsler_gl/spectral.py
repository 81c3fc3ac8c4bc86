"""Spectral dynamics of the auxiliary isospectral flow ``b' = [b^alpha, K]``.

With ``w`` a solution of the Hamilton flow and ``K = w - w*`` (constant), the
positive matrix ``b = w*w`` follows ``b' = [b^alpha, K]`` with
``alpha = q / 2``.  Its eigenvalues and multiplicities are constant; the
spectral projections rotate, and the unitary transport frame ``u`` with
``u' = Lambda u``, ``Lambda = -sum_j p_j p_j'``, conjugates them back to
their initial positions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FrameBreakError, PreconditionError
from .flow import DEFAULT_INTEGRATOR, _grid, _rk4, _rk45, _check_finite
from .linalg import TOL_RANK, adjoint, as_matrix, cluster_eigenvalues, op_norm

TOL_SKEW = 1e-10


@dataclass(frozen=True)
class ProjectionFrame:
    """Spectral resolution ``b = sum_i lambdas[i] projections[i]``.

    ``lambdas`` are the distinct positive eigenvalues in decreasing order and
    ``kernel_projection`` projects onto the kernel of ``b``.
    """

    lambdas: tuple
    projections: np.ndarray
    kernel_projection: np.ndarray

    def __len__(self):
        return len(self.lambdas)

    @property
    def ranks(self):
        return tuple(int(round(np.trace(p).real)) for p in self.projections)

    def all_projections(self):
        """Positive-eigenvalue projections followed by the kernel projection."""
        return np.concatenate([self.projections, self.kernel_projection[None]])

    def matrix(self):
        return np.einsum("i,ijk->jk", np.asarray(self.lambdas), self.projections)


@dataclass(frozen=True)
class TransportFrame:
    times: np.ndarray
    lambda_op: np.ndarray
    u: np.ndarray


def _check_skew(k, what="K"):
    k = as_matrix(k)
    if op_norm(k + adjoint(k)) > TOL_SKEW * max(1.0, op_norm(k)):
        raise PreconditionError(f"{what} must be skew-adjoint")
    return k


def _check_alpha(alpha):
    if not 0.5 < alpha <= 1.0:
        raise PreconditionError(f"alpha must lie in (1/2, 1], got {alpha}")


def projection_frame(b, cluster_tol=1e-8, tol_rank=TOL_RANK):
    """Spectral projections of a positive matrix, eigenvalues clustered."""
    b = as_matrix(b)
    lam, vec = np.linalg.eigh(0.5 * (b + adjoint(b)))
    lam, vec = lam[::-1], vec[:, ::-1]
    n = b.shape[0]
    scale = max(lam[0], 0.0)
    positive = lam > tol_rank * scale if scale > 0 else np.zeros(n, bool)
    spec = cluster_eigenvalues(lam[positive], cluster_tol)
    projections = []
    start = 0
    for mult in spec.multiplicities:
        cols = vec[:, start:start + mult]
        projections.append(cols @ adjoint(cols))
        start += mult
    kernel = vec[:, ~positive]
    projections = np.array(projections, dtype=complex).reshape(-1, n, n)
    return ProjectionFrame(spec.eigenvalues, projections, kernel @ adjoint(kernel))


def _power_psd(b, alpha, rank):
    # eigh sorts ascending: keep the top ``rank`` eigenvalues, the rest is kernel
    lam, vec = np.linalg.eigh(0.5 * (b + adjoint(b)))
    lam = np.clip(lam, 0.0, None) ** alpha
    lam[..., :lam.shape[-1] - rank] = 0.0
    return (vec * lam[..., None, :]) @ adjoint(vec)


def integrate_b(b0, K, alpha, T, cfg=DEFAULT_INTEGRATOR):
    """Solve ``b' = [b^alpha, K]`` on ``[0, T]``; returns ``[(t, b(t)), ...]``.

    The rank of ``b`` is constant along the exact flow; ``b^alpha`` is
    evaluated at the rank of ``b0`` so that rounding in the kernel is not
    amplified by the power ``alpha < 1``.
    """
    b0 = as_matrix(b0)
    K = _check_skew(K)
    _check_alpha(alpha)
    if not T > 0:
        raise PreconditionError("T must be positive")
    lam0 = np.linalg.eigvalsh(0.5 * (b0 + adjoint(b0)))
    rank = int(np.sum(lam0 > TOL_RANK * max(lam0[-1], 0.0))) if lam0[-1] > 0 else 0

    def fun(b):
        a = _power_psd(b, alpha, rank)
        rhs = a @ K - K @ a
        return 0.5 * (rhs + adjoint(rhs)), np.zeros(0)

    if cfg.method == "rk4_fixed":
        times = _grid(T, cfg.step)
        bs, _ = _rk4(fun, b0, times)
    else:
        times, bs, _ = _rk45(fun, b0, T, cfg)
    _check_finite(bs)
    bs = 0.5 * (bs + adjoint(bs))
    return list(zip(np.asarray(times).tolist(), bs))


def gamma_coefficient(lambda_i, lambda_l, alpha):
    """``(lambda_i^(1-alpha) - lambda_l^(1-alpha)) / (lambda_i - lambda_l) * lambda_l^alpha``.

    Evaluated as ``expm1((1-alpha) L) / expm1(L)`` with ``L = log(lambda_i /
    lambda_l)``, which avoids cancellation for close eigenvalues.  A zero
    ``lambda_l`` (the kernel) gives 0.
    """
    if not lambda_i > 0 or lambda_l < 0:
        raise PreconditionError("eigenvalues must be positive")
    if lambda_i == lambda_l:
        raise PreconditionError("gamma is undefined for equal eigenvalues")
    if lambda_l == 0:
        return 0.0
    log_ratio = np.log(lambda_i) - np.log(lambda_l)
    return float(np.expm1((1.0 - alpha) * log_ratio) / np.expm1(log_ratio))


def projection_rhs(frame, K, alpha, i):
    """Derivative ``p_i'`` of the ``i``-th spectral projection (0-based,
    decreasing eigenvalue order) along ``b' = [b^alpha, K]``.

    ``p_i' = lambda_i^(alpha-1) ([p_i, K] + sum_{l != i} gamma_il (p_l K p_i - p_i K p_l))``,
    the sum running over the other eigenvalues and the kernel.
    """
    K = _check_skew(K)
    if not 0 <= i < len(frame):
        raise PreconditionError(f"projection index {i} out of range [0, {len(frame)})")
    lam = frame.lambdas
    p_i = frame.projections[i]
    out = p_i @ K - K @ p_i
    for l, p_l in enumerate(frame.projections):
        if l == i:
            continue
        gamma = gamma_coefficient(lam[i], lam[l], alpha)
        out = out + gamma * (p_l @ K @ p_i - p_i @ K @ p_l)
    return lam[i] ** (alpha - 1.0) * out


def resolvent(frame, z):
    """``(z - b)^{-1}`` from the spectral resolution: ``z^{-1} + sum_i lambda_i / (z (z - lambda_i)) p_i``."""
    n = frame.kernel_projection.shape[0]
    out = np.eye(n, dtype=complex) / z
    for lam, p in zip(frame.lambdas, frame.projections):
        out = out + lam / (z * (z - lam)) * p
    return out


def projection_path(matrices, cluster_tol=1e-8):
    """Spectral frames of a sequence of positive matrices, one per node.

    Raises
    ------
    FrameBreakError
        If the multiplicity signature or kernel dimension changes.
    """
    frames = [projection_frame(b, cluster_tol) for b in matrices]
    ref = (frames[0].ranks, _rank(frames[0].kernel_projection))
    for k, fr in enumerate(frames[1:], 1):
        if (fr.ranks, _rank(fr.kernel_projection)) != ref:
            raise FrameBreakError(f"spectral multiplicities change at node {k}")
    return frames


def _rank(p):
    return int(round(np.trace(p).real))


def _complete(projections):
    """Append ``1 - sum p_j`` when the family is not a resolution of identity."""
    n = projections.shape[-1]
    rest = np.eye(n) - projections.sum(axis=1)
    if np.max(op_norm(rest)) > 1e-8:
        projections = np.concatenate([projections, rest[:, None]], axis=1)
    return projections


def transport_frame(times, projections):
    """Unitary frame ``u' = Lambda u``, ``u(0) = 1``, ``Lambda = -sum_j p_j p_j'``.

    ``projections`` has shape ``(n_times, n_proj, N, N)``; the complement of
    their sum is added automatically.  ``p_j'`` comes from central finite
    differences on the grid (fourth order on uniform grids) and ``Lambda`` is
    skew-symmetrized.  ``u`` is advanced by RK4, with ``Lambda`` at the
    half step interpolated from neighbouring nodes, and projected back onto
    the unitary group after every step.
    """
    times = np.asarray(times, dtype=float)
    ps = np.asarray(projections, dtype=complex)
    if ps.ndim != 4 or ps.shape[0] != len(times):
        raise PreconditionError("projections must have shape (n_times, n_proj, N, N)")
    if len(times) < 3:
        raise PreconditionError("need at least 3 nodes")
    ranks = np.rint(np.einsum("tjii->tj", ps).real).astype(int)
    changed = np.any(ranks != ranks[0], axis=1)
    if np.any(changed):
        raise FrameBreakError(f"projection ranks change at node {int(np.argmax(changed))}")
    ps = _complete(ps)
    dps = _derivative(ps, times)
    lam = -np.einsum("tjab,tjbc->tac", ps, dps)
    lam = 0.5 * (lam - adjoint(lam))
    uniform = _is_uniform(times)

    n = ps.shape[-1]
    u = np.eye(n, dtype=complex)
    us = [u]
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        if uniform and 1 <= k < len(times) - 2:
            # cubic interpolation at the midpoint
            mid = (9.0 * (lam[k] + lam[k + 1]) - lam[k - 1] - lam[k + 2]) / 16.0
        else:
            mid = 0.5 * (lam[k] + lam[k + 1])
        k1 = lam[k] @ u
        k2 = mid @ (u + 0.5 * h * k1)
        k3 = mid @ (u + 0.5 * h * k2)
        k4 = lam[k + 1] @ (u + h * k3)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        left, _, right = np.linalg.svd(u)
        u = left @ right
        us.append(u)
    return TransportFrame(times, lam, np.stack(us))


def _is_uniform(times):
    dt = np.diff(times)
    return bool(np.all(np.abs(dt - dt[0]) <= 1e-9 * dt[0]))


def _derivative(f, times):
    """Time derivative along axis 0.

    Fourth-order central differences on uniform grids with at least five
    nodes (fourth-order one-sided stencils at the two ends of each side),
    second-order ``np.gradient`` otherwise.
    """
    if len(times) < 5 or not _is_uniform(times):
        return np.gradient(f, times, axis=0, edge_order=2)
    h = times[1] - times[0]
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = -(-25.0 * f[-1] + 48.0 * f[-2] - 36.0 * f[-3] + 16.0 * f[-4] - 3.0 * f[-5]) / (12.0 * h)
    d[-2] = -(-3.0 * f[-1] - 10.0 * f[-2] + 18.0 * f[-3] - 6.0 * f[-4] + f[-5]) / (12.0 * h)
    return d


def transport_deviation(frame, projections):
    """``max_{t, i} ||u*(t) p_i(t) u(t) - p_i(0)||_inf``."""
    ps = np.asarray(projections, dtype=complex)
    u = frame.u[:, None]
    back = adjoint(u) @ ps @ u
    return float(np.max(op_norm(back - ps[:1])))


def _stack_projections(frames):
    return np.stack([fr.projections for fr in frames])


def spectral_report(b0, K, alpha, T, cfg=DEFAULT_INTEGRATOR, cluster_tol=1e-8):
    """Diagnostics of the auxiliary flow from ``b0``.

    Returns a dict with ``gamma_max`` (over pairs of distinct eigenvalues of
    ``b0``), ``spectrum_drift``, ``multiplicity_stable`` and
    ``transport_deviation``.
    """
    path = integrate_b(b0, K, alpha, T, cfg)
    times = np.array([t for t, _ in path])
    bs = np.stack([b for _, b in path])
    eig = np.linalg.eigvalsh(bs)
    spectrum_drift = float(np.max(np.abs(eig - eig[0])))
    try:
        frames = projection_path(bs, cluster_tol)
        stable = True
    except FrameBreakError:
        frames, stable = None, False
    lam0 = projection_frame(bs[0], cluster_tol).lambdas
    gammas = [gamma_coefficient(a, b, alpha) for a in lam0 for b in lam0 if a != b]
    report = {
        "gamma_max": max(gammas) if gammas else 0.0,
        "spectrum_drift": spectrum_drift,
        "multiplicity_stable": stable,
        "transport_deviation": None,
    }
    if frames is not None and len(times) >= 3:
        ps = _stack_projections(frames)
        report["transport_deviation"] = transport_deviation(transport_frame(times, ps), ps)
    return report


@dataclass(frozen=True)
class EquivarianceReport:
    modulus_deviation: float
    singular_value_drift: float
    multiplicity_stable: bool
    transport_deviation: float
    support_rank_stable: bool

    def as_dict(self):
        return {
            "modulus_deviation": self.modulus_deviation,
            "singular_value_drift": self.singular_value_drift,
            "multiplicity_stable": self.multiplicity_stable,
            "transport_deviation": self.transport_deviation,
            "support_rank_stable": self.support_rank_stable,
        }


def equivariance_check(traj, cluster_tol=1e-8):
    """Check ``|v(t)| = u(t) |v(0)| u*(t)`` along a geodesic.

    ``u`` is the transport frame of the spectral projections of ``v*v``.
    Also reports the drift of the singular values of ``v`` and whether the
    ranks of ``v*v`` and ``v v*`` (initial and final projections of the
    polar isometry) stay constant.  Never raises on a failed check; a
    multiplicity change is reported as ``multiplicity_stable=False``.
    """
    vs = traj.v
    u_, s, vh = np.linalg.svd(vs)
    modulus = (adjoint(vh) * s[..., None, :]) @ vh
    sv_drift = float(np.max(np.abs(s - s[0])))
    a = adjoint(vs) @ vs
    ranks = [int(np.sum(row > TOL_RANK * max(row[0], 1e-300))) for row in s]
    support_stable = len(set(ranks)) == 1
    nan = float("nan")
    try:
        frames = projection_path(a, cluster_tol)
    except FrameBreakError:
        return EquivarianceReport(nan, sv_drift, False, nan, support_stable)
    ps = _stack_projections(frames)
    if ps.shape[1] == 0 or len(traj.times) < 3:
        dev = float(np.max(op_norm(modulus - modulus[0])))
        return EquivarianceReport(dev, sv_drift, True, 0.0, support_stable)
    frame = transport_frame(traj.times, ps)
    u = frame.u
    predicted = u @ modulus[0] @ adjoint(u)
    dev = float(np.max(op_norm(modulus - predicted)))
    return EquivarianceReport(dev, sv_drift, True, transport_deviation(frame, ps), support_stable)
