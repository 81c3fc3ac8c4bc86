"""Legendre transform, Hamilton vector field and the p-energy functionals.

The metric at ``g`` of a tangent vector ``x`` is ``||g^{-1} x||_p`` with
``p = 2n`` even.  Writing ``v = g^{-1} g'`` the extremals of the p-energy
satisfy

    d/dt [v (v*v)^(n-1)] = (v*v)^n - (vv*)^n,

and in the momentum ``w = v (v*v)^(n-1)`` this becomes the Hamilton flow
``w' = |w|^q - |w*|^q`` with ``q = p / (p - 1)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SingularPointError
from .linalg import TOL_RANK, adjoint, as_matrix, normalized_trace, op_norm


@dataclass(frozen=True)
class PMetric:
    """Left-invariant ``p``-norm metric, ``p`` an even integer >= 2."""

    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2 or int(self.p) % 2:
            raise PreconditionError(f"p must be an even integer >= 2, got {self.p}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def n(self):
        return self.p // 2

    @property
    def q(self):
        """Conjugate exponent ``p / (p - 1)``."""
        return self.p / (self.p - 1)

    @property
    def alpha(self):
        """Exponent ``q / 2`` of the auxiliary isospectral flow."""
        return self.q / 2


def _metric(m):
    return m if isinstance(m, PMetric) else PMetric(m)


def lagrangian(x, m):
    """``E_p(x) = ||x||_p^p = tau((x* x)^n)``."""
    m = _metric(m)
    s = np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)
    return float(np.mean(s ** m.p))


def legendre(v, m):
    """Momentum ``w = v (v* v)^(n-1)`` of a velocity ``v`` (stacks allowed)."""
    m = _metric(m)
    v = np.asarray(v, dtype=complex)
    if m.n == 1:
        return v.copy()
    return v @ np.linalg.matrix_power(adjoint(v) @ v, m.n - 1)


def _svd_rank(s, rank, tol_rank):
    if rank is not None:
        return np.arange(s.shape[-1]) < rank
    return s > tol_rank * s[..., :1]


def legendre_inverse(w, m, rank=None, tol_rank=TOL_RANK):
    """Velocity ``v = Omega |w|^(1/(p-1))`` from a momentum ``w = Omega |w|``.

    Singular values of ``w`` below ``tol_rank * sigma_max`` are treated as
    zero.  Passing ``rank`` instead keeps exactly the ``rank`` largest
    singular pairs; the flow uses this since the rank of the momentum is
    constant along exact solutions.
    """
    m = _metric(m)
    w = np.asarray(w, dtype=complex)
    if m.n == 1 and rank is None:
        return w.copy()
    u, s, vh = np.linalg.svd(w)
    keep = _svd_rank(s, rank, tol_rank)
    scaled = np.where(keep, s, 0.0) ** (1.0 / (m.p - 1))
    return (u * scaled[..., None, :]) @ vh


def hamilton_rhs(w, m):
    """Hamilton vector field ``|w|^q - |w*|^q``.

    Both moduli come from one SVD ``w = U S V*``: ``|w|^q = V S^q V*`` and
    ``|w*|^q = U S^q U*``.  The result is self-adjoint.
    """
    m = _metric(m)
    u, s, vh = np.linalg.svd(np.asarray(w, dtype=complex))
    return _rhs_from_svd(u, s, vh, m.q)


def _rhs_from_svd(u, s, vh, q):
    sq = (s ** q)[..., None, :]
    out = (_h(vh) * sq) @ vh - (u * sq) @ _h(u)
    return 0.5 * (out + _h(out))


def _h(x):
    return x.conj().swapaxes(-1, -2)


def flow_field(w, m, rank=None, tol_rank=TOL_RANK):
    """Hamilton field and reconstructed velocity from a single SVD of ``w``.

    Works on stacks ``(..., N, N)``; returns ``(w_dot, v)``.
    """
    u, s, vh = np.linalg.svd(w)
    rhs = _rhs_from_svd(u, s, vh, m.q)
    if m.p == 2 and rank is None:
        return rhs, w
    keep = _svd_rank(s, rank, tol_rank)
    scaled = np.where(keep, s, 0.0) ** (1.0 / (m.p - 1))
    return rhs, (u * scaled[..., None, :]) @ vh


def el_residual(v, vdot, m):
    """Euler-Lagrange residual for an analytic pair ``(v, v')``.

    ``d/dt[v (v*v)^(n-1)] - (v*v)^n + (vv*)^n`` with the time derivative
    expanded by the product rule; zero exactly on solutions.
    """
    m = _metric(m)
    v = as_matrix(v)
    vdot = as_matrix(vdot)
    n = m.n
    a = adjoint(v) @ v
    adot = adjoint(vdot) @ v + adjoint(v) @ vdot
    powers = [np.eye(v.shape[0], dtype=complex)]
    for _ in range(n):
        powers.append(powers[-1] @ a)
    d_w = vdot @ powers[n - 1]
    if n >= 2:
        d_a = sum(powers[j] @ adot @ powers[n - 2 - j] for j in range(n - 1))
        d_w = d_w + v @ d_a
    b = v @ adjoint(v)
    return d_w - powers[n] + np.linalg.matrix_power(b, n)


def el_residual_path(times, velocities, m):
    """Node-wise Euler-Lagrange residual along a sampled velocity curve.

    ``d/dt legendre(v)`` is taken by second-order finite differences on the
    grid (central inside, one-sided at the ends).
    """
    m = _metric(m)
    times = np.asarray(times, dtype=float)
    vs = np.asarray(velocities, dtype=complex)
    if len(times) < 3:
        raise PreconditionError("need at least 3 nodes for the path residual")
    ws = legendre(vs, m)
    dw = np.gradient(ws, times, axis=0, edge_order=2)
    a = adjoint(vs) @ vs
    b = vs @ adjoint(vs)
    return dw - np.linalg.matrix_power(a, m.n) + np.linalg.matrix_power(b, m.n)


@dataclass(frozen=True)
class DiscretePath:
    """Group elements sampled on a strictly increasing time grid."""

    times: np.ndarray
    points: np.ndarray
    tol_rank: float = field(default=TOL_RANK, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.points, dtype=complex)
        if t.ndim != 1 or len(t) < 2:
            raise PreconditionError("a path needs at least 2 nodes")
        if np.any(np.diff(t) <= 0):
            raise PreconditionError("time grid must be strictly increasing")
        if g.shape[0] != len(t) or g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise PreconditionError(f"points must have shape ({len(t)}, N, N)")
        s = np.linalg.svd(g, compute_uv=False)
        bad = s[:, -1] <= self.tol_rank * s[:, 0]
        if np.any(bad):
            raise SingularPointError(
                f"singular point on path at t={t[np.argmax(bad)]:.6g}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", g)

    def left_translate(self, k):
        return DiscretePath(self.times, np.asarray(k, dtype=complex) @ self.points)

    def velocities(self):
        """``g_j^{-1} g'_j`` with ``g'`` from second-order finite differences."""
        if len(self.times) == 2:
            dg = np.gradient(self.points, self.times, axis=0)
        else:
            dg = np.gradient(self.points, self.times, axis=0, edge_order=2)
        return np.linalg.solve(self.points, dg)


def _speeds(path, m):
    m = _metric(m)
    v = path.velocities()
    s = np.linalg.svd(v, compute_uv=False)
    return np.mean(s ** m.p, axis=-1) ** (1.0 / m.p)


def p_length(path, m):
    """Trapezoidal approximation of the length ``int ||g^{-1} g'||_p dt``."""
    return float(np.trapezoid(_speeds(path, m), path.times))


def p_energy(path, m):
    """Trapezoidal approximation of the energy ``int ||g^{-1} g'||_p^p dt``."""
    m = _metric(m)
    return float(np.trapezoid(_speeds(path, m) ** m.p, path.times))


def second_variation(v, z, m):
    """Second derivative ``d^2/ds^2 ||v + s z||_p^p`` at ``s = 0``.

    With ``A = v*v``, ``B = v*z + z*v`` and ``C = z*z`` the Lagrangian along
    the line is ``tau((A + sB + s^2 C)^n)``, a polynomial in ``s``; twice
    its ``s^2`` coefficient is

        2 [ n tau(C A^(n-1)) + sum_{d=0}^{n-2} (n-1-d) tau(B A^d B A^(n-2-d)) ].
    """
    m = _metric(m)
    v = as_matrix(v)
    z = as_matrix(z)
    n = m.n
    a = adjoint(v) @ v
    b = adjoint(v) @ z + adjoint(z) @ v
    c = adjoint(z) @ z
    powers = [np.eye(v.shape[0], dtype=complex)]
    for _ in range(n - 1):
        powers.append(powers[-1] @ a)
    total = n * normalized_trace(c @ powers[n - 1])
    for d in range(n - 1):
        total += (n - 1 - d) * normalized_trace(b @ powers[d] @ b @ powers[n - 2 - d])
    return 2.0 * total


def is_degenerate_direction(v, z, tol=1e-10):
    """True iff ``z v* = 0 = v* z`` up to ``tol`` in operator norm."""
    v = as_matrix(v)
    z = as_matrix(z)
    return bool(op_norm(z @ adjoint(v)) <= tol and op_norm(adjoint(v) @ z) <= tol)
