"""Explicit geodesics and the Riemannian (p = 2) structure of GL(N).

For ``p = 2`` every geodesic is a product of two one-parameter groups,
``g(t) = g0 exp(t v0*) exp(t (v0 - v0*))``.  The same curve is the
geodesic for every even ``p`` when ``v0`` is a partial isometry, and for a
normal ``v0`` it collapses to ``g0 exp(t v0)``.
"""

import numpy as np

from .errors import PreconditionError
from .linalg import TOL_RANK, adjoint, as_matrix, commutator, expm, op_norm, trace_inner


def _group_element(g):
    g = as_matrix(g)
    s = np.linalg.svd(g, compute_uv=False)
    if not s[-1] > TOL_RANK * s[0]:
        raise PreconditionError("group element is not invertible")
    return g


def is_normal(v, tol=1e-10):
    v = as_matrix(v)
    defect = op_norm(v @ adjoint(v) - adjoint(v) @ v)
    return bool(defect <= tol * (1.0 + op_norm(v) ** 2))


def is_partial_isometry(v, tol=1e-10):
    v = as_matrix(v)
    a = adjoint(v) @ v
    return bool(op_norm(a @ a - a) <= tol)


def riemannian_geodesic(g0, v0, t):
    """Levi-Civita geodesic of the trace metric: ``g0 e^{t v0*} e^{t(v0 - v0*)}``.

    ``t`` may be a scalar or a 1-d array of times (a stack is returned).
    """
    g0 = _group_element(g0)
    v0 = as_matrix(v0)
    t = np.asarray(t, dtype=float)
    tt = t[..., None, None]
    return g0 @ expm(tt * adjoint(v0)) @ expm(tt * (v0 - adjoint(v0)))


def riemannian_exp(g, v):
    """Riemannian exponential at ``g`` of the left-translated vector ``v``."""
    return riemannian_geodesic(g, v, 1.0)


def riemannian_velocity(v0, t):
    """Left-translated velocity ``e^{-t(v0-v0*)} v0 e^{t(v0-v0*)}`` of the p=2 geodesic."""
    v0 = as_matrix(v0)
    tt = np.asarray(t, dtype=float)[..., None, None]
    rot = expm(tt * (v0 - adjoint(v0)))
    return adjoint(rot) @ v0 @ rot


def partial_isometry_geodesic(g0, v0, t, tol=1e-10):
    """Geodesic for any even ``p`` when ``v0`` is a partial isometry."""
    if not is_partial_isometry(v0, tol):
        raise PreconditionError("initial velocity is not a partial isometry")
    return riemannian_geodesic(g0, v0, t)


def partial_isometry_geodesic_split(g0, v0, t, tol=1e-10):
    """Same curve as :func:`partial_isometry_geodesic`, written with
    ``v0 = x0 + i y0`` as ``g0 exp(t (x0 - i y0)) exp(2 t i y0)``."""
    if not is_partial_isometry(v0, tol):
        raise PreconditionError("initial velocity is not a partial isometry")
    g0 = _group_element(g0)
    v0 = as_matrix(v0)
    x0 = 0.5 * (v0 + adjoint(v0))
    y0 = -0.5j * (v0 - adjoint(v0))
    tt = np.asarray(t, dtype=float)[..., None, None]
    return g0 @ expm(tt * (x0 - 1j * y0)) @ expm(2j * tt * y0)


def one_parameter_geodesic(g0, v0, t, tol=1e-10):
    """``g0 exp(t v0)``; a geodesic exactly when ``v0`` is normal."""
    if not is_normal(v0, tol):
        raise PreconditionError("one-parameter groups are geodesics only for normal v0")
    g0 = _group_element(g0)
    tt = np.asarray(t, dtype=float)[..., None, None]
    return g0 @ expm(tt * as_matrix(v0))


def angular_momentum(g):
    """The operator ``(g g*)^{-1}`` representing the metric tensor at ``g``."""
    g = _group_element(g)
    return np.linalg.inv(g @ adjoint(g))


def metric_at(g, x, y):
    """Riemannian metric ``<x, y>_g = tau((g g*)^{-1} x y*)`` at ``g``."""
    x = as_matrix(x)
    y = as_matrix(y)
    return float(np.real(np.trace(angular_momentum(g) @ x @ adjoint(y))) / x.shape[0])


def metric_at_translated(g, x, y):
    """The same metric computed as ``<g^{-1} x, g^{-1} y>``."""
    g = _group_element(g)
    return trace_inner(np.linalg.solve(g, x), np.linalg.solve(g, y))


def levi_civita_invariant(v, w):
    """Covariant derivative of left-invariant fields, translated to the identity.

    ``nabla_V W = 1/2 ([v, w] + [v, w*] + [w, v*])``.
    """
    v = as_matrix(v)
    w = as_matrix(w)
    return 0.5 * (commutator(v, w) + commutator(v, adjoint(w)) + commutator(w, adjoint(v)))
