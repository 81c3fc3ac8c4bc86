"""Seeded random matrices used by the CLI and the test suite.

All samplers take a ``numpy.random.Generator`` so results are reproducible.
The base model is a matrix of independent standard complex Gaussians
scaled by ``1/sqrt(N)``, whose operator norm stays O(1) as ``N`` grows.
"""

import numpy as np
from scipy.stats import unitary_group

from .linalg import adjoint, op_norm


def gaussian(rng, n):
    """Standard complex Gaussian entries (``E|z|^2 = 1``) scaled by ``1/sqrt(n)``."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return z / np.sqrt(2.0 * n)


def unitary(rng, n):
    """Haar-distributed unitary matrix."""
    if n == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(n, random_state=rng)


def self_adjoint(rng, n):
    x = gaussian(rng, n)
    return 0.5 * (x + adjoint(x))


def skew_adjoint(rng, n):
    x = gaussian(rng, n)
    return 0.5 * (x - adjoint(x))


def normal(rng, n):
    """``U diag(z) U*`` with complex Gaussian eigenvalues."""
    u = unitary(rng, n)
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return (u * z) @ adjoint(u)


def partial_isometry(rng, n, rank=None):
    """``U_r V_r*`` built from the first ``rank`` columns of two Haar unitaries.

    ``rank`` defaults to a random value in ``[1, n - 1]`` (``1`` when
    ``n = 1``), so the result is rank-deficient whenever possible.
    """
    if rank is None:
        rank = int(rng.integers(1, n)) if n > 1 else 1
    u = unitary(rng, n)[:, :rank]
    v = unitary(rng, n)[:, :rank]
    return u @ adjoint(v)


def with_singular_values(rng, n, low=0.25, high=1.75, rank=None):
    """``U diag(s) V*`` with singular values uniform in ``[low, high]``.

    With ``rank < n`` the trailing ``n - rank`` singular values are zero.
    Controls the conditioning of the nonzero part exactly.
    """
    rank = n if rank is None else rank
    s = np.zeros(n)
    s[:rank] = np.sort(rng.uniform(low, high, rank))[::-1]
    return (unitary(rng, n) * s) @ unitary(rng, n)


def invertible(rng, n, low=0.5, high=2.0):
    """Group element with singular values in ``[low, high]``."""
    return with_singular_values(rng, n, low, high)


def velocity(rng, n, op_bound=1.0):
    """Gaussian velocity rescaled so that ``||v||_inf <= op_bound``."""
    x = gaussian(rng, n)
    return x * (op_bound * rng.uniform(0.5, 1.0) / op_norm(x))


def positive_distinct(rng, n, low=0.2, high=2.0, min_gap=0.1):
    """Positive definite matrix with well separated eigenvalues in ``[low, high]``."""
    while True:
        lam = np.sort(rng.uniform(low, high, n))[::-1]
        if n == 1 or np.min(-np.diff(lam)) >= min_gap:
            break
    u = unitary(rng, n)
    return (u * lam) @ adjoint(u)
