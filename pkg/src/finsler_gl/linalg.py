"""Dense complex linear algebra used throughout the package.

Everything here works on plain ``numpy`` arrays of shape ``(N, N)``; the
normalized trace ``tau(x) = Re tr(x) / N`` is the basic functional, and the
``p``-norms are taken with respect to it, so that ``||1||_p = 1`` for every
``p``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BranchCutError, PreconditionError

TOL_RANK = 1e-10
TOL_HERM = 1e-10
TOL_PSD = 1e-10


@dataclass(frozen=True)
class PolarFactors:
    """``x = omega @ modulus`` with ``omega`` vanishing on ``ker(modulus)``."""

    omega: np.ndarray
    modulus: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Clustered spectrum of a positive matrix, largest eigenvalue first."""

    eigenvalues: tuple
    multiplicities: tuple

    @property
    def signature(self):
        return self.multiplicities

    def __len__(self):
        return len(self.eigenvalues)


def as_matrix(x):
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError("matrix has non-finite entries")
    return x


def adjoint(x):
    return np.conj(np.swapaxes(x, -1, -2))


def commutator(a, b):
    return a @ b - b @ a


def op_norm(x):
    """Operator (spectral) norm; works on stacks of matrices."""
    return np.linalg.norm(x, ord=2, axis=(-2, -1))


def normalized_trace(x):
    """Normalized real trace ``Re tr(x) / N``."""
    x = np.asarray(x)
    return float(np.real(np.trace(x)) / x.shape[-1])


def singular_values(x):
    return np.linalg.svd(x, compute_uv=False)


def p_norm(x, p):
    """Normalized Schatten ``p``-norm ``(tau |x|^p)^(1/p)``.

    ``p = np.inf`` gives the operator norm.
    """
    if p < 1:
        raise PreconditionError(f"p-norm needs p >= 1, got {p}")
    x = np.asarray(x, dtype=complex)
    s = singular_values(x)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float((np.sum(s**p) / x.shape[-1]) ** (1.0 / p))


def trace_inner(x, y):
    """Real inner product ``<x, y> = tau(y* x)``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape:
        raise PreconditionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    # Re tr(y* x) = Re sum conj(y_ij) x_ij
    return float(np.real(np.vdot(y, x)) / x.shape[-1])


def _rank_mask(s, tol_rank=TOL_RANK):
    smax = s[..., :1] if s.shape[-1] else s
    return s > tol_rank * smax


def polar_decompose(x, tol_rank=TOL_RANK):
    """Polar decomposition ``x = omega |x|`` with the kernel convention.

    Singular values below ``tol_rank * sigma_max`` are treated as zero, and
    ``omega`` is assembled only from the retained singular pairs, so it is
    the partial isometry from ``R(|x|)`` onto ``R(x)`` and is zero on
    ``ker |x|``.  For invertible ``x`` it is unitary.
    """
    x = as_matrix(x)
    u, s, vh = np.linalg.svd(x)
    keep = _rank_mask(s, tol_rank)
    s = np.where(keep, s, 0.0)
    omega = (u[:, keep]) @ vh[keep, :]
    modulus = (adjoint(vh) * s) @ vh
    modulus = 0.5 * (modulus + adjoint(modulus))
    return PolarFactors(omega=omega, modulus=modulus)


def _hermitian_eig(a):
    a = as_matrix(a)
    scale = op_norm(a)
    if np.max(np.abs(a - adjoint(a)), initial=0.0) > TOL_HERM * scale:
        raise PreconditionError("matrix is not self-adjoint within tolerance")
    lam, vecs = np.linalg.eigh(0.5 * (a + adjoint(a)))
    if lam.size and lam[0] < -TOL_PSD * scale:
        raise PreconditionError(
            f"matrix is not positive: smallest eigenvalue {lam[0]:.3e}")
    return np.clip(lam, 0.0, None), vecs


def positive_power(a, r):
    """``a**r`` for positive ``a`` via Hermitian eigendecomposition (0**r = 0)."""
    if r <= 0:
        raise PreconditionError(f"positive_power needs r > 0, got {r}")
    lam, vecs = _hermitian_eig(a)
    out = (vecs * lam**r) @ adjoint(vecs)
    return 0.5 * (out + adjoint(out))


def expm(x):
    """Matrix exponential (scaling and squaring, Pade; stacks allowed)."""
    return scipy.linalg.expm(np.asarray(x, dtype=complex))


def logm_principal(g, tol=1e-12):
    """Principal matrix logarithm.

    Raises
    ------
    BranchCutError
        If some eigenvalue of ``g`` lies on ``(-inf, 0]`` within ``tol``
        (relative to the spectral radius).
    """
    g = as_matrix(g)
    lam = np.linalg.eigvals(g)
    scale = max(np.abs(lam).max(initial=0.0), 1.0)
    on_cut = (np.abs(lam.imag) <= tol * scale) & (lam.real <= tol * scale)
    if np.any(on_cut) or not np.all(np.abs(lam) > 0):
        raise BranchCutError("spectrum meets the branch cut (-inf, 0]")
    return np.asarray(scipy.linalg.logm(g), dtype=complex)


def spectrum_of(a, cluster_tol=1e-8):
    """Clustered spectrum of a positive matrix.

    Neighbouring eigenvalues whose gap is below ``cluster_tol`` times the
    spectral radius are merged (the cluster is represented by its mean).
    """
    lam, _ = _hermitian_eig(a)
    return cluster_eigenvalues(lam, cluster_tol)


def cluster_eigenvalues(lam, cluster_tol=1e-8):
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    if lam.size == 0:
        return Spectrum((), ())
    scale = max(lam[0], np.finfo(float).tiny)
    groups = [[lam[0]]]
    for x in lam[1:]:
        if groups[-1][-1] - x <= cluster_tol * scale:
            groups[-1].append(x)
        else:
            groups.append([x])
    return Spectrum(
        eigenvalues=tuple(float(np.mean(gr)) for gr in groups),
        multiplicities=tuple(len(gr) for gr in groups),
    )


def is_hermitian(x, tol=TOL_HERM):
    x = np.asarray(x)
    return bool(np.max(np.abs(x - adjoint(x)), initial=0.0) <= tol * max(op_norm(x), 1.0))
