import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finsler_gl import sampling
from finsler_gl.errors import PreconditionError, SingularPointError
from finsler_gl.linalg import adjoint, expm, p_norm, positive_power
from finsler_gl.variational import (DiscretePath, PMetric, el_residual, el_residual_path,
                                    hamilton_rhs, is_degenerate_direction, lagrangian,
                                    legendre, legendre_inverse, p_energy, p_length,
                                    second_variation)

from conftest import cgauss, complex_matrices, maxabs, opnorm


def degenerate_pair(rng, n, k):
    """``v`` supported on the first ``k`` singular directions, ``z`` on the rest."""
    u, w = sampling.unitary(rng, n), sampling.unitary(rng, n)
    dv = np.zeros((n, n), complex)
    dv[:k, :k] = np.diag(rng.uniform(0.5, 1.5, k))
    dz = np.zeros((n, n), complex)
    dz[k:, k:] = cgauss(rng, n - k)
    return u @ dv @ adjoint(w), u @ dz @ adjoint(w)


def fd_second_derivative(v, z, p):
    """Richardson-extrapolated central second difference of ``s -> ||v + s z||_p^p``."""
    f = lambda s: lagrangian(v + s * z, p)  # noqa: E731
    h = 1e-2 * (1 + opnorm(v)) / (1 + opnorm(z))

    def d2(h):
        return (-f(2 * h) + 16 * f(h) - 30 * f(0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h)

    return (16 * d2(h / 2) - d2(h)) / 15


class TestPMetric:
    @pytest.mark.parametrize("p", [2, 4, 6, 10])
    def test_derived(self, p):
        m = PMetric(p)
        assert m.n == p // 2
        assert m.q == pytest.approx(p / (p - 1))
        assert 0.5 < m.alpha <= 1 and 1 < m.q <= 2

    @pytest.mark.parametrize("p", [0, 1, 3, 4.5, -2])
    def test_rejects(self, p):
        with pytest.raises(PreconditionError):
            PMetric(p)


class TestLegendre:
    def test_p2_identity(self, rng):
        v = cgauss(rng, 3)
        assert maxabs(legendre(v, 2) - v) == 0

    @pytest.mark.parametrize("p", [4, 6])
    def test_unitary_fixed(self, rng, p):
        u = sampling.unitary(rng, 4)
        assert maxabs(legendre(u, p) - u) < 1e-14

    def test_diag(self):
        assert maxabs(legendre(np.diag([2, 1j]), 4) - np.diag([8, 1j])) < 1e-15

    def test_inverse_p2(self, rng):
        w = cgauss(rng, 3)
        assert maxabs(legendre_inverse(w, 2) - w) == 0

    def test_inverse_diag(self):
        assert maxabs(legendre_inverse(np.diag([8, 1j]), 4) - np.diag([2, 1j])) < 1e-14

    @pytest.mark.parametrize("p", [2, 4, 6])
    @pytest.mark.parametrize("rank", [None, 1, 2])
    def test_round_trip(self, rng, p, rank):
        for _ in range(10):
            v = sampling.with_singular_values(rng, 4, rank=rank)
            assert maxabs(legendre_inverse(legendre(v, p), p) - v) < 1e-9

    @given(complex_matrices(max_n=3, bound=1.0), st.sampled_from([2, 4, 6]))
    def test_forward_round_trip(self, w, p):
        # legendre(legendre_inverse(w)) = w; well conditioned in this direction
        assert maxabs(legendre(legendre_inverse(w, p), p) - w) <= 1e-11 * (1 + opnorm(w))

    @pytest.mark.parametrize("p", [4, 6])
    def test_shares_polar_isometry(self, rng, p):
        v = sampling.with_singular_values(rng, 4, rank=3)
        w = legendre(v, p)
        u1, s1, vh1 = np.linalg.svd(v)
        u2, s2, vh2 = np.linalg.svd(w)
        om1 = u1[:, :3] @ vh1[:3]
        om2 = u2[:, :3] @ vh2[:3]
        assert maxabs(om1 - om2) < 1e-10

    @pytest.mark.parametrize("p", [4, 6])
    def test_modulus_identity(self, rng, p):
        n = p // 2
        v = sampling.with_singular_values(rng, 4)
        w = legendre(v, p)
        lhs = positive_power(adjoint(v) @ v, n)
        rhs = positive_power(adjoint(w) @ w, n / (2 * n - 1))
        assert maxabs(lhs - rhs) < 1e-9


class TestHamiltonRhs:
    def test_normal_vanishes(self, rng):
        w = sampling.normal(rng, 4)
        assert maxabs(hamilton_rhs(w, 4)) < 1e-13

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_nilpotent(self, p):
        out = hamilton_rhs(np.array([[0, 1], [0, 0]]), p)
        assert maxabs(out - np.diag([-1, 1])) < 1e-15

    def test_scaled_nilpotent(self):
        out = hamilton_rhs(np.array([[0, 3], [0, 0]]), 4)
        c = 3 ** (4 / 3)
        assert maxabs(out - np.diag([-c, c])) < 1e-13

    @given(complex_matrices(), st.sampled_from([2, 4, 6]))
    def test_matches_spectral_calculus(self, w, p):
        q = p / (p - 1)
        expected = positive_power(adjoint(w) @ w, q / 2) - positive_power(w @ adjoint(w), q / 2)
        out = hamilton_rhs(w, p)
        assert maxabs(out - expected) <= 1e-9 * (1 + opnorm(w))
        assert opnorm(out - adjoint(out)) <= 1e-12 * (1 + opnorm(out))


class TestElResidual:
    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_normal_constant(self, rng, p):
        v = sampling.normal(rng, 3)
        assert maxabs(el_residual(v, np.zeros_like(v), p)) < 1e-12

    @pytest.mark.parametrize("p", [4, 6])
    @pytest.mark.parametrize("t", [0.0, 0.3, 1.7])
    def test_partial_isometry_solution(self, rng, p, t):
        v0 = sampling.partial_isometry(rng, 4, rank=2)
        x0 = 0.5 * (v0 + adjoint(v0))
        y0 = -0.5j * (v0 - adjoint(v0))
        rot = expm(2j * t * y0)
        x = adjoint(rot) @ x0 @ rot
        v = x + 1j * y0
        vdot = 2j * (x @ y0 - y0 @ x)
        assert maxabs(el_residual(v, vdot, p)) < 1e-12

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_finite_difference_oracle(self, rng, p):
        n = p // 2
        h = 1e-5
        for _ in range(5):
            v, vdot = cgauss(rng, 3), cgauss(rng, 3)
            dw = (legendre(v + h * vdot, p) - legendre(v - h * vdot, p)) / (2 * h)
            a = adjoint(v) @ v
            b = v @ adjoint(v)
            expected = dw - np.linalg.matrix_power(a, n) + np.linalg.matrix_power(b, n)
            assert maxabs(el_residual(v, vdot, p) - expected) < 1e-7

    def test_path_variant_small_on_solution(self, rng):
        v0 = sampling.partial_isometry(rng, 3, rank=1)
        x0 = 0.5 * (v0 + adjoint(v0))
        y0 = -0.5j * (v0 - adjoint(v0))
        times = np.linspace(0, 1, 401)
        rot = expm(2j * times[:, None, None] * y0)
        vs = adjoint(rot) @ x0 @ rot + 1j * y0
        assert maxabs(el_residual_path(times, vs, 4)) < 1e-4

    def test_path_variant_needs_three_nodes(self):
        with pytest.raises(PreconditionError):
            el_residual_path([0, 1], np.zeros((2, 2, 2)), 4)


def exp_path(h, nodes=201):
    times = np.linspace(0, 1, nodes)
    return DiscretePath(times, expm(1j * times[:, None, None] * h))


class TestFunctionals:
    @pytest.mark.parametrize("p", [2, 4])
    def test_constant_path(self, rng, p):
        g = sampling.invertible(rng, 3)
        path = DiscretePath(np.linspace(0, 1, 11), np.repeat(g[None], 11, axis=0))
        assert p_energy(path, p) < 1e-14 and p_length(path, p) < 1e-14

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_one_parameter_group(self, rng, p):
        h = sampling.self_adjoint(rng, 3)
        err = []
        for nodes in (101, 201):
            path = exp_path(h, nodes)
            err.append(abs(p_length(path, p) - p_norm(h, p)))
            assert p_energy(path, p) == pytest.approx(p_norm(h, p) ** p, rel=1e-3)
        assert err[1] < 1e-3
        # second order in the grid spacing
        assert err[1] < err[0] / 3

    def test_left_translation(self, rng):
        h = sampling.self_adjoint(rng, 3)
        path = exp_path(h, 51)
        k = sampling.invertible(rng, 3)
        assert p_length(path.left_translate(k), 4) == pytest.approx(p_length(path, 4), rel=1e-12)

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_holder(self, rng, p):
        for _ in range(5):
            a, b = cgauss(rng, 3), cgauss(rng, 3)
            times = np.linspace(0, 1, 41)
            # a non-constant-speed path
            gs = expm(times[:, None, None] ** 2 * a) @ expm(times[:, None, None] * b)
            path = DiscretePath(times, gs)
            assert p_length(path, p) ** p <= p_energy(path, p) + 1e-12

    def test_singular_point(self):
        pts = np.stack([np.eye(2), np.diag([1.0, 0.0])])
        with pytest.raises(SingularPointError):
            DiscretePath([0.0, 1.0], pts)

    @pytest.mark.parametrize("times", [[0.0, 0.0, 1.0], [0.0, 2.0, 1.0], [0.0]])
    def test_bad_grid(self, times):
        with pytest.raises(PreconditionError):
            DiscretePath(times, np.repeat(np.eye(2)[None], len(times), axis=0))


class TestSecondVariation:
    def test_p2(self, rng):
        for _ in range(10):
            v, z = cgauss(rng, 4), cgauss(rng, 4)
            assert second_variation(v, z, 2) == pytest.approx(2 * p_norm(z, 2) ** 2, abs=1e-12)

    def test_degenerate_diag(self):
        assert second_variation(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 4) == 0.0

    @pytest.mark.parametrize("p", [4, 6, 8])
    def test_matches_richardson_oracle(self, rng, p):
        for _ in range(5):
            v, z = cgauss(rng, 3), cgauss(rng, 3)
            expected = fd_second_derivative(v, z, p)
            assert second_variation(v, z, p) == pytest.approx(expected, rel=1e-6, abs=1e-8)

    @given(complex_matrices(n=3, bound=1.0), complex_matrices(n=3, bound=1.0))
    def test_nonnegative(self, v, z):
        assert second_variation(v, z, 4) >= -1e-8

    @pytest.mark.parametrize("p", [4, 6])
    def test_degenerate_expansion(self, rng, p):
        for k in (1, 2, 3):
            v, z = degenerate_pair(rng, 4, k)
            assert is_degenerate_direction(v, z)
            for s in (0.1, 0.5, 1.0):
                lhs = lagrangian(v + s * z, p)
                rhs = lagrangian(v, p) + s ** p * lagrangian(z, p)
                assert lhs == pytest.approx(rhs, abs=1e-10)
            assert abs(second_variation(v, z, p)) < 1e-12


class TestDegenerateDirection:
    def test_zero(self, rng):
        assert is_degenerate_direction(cgauss(rng, 3), np.zeros((3, 3)))

    def test_diag(self):
        assert is_degenerate_direction(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))

    def test_invertible_v(self, rng):
        v = sampling.invertible(rng, 3)
        assert not is_degenerate_direction(v, cgauss(rng, 3))
