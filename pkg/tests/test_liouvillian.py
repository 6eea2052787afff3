import numpy as np
import pytest

from trispin.liouvillian import (
    DensityMatrix,
    JumpChannel,
    Superoperator,
    apply_generator,
    build_generator,
    commutator_part,
    dissipator,
    tilt_generator,
    unvectorize,
    vectorize,
)
from trispin.spin_algebra import ModelParams, SpinOperator, collective_jump, ladder


def random_density(rng, n=8):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, n=8):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


class TestVectorize:
    def test_column_stacking_identity(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        b = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = random_density(rng)
        lhs = np.kron(b.T, a) @ vectorize(rho)
        rhs = vectorize(a @ rho @ b)
        assert np.allclose(lhs, rhs, atol=1e-13)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng)
        assert np.allclose(unvectorize(vectorize(rho)), rho)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            unvectorize(np.zeros(63))


class TestDissipator:
    def test_two_level_closed_form(self):
        # D[L]rho = 2 L rho L^dag - L^dag L rho - rho L^dag L, checked on a
        # single-site lowering operator against the direct expression.
        rng = np.random.default_rng(2)
        lower = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
        rho = random_density(rng, n=2)
        out = unvectorize(dissipator(lower, rate=0.7).matrix @ vectorize(rho))
        ll = lower.conj().T @ lower
        direct = 0.7 * (
            2.0 * lower @ rho @ lower.conj().T - ll @ rho - rho @ ll
        )
        assert np.allclose(out, direct, atol=1e-13)

    def test_trace_annihilation(self):
        rng = np.random.default_rng(3)
        rho = random_density(rng)
        op = collective_jump("-")
        out = unvectorize(dissipator(op).matrix @ vectorize(rho))
        assert abs(np.trace(out)) < 1e-12

    def test_rate_scaling(self):
        op = ladder(2, "-")
        assert np.allclose(
            dissipator(op, rate=3.0).matrix, 3.0 * dissipator(op).matrix
        )


class TestCommutatorPart:
    def test_matches_direct_commutator(self):
        rng = np.random.default_rng(4)
        h = random_hermitian(rng)
        rho = random_density(rng)
        out = unvectorize(commutator_part(h).matrix @ vectorize(rho))
        assert np.allclose(out, -1j * (h @ rho - rho @ h), atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            commutator_part(collective_jump("-"))


class TestBuildGenerator:
    def test_trace_preserving(self):
        rng = np.random.default_rng(5)
        for p in (
            ModelParams(),
            ModelParams(nbar=2.0),
            ModelParams(gamma_single=5e-4, nbar=1.0, convention="halved"),
        ):
            w = build_generator(p)
            rho = random_density(rng)
            assert abs(np.trace(apply_generator(w, rho))) < 1e-11

    def test_preserves_hermiticity(self):
        rng = np.random.default_rng(6)
        p = ModelParams(gamma_single=5e-4, nbar=1.0)
        out = apply_generator(build_generator(p), random_density(rng))
        assert np.abs(out - out.conj().T).max() < 1e-12

    def test_closed_limit_is_commutator(self):
        p = ModelParams(gamma_coll=0.0, gamma_single=0.0)
        w = build_generator(p)
        from trispin.spin_algebra import build_hamiltonian

        h = build_hamiltonian(p).matrix
        assert np.allclose(w.matrix, commutator_part(h).matrix)


class TestTiltGenerator:
    def test_zero_bias_equals_generator(self):
        p = ModelParams(nbar=1.0, gamma_single=5e-4)
        assert np.allclose(
            tilt_generator(p, 0.0).matrix, build_generator(p).matrix
        )

    def test_only_collective_recycling_is_tilted(self):
        # W_s - W must equal the biased collective recycling alone; the
        # single-spin channels carry no counting factor.
        p = ModelParams(nbar=2.0, gamma_single=5e-4, convention="halved")
        s = 0.37
        lm = collective_jump("-", p.convention).matrix
        lp = collective_jump("+", p.convention).matrix
        em = 2.0 * p.gamma_coll * (p.nbar + 1.0) * (np.exp(-s) - 1.0)
        ab = 2.0 * p.gamma_coll * p.nbar * (np.exp(s) - 1.0)
        expected = em * np.kron(lm.conj(), lm) + ab * np.kron(lp.conj(), lp)
        diff = tilt_generator(p, s).matrix - build_generator(p).matrix
        assert np.allclose(diff, expected, atol=1e-13)

    def test_trace_identity(self):
        # tr(W_s[rho]) = 2G(nbar+1)(e^-s - 1) tr(L+ L- rho)
        #              + 2G nbar (e^s - 1) tr(L- L+ rho)
        rng = np.random.default_rng(7)
        p = ModelParams(nbar=1.0, gamma_single=5e-4)
        rho = random_density(rng)
        s = -0.41
        lm = collective_jump("-", p.convention).matrix
        lp = collective_jump("+", p.convention).matrix
        expected = 2.0 * p.gamma_coll * (p.nbar + 1.0) * (np.exp(-s) - 1.0) * np.trace(
            lp @ lm @ rho
        ) + 2.0 * p.gamma_coll * p.nbar * (np.exp(s) - 1.0) * np.trace(lm @ lp @ rho)
        out = np.trace(apply_generator(tilt_generator(p, s), rho))
        assert abs(out - expected) < 1e-11

    def test_transpose_symmetry_at_detailed_balance(self):
        # With only the collective channels, the generator at s0 - s is the
        # transpose of the generator at s, where e^{s0} = (nbar+1)/nbar.
        for nbar in (1.0, 2.0, 5.0):
            p = ModelParams(nbar=nbar)
            s0 = np.log((nbar + 1.0) / nbar)
            for s in (-0.2, 0.0, 0.11):
                a = tilt_generator(p, s0 - s).matrix
                b = tilt_generator(p, s).matrix.T
                assert np.abs(a - b).max() < 1e-13

    def test_transpose_symmetry_broken_by_single_spin_damping(self):
        p = ModelParams(nbar=1.0, gamma_single=5e-4)
        s0 = np.log(2.0)
        a = tilt_generator(p, s0 - 0.1).matrix
        b = tilt_generator(p, 0.1).matrix.T
        assert np.abs(a - b).max() > 1e-6


class TestDensityMatrix:
    def test_valid(self):
        rng = np.random.default_rng(8)
        dm = DensityMatrix(random_density(rng))
        assert dm.matrix.shape == (8, 8)

    def test_rejects_non_hermitian(self):
        m = np.eye(8, dtype=complex)
        m[0, 1] = 0.5
        with pytest.raises(ValueError):
            DensityMatrix(m / np.trace(m))

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(8) / 4.0)

    def test_rejects_negative_eigenvalue(self):
        m = np.diag([1.5, -0.5, 0, 0, 0, 0, 0, 0]).astype(complex)
        with pytest.raises(ValueError):
            DensityMatrix(m)

    def test_null_dimension_carried(self):
        dm = DensityMatrix(np.eye(8) / 8.0, null_dimension=4)
        assert dm.null_dimension == 4


class TestSuperoperator:
    def test_hilbert_dim(self):
        assert Superoperator(np.zeros((64, 64))).hilbert_dim == 8

    def test_rejects_non_square_dimension(self):
        with pytest.raises(ValueError):
            Superoperator(np.zeros((63, 63)))
        with pytest.raises(ValueError):
            Superoperator(np.zeros((64, 63)))

    def test_bias_recorded(self):
        p = ModelParams(nbar=1.0)
        w = tilt_generator(p, 0.25)
        assert w.bias == 0.25
        assert w.params == p


class TestJumpChannel:
    def test_validation(self):
        op = SpinOperator(np.eye(8))
        with pytest.raises(ValueError):
            JumpChannel(op, rate=0.0, count_weight=1)
        with pytest.raises(ValueError):
            JumpChannel(op, rate=1.0, count_weight=2)

    def test_fields(self):
        op = SpinOperator(np.eye(8))
        ch = JumpChannel(op, rate=0.1, count_weight=-1)
        assert ch.rate == 0.1
        assert ch.count_weight == -1


class TestApplyGenerator:
    def test_dimension_mismatch(self):
        w = Superoperator(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            apply_generator(w, np.eye(8) / 8.0)
