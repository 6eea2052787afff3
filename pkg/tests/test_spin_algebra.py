import numpy as np
import pytest

from trispin.spin_algebra import (
    HILBERT_DIM,
    ModelParams,
    SpinOperator,
    build_hamiltonian,
    collective_jump,
    embed,
    ladder,
    pauli,
)


def swap_23_permutation():
    """8x8 permutation exchanging the second and third spins."""
    perm = np.zeros((HILBERT_DIM, HILBERT_DIM))
    for b in range(HILBERT_DIM):
        b1, b2, b3 = (b >> 2) & 1, (b >> 1) & 1, b & 1
        perm[(b1 << 2) | (b3 << 1) | b2, b] = 1.0
    return perm


def hamiltonian_by_bit_flips(p):
    """Independent Hamiltonian construction acting on basis bit strings.

    Site 1 is the most significant bit; bit value 0 is the sigma_z = +1
    state.  sigma_x flips a bit, sigma_z contributes (-1)**bit.
    """
    h = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    shifts = {1: 2, 2: 1, 3: 0}
    for b in range(HILBERT_DIM):
        for site in (1, 2, 3):
            h[b ^ (1 << shifts[site]), b] += p.alpha
        for i, j in ((1, 2), (2, 3), (1, 3)):
            h[b ^ (1 << shifts[i]) ^ (1 << shifts[j]), b] += 1.0
        zsum = sum(1.0 if (b >> shifts[site]) & 1 == 0 else -1.0 for site in (1, 2, 3))
        h[b, b] += -p.b_field * zsum
    return h


class TestPauli:
    def test_algebra(self):
        x, y, z = (pauli(a).matrix for a in "xyz")
        assert np.allclose(x @ y, 1j * z)
        assert np.allclose(y @ z, 1j * x)
        assert np.allclose(z @ x, 1j * y)
        for m in (x, y, z):
            assert np.allclose(m @ m, np.eye(2))

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            pauli("w")


class TestEmbed:
    def test_site_order_most_significant_first(self):
        z = pauli("z")
        eye = np.eye(2)
        assert np.allclose(
            embed(z, 1).matrix, np.kron(z.matrix, np.kron(eye, eye))
        )
        assert np.allclose(
            embed(z, 2).matrix, np.kron(eye, np.kron(z.matrix, eye))
        )
        assert np.allclose(
            embed(z, 3).matrix, np.kron(eye, np.kron(eye, z.matrix))
        )

    def test_diagonal_action(self):
        for site, shift in ((1, 2), (2, 1), (3, 0)):
            diag = np.diag(embed(pauli("z"), site).matrix).real
            expected = [1.0 if (b >> shift) & 1 == 0 else -1.0 for b in range(8)]
            assert np.allclose(diag, expected)

    def test_bad_site(self):
        with pytest.raises(ValueError):
            embed(pauli("x"), 0)
        with pytest.raises(ValueError):
            embed(pauli("x"), 4)


class TestHamiltonian:
    def test_matches_bit_flip_oracle(self):
        for alpha, b_field in ((10.0, 0.5), (3.0, 0.2), (0.0, 0.0)):
            p = ModelParams(alpha=alpha, b_field=b_field)
            assert np.allclose(
                build_hamiltonian(p).matrix,
                hamiltonian_by_bit_flips(p),
                atol=1e-14,
            )

    def test_hermitian(self):
        h = build_hamiltonian(ModelParams()).matrix
        assert np.abs(h - h.conj().T).max() < 1e-14

    def test_swap_23_invariance(self):
        h = build_hamiltonian(ModelParams()).matrix
        perm = swap_23_permutation()
        assert np.allclose(perm @ h @ perm.T, h)

    def test_b_zero_spectrum_closed_form(self):
        # With B=0 the transverse field and the pair sum are simultaneously
        # diagonal in the x basis: eigenvalues alpha*m + (m**2 - 3)/2 for
        # total-x m in {-3,-1,1,3} with multiplicities 1,3,3,1.
        alpha = 10.0
        p = ModelParams(alpha=alpha, b_field=0.0)
        eig = np.sort(np.linalg.eigvalsh(build_hamiltonian(p).matrix))
        expected = sorted(
            [alpha * m + (m * m - 3) / 2.0 for m in (-3, 3)]
            + [alpha * m + (m * m - 3) / 2.0 for m in (-1, 1) for _ in range(3)]
        )
        assert np.allclose(eig, expected, atol=1e-12)


class TestLadder:
    def test_single_site_forms(self):
        up = ladder(1, "+", "unhalved").matrix
        # sigma_+ = sigma_x + i sigma_y maps the down state to 2x the up state
        e_up = np.zeros(8)
        e_up[0] = 1.0
        e_down = np.zeros(8)
        e_down[4] = 1.0
        assert np.allclose(up @ e_down, 2.0 * e_up)
        assert np.allclose(up @ e_up, 0.0)

    def test_convention_scale(self):
        for site in (1, 2, 3):
            for d in ("+", "-"):
                assert np.allclose(
                    ladder(site, d, "halved").matrix,
                    0.5 * ladder(site, d, "unhalved").matrix,
                )

    def test_adjoint_pairs(self):
        for site in (1, 2, 3):
            lm = ladder(site, "-", "unhalved").matrix
            lp = ladder(site, "+", "unhalved").matrix
            assert np.allclose(lm.conj().T, lp)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            ladder(1, "up")
        with pytest.raises(ValueError):
            ladder(5, "+")
        with pytest.raises(ValueError):
            ladder(1, "+", "thirded")


class TestCollectiveJump:
    def test_action_on_all_up(self):
        # L_- |uuu> = c^2 (|ddu> - |dud>) with c the lowering amplitude.
        for convention, c in (("unhalved", 2.0), ("halved", 1.0)):
            lm = collective_jump("-", convention).matrix
            out = lm[:, 0]
            expected = np.zeros(8, dtype=complex)
            expected[6] = c * c
            expected[5] = -c * c
            assert np.allclose(out, expected)

    def test_antisymmetric_under_swap_23(self):
        perm = swap_23_permutation()
        for d in ("+", "-"):
            lm = collective_jump(d).matrix
            assert np.allclose(perm @ lm @ perm.T, -lm)

    def test_adjoint_pair(self):
        lm = collective_jump("-").matrix
        lp = collective_jump("+").matrix
        assert np.allclose(lm.conj().T, lp)

    def test_convention_scale(self):
        for d in ("+", "-"):
            assert np.allclose(
                collective_jump(d, "halved").matrix,
                0.25 * collective_jump(d, "unhalved").matrix,
            )

    def test_square_is_zero(self):
        # Each collective jump annihilates its own image (spin-1/2 ladders
        # are nilpotent on every site).
        lm = collective_jump("-").matrix
        assert np.abs(lm @ lm).max() < 1e-14


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert p.alpha == 10.0
        assert p.b_field == 0.5
        assert p.gamma_coll == 0.05
        assert p.gamma_single == 0.0
        assert p.nbar == 0.0
        assert p.convention == "unhalved"

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(alpha=-1.0)
        with pytest.raises(ValueError):
            ModelParams(gamma_coll=-0.1)
        with pytest.raises(ValueError):
            ModelParams(gamma_single=-0.1)
        with pytest.raises(ValueError):
            ModelParams(nbar=-1.0)
        with pytest.raises(ValueError):
            ModelParams(convention="thirded")

    def test_large_b_field_warns(self):
        with pytest.warns(UserWarning):
            ModelParams(alpha=1.0, b_field=0.5)

    def test_frozen(self):
        p = ModelParams()
        with pytest.raises(Exception):
            p.alpha = 1.0


class TestSpinOperator:
    def test_dim(self):
        assert SpinOperator(np.eye(2)).dim == 2
        assert SpinOperator(np.eye(8)).dim == 8

    def test_shape_rejected(self):
        with pytest.raises(ValueError):
            SpinOperator(np.eye(3))
        with pytest.raises(ValueError):
            SpinOperator(np.zeros((2, 8)))

    def test_hermitian_hint_enforced(self):
        m = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            SpinOperator(m, hermitian_hint=True)
