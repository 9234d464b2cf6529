import numpy as np
import pytest

from modaldyn.hilbert import (FactorSpace, check_density_operator, evolve_on_grid,
                              evolve_state, hermitian_eig, matrix_exponential,
                              partial_trace, projector_from_vector, tensor_product)

from conftest import I2, SINGLET, SX, random_density, random_hermitian, random_ket


class TestTensorProduct:
    def test_identity(self):
        assert np.array_equal(tensor_product(I2, I2), np.eye(4))

    def test_block_structure(self):
        out = tensor_product(np.diag([1.0, 0.0]), I2)
        assert np.allclose(out, np.diag([1, 1, 0, 0]))

    def test_sigma_x_pair_on_singlet(self):
        # Hand evaluation: sigma_x x sigma_x swaps |01> and |10>.
        op = tensor_product(SX, SX)
        assert np.allclose(op @ SINGLET, -SINGLET, atol=1e-14)

    def test_associativity(self, rng):
        a = random_hermitian(rng, 2)
        b = random_hermitian(rng, 3)
        c = random_hermitian(rng, 2)
        left = tensor_product(tensor_product(a, b), c)
        right = tensor_product(a, tensor_product(b, c))
        assert np.allclose(left, right, atol=1e-12)


class TestPartialTrace:
    def test_product_state(self, rng):
        ra = random_density(rng, 2)
        rb = random_density(rng, 3)
        w = np.kron(ra, rb)
        space = FactorSpace((2, 3))
        assert np.allclose(partial_trace(w, space, 0), ra, atol=1e-12)
        assert np.allclose(partial_trace(w, space, 1), rb, atol=1e-12)

    def test_singlet_reduces_to_maximally_mixed(self):
        w = np.outer(SINGLET, SINGLET.conj())
        space = FactorSpace((2, 2))
        for keep in (0, 1):
            assert np.allclose(partial_trace(w, space, keep), I2 / 2, atol=1e-12)

    def test_trace_preserved(self, rng):
        w = random_density(rng, 12)
        red = partial_trace(w, FactorSpace((2, 2, 3)), 2)
        assert abs(red.trace() - 1.0) < 1e-10
        check_density_operator(red)

    def test_partner_trace_scaling(self, rng):
        a = random_hermitian(rng, 2)
        b = random_hermitian(rng, 2)
        w = np.kron(a, b)
        red = partial_trace(w, FactorSpace((2, 2)), 0)
        assert np.allclose(red, a * b.trace(), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError, match="mismatch"):
            partial_trace(random_density(rng, 4), FactorSpace((2, 3)), 0)


class TestHermitianEig:
    def test_diagonal_case(self):
        dec = hermitian_eig(np.diag([3.0, 1.0, 2.0]).astype(complex))
        assert np.allclose(dec.values, [3, 2, 1])
        perm = np.abs(dec.vectors)
        assert np.allclose(perm[:, 0], [1, 0, 0])
        assert np.allclose(perm[:, 1], [0, 0, 1])
        assert np.allclose(perm[:, 2], [0, 1, 0])

    def test_crossing_family_weights(self):
        # cos^2, sin^2 weights at theta*t = pi/3 give eigenvalues 3/4, 1/4.
        t = np.pi / 3
        w = np.cos(t) ** 2 * np.diag([1.0, 0]) + np.sin(t) ** 2 * np.diag([0, 1.0])
        dec = hermitian_eig(w.astype(complex))
        assert np.allclose(dec.values, [0.75, 0.25], atol=1e-12)

    def test_reconstruction_and_orthonormality(self, rng):
        for dim in (2, 3, 5, 8):
            a = random_hermitian(rng, dim)
            dec = hermitian_eig(a)
            recon = (dec.vectors * dec.values) @ dec.vectors.conj().T
            assert np.abs(recon - a).max() <= 1e-9
            gram = dec.vectors.conj().T @ dec.vectors
            assert np.abs(gram - np.eye(dim)).max() <= 1e-10

    def test_descending_order(self, rng):
        dec = hermitian_eig(random_hermitian(rng, 6))
        assert np.all(np.diff(dec.values) <= 0)

    def test_degenerate_cluster_flag(self):
        dec = hermitian_eig(np.diag([0.5, 0.5, 0.1]).astype(complex))
        assert dec.clusters[0] == (0, 1)
        assert dec.clusters[1] == (2,)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_deterministic_rerun(self, rng):
        a = random_hermitian(rng, 5)
        d1 = hermitian_eig(a)
        d2 = hermitian_eig(a.copy())
        assert np.array_equal(d1.values, d2.values)
        assert np.array_equal(d1.vectors, d2.vectors)


class TestMatrixExponential:
    def test_zero(self):
        assert np.allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3))

    def test_pauli_rotation(self):
        # Closed form: cos(pi/2) I - i sin(pi/2) sigma_x.
        out = matrix_exponential(-1j * np.pi / 2 * SX)
        assert np.allclose(out, -1j * SX, atol=1e-12)

    def test_inverse_property(self, rng):
        a = random_hermitian(rng, 4) * 1j
        prod = matrix_exponential(a) @ matrix_exponential(-a)
        assert np.abs(prod - np.eye(4)).max() <= 1e-9

    def test_series_residual(self, rng):
        a = 0.3 * random_hermitian(rng, 3)
        series = np.eye(3, dtype=complex)
        term = np.eye(3, dtype=complex)
        for k in range(1, 30):
            term = term @ a / k
            series = series + term
        assert np.abs(matrix_exponential(a) - series).max() <= 1e-9


class TestEvolveState:
    def test_zero_hamiltonian(self, rng):
        psi = random_ket(rng, 4)
        assert np.allclose(evolve_state(psi, np.zeros((4, 4)), 2.3), psi)

    def test_eigenstate_phase(self):
        h = np.diag([1.5, -0.5]).astype(complex)
        psi = np.array([1.0, 0.0], dtype=complex)
        out = evolve_state(psi, h, 0.7)
        assert np.allclose(out, np.exp(-1j * 1.5 * 0.7) * psi, atol=1e-12)

    def test_two_level_rotation_amplitudes(self):
        # Generator -w sigma_x sends |0> to cos(wt)|0> + i sin(wt)|1>.
        w = 1.3
        psi = evolve_state(np.array([1.0, 0]), -w * SX, 0.4)
        assert np.allclose(psi, [np.cos(w * 0.4), 1j * np.sin(w * 0.4)], atol=1e-12)

    def test_norm_preserved(self, rng):
        h = random_hermitian(rng, 5)
        psi = evolve_state(random_ket(rng, 5), h, 3.1)
        assert abs(np.linalg.norm(psi) - 1) < 1e-10

    def test_composition(self, rng):
        h = random_hermitian(rng, 4)
        psi = random_ket(rng, 4)
        one = evolve_state(evolve_state(psi, h, 0.4), h, 0.8)
        two = evolve_state(psi, h, 1.2)
        assert np.abs(one - two).max() <= 1e-9

    def test_non_hermitian_rejected(self, rng):
        with pytest.raises(ValueError, match="Hermitian"):
            evolve_state(random_ket(rng, 2), np.array([[0, 1], [0, 0]]), 1.0)

    def test_grid_evolution_matches_single_steps(self, rng):
        h = random_hermitian(rng, 3)
        psi = random_ket(rng, 3)
        times = np.linspace(0, 2, 9)
        batch = evolve_on_grid(psi, h, times)
        for k, t in enumerate(times):
            assert np.allclose(batch[k], evolve_state(psi, h, t), atol=1e-12)


class TestFactorSpace:
    def test_roundtrip(self):
        space = FactorSpace((2, 3, 2))
        assert space.dim == 12
        for flat in range(space.dim):
            assert space.flat_index(space.joint_of(flat)) == flat
        assert space.joint_indices()[0] == (0, 0, 0)
        assert space.joint_indices()[-1] == (1, 2, 1)

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            FactorSpace((2, 0))


def test_projector_from_vector(rng):
    v = random_ket(rng, 3)
    p = projector_from_vector(v)
    assert np.allclose(p @ p, p, atol=1e-12)
    assert abs(p.trace() - 1) < 1e-12
