import numpy as np
import pytest

from qstkit.design import (
    Design,
    check_complete,
    check_unitary_design,
    design_alpha,
    haar_random_design,
    haar_unitary,
    local_pauli_design,
    pauli_tensor_design,
    qubit_bloch_design,
    rebit_design,
    uniform_angles,
)
from qstkit.hermitian import HermitianSpace
from qstkit.measurement import PAULIS

from .conftest import random_density, random_hermitian


def dense_gram(d: Design) -> np.ndarray:
    """Gram superoperator assembled entrywise from <B_a, P_ik><P_ik, B_b> / (n m_ik)."""
    B = d.space.basis
    G = np.zeros((len(B), len(B)))
    for o in d.observables:
        for P, m in zip(o.projectors, o.multiplicities):
            c = np.real(np.einsum("aij,ji->a", B, P))
            G += np.outer(c, c) / m
    return G / d.n


def test_gram_matches_entrywise_assembly(rng):
    d = haar_random_design(3, "complex", 7, 1, np.diag([0.0, 1.0, 2.0]))
    assert np.allclose(d.gram.matrix, dense_gram(d), atol=1e-12)
    d2 = pauli_tensor_design(2)
    assert np.allclose(d2.gram.matrix, dense_gram(d2), atol=1e-12)


def test_adjoint_identity(rng):
    d = haar_random_design(4, "complex", 5, 2, np.diag([0.0, 1.0, 2.0, 3.0]))
    S = random_hermitian(4, rng)
    A = rng.standard_normal(d.labels.size)
    lhs = np.dot(d.expectations(S) / d.multiplicities, A)
    rhs = np.real(np.vdot(S, d.adjoint_flat(A / d.multiplicities)))
    assert np.isclose(lhs, rhs)


def test_probabilities_sum_to_one(rng):
    d = local_pauli_design(2)
    rho = random_density(4, rng)
    p = d.blocks(d.probabilities(rho))
    assert all(np.isclose(b.sum(), 1) for b in p)


def test_qubit_paulis_are_one_third_unitary():
    d = qubit_bloch_design(np.eye(3))
    rep = check_unitary_design(d)
    assert rep.is_unitary and rep.alpha_theory == pytest.approx(1 / 3)
    assert rep.deviation < 1e-12


def test_full_pauli_parity_design_is_one_fifteenth_unitary():
    d = pauli_tensor_design(2)
    assert d.n == 15
    rep = check_unitary_design(d)
    assert rep.is_unitary
    assert rep.alpha_theory == pytest.approx(1 / 15)


def test_local_pauli_sectors():
    d = local_pauli_design(2)
    assert d.n == 9 and d.rank_one
    w = np.linalg.eigvalsh(d.gram.matrix)
    for value, mult in [(1.0, 1), (1 / 3, 6), (1 / 9, 9)]:
        assert np.sum(np.isclose(w, value, atol=1e-9)) == mult
    assert not check_unitary_design(d).is_unitary


def test_rebit_uniform_angles_are_half_unitary():
    d = rebit_design(uniform_angles(7))
    rep = check_unitary_design(d)
    assert rep.is_unitary and rep.alpha_theory == pytest.approx(0.5)


def test_incomplete_design_detected():
    d = qubit_bloch_design([[0, 0, 1]])
    rep = check_complete(d)
    assert not rep.complete and rep.null_space_dim == 2


def test_haar_unitary_is_unitary_and_seeded():
    U = haar_unitary(5, "complex", 11)
    assert np.allclose(U.conj().T @ U, np.eye(5))
    assert np.array_equal(U, haar_unitary(5, "complex", 11))
    O = haar_unitary(4, "real", 3)
    assert O.dtype == np.float64 and np.allclose(O.T @ O, np.eye(4))


def test_haar_design_near_unitary_for_many_observables():
    d = haar_random_design(3, "complex", 400, 5, np.diag([-2.0, 0.0, 2.0]))
    rep = check_unitary_design(d, statistical=True)
    assert rep.is_unitary is None
    assert rep.alpha_hat <= design_alpha(d) + 1e-12
    assert rep.deviation < 0.1


def test_rotated_design_keeps_spectrum(rng):
    d = qubit_bloch_design(np.eye(3))
    U = haar_unitary(2, "complex", rng)
    assert np.allclose(d.rotated(U).gram_eigenvalues, d.gram_eigenvalues)


def test_sample_shapes(rng):
    d = qubit_bloch_design(np.eye(3))
    c = d.sample(np.eye(2) / 2, 50, rng)
    assert c.n == 3 and c.shots == 50
    assert np.allclose(d.exact_counts(np.eye(2) / 2).flat(), 0.5)


def test_pauli_sigma_observables():
    d = qubit_bloch_design(np.eye(3))
    assert np.allclose(d.matrices(), PAULIS)
    assert d.space == HermitianSpace(2, "complex")


def test_haar_deviation_shrinks_with_more_observables():
    dev = [
        check_unitary_design(haar_random_design(3, "complex", n, 1, np.diag([-2.0, 0.0, 2.0])), statistical=True).deviation
        for n in (25, 100, 400, 1600)
    ]
    assert all(a > b for a, b in zip(dev, dev[1:]))
