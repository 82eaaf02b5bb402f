import numpy as np
import pytest
from scipy.linalg import hadamard

from qstkit.design import check_unitary_design
from qstkit.errors import ShapeError, Unsupported
from qstkit.estimators import lse_fit
from qstkit.mub import (
    IRREDUCIBLE_POLYS,
    build_mub,
    fwht,
    gf_field,
    gf_mul,
    mub_reconstruct,
    pauli_matrix,
    pauli_phase,
    phase_table_dense,
)

from .conftest import random_density


def slow_gf_mul(a, b, poly):
    """Schoolbook shift-and-add multiplication with reduction after every shift."""
    deg = poly.bit_length() - 1
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= poly
    return out


@pytest.mark.parametrize("k", range(1, 13))
def test_field_multiplication_matches_schoolbook(k):
    F = gf_field(k)
    rng = np.random.default_rng(k)
    for a, b in rng.integers(0, 1 << k, size=(50, 2)):
        assert gf_mul(int(a), int(b), F) == slow_gf_mul(int(a), int(b), IRREDUCIBLE_POLYS[k])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_field_axioms(k):
    F = gf_field(k)
    q = 1 << k
    for a in range(1, q):
        assert sum(F.mul(a, b) == 1 for b in range(1, q)) == 1  # unique inverse
    tr = [F.trace(a) for a in range(q)]
    assert set(tr) <= {0, 1} and sum(tr) == q // 2


def test_gf4_worked_product():
    assert gf_mul(3, 7, gf_field(3)) == 2


@pytest.mark.parametrize("n", [1, 2, 8, 64, 2048])
def test_fwht_matches_naive(n, rng):
    x = rng.standard_normal(n)
    assert np.allclose(fwht(x), hadamard(n) @ x, atol=1e-9)


def test_fwht_axis_and_inverse(rng):
    X = rng.standard_normal((4, 16))
    assert np.allclose(fwht(X, axis=1), X @ hadamard(16).T)
    assert np.allclose(fwht(X.T, axis=0), hadamard(16) @ X.T)
    assert np.allclose(fwht(fwht(X)) / 16, X)
    with pytest.raises(ShapeError):
        fwht(np.ones(6))


def test_pauli_conventions():
    Y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(pauli_matrix(1, 1, 1), Y)
    rng = np.random.default_rng(0)
    for a, b, c, d in rng.integers(0, 8, size=(40, 4)):
        lhs = pauli_matrix(a, b, 3) @ pauli_matrix(c, d, 3)
        e = pauli_phase(int(a), int(b), int(c), int(d))
        assert np.allclose(lhs, 1j ** e * pauli_matrix(a ^ c, b ^ d, 3))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_phases_agree_with_dense_products(k):
    mub = build_mub(k)
    assert np.array_equal(mub.phases, phase_table_dense(mub))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_bases_are_mutually_unbiased(k):
    mub = build_mub(k)
    q = mub.q
    vecs = []
    for c in range(mub.n_cliques):
        P = mub.projectors(c)
        assert np.allclose(P.sum(0), np.eye(q), atol=1e-12)
        assert np.allclose(np.einsum("aij,bji->ab", P, P), np.eye(q), atol=1e-12)
        vecs.append(P)
    for c in range(mub.n_cliques):
        for e in range(c + 1, mub.n_cliques):
            overlaps = np.real(np.einsum("aij,bji->ab", vecs[c], vecs[e]))
            assert np.allclose(overlaps, 1 / q, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_alpha(k):
    rep = check_unitary_design(build_mub(k).to_design())
    assert rep.is_unitary and rep.alpha_theory == pytest.approx(1 / (2 ** k + 1))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_probabilities_match_born_rule(k, rng):
    mub = build_mub(k)
    rho = random_density(mub.q, rng)
    dense = np.array([np.real(np.einsum("aij,ji->a", mub.projectors(c), rho)) for c in range(mub.n_cliques)])
    assert np.allclose(mub.probabilities(rho), dense, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_reconstruct_equals_lse(k, rng):
    mub = build_mub(k)
    rho = random_density(mub.q, rng)
    counts = mub.sample(rho, 37, rng)
    fast = mub_reconstruct(mub, counts)
    slow = lse_fit(mub.to_design(), counts).rho_hat
    assert np.abs(fast - slow).max() < 1e-8


@pytest.mark.parametrize("k", [5, 8])
def test_reconstruct_exact_data_returns_state(k, rng):
    mub = build_mub(k)
    rho = random_density(mub.q, rng, rank=2)
    assert np.abs(mub_reconstruct(mub, mub.probabilities(rho)) - rho).max() < 1e-10


def test_limits():
    with pytest.raises(Unsupported):
        build_mub(13)
    with pytest.raises(Unsupported):
        build_mub(7).to_design()
    with pytest.raises(ShapeError):
        mub_reconstruct(build_mub(2), np.ones((4, 4)) / 4)
