"""Measurement designs: the design tensor, its adjoint and Gram superoperator.

Internally a design is flattened over all (observable, eigenspace) pairs.
Row ``f`` of :attr:`Design.vec_projectors` is the coordinate vector of the
eigenprojection ``Pi_ik`` so that the expected frequency of outcome ``k`` of
observable ``i`` in state ``S`` is a dot product with ``vec(S)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateObservable, ShapeError, SpectrumError
from .hermitian import (
    DEFAULT_CLUSTER_TOL,
    Field,
    HermitianSpace,
    SpectralDecomp,
    alpha_q,
    as_hermitian,
    spectral,
)
from .measurement import PAULIS, CountsTable, normalize_probs


@dataclass(frozen=True)
class SuperOp:
    """Linear map on self-adjoint matrices, as a real matrix on coordinates."""

    matrix: np.ndarray
    space: HermitianSpace

    def apply(self, S) -> np.ndarray:
        return self.space.devectorize(self.matrix @ self.space.vectorize(S))

    def traceless_block(self) -> np.ndarray:
        return self.matrix[1:, 1:]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(self.matrix @ other.matrix, self.space)


class Design:
    """An ordered collection of observables on a common space.

    Parameters
    ----------
    observables : sequence of SpectralDecomp
        Each must have at least two distinct eigenvalues.
    field : {'real', 'complex'}
    """

    def __init__(self, observables: Sequence[SpectralDecomp], field="complex"):
        observables = list(observables)
        if not observables:
            raise ShapeError("a design needs at least one observable")
        q = observables[0].q
        self.field = Field.coerce(field)
        for i, obs in enumerate(observables):
            if obs.q != q:
                raise ShapeError(f"observable {i} acts on dimension {obs.q}, expected {q}")
            if obs.n_distinct < 2:
                raise DegenerateObservable(
                    f"observable {i} has a single eigenvalue and carries no information"
                )
        self.observables = observables
        self.space = HermitianSpace(q, self.field)
        self.q = q
        self.n = len(observables)
        sizes = np.array([o.n_distinct for o in observables])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.labels = np.concatenate([o.eigenvalues for o in observables])
        self.multiplicities = np.concatenate([o.multiplicities for o in observables])
        self.obs_index = np.repeat(np.arange(self.n), sizes)
        projs = np.concatenate([o.projectors for o in observables])
        self.vec_projectors = self.space.vectorize(projs)

    @classmethod
    def from_matrices(cls, matrices, field="complex", cluster_tol: float = DEFAULT_CLUSTER_TOL):
        return cls([spectral(M, cluster_tol, field) for M in matrices], field)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Design(n={self.n}, q={self.q}, field={self.field.value!r}, q_bar={self.q_bar:.4g})"

    @property
    def q_bar(self) -> float:
        return len(self.labels) / self.n

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def rank_one(self) -> bool:
        return bool(np.all(self.multiplicities == 1))

    def blocks(self, flat):
        """Split a flat per-outcome vector into per-observable rows."""
        return [flat[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n)]

    @cached_property
    def stretch_index(self) -> np.ndarray:
        """``(n, q)`` map from stretched row position to flat outcome index."""
        return np.stack([
            np.repeat(np.arange(self.offsets[i], self.offsets[i + 1]), o.multiplicities)
            for i, o in enumerate(self.observables)
        ])

    def matrices(self) -> np.ndarray:
        return np.stack([o.matrix() for o in self.observables])

    def expectations(self, S) -> np.ndarray:
        """Flat vector of ``tr(S Pi_ik)``."""
        return self.vec_projectors @ self.space.vectorize(S)

    def probabilities(self, rho) -> np.ndarray:
        """Flat Born probabilities, clamped and renormalized per observable."""
        d = self.expectations(rho)
        return np.concatenate([normalize_probs(row) for row in self.blocks(d)])

    def apply(self, S) -> np.ndarray:
        """The design tensor: ``(n, q)`` matrix of stretched ``d_ik[S] / m_ik``."""
        d = self.expectations(S) / self.multiplicities
        return d[self.stretch_index]

    def adjoint(self, A) -> np.ndarray:
        """Adjoint of :meth:`apply`: ``sum_ik abar_ik Pi_ik``."""
        A = np.asarray(A, dtype=float)
        if A.shape != (self.n, self.q):
            raise ShapeError(f"expected ({self.n}, {self.q}), got {A.shape}")
        sums = np.zeros(len(self.labels))
        np.add.at(sums, self.stretch_index.ravel(), A.ravel())
        return self.adjoint_flat(sums / self.multiplicities)

    def adjoint_flat(self, a) -> np.ndarray:
        """``sum_ik a_ik Pi_ik`` for a flat coefficient vector."""
        return self.space.devectorize(self.vec_projectors.T @ np.asarray(a, dtype=float))

    @cached_property
    def gram(self) -> SuperOp:
        V = self.vec_projectors
        G = V.T @ (V / (self.n * self.multiplicities)[:, None])
        return SuperOp((G + G.T) / 2, self.space)

    @cached_property
    def gram_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gram.traceless_block())

    def sample(self, rho, r: int, rng: np.random.Generator) -> CountsTable:
        """Draw ``r`` shots of every observable."""
        p = self.probabilities(rho)
        sizes = self.sizes
        if np.all(sizes == sizes[0]):
            counts = rng.multinomial(int(r), p.reshape(self.n, sizes[0]))
            return CountsTable.from_counts(list(counts))
        return CountsTable.from_counts([rng.multinomial(int(r), row) for row in self.blocks(p)])

    def exact_counts(self, rho) -> CountsTable:
        return CountsTable.from_probabilities(self.blocks(self.probabilities(rho)))

    def rotated(self, U) -> "Design":
        return Design([o.conjugate(U) for o in self.observables], self.field)


def design_apply(d: Design, S) -> np.ndarray:
    return d.apply(S)


def design_adjoint(d: Design, A) -> np.ndarray:
    return d.adjoint(A)


def gram_superop(d: Design) -> SuperOp:
    return d.gram


@dataclass(frozen=True)
class CompletenessReport:
    complete: bool
    null_space_dim: int
    min_eigenvalue: float


def check_complete(d: Design, tol: float = 1e-9) -> CompletenessReport:
    """Injectivity of the design tensor, read off the Gram spectrum."""
    w = d.gram.eigvalsh()
    nulls = int(np.sum(w <= tol))
    return CompletenessReport(nulls == 0, nulls, float(w[0]))


@dataclass(frozen=True)
class UnitaryDesignReport:
    """Outcome of :func:`check_unitary_design`.

    ``alpha_hat`` is the smallest traceless Gram eigenvalue. It never exceeds
    ``alpha_theory`` and equals it exactly for unitary designs. ``is_unitary``
    is ``None`` in statistical mode.
    """

    is_unitary: bool | None
    alpha_hat: float
    alpha_theory: float
    deviation: float
    tau_max: float


def design_alpha(d: Design) -> float:
    """``((q_bar - 1)/(q - 1)) * alpha_Q``."""
    return (d.q_bar - 1) / (d.q - 1) * alpha_q(d.q, d.field)


def check_unitary_design(d: Design, tol: float = 1e-8, statistical: bool = False) -> UnitaryDesignReport:
    tau = d.gram_eigenvalues
    a = design_alpha(d)
    deviation = float(np.max(np.abs(tau - a)))
    verdict = None if statistical else deviation <= tol
    return UnitaryDesignReport(verdict, float(tau[0]), a, deviation, float(tau[-1]))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def haar_unitary(q: int, field="complex", rng=None) -> np.ndarray:
    """Haar-distributed orthogonal or unitary matrix (QR with phase fix)."""
    rng = _as_rng(rng)
    field = Field.coerce(field)
    if field is Field.REAL:
        Z = rng.standard_normal((q, q))
    else:
        Z = (rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def haar_random_design(q: int, field, n: int, seed, seed_observable) -> Design:
    """``n`` Haar-random rotations ``V O V*`` of a non-degenerate observable."""
    field = Field.coerce(field)
    obs = seed_observable if isinstance(seed_observable, SpectralDecomp) else spectral(seed_observable, field=field)
    if obs.q != q:
        raise ShapeError(f"seed observable acts on dimension {obs.q}, expected {q}")
    if obs.n_distinct != q:
        raise SpectrumError("seed observable must have q distinct eigenvalues")
    rng = _as_rng(seed)
    return Design([obs.conjugate(haar_unitary(q, field, rng)) for _ in range(n)], field)


def qubit_bloch_design(unit_vectors) -> Design:
    """Observables ``u . sigma`` for the given (normalized) directions."""
    u = np.asarray(unit_vectors, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(u, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateObservable("zero Bloch direction")
    u = u / norms[:, None]
    return Design.from_matrices(np.einsum("ni,iab->nab", u, PAULIS), "complex")


def rebit_design(angles) -> Design:
    """Real-qubit design of rotated ``Diag(1, -1)`` observables at angles theta_i."""
    t = np.asarray(angles, dtype=float)
    mats = np.stack([[np.cos(t), np.sin(t)], [np.sin(t), -np.cos(t)]]).transpose(2, 0, 1)
    return Design.from_matrices(mats, "real")


def uniform_angles(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(1, n + 1) / n


_PAULI4 = np.stack([np.eye(2, dtype=complex), *PAULIS])


def pauli_string(indices) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, 0 = I, 1..3 = X, Y, Z."""
    M = np.ones((1, 1), dtype=complex)
    for i in indices:
        M = np.kron(M, _PAULI4[i])
    return M


def pauli_tensor_design(k: int, include_identity_factors: bool = True) -> Design:
    """Parity observables of ``k`` qubits.

    With identity factors this is every non-identity Pauli string
    (``4**k - 1`` observables); without, only the ``3**k`` full-weight ones.
    Each has spectrum ``{-1, +1}`` with multiplicity ``2**(k-1)``.
    """
    if k < 1:
        raise ShapeError("need at least one qubit")
    letters = range(4) if include_identity_factors else range(1, 4)
    strings = [s for s in itertools.product(letters, repeat=k) if any(s)]
    return Design([spectral(pauli_string(s)) for s in strings], "complex")


def local_pauli_design(k: int) -> Design:
    """The ``3**k`` local Pauli settings, each resolved in its product eigenbasis.

    Setting ``(i_1, .., i_k)`` is represented by the observable
    ``sum_j 2**(k-1-j) sigma_{i_j}`` acting on qubit ``j``; its eigenvalues
    are the distinct numbers ``sum_j 2**(k-1-j) s_j`` with ``s_j = +-1``, so
    every eigenprojection is a rank-one product state.
    """
    if k < 1:
        raise ShapeError("need at least one qubit")
    obs = []
    for setting in itertools.product(range(1, 4), repeat=k):
        M = sum(
            2 ** (k - 1 - j) * pauli_string([setting[j] if m == j else 0 for m in range(k)])
            for j in range(k)
        )
        obs.append(spectral(M))
    return Design(obs, "complex")


def design_from_matrices(matrices, field="complex") -> Design:
    return Design.from_matrices(as_hermitian(np.asarray(matrices), field), field)
