"""The real inner-product space of self-adjoint matrices.

Coordinates are taken in a generalized Gell-Mann basis, ordered as

    0                  I / sqrt(q)
    1 .. P             (E_jk + E_kj) / sqrt(2)          j < k, row-major
    P+1 .. 2P          -i (E_jk - E_kj) / sqrt(2)       j < k  (complex only)
    last q-1           diagonal traceless generators, l = 1 .. q-1
                       (E_00 + ... + E_{l-1,l-1} - l E_ll) / sqrt(l (l+1))

with P = q(q-1)/2. For q = 2 over the complex field this is
(I, sigma_x, sigma_y, sigma_z) / sqrt(2). The first coordinate carries the
trace, so trace-centering is a split of the coordinate vector.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ArgumentError, DecompositionFailure, NotHermitian, ShapeError

DEFAULT_CLUSTER_TOL = 1e-9
SYMMETRIZE_TOL = 1e-8


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @classmethod
    def coerce(cls, value) -> "Field":
        if isinstance(value, Field):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ArgumentError(f"unknown field {value!r}; expected 'real' or 'complex'") from None

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128


def dim_sa(q: int, field) -> int:
    """Real dimension of the space of self-adjoint q x q matrices."""
    field = Field.coerce(field)
    return q * (q + 1) // 2 if field is Field.REAL else q * q


def alpha_q(q: int, field) -> float:
    """Unitary-design constant of the full orthogonal/unitary orbit."""
    field = Field.coerce(field)
    return 1.0 / (q / 2 + 1) if field is Field.REAL else 1.0 / (q + 1)


def _helmert(q: int) -> np.ndarray:
    # orthogonal q x q; row 0 = ones/sqrt(q), row l = diagonal generator l
    H = np.zeros((q, q))
    H[0] = 1.0 / np.sqrt(q)
    for l in range(1, q):
        H[l, :l] = 1.0
        H[l, l] = -l
        H[l] /= np.sqrt(l * (l + 1))
    return H


def as_hermitian(M, field=None, tol: float = SYMMETRIZE_TOL) -> np.ndarray:
    """Return ``(M + M*)/2`` after checking that ``M`` is self-adjoint.

    Raises NotHermitian when the anti-Hermitian part exceeds ``tol``
    relative to the matrix size, and ShapeError for non-square input or
    complex entries under the real field.
    """
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ShapeError(f"expected square matrix, got shape {M.shape}")
    if field is not None and Field.coerce(field) is Field.REAL:
        if np.iscomplexobj(M):
            if np.abs(M.imag).max(initial=0.0) > tol * max(1.0, np.abs(M).max(initial=0.0)):
                raise ShapeError("complex entries in a real-field matrix")
            M = M.real
        M = M.astype(np.float64)
    elif np.iscomplexobj(M) or (field is not None and Field.coerce(field) is Field.COMPLEX):
        M = M.astype(np.complex128)
    else:
        M = M.astype(np.float64)
    MH = np.swapaxes(M, -1, -2).conj()
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - MH).max(initial=0.0) > tol * scale:
        raise NotHermitian("matrix is not self-adjoint within tolerance")
    return (M + MH) / 2


class HermitianSpace:
    """Coordinates of q x q self-adjoint matrices in the Gell-Mann basis.

    ``vectorize``/``devectorize`` work on stacks ``(..., q, q)`` and
    ``(..., D)`` and cost O(q^2) per matrix; the dense basis is only built
    when ``basis`` is accessed.
    """

    def __init__(self, q: int, field="complex"):
        if int(q) < 2:
            raise ShapeError(f"dimension must be at least 2, got {q}")
        self.q = int(q)
        self.field = Field.coerce(field)
        self.dim = dim_sa(self.q, self.field)
        self._iu = np.triu_indices(self.q, 1)
        self._helm = _helmert(self.q)
        self._npair = len(self._iu[0])

    def __repr__(self):
        return f"HermitianSpace(q={self.q}, field={self.field.value!r})"

    def __eq__(self, other):
        return isinstance(other, HermitianSpace) and (self.q, self.field) == (other.q, other.field)

    def __hash__(self):
        return hash((self.q, self.field))

    @property
    def dtype(self):
        return self.field.dtype

    @property
    def identity_vec(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = np.sqrt(self.q)
        return e

    def vectorize(self, S) -> np.ndarray:
        S = np.asarray(S)
        if S.shape[-2:] != (self.q, self.q):
            raise ShapeError(f"expected (..., {self.q}, {self.q}), got {S.shape}")
        j, k = self._iu
        off = S[..., j, k]
        diag = np.real(np.diagonal(S, axis1=-2, axis2=-1))
        out = np.empty(S.shape[:-2] + (self.dim,))
        P = self._npair
        dcoords = diag @ self._helm.T
        out[..., 0] = dcoords[..., 0]
        out[..., 1:1 + P] = np.sqrt(2) * np.real(off)
        if self.field is Field.COMPLEX:
            out[..., 1 + P:1 + 2 * P] = -np.sqrt(2) * np.imag(off)
        out[..., self.dim - (self.q - 1):] = dcoords[..., 1:]
        return out

    def devectorize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ShapeError(f"expected coordinate length {self.dim}, got {x.shape[-1]}")
        P = self._npair
        q = self.q
        M = np.zeros(x.shape[:-1] + (q, q), dtype=self.dtype)
        j, k = self._iu
        off = x[..., 1:1 + P] / np.sqrt(2)
        if self.field is Field.COMPLEX:
            off = off - 1j * x[..., 1 + P:1 + 2 * P] / np.sqrt(2)
        M[..., j, k] = off
        M[..., k, j] = np.conj(off)
        dcoords = np.concatenate([x[..., :1], x[..., self.dim - (q - 1):]], axis=-1)
        d = dcoords @ self._helm
        idx = np.arange(q)
        M[..., idx, idx] = d
        return M

    @cached_property
    def basis(self) -> np.ndarray:
        """Dense basis, shape ``(D, q, q)``."""
        return self.devectorize(np.eye(self.dim))

    def trace(self, x) -> np.ndarray:
        return np.sqrt(self.q) * np.asarray(x)[..., 0]

    def inner(self, A, B) -> float:
        return float(np.real(np.vdot(A, B)))


def orthonormal_basis(q: int, field="complex") -> np.ndarray:
    """Gell-Mann basis as an array of shape ``(D, q, q)``; ``I/sqrt(q)`` first."""
    return HermitianSpace(q, field).basis


@dataclass(frozen=True)
class SpectralDecomp:
    """Distinct eigenvalues (ascending), eigenprojections and multiplicities."""

    eigenvalues: np.ndarray
    projectors: np.ndarray
    multiplicities: np.ndarray

    @property
    def q(self) -> int:
        return self.projectors.shape[-1]

    @property
    def n_distinct(self) -> int:
        return len(self.eigenvalues)

    def matrix(self) -> np.ndarray:
        return np.einsum("k,kab->ab", self.eigenvalues, self.projectors)

    def relabel(self, labels) -> "SpectralDecomp":
        """Same eigenprojections with new distinct labels, re-sorted ascending."""
        labels = np.asarray(labels, dtype=float)
        if labels.shape != self.eigenvalues.shape or len(np.unique(labels)) != len(labels):
            raise ShapeError("labels must be distinct and match the number of eigenspaces")
        order = np.argsort(labels)
        return SpectralDecomp(labels[order], self.projectors[order], self.multiplicities[order])

    def conjugate(self, U) -> "SpectralDecomp":
        """Spectral decomposition of ``U M U*``."""
        U = np.asarray(U)
        P = U @ self.projectors @ U.conj().T
        P = (P + np.swapaxes(P, -1, -2).conj()) / 2
        return SpectralDecomp(self.eigenvalues, P, self.multiplicities)


def spectral(M, cluster_tol: float = DEFAULT_CLUSTER_TOL, field=None) -> SpectralDecomp:
    """Spectral decomposition with near-degenerate eigenvalues merged.

    Consecutive sorted eigenvalues closer than ``cluster_tol * (1 + ||M||)``
    are put in one eigenspace whose label is their mean.
    """
    M = as_hermitian(M, field)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    gap = cluster_tol * (1.0 + np.abs(w).max(initial=0.0))
    breaks = np.flatnonzero(np.diff(w) > gap) + 1
    groups = np.split(np.arange(len(w)), breaks)
    eigs = np.array([w[g].mean() for g in groups])
    projs = np.stack([V[:, g] @ V[:, g].conj().T for g in groups])
    mults = np.array([len(g) for g in groups], dtype=int)
    return SpectralDecomp(eigs, projs, mults)


def trace_center(S):
    """Split ``S`` into its trace and traceless part: ``S = omega I/q + Delta``."""
    S = np.asarray(S)
    q = S.shape[-1]
    omega = float(np.real(np.trace(S)))
    return omega, S - omega * np.eye(q) / q


def schatten_norm(M, s=2) -> float:
    """Schatten ``s``-norm of a self-adjoint matrix; ``s`` may be ``np.inf``."""
    if s < 1:
        raise ArgumentError("Schatten order must be >= 1")
    lam = np.abs(np.linalg.eigvalsh(as_hermitian(M)))
    if np.isinf(s):
        return float(lam.max(initial=0.0))
    return float(np.sum(lam ** s) ** (1.0 / s))
