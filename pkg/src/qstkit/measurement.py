"""POVMs, Born probabilities, multinomial sampling and noise channels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DistributionError,
    NotAState,
    ShapeError,
    SpectrumError,
)
from .hermitian import SpectralDecomp, as_hermitian, spectral

PSD_TOL = 1e-10
DRIFT_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
PAULI_INDEX = {"x": 0, "y": 1, "z": 2}


def check_density(rho, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix and return it symmetrized.

    Raises NotAState if the trace is not one or an eigenvalue falls below
    ``-tol``.
    """
    rho = as_hermitian(rho)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > tol:
        raise NotAState(f"trace is {tr!r}, expected 1")
    lmin = float(np.linalg.eigvalsh(rho)[0])
    if lmin < -tol:
        raise NotAState(f"smallest eigenvalue {lmin:.3e} is negative")
    return rho


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho, rho)))


def bloch_to_density(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise ShapeError("Bloch vector must have length 3")
    if np.linalg.norm(a) > 1 + PSD_TOL:
        raise NotAState(f"Bloch vector norm {np.linalg.norm(a):.6g} exceeds 1")
    return (np.eye(2) + np.einsum("i,iab->ab", a, PAULIS)) / 2


def density_to_bloch(rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise ShapeError("Bloch representation is defined for qubits only")
    return np.real(np.einsum("ab,iba->i", rho, PAULIS))


@dataclass(frozen=True)
class Povm:
    """Outcome labels with their effects; effects must sum to the identity."""

    outcomes: np.ndarray
    effects: np.ndarray

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=float)
        effects = as_hermitian(self.effects)
        if effects.ndim != 3 or len(outcomes) != effects.shape[0]:
            raise ShapeError("need one effect per outcome label")
        q = effects.shape[-1]
        if np.abs(effects.sum(axis=0) - np.eye(q)).max() > PSD_TOL:
            raise DistributionError("effects do not sum to the identity")
        if np.linalg.eigvalsh(effects)[:, 0].min() < -PSD_TOL:
            raise DistributionError("effect with negative eigenvalue")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_observable(cls, obs) -> "Povm":
        """PVM of an observable (matrix or SpectralDecomp)."""
        if not isinstance(obs, SpectralDecomp):
            obs = spectral(obs)
        return cls(obs.eigenvalues, obs.projectors)

    @property
    def q(self) -> int:
        return self.effects.shape[-1]

    def first_moment(self) -> np.ndarray:
        return np.einsum("k,kab->ab", self.outcomes, self.effects)


def normalize_probs(p, tol: float = DRIFT_TOL) -> np.ndarray:
    """Clamp round-off negatives and renormalize; reject real drift."""
    p = np.array(p, dtype=float)
    if p.min(initial=0.0) < -PSD_TOL:
        raise DistributionError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum(axis=-1, keepdims=True)
    if np.abs(total - 1.0).max() > tol:
        raise DistributionError(f"probabilities sum to {total.ravel()[0]!r}")
    return p / total


def born_probs(rho, nu: Povm) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (nu.q, nu.q):
        raise ShapeError(f"state is {rho.shape}, POVM acts on dimension {nu.q}")
    p = np.real(np.einsum("ab,kba->k", rho, nu.effects))
    return normalize_probs(p)


def sample_counts(rho, nu: Povm, r: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts of ``r`` shots."""
    if int(r) < 1:
        raise ShapeError("number of shots must be positive")
    return rng.multinomial(int(r), born_probs(rho, nu))


def bitflip_povm(O, eta: float) -> Povm:
    """Readout of a +-1 observable whose outcome is flipped with probability eta."""
    obs = O if isinstance(O, SpectralDecomp) else spectral(O)
    if obs.n_distinct != 2 or not np.allclose(obs.eigenvalues, [-1.0, 1.0], atol=1e-9):
        raise SpectrumError("bit-flip noise needs an observable with spectrum {-1, +1}")
    if not 0.0 <= eta <= 1.0:
        raise DistributionError("flip probability must lie in [0, 1]")
    Pm, Pp = obs.projectors
    return Povm(np.array([-1.0, 1.0]), np.stack([(1 - eta) * Pm + eta * Pp, (1 - eta) * Pp + eta * Pm]))


def check_distribution(eta, q: int) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (q,):
        raise DistributionError(f"noise distribution must have length {q}")
    if eta.min() < 0 or abs(eta.sum() - 1.0) > PSD_TOL:
        raise DistributionError("noise weights must be non-negative and sum to 1")
    return eta


def number_projectors(N) -> np.ndarray:
    """Rank-one projectors Pi_0..Pi_{q-1} of a number observable N = sum_k k Pi_k."""
    obs = N if isinstance(N, SpectralDecomp) else spectral(N)
    q = obs.q
    if obs.n_distinct != q or not np.allclose(obs.eigenvalues, np.arange(q), atol=1e-9):
        raise SpectrumError("number observable must have the simple spectrum 0..q-1")
    return obs.projectors


def modular_noise_povm(N, eta) -> Povm:
    """Readout of a number observable with additive noise modulo q."""
    P = number_projectors(N)
    q = P.shape[0]
    eta = check_distribution(eta, q)
    j = np.arange(q)
    W = eta[(j[:, None] - j[None, :]) % q]  # W[j, k] = eta_{(j-k) mod q}
    return Povm(j.astype(float), np.einsum("jk,kab->jab", W, P))


@dataclass(frozen=True)
class CountsTable:
    """Per-observable outcome frequencies.

    ``frequencies`` is a list of vectors, one per observable, indexed like
    the observable's distinct eigenvalues. ``shots`` is ``math.inf`` when
    the table holds exact probabilities rather than sampled counts.
    """

    frequencies: tuple
    shots: float
    counts: tuple | None = dc_field(default=None, compare=False)

    @classmethod
    def from_counts(cls, counts) -> "CountsTable":
        rows = tuple(np.asarray(c, dtype=np.int64) for c in counts)
        if not rows:
            raise ShapeError("empty counts table")
        totals = {int(c.sum()) for c in rows}
        if len(totals) != 1 or any((c < 0).any() for c in rows):
            raise ShapeError("every observable needs the same non-negative shot total")
        r = totals.pop()
        if r < 1:
            raise ShapeError("shot count must be positive")
        return cls(tuple(c / r for c in rows), float(r), rows)

    @classmethod
    def from_probabilities(cls, probs) -> "CountsTable":
        rows = tuple(normalize_probs(p) for p in probs)
        return cls(rows, math.inf)

    @property
    def n(self) -> int:
        return len(self.frequencies)

    @property
    def exact(self) -> bool:
        return math.isinf(self.shots)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.frequencies)
