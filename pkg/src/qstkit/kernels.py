"""Spectrum kernels, covariance embeddings of measurements and their discrepancies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DistributionError, ShapeError, SpectrumError
from .hermitian import SpectralDecomp, schatten_norm, spectral
from .measurement import (
    PAULI_INDEX,
    PAULIS,
    Povm,
    check_distribution,
    bitflip_povm,
    bloch_to_density,
    born_probs,
    number_projectors,
)

SIGMA_Z_REAL = np.diag([1.0, -1.0])


class Kernel:
    """Real symmetric kernel on eigenvalue labels, broadcasting over arrays."""

    name = "kernel"

    def __call__(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def gram(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self(p[:, None], p[None, :])

    def scaled(self, factor: float) -> "Kernel":
        return ScaledKernel(self, factor)

    def to_dict(self) -> dict:
        return {"kind": self.name}


class ZeroOneKernel(Kernel):
    name = "zero_one"

    def __call__(self, x, y):
        return (np.asarray(x) == np.asarray(y)).astype(float)

    def __repr__(self):
        return "ZeroOneKernel()"


class GaussianKernel(Kernel):
    """``exp(-c (x - y)**2)``."""

    name = "gaussian"

    def __init__(self, c: float):
        if not c > 0:
            raise ArgumentError("Gaussian bandwidth must be positive")
        self.c = float(c)

    def __call__(self, x, y):
        return np.exp(-self.c * (np.asarray(x) - np.asarray(y)) ** 2)

    def __repr__(self):
        return f"GaussianKernel(c={self.c!r})"

    def to_dict(self):
        return {"kind": self.name, "c": self.c}


class PolynomialKernel(Kernel):
    """``(offset + x y)**degree``."""

    name = "polynomial"

    def __init__(self, degree: int, offset: float = 1.0):
        if int(degree) < 1:
            raise ArgumentError("polynomial degree must be at least 1")
        self.degree = int(degree)
        self.offset = float(offset)

    def __call__(self, x, y):
        return (self.offset + np.asarray(x) * np.asarray(y)) ** self.degree

    def __repr__(self):
        return f"PolynomialKernel(degree={self.degree}, offset={self.offset!r})"

    def to_dict(self):
        return {"kind": self.name, "degree": self.degree, "offset": self.offset}


class ScaledKernel(Kernel):
    name = "scaled"

    def __init__(self, base: Kernel, factor: float):
        self.base = base
        self.factor = float(factor)

    def __call__(self, x, y):
        return self.factor * self.base(x, y)

    def __repr__(self):
        return f"ScaledKernel({self.base!r}, {self.factor!r})"

    def to_dict(self):
        return {"kind": self.name, "factor": self.factor, "base": self.base.to_dict()}


def make_kernel(spec) -> Kernel:
    """Build a kernel from a dict such as ``{"kind": "gaussian", "c": 1.0}``."""
    if isinstance(spec, Kernel):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = str(spec.get("kind", "")).lower().replace("-", "_")
    if kind in ("zero_one", "zeroone", "dirac"):
        return ZeroOneKernel()
    if kind == "gaussian":
        if "c" not in spec:
            raise ArgumentError("gaussian kernel needs bandwidth 'c'")
        return GaussianKernel(spec["c"])
    if kind == "polynomial":
        return PolynomialKernel(spec.get("degree", 2), spec.get("offset", 1.0))
    if kind == "scaled":
        return ScaledKernel(make_kernel(spec["base"]), spec["factor"])
    raise ArgumentError(f"unknown kernel kind {spec.get('kind')!r}")


@dataclass(frozen=True)
class GramPair:
    """Stretched Gram matrix ``K`` (q x q) and squared-kernel Gram ``omega`` (q_i x q_i)."""

    K: np.ndarray
    omega: np.ndarray


def gram_pair(obs: SpectralDecomp, kernel: Kernel) -> GramPair:
    Kd = kernel.gram(obs.eigenvalues)
    idx = np.repeat(np.arange(obs.n_distinct), obs.multiplicities)
    return GramPair(Kd[np.ix_(idx, idx)], np.abs(Kd) ** 2)


def psd_sqrt(K, tol: float = 1e-9) -> np.ndarray:
    """Symmetric square root with round-off negative eigenvalues clipped."""
    K = np.asarray(K, dtype=float)
    w, V = np.linalg.eigh((K + K.T) / 2)
    if w[0] < -tol * max(1.0, abs(w[-1])):
        raise SpectrumError(f"Gram matrix has eigenvalue {w[0]:.3e}")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def qce_discrepancy(K, d_row, p_row, s=2) -> float:
    """Schatten norm of ``K^(1/2) Diag(d - p) K^(1/2)``."""
    if isinstance(K, GramPair):
        K = K.K
    K = np.asarray(K, dtype=float)
    diff = np.asarray(d_row, dtype=float) - np.asarray(p_row, dtype=float)
    if K.shape != (len(diff), len(diff)):
        raise ShapeError(f"Gram {K.shape} does not match rows of length {len(diff)}")
    R = psd_sqrt(K)
    return schatten_norm((R * diff) @ R, s)


def _gram_on(K, labels) -> np.ndarray:
    if isinstance(K, Kernel):
        return K.gram(labels)
    K = np.asarray(K, dtype=float)
    if K.shape != (len(labels), len(labels)):
        raise ShapeError(f"expected a {len(labels)}x{len(labels)} Gram matrix")
    return K


def sigma_z_contrast(K) -> float:
    """``||K^(1/2) sigma_z K^(1/2)||_inf`` for a 2 x 2 Gram matrix on {-1, +1}."""
    K = _gram_on(K, [-1.0, 1.0])
    R = psd_sqrt(K)
    return schatten_norm(R @ SIGMA_Z_REAL @ R, np.inf)


def conditional_qmd(povm_a: Povm, povm_b: Povm, rho, K, s=np.inf) -> float:
    """Discrepancy between two measurements of the same state.

    Outcome distributions are aligned on the union of outcome labels; ``K``
    is a Kernel or a Gram matrix on the sorted union.
    """
    labels = np.union1d(povm_a.outcomes, povm_b.outcomes)
    w = np.zeros(len(labels))
    np.add.at(w, np.searchsorted(labels, povm_a.outcomes), born_probs(rho, povm_a))
    np.add.at(w, np.searchsorted(labels, povm_b.outcomes), -born_probs(rho, povm_b))
    R = psd_sqrt(_gram_on(K, labels))
    return schatten_norm((R * w) @ R, s)


def _pauli_index(i) -> int:
    if isinstance(i, str):
        if i.lower() not in PAULI_INDEX:
            raise ArgumentError(f"unknown Pauli {i!r}")
        return PAULI_INDEX[i.lower()]
    if int(i) not in (0, 1, 2):
        raise ArgumentError(f"Pauli index must be 0, 1 or 2, got {i!r}")
    return int(i)


def qmd_pauli(i, j, rho, K) -> float:
    """Discrepancy between the projective measurements of two Paulis."""
    i, j = _pauli_index(i), _pauli_index(j)
    if i == j:
        raise ArgumentError("the two Paulis must differ")
    delta = np.real(np.trace(np.asarray(rho) @ (PAULIS[i] - PAULIS[j])))
    return sigma_z_contrast(K) / 2 * abs(delta)


def qmd_pauli_maximizers(i, j) -> tuple[np.ndarray, np.ndarray]:
    """The two pure states at which :func:`qmd_pauli` reaches its supremum."""
    i, j = _pauli_index(i), _pauli_index(j)
    v = (np.eye(3)[i] - np.eye(3)[j]) / np.sqrt(2)
    return bloch_to_density(v), bloch_to_density(-v)


def _bloch_axis(O) -> np.ndarray:
    obs = O if isinstance(O, SpectralDecomp) else spectral(O)
    if obs.q != 2 or obs.n_distinct != 2 or not np.allclose(obs.eigenvalues, [-1, 1], atol=1e-9):
        raise SpectrumError("expected a qubit observable with spectrum {-1, +1}")
    return np.real(np.einsum("ab,iba->i", obs.matrix(), PAULIS)) / 2


def qmd_bitflip(O, eta: float, rho, K) -> float:
    """Discrepancy between a +-1 observable and its bit-flipped readout."""
    obs = O if isinstance(O, SpectralDecomp) else spectral(O)
    bitflip_povm(obs, eta)  # validates spectrum and eta
    return eta * sigma_z_contrast(K) * abs(np.real(np.trace(np.asarray(rho) @ obs.matrix())))


@dataclass(frozen=True)
class TwoNoisyQmd:
    value: float
    bound: float
    maximizers: tuple | None


def qmd_two_noisy(O, O_tilde, eta: float, eta_tilde: float, rho, K) -> TwoNoisyQmd:
    """Discrepancy between two bit-flipped qubit observables."""
    for e in (eta, eta_tilde):
        if not 0.0 <= e <= 1.0:
            raise DistributionError("flip probabilities must lie in [0, 1]")
    u, ut = _bloch_axis(O), _bloch_axis(O_tilde)
    v = (1 - 2 * eta) * u - (1 - 2 * eta_tilde) * ut
    c = sigma_z_contrast(K)
    a = np.real(np.einsum("ab,iba->i", np.asarray(rho), PAULIS))
    value = c * abs(a @ v) / 2
    nv = float(np.linalg.norm(v))
    if nv < 1e-15:
        return TwoNoisyQmd(0.0, 0.0, None)
    w = v / nv
    return TwoNoisyQmd(value, c * nv / 2, (bloch_to_density(w), bloch_to_density(-w)))


@dataclass(frozen=True)
class ModularQmd:
    value: float
    bound: float
    argmax_index: int


def modular_discrepancy_ops(q: int, eta) -> np.ndarray:
    """Diagonals of ``E_k``: ``[E_k]_jj = delta_jk - eta_{(j-k) mod q}``, shape ``(q, q)``."""
    eta = check_distribution(eta, q)
    j = np.arange(q)
    return np.eye(q) - eta[(j[None, :] - j[:, None]) % q]  # row k holds diag(E_k)


def qmd_modular(N, eta, rho, K) -> ModularQmd:
    """Discrepancy between a number measurement and its modular-noise readout."""
    P = number_projectors(N)
    q = P.shape[0]
    E = modular_discrepancy_ops(q, eta)
    R = psd_sqrt(_gram_on(K, np.arange(q, dtype=float)))
    p = np.real(np.einsum("ab,kba->k", np.asarray(rho), P))
    value = schatten_norm((R * (p @ E)) @ R, np.inf)
    norms = np.array([schatten_norm((R * e) @ R, np.inf) for e in E])
    k = int(np.argmax(norms))
    return ModularQmd(value, float(norms[k]), k)


def fibonacci_sphere(n: int = 10_000) -> np.ndarray:
    """Nearly uniform points on the unit sphere, shape ``(n, 3)``."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + np.sqrt(5)) * i
    rxy = np.sqrt(1 - z ** 2)
    return np.stack([rxy * np.cos(phi), rxy * np.sin(phi), z], axis=1)


def simplex_state_grid(q: int, levels: int, phases: int = 1, rng=None) -> np.ndarray:
    """Pure states with ``|psi_k|**2`` on a simplex lattice (vertices included).

    With ``phases > 1`` each amplitude vector is repeated with that many
    random phase patterns drawn from ``rng``. Returns shape ``(m, q)``.
    """
    from itertools import combinations

    pts = []
    for bars in combinations(range(levels + q - 1), q - 1):
        cuts = (-1,) + bars + (levels + q - 1,)
        pts.append([cuts[t + 1] - cuts[t] - 1 for t in range(q)])
    amp = np.sqrt(np.array(pts, dtype=float) / levels)
    if phases <= 1:
        return amp.astype(complex)
    rng = np.random.default_rng(rng)
    ph = np.exp(2j * np.pi * rng.random((phases, 1, q)))
    return (amp[None] * ph).reshape(-1, q)


@dataclass(frozen=True)
class BruteQmd:
    value: float
    argmax: np.ndarray


def brute_qmd_pure_search(povm_a: Povm, povm_b: Povm, K, s=np.inf, grid=None) -> BruteQmd:
    """Maximize the discrepancy over a mesh of pure states (reference oracle).

    For qubits the default mesh is a 10^4-point Fibonacci sphere and
    ``argmax`` is a Bloch vector. For larger dimensions a grid of state
    vectors ``(m, q)`` must be supplied and ``argmax`` is a state vector.
    """
    q = povm_a.q
    if povm_b.q != q:
        raise ShapeError("POVMs act on different dimensions")
    labels = np.union1d(povm_a.outcomes, povm_b.outcomes)
    ia = np.searchsorted(labels, povm_a.outcomes)
    ib = np.searchsorted(labels, povm_b.outcomes)
    R = psd_sqrt(_gram_on(K, labels))
    if grid is None:
        if q != 2:
            raise NotImplementedError("default pure-state mesh exists for qubits only")
        grid = fibonacci_sphere()
    grid = np.asarray(grid)
    if q == 2 and grid.ndim == 2 and grid.shape[1] == 3 and not np.iscomplexobj(grid):
        rhos = (np.eye(2) + np.einsum("ni,iab->nab", grid, PAULIS)) / 2
    else:
        if grid.ndim != 2 or grid.shape[1] != q:
            raise ShapeError(f"grid must hold state vectors of length {q}")
        psi = grid / np.linalg.norm(grid, axis=1, keepdims=True)
        rhos = np.einsum("na,nb->nab", psi, psi.conj())
    pa = np.real(np.einsum("nab,kba->nk", rhos, povm_a.effects))
    pb = np.real(np.einsum("nab,kba->nk", rhos, povm_b.effects))
    w = np.zeros((len(grid), len(labels)))
    np.add.at(w, (slice(None), ia), pa)
    np.add.at(w, (slice(None), ib), -pb)
    M = R[None] * w[:, None, :] @ R
    lam = np.abs(np.linalg.eigvalsh(M))
    if np.isinf(s):
        vals = lam.max(axis=1)
    else:
        vals = (lam ** s).sum(axis=1) ** (1.0 / s)
    best = int(np.argmax(vals))
    return BruteQmd(float(vals[best]), grid[best])
