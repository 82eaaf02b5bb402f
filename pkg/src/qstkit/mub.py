"""GF(2^k) arithmetic, mutually unbiased bases of k qubits and fast WHT reconstruction.

Conventions
-----------
* Field elements are ints whose bit ``i`` is the coefficient of ``x**i``.
* Pauli labels ``(a|b)`` are pairs of k-bit ints. Qubit ``j`` is bit ``j``
  and dense matrices use ``kron(sigma_{k-1}, ..., sigma_0)``.
* ``P(a|b) = i**|a & b| X**a Z**b`` with ``(X**a Z**b)[x, y] = [x == y ^ a] (-1)**(b . y)``,
  so ``P(1|1) = Y``.
* Cliques are ordered ``lambda = 0 .. q-1`` followed by the computational
  clique; clique ``lambda`` holds the labels ``(b | lambda * b)`` with
  ``b`` and ``lambda * b`` written in self-dual coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .design import Design
from .errors import ShapeError, Unsupported
from .hermitian import SpectralDecomp
from .measurement import CountsTable, normalize_probs

MAX_K = 12
MAX_DENSE_K = 11

IRREDUCIBLE_POLYS = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}

# trace-orthonormal bases, in the polynomial representation above
SELF_DUAL_BASES = {
    1: (0x1,),
    2: (0x2, 0x3),
    3: (0x3, 0x5, 0x7),
    4: (0x8, 0xB, 0xD, 0xF),
    5: (0x3, 0x5, 0xC, 0x11, 0x1A),
    6: (0x20, 0x23, 0x31, 0x37, 0x3B, 0x3F),
    7: (0x3, 0x41, 0x47, 0x63, 0x6F, 0x77, 0x7F),
    8: (0x20, 0x23, 0x30, 0x36, 0x3A, 0x79, 0xB0, 0xF7),
    9: (0x3, 0x11, 0x17, 0x1B, 0x3C, 0x107, 0x162, 0x1A8, 0x1EE),
    10: (0x80, 0x83, 0xC1, 0xC7, 0xE3, 0xEF, 0xF7, 0x1FD, 0x2FB, 0x3F9),
    11: (0x3, 0x101, 0x107, 0x183, 0x18D, 0x1C7, 0x1D9, 0x1E7, 0x358, 0x4A5, 0x60E),
    12: (0x800, 0x803, 0xC01, 0xC07, 0xE01, 0xE0D, 0xF00, 0xF18, 0xF8A, 0xFBA, 0xFDB, 0xFFB),
}


def popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def parity(x):
    return popcount(x) & 1


def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def _polymod(a: int, p: int) -> int:
    dp = p.bit_length() - 1
    while a and a.bit_length() - 1 >= dp:
        a ^= p << (a.bit_length() - 1 - dp)
    return a


class GfField:
    """The field GF(2^k) with a fixed irreducible polynomial and self-dual basis."""

    def __init__(self, k: int):
        if not 1 <= k <= MAX_K:
            raise Unsupported(f"k must lie in 1..{MAX_K}, got {k}")
        self.k = k
        self.order = 1 << k
        self.poly = IRREDUCIBLE_POLYS[k]
        self.basis = SELF_DUAL_BASES[k]
        for i, bi in enumerate(self.basis):
            for j, bj in enumerate(self.basis):
                if self.trace(self.mul(bi, bj)) != (i == j):
                    raise RuntimeError(f"self-dual basis check failed for k={k}")

    def __repr__(self):
        return f"GfField(k={self.k}, poly={bin(self.poly)})"

    def mul(self, a: int, b: int) -> int:
        return _polymod(_clmul(a, b), self.poly)

    def trace(self, a: int) -> int:
        s, x = 0, a
        for _ in range(self.k):
            s ^= x
            x = self.mul(x, x)
        return s

    def to_coords(self, a: int) -> int:
        """Self-dual coordinates: bit j is ``Tr(a * beta_j)``."""
        return sum(self.trace(self.mul(a, bj)) << j for j, bj in enumerate(self.basis))

    def from_coords(self, c: int) -> int:
        out = 0
        for j, bj in enumerate(self.basis):
            if (c >> j) & 1:
                out ^= bj
        return out

    def mul_coords(self, a: int, b: int) -> int:
        return self.to_coords(self.mul(self.from_coords(a), self.from_coords(b)))


@lru_cache(maxsize=None)
def gf_field(k: int) -> GfField:
    return GfField(k)


def gf_mul(a: int, b: int, field: GfField) -> int:
    """Product in GF(2^k), polynomial representation."""
    return field.mul(a, b)


def fwht(x, axis: int = -1) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform ``y_a = sum_b (-1)**(a.b) x_b``."""
    x = np.array(x, dtype=np.result_type(np.asarray(x).dtype, np.float64), copy=True)
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ShapeError(f"length must be a power of two, got {n}")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        y = x.reshape(lead + (n // (2 * h), 2, h))
        top = y[..., 0, :].copy()
        y[..., 0, :] += y[..., 1, :]
        y[..., 1, :] = top - y[..., 1, :]
        h *= 2
    return np.moveaxis(x, -1, axis)


def _ipow(e) -> np.ndarray:
    return np.array([1, 1j, -1, -1j])[np.asarray(e) % 4]


def pauli_phase(a, b, c, d):
    """Exponent ``e`` (mod 4) with ``P(a|b) P(c|d) = i**e P(a^c | b^d)``."""
    e = popcount(a & b) + popcount(c & d) - popcount((a ^ c) & (b ^ d)) + 2 * popcount(b & c)
    return e % 4


def pauli_matrix(a: int, b: int, k: int) -> np.ndarray:
    """Dense ``P(a|b)`` on ``k`` qubits."""
    q = 1 << k
    y = np.arange(q)
    M = np.zeros((q, q), dtype=complex)
    M[y ^ a, y] = (-1.0) ** parity(b & y)
    return M * 1j ** int(popcount(a & b))


@dataclass(frozen=True, eq=False)
class MubDesign:
    """Complete set of ``q + 1`` mutually unbiased bases of ``k`` qubits.

    ``xs[c, b], zs[c, b]`` is the Pauli label at position ``b`` of clique
    ``c`` and ``phases[c, b]`` is the sign ``phi`` such that the ordered
    product of the clique generators selected by ``b`` equals
    ``phi * P(xs | zs)``.
    """

    k: int
    xs: np.ndarray
    zs: np.ndarray
    phases: np.ndarray

    @property
    def q(self) -> int:
        return 1 << self.k

    @property
    def n_cliques(self) -> int:
        return self.q + 1

    def clique_label(self, c: int):
        return "inf" if c == self.q else c

    def generators(self, c: int) -> list[np.ndarray]:
        return [pauli_matrix(int(self.xs[c, 1 << j]), int(self.zs[c, 1 << j]), self.k) for j in range(self.k)]

    def projectors(self, c: int) -> np.ndarray:
        """Eigenprojections ``Pi_{c,a}``, shape ``(q, q, q)``, indexed by outcome ``a``."""
        q = self.q
        b = np.arange(q)
        col = np.arange(q)
        xs, zs = self.xs[c], self.zs[c]
        # coef[a, b] = (-1)^{a.b} phi(b) i^{|x_b & z_b|} / q
        coef = (-1.0) ** parity(b[:, None] & b[None, :]) * (self.phases[c] * _ipow(popcount(xs & zs)))[None, :] / q
        out = np.zeros((q, q, q), dtype=complex)
        for j in range(q):
            sign = (-1.0) ** parity(zs[j] & col)
            out[:, col ^ xs[j], col] += coef[:, j, None] * sign[None, :]
        return out

    def to_design(self) -> Design:
        if self.k > 6:
            raise Unsupported("dense design export is limited to k <= 6")
        labels = np.arange(self.q, dtype=float)
        ones = np.ones(self.q, dtype=int)
        obs = [SpectralDecomp(labels, self.projectors(c), ones) for c in range(self.n_cliques)]
        return Design(obs, "complex")

    def pauli_coefficients(self, rho) -> np.ndarray:
        """``R[x, z] = tr(rho P(x|z))`` for all labels, via one WHT per row."""
        rho = np.asarray(rho)
        q = self.q
        if rho.shape != (q, q):
            raise ShapeError(f"expected ({q}, {q}) state")
        x = np.arange(q)[:, None]
        col = np.arange(q)[None, :]
        G = rho[col, col ^ x]
        F = fwht(G, axis=1)
        return np.real(_ipow(popcount(x & np.arange(q)[None, :])) * F)

    def probabilities(self, rho) -> np.ndarray:
        """Born probabilities, shape ``(q + 1, q)``."""
        R = self.pauli_coefficients(rho)
        p = fwht(self.phases * R[self.xs, self.zs], axis=1) / self.q
        return normalize_probs(p)

    def sample(self, rho, r: int, rng: np.random.Generator) -> CountsTable:
        return CountsTable.from_counts(list(rng.multinomial(int(r), self.probabilities(rho))))

    def exact_counts(self, rho) -> CountsTable:
        return CountsTable.from_probabilities(list(self.probabilities(rho)))


def _clique_labels(k: int):
    q = 1 << k
    F = gf_field(k)
    # cols[lambda, j] = lambda * e_j in coordinates; bilinear, so doubling from e_i * e_j
    unit = np.array([[F.mul_coords(1 << i, 1 << j) for j in range(k)] for i in range(k)], dtype=np.int64)
    cols = np.zeros((q, k), dtype=np.int64)
    for i in range(k):
        h = 1 << i
        cols[h:2 * h] = cols[:h] ^ unit[i]
    tab = np.zeros((q, q), dtype=np.int64)
    for j in range(k):
        h = 1 << j
        tab[:, h:2 * h] = tab[:, :h] ^ cols[:, j:j + 1]
    b = np.arange(q, dtype=np.int64)
    xs = np.vstack([np.broadcast_to(b, (q, q)), np.zeros((1, q), dtype=np.int64)])
    zs = np.vstack([tab, b[None, :]])
    return xs, zs


def _phase_table(xs, zs, k: int) -> np.ndarray:
    phases = np.ones(xs.shape, dtype=np.int64)
    for j in range(k):
        h = 1 << j
        a, b = xs[:, :h], zs[:, :h]
        c, d = xs[:, h:h + 1], zs[:, h:h + 1]
        e = pauli_phase(a, b, c, d)
        if np.any(e % 2):
            raise RuntimeError("clique generators do not commute")
        phases[:, h:2 * h] = phases[:, :h] * (1 - e)  # i^0 = 1, i^2 = -1
    return phases


def phase_table_dense(mub: MubDesign) -> np.ndarray:
    """Signs recomputed by multiplying dense generator matrices (small k only)."""
    q, k = mub.q, mub.k
    out = np.ones((mub.n_cliques, q), dtype=np.int64)
    for c in range(mub.n_cliques):
        G = mub.generators(c)
        for b in range(1, q):
            M = np.eye(q, dtype=complex)
            for j in range(k):
                if (b >> j) & 1:
                    M = M @ G[j]
            P = pauli_matrix(int(mub.xs[c, b]), int(mub.zs[c, b]), k)
            ratio = np.vdot(P, M) / q
            if abs(abs(ratio) - 1) > 1e-9 or abs(ratio.imag) > 1e-9:
                raise RuntimeError("generator product is not a signed Pauli")
            out[c, b] = int(round(ratio.real))
    return out


@lru_cache(maxsize=None)
def build_mub(k: int) -> MubDesign:
    """The ``2**k + 1`` mutually unbiased bases of ``k`` qubits."""
    if not 1 <= k <= MAX_K:
        raise Unsupported(f"k must lie in 1..{MAX_K}, got {k}")
    xs, zs = _clique_labels(k)
    phases = _phase_table(xs, zs, k)
    for arr in (xs, zs, phases):
        arr.setflags(write=False)
    return MubDesign(k, xs, zs, phases)


def mub_reconstruct(mub: MubDesign, counts) -> np.ndarray:
    """Least-squares state estimate from MUB frequencies.

    Each clique's frequencies are Walsh-Hadamard transformed into signed
    Pauli coefficients; the coefficient table is then summed back into a
    dense matrix, one WHT per row of ``x`` labels. Total cost is
    O(q^2 log q).
    """
    if mub.k > MAX_DENSE_K:
        raise Unsupported(f"dense reconstruction is limited to k <= {MAX_DENSE_K}")
    P = np.asarray(counts.frequencies if isinstance(counts, CountsTable) else counts, dtype=float)
    q = mub.q
    if P.shape != (q + 1, q):
        raise ShapeError(f"expected frequencies of shape ({q + 1}, {q}), got {P.shape}")
    coef = mub.phases * fwht(P, axis=1)
    R = np.zeros((q, q))
    R[mub.xs, mub.zs] = coef
    R[0, 0] = 1.0
    x = np.arange(q)[:, None]
    z = np.arange(q)[None, :]
    C = fwht(R * _ipow(popcount(x & z)), axis=1) / q
    rho = np.empty((q, q), dtype=complex)
    rho[x ^ z, np.broadcast_to(z, (q, q))] = C
    return rho
