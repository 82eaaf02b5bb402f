"""Least-squares and kernel-regression state estimators with their error theory.

All superoperators act on Gell-Mann coordinates (see :mod:`qstkit.hermitian`),
in which the identity is ``sqrt(q) e_0`` and ``tr X = <I, X>``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .design import Design, SuperOp, check_complete, check_unitary_design
from .errors import IllConditioned, Inapplicable, KernelNotPD, ShapeError
from .kernels import Kernel, make_kernel, qce_discrepancy
from .measurement import CountsTable, purity

PINV_RTOL = 1e-10
COND_MAX = 1e12
KERNEL_PD_RTOL = 1e-10
DENSE_DIM_CAP = 4096


def _flat_freqs(d: Design, counts) -> np.ndarray:
    p = counts.flat() if isinstance(counts, CountsTable) else np.concatenate([np.ravel(c) for c in counts])
    if p.shape != d.labels.shape:
        raise ShapeError(f"counts have {p.size} entries, design has {d.labels.size} outcomes")
    return p


def lse_loss(d: Design, S, counts) -> float:
    """Squared distance between the design tensor at ``S`` and the data."""
    p = _flat_freqs(d, counts)
    return float(np.sum((d.expectations(S) - p) ** 2 / d.multiplicities))


@dataclass(frozen=True)
class LseResult:
    rho_hat: np.ndarray
    loss: float
    used_closed_form: bool
    null_space_dim: int
    alpha: float | None = None


def lse_linear_map(d: Design, unitary_tol: float = 1e-8):
    """``(B, c)`` with ``vec(rho_hat) = B @ p_flat + c`` for the least-squares estimate."""
    if d.space.dim > DENSE_DIM_CAP:
        raise Inapplicable(f"dense LSE is capped at {DENSE_DIM_CAP} coordinates")
    V = d.vec_projectors
    rep = check_unitary_design(d, unitary_tol)
    if rep.is_unitary:
        a = rep.alpha_theory
        return V.T / (d.n * a * d.multiplicities), -(1 - a) / a * d.space.identity_vec / d.q
    return _pinv_normal(d) @ (V.T / d.multiplicities), np.zeros(d.space.dim)


def _pinv_normal(d: Design):
    G = d.n * d.gram.matrix
    w, U = np.linalg.eigh(G)
    keep = w > PINV_RTOL * w[-1]
    return (U[:, keep] / w[keep]) @ U[:, keep].T


def lse_fit(d: Design, counts, unitary_tol: float = 1e-8) -> LseResult:
    """Unconstrained least-squares estimate.

    Complete designs solve the normal equations, incomplete ones return the
    minimum-norm solution, and verified unitary designs use the closed form
    ``D*P / (n alpha) - ((1 - alpha)/alpha) I/q``.
    """
    p = _flat_freqs(d, counts)
    rep = check_unitary_design(d, unitary_tol)
    if rep.is_unitary:
        a = rep.alpha_theory
        DP = d.adjoint_flat(p / d.multiplicities)
        rho = DP / (d.n * a) - (1 - a) / a * np.eye(d.q) / d.q
        return LseResult(rho, lse_loss(d, rho, p_as_table(d, p)), True, 0, a)
    nulls = check_complete(d, PINV_RTOL * float(d.gram.eigvalsh()[-1])).null_space_dim
    x = _pinv_normal(d) @ d.vec_projectors.T @ (p / d.multiplicities)
    rho = d.space.devectorize(x)
    return LseResult(rho, lse_loss(d, rho, p_as_table(d, p)), False, nulls, None)


def p_as_table(d: Design, p) -> CountsTable:
    return CountsTable(tuple(d.blocks(np.asarray(p, dtype=float))), np.inf)


def lse_mse_formula(q: int, alpha: float, purity_value: float, n: int, r: float) -> float:
    """Mean squared Frobenius error of the LSE under a rank-one alpha-unitary design."""
    return ((1 - 1 / q) - alpha * (purity_value - 1 / q)) / (n * r * alpha ** 2)


def lse_mse_theory(d: Design, rho, r: float, n: int | None = None, tol: float = 1e-8) -> float:
    """Closed-form LSE mean squared error; needs a rank-one unitary design."""
    if not d.rank_one:
        raise Inapplicable("closed-form MSE needs rank-one eigenprojections")
    rep = check_unitary_design(d, tol)
    if not rep.is_unitary:
        raise Inapplicable(f"design is not unitary (deviation {rep.deviation:.3e})")
    return lse_mse_formula(d.q, rep.alpha_theory, purity(rho), d.n if n is None else n, r)


@dataclass(frozen=True)
class QuarkOperators:
    """Kernel Gram superoperator and the derived quantities of one fit.

    ``h`` is ``H^{-1} I`` in coordinates and ``tau = tr h``. ``A`` is the
    centered inverse ``H^{-1} - h h^T / tau``. ``P_K`` is ``None`` when the
    operators were built without data.
    """

    design: Design
    kernel: Kernel
    H: SuperOp
    h: np.ndarray
    tau: float
    A: SuperOp
    condition: float
    omegas: tuple
    embed: np.ndarray
    P_K: np.ndarray | None = None
    S_K_rho: SuperOp | None = None

    def with_counts(self, counts) -> "QuarkOperators":
        p = _flat_freqs(self.design, counts)
        return replace(self, P_K=self.design.space.devectorize(self.embed @ p))

    def with_state(self, rho) -> "QuarkOperators":
        return replace(self, S_K_rho=quark_covariance(self, rho))


def quark_operators(d: Design, kernel, counts=None, rho=None) -> QuarkOperators:
    """Assemble ``H_K`` (and ``P_K`` when data are given).

    Raises KernelNotPD if a squared-kernel Gram matrix is singular and
    IllConditioned if ``H_K`` cannot be inverted reliably.
    """
    kernel = make_kernel(kernel)
    if d.space.dim > DENSE_DIM_CAP:
        raise Inapplicable(f"dense QUARK is capped at {DENSE_DIM_CAP} coordinates")
    V = d.vec_projectors
    omegas = []
    embed = np.empty_like(V.T)
    for i, o in enumerate(d.observables):
        Om = np.abs(kernel.gram(o.eigenvalues)) ** 2
        w = np.linalg.eigvalsh(Om)
        if w[0] <= KERNEL_PD_RTOL * np.max(np.diag(Om)):
            raise KernelNotPD(f"squared kernel is not strictly positive definite on observable {i}")
        omegas.append(Om)
        sl = slice(d.offsets[i], d.offsets[i + 1])
        embed[:, sl] = (Om @ V[sl]).T / d.n
    H = embed @ V
    H = (H + H.T) / 2
    w = np.linalg.eigvalsh(H)
    cond = float(w[-1] / w[0]) if w[0] > 0 else np.inf
    if not cond <= COND_MAX:
        raise IllConditioned(f"kernel Gram superoperator has condition number {cond:.3e}")
    try:
        cho = scipy.linalg.cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(f"Cholesky factorization failed (condition {cond:.3e})") from exc
    Hinv = scipy.linalg.cho_solve(cho, np.eye(len(H)))
    Hinv = (Hinv + Hinv.T) / 2
    h = Hinv @ d.space.identity_vec
    tau = float(d.space.identity_vec @ h)
    A = Hinv - np.outer(h, h) / tau
    ops = QuarkOperators(d, kernel, SuperOp(H, d.space), h, tau, SuperOp(A, d.space), cond, tuple(omegas), embed)
    if counts is not None:
        ops = ops.with_counts(counts)
    if rho is not None:
        ops = ops.with_state(rho)
    return ops


@dataclass(frozen=True)
class QuarkResult:
    """Kernel estimate; ``lagrange_lambda`` is ``mu`` in ``H_K rho_hat = P_K - mu I``."""

    rho_hat: np.ndarray
    lagrange_lambda: float
    superop_condition: float


def quark_fit(ops: QuarkOperators) -> QuarkResult:
    if ops.P_K is None:
        raise ShapeError("operators carry no data; use quark_operators(..., counts)")
    sp = ops.design.space
    pk = sp.vectorize(ops.P_K)
    x = scipy.linalg.solve(ops.H.matrix, pk, assume_a="pos")
    tr = sp.trace(x)
    rho = x + (1 - tr) * ops.h / ops.tau
    mu = (tr - 1) / ops.tau
    return QuarkResult(sp.devectorize(rho), float(mu), ops.condition)


def quark_linear_map(ops: QuarkOperators):
    """``(B, c)`` with ``vec(rho_hat) = B @ p_flat + c``."""
    return ops.A.matrix @ ops.embed, ops.h / ops.tau


def quark_loss(d: Design, kernel, S, counts) -> float:
    """Kernel loss summed over observables, through the embedding discrepancy."""
    kernel = make_kernel(kernel)
    p = d.blocks(_flat_freqs(d, counts))
    e = d.blocks(d.expectations(S))
    total = 0.0
    for i, o in enumerate(d.observables):
        idx = np.repeat(np.arange(o.n_distinct), o.multiplicities)
        Kd = kernel.gram(o.eigenvalues)[np.ix_(idx, idx)]
        m = o.multiplicities[idx]
        total += qce_discrepancy(Kd, e[i][idx] / m, p[i][idx] / m, 2) ** 2
    return total


def quark_covariance(ops: QuarkOperators, rho) -> SuperOp:
    """Scaled covariance of the effective data matrix, ``r Cov(P_K)``."""
    d = ops.design
    dvec = d.expectations(rho)
    n = d.n
    S = np.zeros((d.space.dim, d.space.dim))
    for i in range(n):
        sl = slice(d.offsets[i], d.offsets[i + 1])
        M = ops.embed[:, sl] * n  # columns are vec(M_ik)
        di = dvec[sl]
        C = np.diag(di) - np.outer(di, di)
        S += M @ C @ M.T
    S /= n * n
    return SuperOp((S + S.T) / 2, d.space)


def clt_covariance(ops: QuarkOperators, rho) -> SuperOp:
    """Limit covariance ``A S A`` of ``sqrt(r) (rho_hat - rho)``."""
    S = ops.S_K_rho if ops.S_K_rho is not None else quark_covariance(ops, rho)
    A = ops.A.matrix
    C = A @ S.matrix @ A
    return SuperOp((C + C.T) / 2, ops.design.space)


def quark_mse_theory(ops: QuarkOperators, rho, r: float) -> float:
    return float(np.trace(clt_covariance(ops, rho).matrix)) / r


def _bennett_h(x):
    x = np.asarray(x, dtype=float)
    return (1 + x) * np.log1p(x) - x


@dataclass(frozen=True)
class ConcentrationBound:
    """Tail bounds for ``<rho_hat - rho, S> > t``.

    ``variance`` is ``M / r`` with ``M = <A S A S_dir, S_dir>``.
    ``summand_bound`` is the largest absolute centred per-shot contribution;
    the Bennett form presumes it does not exceed one.
    """

    bennett: np.ndarray
    bernstein: np.ndarray
    variance: float
    summand_bound: float


def concentration_bound(ops: QuarkOperators, rho, S, t, r: float) -> ConcentrationBound:
    sp = ops.design.space
    s = sp.vectorize(S)
    C = clt_covariance(ops, rho).matrix
    M = float(s @ C @ s)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ShapeError("threshold t must be positive")
    d = ops.design
    beta = (ops.embed * d.n).T @ (ops.A.matrix @ s)  # <M_ik, A S>
    dvec = d.expectations(rho)
    dev = 0.0
    for i in range(d.n):
        sl = slice(d.offsets[i], d.offsets[i + 1])
        dev = max(dev, float(np.max(np.abs(beta[sl] - dvec[sl] @ beta[sl]))))
    b = dev / (d.n * r)
    if M <= 0:
        zero = np.zeros_like(t)
        return ConcentrationBound(zero, zero, 0.0, b)
    v = M / r
    bennett = np.exp(-v * _bennett_h(t / v))
    bernstein = np.exp(-(t ** 2) / (2 * (v + t / 3)))
    return ConcentrationBound(bennett, bernstein, v, b)


def loss_decomposition_gap(d: Design, rho, counts, alpha: float) -> float:
    """``Loss[rho] - (n alpha ||rho - rho_hat||^2 + Loss[rho_hat])`` for unitary designs."""
    fit = lse_fit(d, counts)
    diff = np.asarray(rho) - fit.rho_hat
    return lse_loss(d, rho, counts) - (d.n * alpha * float(np.real(np.vdot(diff, diff))) + fit.loss)


def linear_estimator_mse(d: Design, B, rho, r: float) -> float:
    """Exact mean squared error of ``vec(rho_hat) = B p + c`` for an unbiased linear estimator."""
    dvec = d.expectations(rho)
    total = 0.0
    for i in range(d.n):
        sl = slice(d.offsets[i], d.offsets[i + 1])
        Bi, di = B[:, sl], dvec[sl]
        total += float(np.einsum("ak,k,ak->", Bi, di, Bi) - np.sum((Bi @ di) ** 2))
    return total / r
