"""Nearest density matrix at fixed trace via sum-preserving thresholding."""
from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .hermitian import as_hermitian


def _check_input(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ArgumentError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("vector contains non-finite entries")
    if np.any(np.diff(a) > 0):
        raise ArgumentError("input must be sorted in non-increasing order")
    if a.sum() <= 0:
        raise ArgumentError("input must have positive sum")
    return a


def spta_scan(a):
    """Backward scan returning ``(t, shift)``.

    Phase 1 walks over the non-positive tail, phase 2 keeps absorbing
    entries while ``k a_k + (a_{k+1} + ... + a_q) < 0``. The tail sum uses
    Neumaier-compensated accumulation.
    """
    vals = a.tolist()
    k = len(vals)
    total = 0.0
    comp = 0.0

    def add(x):
        nonlocal total, comp
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t

    while k > 0 and vals[k - 1] <= 0:
        add(vals[k - 1])
        k -= 1
    while k > 0 and k * vals[k - 1] + (total + comp) < 0:
        add(vals[k - 1])
        k -= 1
    return k, (total + comp) / k


def spta(a) -> np.ndarray:
    """Euclidean projection of a sorted vector onto ``{b >= 0, sum b = sum a}``.

    Parameters
    ----------
    a : array_like
        Non-increasing vector with positive sum.

    Returns
    -------
    ndarray
        ``b_i = a_i + shift`` for ``i <= t`` and 0 beyond, where ``t`` is the
        largest index with ``t a_t + a_{t+1} + ... + a_q >= 0``.
    """
    a = _check_input(a)
    t, shift = spta_scan(a)
    b = np.zeros_like(a)
    b[:t] = a[:t] + shift
    # push the residual rounding of the shifted head onto its largest entry
    b[0] += np.float64(np.sum(a, dtype=np.longdouble) - np.sum(b, dtype=np.longdouble))
    return b


def spta_trace(a) -> list[dict]:
    """Step-by-step record of the backward scan, for debugging."""
    a = _check_input(a)
    rows = []
    total = 0.0
    k = len(a)
    phase = 1
    while k > 0:
        ak = float(a[k - 1])
        if phase == 1 and ak > 0:
            phase = 2
        if phase == 2 and k * ak + total >= 0:
            rows.append({"k": k, "a_k": ak, "sum": total, "phase": 2, "stop": True})
            break
        total += ak
        rows.append({"k": k, "a_k": ak, "sum": total, "phase": phase, "stop": False})
        k -= 1
    return rows


def project_to_density(S) -> np.ndarray:
    """Closest positive semidefinite matrix with the same trace, in Frobenius norm."""
    S = as_hermitian(S)
    tr = float(np.real(np.trace(S)))
    if tr <= 0:
        raise ArgumentError(f"trace must be positive, got {tr!r}")
    w, U = np.linalg.eigh(S)
    w, U = w[::-1], U[:, ::-1]
    b = spta(w)
    keep = b > 0
    Uk = U[:, keep]
    P = (Uk * b[keep]) @ Uk.conj().T
    return (P + P.conj().T) / 2
