import time

import numpy as np
import pytest
from scipy.optimize import minimize

from qstkit.errors import ArgumentError
from qstkit.projection import project_to_density, spta, spta_scan, spta_trace

from .conftest import random_hermitian


def truncation_oracle(a):
    """Try every support size k; keep the one whose shifted head stays positive and tail non-positive."""
    a = np.asarray(a, dtype=float)
    q, s = len(a), a.sum()
    for k in range(q, 0, -1):
        shift = (s - a[:k].sum()) / k
        head_ok = a[k - 1] + shift > 0
        tail_ok = k == q or a[k] + shift <= 0
        if head_ok and tail_ok:
            b = np.zeros(q)
            b[:k] = a[:k] + shift
            return b
    raise AssertionError("no truncation level is consistent")


def test_reference_vector():
    out = spta([1.1, 0.3, 0.1, 0.1, -0.1, -0.2, -0.3])
    assert np.array_equal(np.round(out, 12), [0.9, 0.1, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("seed", range(50))
def test_matches_truncation_oracle(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 40))
    a = np.sort(rng.standard_normal(q) * rng.uniform(0.1, 3))[::-1]
    a[0] += abs(a.sum()) + 0.1  # positive total
    assert np.allclose(spta(a), truncation_oracle(a), atol=1e-10, rtol=0)


def test_agrees_with_generic_qp(rng):
    a = np.sort(rng.standard_normal(6))[::-1]
    a[0] += abs(a.sum()) + 1
    s = a.sum()
    res = minimize(lambda b: np.sum((b - a) ** 2), np.full(6, s / 6), method="SLSQP",
                   bounds=[(0, None)] * 6, constraints=[{"type": "eq", "fun": lambda b: b.sum() - s}],
                   options={"ftol": 1e-14})
    assert np.allclose(spta(a), res.x, atol=1e-6)


def test_preserves_sum_and_fixes_valid_vectors(rng):
    a = np.sort(rng.random(100))[::-1]
    assert np.array_equal(spta(a), a)
    b = np.sort(rng.standard_normal(1000))[::-1]
    b[0] += 600
    assert np.isclose(spta(b).sum(), b.sum(), rtol=0, atol=1e-12)


def test_scan_and_trace_agree():
    a = np.array([1.1, 0.3, 0.1, 0.1, -0.1, -0.2, -0.3])
    t, shift = spta_scan(a)
    assert t == 2 and shift == pytest.approx(-0.2)
    steps = spta_trace(a)
    assert steps[-1]["stop"] and steps[-1]["k"] == 2


def test_input_validation():
    with pytest.raises(ArgumentError):
        spta([0.1, 0.5])
    with pytest.raises(ArgumentError):
        spta([-0.1, -0.5])
    with pytest.raises(ArgumentError):
        spta([np.nan])


def test_runtime_at_2048(rng):
    a = np.sort(rng.standard_normal(2048))[::-1]
    a[0] += 100
    spta(a)
    best = min(_timed(spta, a) for _ in range(20))
    assert best < 1e-3


def _timed(f, x):
    t0 = time.perf_counter()
    f(x)
    return time.perf_counter() - t0


def test_project_to_density(rng):
    S = random_hermitian(5, rng)
    S += (1 - np.trace(S).real) / 5 * np.eye(5)
    P = project_to_density(S)
    w = np.linalg.eigvalsh(P)
    assert w.min() > -1e-12 and np.isclose(np.trace(P).real, 1)
    # no random density matrix is closer
    for _ in range(200):
        X = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        R = X @ X.conj().T
        R /= np.trace(R).real
        assert np.linalg.norm(S - P) <= np.linalg.norm(S - R) + 1e-12
    with pytest.raises(ArgumentError):
        project_to_density(-np.eye(2))
