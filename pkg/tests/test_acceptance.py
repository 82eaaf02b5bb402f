"""Acceptance checks, one per criterion.

Each check returns ``(passed, detail)``; the test records a PASS/FAIL line
that is printed in the pytest terminal summary. Running this file as a
script prints the same lines.
"""
import time

import numpy as np
import pytest
from scipy.linalg import hadamard

from qstkit.design import (
    check_unitary_design,
    haar_random_design,
    local_pauli_design,
    qubit_bloch_design,
)
from qstkit.estimators import (
    clt_covariance,
    lse_fit,
    lse_loss,
    lse_mse_theory,
    quark_fit,
    quark_linear_map,
    quark_operators,
)
from qstkit.kernels import (
    GaussianKernel,
    ZeroOneKernel,
    brute_qmd_pure_search,
    qmd_bitflip,
    qmd_modular,
    qmd_pauli,
    qmd_pauli_maximizers,
    qmd_two_noisy,
    simplex_state_grid,
)
from qstkit.measurement import PAULIS, Povm, bitflip_povm, bloch_to_density, modular_noise_povm
from qstkit.mub import build_mub, fwht, mub_reconstruct
from qstkit.projection import project_to_density, spta
from qstkit.simlab import preset, run_experiment

RESULTS: list[str] = []


def record(number: int, title: str, passed: bool, detail: str):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} ({title}): {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def random_density(q, rng, rank=None):
    rank = q if rank is None else rank
    X = rng.standard_normal((q, rank)) + 1j * rng.standard_normal((q, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def haar(q, n, seed):
    return haar_random_design(q, "complex", n, seed, np.diag(np.arange(-q + 1, q, 2, dtype=float)))


def best_time(f, *args, repeat=5):
    out = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        f(*args)
        out = min(out, time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------- 1

def truncation_oracle(a):
    q, s = len(a), a.sum()
    for k in range(q, 0, -1):
        shift = (s - a[:k].sum()) / k
        if a[k - 1] + shift > 0 and (k == q or a[k] + shift <= 0):
            b = np.zeros(q)
            b[:k] = a[:k] + shift
            return b
    raise AssertionError("no consistent truncation level")


def check_spta():
    ref = np.round(spta([1.1, 0.3, 0.1, 0.1, -0.1, -0.2, -0.3]), 12)
    exact = bool(np.array_equal(ref, [0.9, 0.1, 0, 0, 0, 0, 0]))
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        a = np.sort(rng.standard_normal(int(rng.integers(2, 64))) * rng.uniform(0.1, 5))[::-1]
        a[0] += abs(a.sum()) + rng.uniform(0.01, 1)
        worst = max(worst, float(np.abs(spta(a) - truncation_oracle(a)).max()))
    rng = np.random.default_rng(7)
    big = np.sort(rng.standard_normal(2048))[::-1]
    big[0] += 100
    t = best_time(spta, big, repeat=20)
    ok = exact and worst <= 1e-10 and t < 1e-3
    return ok, f"reference exact={exact}, oracle max err={worst:.1e}, q=2048 time={t * 1e3:.3f} ms"


# ---------------------------------------------------------------- 2

def check_unitary_constants():
    parts, ok = [], True
    for k, alpha in [(1, 1 / 3), (2, 1 / 5), (3, 1 / 9)]:
        rep = check_unitary_design(build_mub(k).to_design())
        good = abs(rep.alpha_theory - alpha) <= 1e-12 and abs(rep.alpha_hat - alpha) <= 1e-9 and rep.deviation <= 1e-9
        ok &= good
        parts.append(f"k={k} alpha={rep.alpha_hat:.12f} dev={rep.deviation:.1e}")
    w = np.linalg.eigvalsh(local_pauli_design(2).gram.matrix)
    mults = [int(np.sum(np.abs(w - v) <= 1e-9)) for v in (1.0, 1 / 3, 1 / 9)]
    ok &= mults == [1, 6, 9]
    parts.append(f"pauli k=2 sector multiplicities {mults}")
    return ok, "; ".join(parts)


# ---------------------------------------------------------------- 3

def check_lse_mse_law():
    mub = build_mub(3)
    rng = np.random.Generator(np.random.Philox(3))
    rho = random_density(8, rng, rank=1)
    probs = mub.probabilities(rho)
    r, reps = 500, 500
    t0 = time.perf_counter()
    errs = []
    for _ in range(reps):
        P = rng.multinomial(r, probs) / r
        d = mub_reconstruct(mub, P) - rho
        errs.append(float(np.real(np.vdot(d, d))))
    secs = time.perf_counter() - t0
    theory = lse_mse_theory(mub.to_design(), rho, r)
    emp = float(np.mean(errs))
    rel = abs(emp - theory) / theory
    return rel <= 0.10 and secs < 60, f"empirical {emp:.5f} vs closed form {theory:.5f} (rel {rel:.3f}), {secs:.1f} s"


# ---------------------------------------------------------------- 4

def check_rebit():
    cfg = preset("rebit")
    cfg["repetitions"] = 10_000
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    secs = time.perf_counter() - t0
    agg = {row[0]: row for row in res.aggregate}
    emp = agg["lse"][1]
    target = 2.72e-4
    rel = abs(emp - target) / target
    rate = agg["shrink_rate"][1]
    ok = rel <= 0.05 and rate < 0.01 and secs < 60
    return ok, (f"MSE {emp:.4e} vs {target:.2e} (rel {rel:.3f}), shrink rate {rate:.4f}, "
                f"s_hat range [{agg['s_hat_min'][1]:.3f}, {agg['s_hat_max'][1]:.3f}], {secs:.1f} s")


# ---------------------------------------------------------------- 5

def check_quark_lse_equivalence():
    worst_eq, worst_scale = 0.0, 0.0
    for q in (2, 4, 8):
        for trial in range(20):
            rng = np.random.default_rng(100 * q + trial)
            d = haar(q, q + 3, int(rng.integers(1 << 30)))
            counts = d.sample(random_density(q, rng), 50, rng)
            lse = lse_fit(d, counts).rho_hat
            qk = quark_fit(quark_operators(d, ZeroOneKernel(), counts=counts)).rho_hat
            worst_eq = max(worst_eq, float(np.linalg.norm(qk - lse)))
            if trial < 5:
                for base in (ZeroOneKernel(), GaussianKernel(0.5)):
                    ref = quark_fit(quark_operators(d, base, counts=counts)).rho_hat
                    for c in (1e-2, 1.0, 1e3):
                        other = quark_fit(quark_operators(d, base.scaled(c), counts=counts)).rho_hat
                        worst_scale = max(worst_scale, float(np.abs(other - ref).max()))
    ok = worst_eq <= 1e-8 and worst_scale <= 1e-9
    return ok, f"max ||QUARK(0-1) - LSE|| = {worst_eq:.1e}, max scale deviation = {worst_scale:.1e}"


# ---------------------------------------------------------------- 6

def check_quark_asymptotics():
    cfg = preset("mse-vs-r")
    cfg["repetitions"] = 400
    res = run_experiment(cfg)
    series = {}
    for r, name, mean, *_ in res.aggregate:
        series.setdefault(name, []).append((r, mean))
    slopes, ok = {}, True
    for name, pts in series.items():
        r, m = np.array(pts).T
        slope = float(np.polyfit(np.log(r), np.log(m), 1)[0])
        slopes[name] = slope
        ok &= -1.15 <= slope <= -0.85
    at = {name: dict(pts)[2048] for name, pts in series.items()}
    g100 = next(v for k, v in at.items() if "c=100" in k)
    rel = abs(g100 - at["lse"]) / at["lse"]
    ok &= rel <= 0.25
    text = ", ".join(f"{k.replace('quark:GaussianKernel', 'gauss')} {v:+.3f}" for k, v in slopes.items())
    return ok, f"slopes [{text}]; c=100 vs LSE at r=2048 rel diff {rel:.3f}"


# ---------------------------------------------------------------- 7

def check_clt():
    d = qubit_bloch_design(np.eye(3))
    rho = bloch_to_density([0.3, 0.2, 0.5])
    ops = quark_operators(d, ZeroOneKernel())
    B, c = quark_linear_map(ops)
    r, reps = 10_000, 10_000
    rng = np.random.Generator(np.random.Philox(77))
    probs = d.probabilities(rho).reshape(d.n, 2)
    counts = rng.multinomial(r, probs, size=(reps, d.n)).reshape(reps, -1) / r
    est = counts @ B.T + c
    dev = np.sqrt(r) * (est - d.space.vectorize(rho))
    emp = dev.T @ dev / reps
    theory = clt_covariance(ops, rho).matrix
    mask = np.abs(theory) >= 0.1 * np.abs(theory).max()
    rel = np.abs(emp[mask] - theory[mask]) / np.abs(theory[mask])
    worst = float(rel.max())
    return worst <= 0.05, f"{int(mask.sum())} significant entries, max relative deviation {worst:.3f}"


# ---------------------------------------------------------------- 8

def check_concentration():
    cfg = preset("concentration")
    cfg["repetitions"] = 100_000
    res = run_experiment(cfg)
    rows = res.aggregate
    dirs = {row[0] for row in rows}
    excess = max(row[3] - row[4] for row in rows)
    order = max(row[4] - row[5] for row in rows)
    summand = max(row[7] for row in rows)
    ok = len(dirs) == 5 and excess <= 0 and order <= 1e-12
    return ok, (f"{len(dirs)} directions x {len(rows) // max(len(dirs), 1)} thresholds: max(empirical - Bennett) "
                f"{excess:.2e}, max(Bennett - Bernstein) {order:.1e}, summand bound {summand:.3f}")


# ---------------------------------------------------------------- 9

def check_wht_mub():
    rng = np.random.default_rng(9)
    wht_err = 0.0
    for m in range(12):
        x = rng.standard_normal(1 << m)
        wht_err = max(wht_err, float(np.abs(fwht(x) - hadamard(1 << m) @ x).max()))
    rec_err = 0.0
    for k in (1, 2, 3):
        mub = build_mub(k)
        counts = mub.sample(random_density(mub.q, rng), 40, rng)
        rec_err = max(rec_err, float(np.abs(mub_reconstruct(mub, counts) - lse_fit(mub.to_design(), counts).rho_hat).max()))
    mub10 = build_mub(10)
    rho = random_density(mub10.q, rng, rank=3)
    P10 = mub10.probabilities(rho)
    t10 = best_time(mub_reconstruct, mub10, P10, repeat=2)
    per_clique = []
    ks = [8, 9, 10, 11]
    for k in ks:
        mub = build_mub(k)
        P = np.full((mub.q + 1, mub.q), 1.0 / mub.q)
        per_clique.append(best_time(mub_reconstruct, mub, P, repeat=2 if k < 11 else 1) / (mub.q + 1))
    exponent = float(np.polyfit(np.log2([1 << k for k in ks]), np.log2(per_clique), 1)[0])
    ok = wht_err <= 1e-9 and rec_err <= 1e-8 and t10 < 5 and exponent < 2
    return ok, (f"WHT err {wht_err:.1e}, MUB vs LSE err {rec_err:.1e}, k=10 reconstruction {t10:.2f} s, "
                f"per-clique time exponent {exponent:.2f} over k=8..11")


# ---------------------------------------------------------------- 10

def _axis(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def check_qmd():
    worst = {"pauli": 0.0, "bitflip": 0.0, "two_noisy": 0.0, "modular": 0.0}
    for seed in range(50):
        rng = np.random.default_rng(5000 + seed)
        K = GaussianKernel(float(rng.uniform(0.05, 3)))
        i, j = rng.choice(3, size=2, replace=False)
        closed = qmd_pauli(i, j, qmd_pauli_maximizers(i, j)[0], K)
        brute = brute_qmd_pure_search(Povm.from_observable(PAULIS[i]), Povm.from_observable(PAULIS[j]), K).value
        worst["pauli"] = max(worst["pauli"], abs(closed - brute))

        u = _axis(rng)
        O = np.einsum("i,iab->ab", u, PAULIS)
        eta = float(rng.uniform(0, 1))
        closed = qmd_bitflip(O, eta, bloch_to_density(u), K)
        brute = brute_qmd_pure_search(Povm.from_observable(O), bitflip_povm(O, eta), K).value
        worst["bitflip"] = max(worst["bitflip"], abs(closed - brute))

        Ot = np.einsum("i,iab->ab", _axis(rng), PAULIS)
        eta_t = float(rng.uniform(0, 1))
        closed = qmd_two_noisy(O, Ot, eta, eta_t, np.eye(2) / 2, K).bound
        brute = brute_qmd_pure_search(bitflip_povm(O, eta), bitflip_povm(Ot, eta_t), K).value
        worst["two_noisy"] = max(worst["two_noisy"], abs(closed - brute))

        q = int(rng.integers(2, 5))
        noise = rng.dirichlet(np.ones(q))
        N = np.diag(np.arange(q, dtype=float))
        closed = qmd_modular(N, noise, np.eye(q) / q, K).bound
        grid = simplex_state_grid(q, 6, phases=2, rng=seed)
        brute = brute_qmd_pure_search(Povm.from_observable(N), modular_noise_povm(N, noise), K, grid=grid).value
        worst["modular"] = max(worst["modular"], abs(closed - brute))
    plus = qmd_pauli_maximizers("x", "z")[0]
    attain = abs(qmd_pauli("x", "z", plus, np.eye(2)) - 1 / np.sqrt(2))
    ok = max(worst.values()) <= 1e-3 and attain <= 1e-9
    text = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return ok, f"max |closed - mesh| over 50 configs: {text}; rho_+ gap {attain:.1e}"


# ---------------------------------------------------------------- 11

def check_projection():
    d = build_mub(2).to_design()
    assert check_unitary_design(d).is_unitary
    rng = np.random.default_rng(11)
    worst, active = -np.inf, 0
    for _ in range(1000):
        truth = random_density(4, rng, rank=int(rng.integers(1, 5)))
        counts = d.sample(truth, 10, rng)
        fit = lse_fit(d, counts)
        proj = project_to_density(fit.rho_hat)
        active += np.linalg.eigvalsh(fit.rho_hat)[0] < 0
        other = random_density(4, rng, rank=int(rng.integers(1, 5)))
        worst = max(worst, lse_loss(d, proj, counts) - lse_loss(d, other, counts))
    return worst <= 1e-9, f"max Loss[projected] - Loss[rho] = {worst:.2e}; projection active in {active}/1000 fits"


CHECKS = [
    (1, "SPTA exactness", check_spta),
    (2, "unitary-design constants", check_unitary_constants),
    (3, "LSE MSE law", check_lse_mse_law),
    (4, "rebit law", check_rebit),
    (5, "QUARK/LSE equivalence", check_quark_lse_equivalence),
    (6, "QUARK asymptotics", check_quark_asymptotics),
    (7, "covariance sandwich", check_clt),
    (8, "concentration validity", check_concentration),
    (9, "fast WHT and MUB reconstruction", check_wht_mub),
    (10, "QMD closed forms", check_qmd),
    (11, "projection equivalence", check_projection),
]


@pytest.mark.parametrize("number, title, check", CHECKS, ids=[c[1].replace(" ", "_") for c in CHECKS])
def test_criterion(number, title, check):
    passed, detail = check()
    assert record(number, title, passed, detail), detail


if __name__ == "__main__":
    for number, title, check in CHECKS:
        record(number, title, *check())
