"""Config-driven Monte Carlo experiments.

A config is a JSON object with a ``kind`` and the parameters of that
kind; :func:`parse_config` validates it and reports every bad field at
once. :func:`run_experiment` runs the repetitions on a thread pool and
returns the rows that :func:`write_outputs` turns into CSV tables.

Randomness: repetition ``j`` draws from a Philox generator seeded with
``SeedSequence(seed, spawn_key=(0, j))``, so results do not depend on the
number of threads or the order in which repetitions finish. Designs,
true states and test directions use the reserved keys ``(1,)``, ``(2,)``
and ``(3,)``.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .design import (
    Design,
    design_alpha,
    haar_random_design,
    haar_unitary,
    local_pauli_design,
    qubit_bloch_design,
    rebit_design,
    uniform_angles,
)
from .errors import ConfigError, QstError
from .estimators import (
    linear_estimator_mse,
    lse_linear_map,
    lse_mse_formula,
    concentration_bound,
    quark_linear_map,
    quark_operators,
)
from .formats import write_csv
from .hermitian import Field
from .kernels import (
    brute_qmd_pure_search,
    fibonacci_sphere,
    make_kernel,
    qmd_bitflip,
    qmd_two_noisy,
    sigma_z_contrast,
)
from .measurement import (
    PAULIS,
    Povm,
    bitflip_povm,
    bloch_to_density,
    check_density,
    purity,
)
from .mub import build_mub, mub_reconstruct
from .projection import project_to_density

CONFIG_SCHEMA = "qstkit.experiment/1"
KINDS = ("rebit", "spectral", "mse_vs_r", "mub_vs_theory", "qmd_noise", "concentration")

# repetitions per task handed to the pool
CHUNK = 256


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    repetitions: int
    raw: dict = dc_field(repr=False)

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def to_json(self) -> dict:
        return dict(self.raw)


class _Checker:
    def __init__(self, raw: dict):
        self.raw = raw
        self.problems: list[str] = []

    def bad(self, name, msg):
        self.problems.append(f"{name}: {msg}")

    def int_(self, name, lo=1, required=True, src=None):
        src = self.raw if src is None else src
        if name not in src:
            if required:
                self.bad(name, "required")
            return None
        v = src[name]
        if isinstance(v, bool) or not isinstance(v, int):
            self.bad(name, f"must be an integer, got {v!r}")
            return None
        if v < lo:
            self.bad(name, f"must be >= {lo}, got {v}")
        return v

    def int_list(self, name, lo=1):
        v = self.raw.get(name)
        if not isinstance(v, list) or not v:
            self.bad(name, "required non-empty list of integers")
            return None
        if any(isinstance(x, bool) or not isinstance(x, int) or x < lo for x in v):
            self.bad(name, f"entries must be integers >= {lo}")
        return v

    def float_list(self, name, lo=None, hi=None):
        v = self.raw.get(name)
        if not isinstance(v, list) or not v:
            self.bad(name, "required non-empty list of numbers")
            return None
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            self.bad(name, "entries must be numbers")
            return None
        if lo is not None and arr.min() < lo or hi is not None and arr.max() > hi:
            self.bad(name, f"entries must lie in [{lo}, {hi}]")
        return v

    def field(self):
        try:
            return Field.coerce(self.raw.get("field"))
        except (ValueError, QstError):
            self.bad("field", "required, one of 'real', 'complex'")
            return None

    def kernel(self, spec, name):
        try:
            make_kernel(spec)
        except (QstError, ValueError, TypeError, KeyError, AttributeError) as exc:
            self.bad(name, str(exc) or "invalid kernel spec")

    def state(self, q, field):
        st = self.raw.get("state")
        if not isinstance(st, dict):
            self.bad("state", "required object")
            return
        try:
            _build_state(st, q, field, None)
        except (QstError, ValueError, TypeError, KeyError) as exc:
            self.bad("state", str(exc))


def parse_config(raw) -> ExperimentConfig:
    """Validate a config dict (or path to a JSON file)."""
    if isinstance(raw, (str, Path)):
        try:
            raw = json.loads(Path(raw).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    c = _Checker(raw)
    schema = raw.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        c.bad("schema", f"unsupported {schema!r}, expected {CONFIG_SCHEMA!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        c.bad("kind", f"must be one of {', '.join(KINDS)}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(c.problems))
    seed = c.int_("seed", lo=0)
    reps = c.int_("repetitions")

    if kind == "rebit":
        c.int_("n")
        c.int_("r")
        c.int_("histogram_bins", required=False)
        if "angles" in raw and raw["angles"] != "uniform":
            c.float_list("angles")
        c.state(2, Field.REAL)
    elif kind in ("spectral", "mse_vs_r"):
        q = c.int_("q", lo=2)
        f = c.field()
        _check_design(c, q, f)
        if kind == "spectral":
            c.int_("r")
        else:
            c.int_list("r_grid")
        ks = raw.get("kernels", [])
        if not isinstance(ks, list):
            c.bad("kernels", "must be a list of kernel specs")
        else:
            for i, spec in enumerate(ks):
                c.kernel(spec, f"kernels[{i}]")
        if q is not None and f is not None:
            c.state(q, f)
        elif not isinstance(raw.get("state"), dict):
            c.bad("state", "required object")
    elif kind == "mub_vs_theory":
        ks = c.int_list("k")
        if ks and any(k > 11 for k in ks):
            c.bad("k", "MUB experiments support k <= 11")
        c.int_("r")
        st = raw.get("state")
        if not isinstance(st, dict) or not ("rank" in st or "eigenvalues" in st):
            c.bad("state", "required object with 'rank' (eigenvalues are spread evenly) or 'eigenvalues'")
    elif kind == "qmd_noise":
        c.kernel(raw.get("kernel"), "kernel")
        c.float_list("eta_grid", 0.0, 1.0)
        c.int_("grid_points", required=False)
    elif kind == "concentration":
        c.int_("r")
        c.int_("directions")
        c.int_("t_points", lo=2)
        c.kernel(raw.get("kernel"), "kernel")
        _check_design(c, 2, Field.COMPLEX)
        c.state(2, Field.COMPLEX)
    if c.problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(c.problems))
    return ExperimentConfig(kind, seed, reps, raw)


def _check_design(c: _Checker, q, field):
    spec = c.raw.get("design")
    if not isinstance(spec, dict) or "kind" not in spec:
        c.bad("design", "required object with a 'kind'")
        return
    kind = spec["kind"]
    if kind == "haar":
        c.int_("n", src=spec)
    elif kind == "mub":
        if q is not None and (q & (q - 1) or field is not Field.COMPLEX):
            c.bad("design", "mub designs need complex field and q a power of two")
    elif kind == "pauli_tensor":
        if q is not None and q & (q - 1):
            c.bad("design", "pauli_tensor designs need q a power of two")
    elif kind == "bloch":
        v = spec.get("vectors")
        if q != 2 or not isinstance(v, list) or not v:
            c.bad("design", "bloch designs need q = 2 and a non-empty 'vectors' list")
    else:
        c.bad("design.kind", f"unknown design kind {kind!r}")


# ---------------------------------------------------------------- builders

def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def rep_rng(seed: int, j: int) -> np.random.Generator:
    return substream(seed, 0, j)


def _build_state(spec: dict, q: int, field, rng) -> np.ndarray:
    field = Field.coerce(field)
    if "bloch" in spec:
        if q != 2 or field is not Field.COMPLEX:
            raise ConfigError("'bloch' states need a complex qubit")
        return bloch_to_density(spec["bloch"])
    if "rebit" in spec:
        s, th = float(spec["rebit"]["s"]), float(spec["rebit"]["theta"])
        if q != 2 or not 0 <= s <= 1:
            raise ConfigError("'rebit' states need q = 2 and 0 <= s <= 1")
        return rebit_density(s, th)
    if "eigenvalues" in spec:
        lam = np.asarray(spec["eigenvalues"], dtype=float)
        if lam.shape != (q,):
            raise ConfigError(f"need {q} eigenvalues")
        if lam.min() < 0 or abs(lam.sum() - 1) > 1e-12:
            raise ConfigError("eigenvalues must be non-negative and sum to 1")
        basis = spec.get("basis", "identity")
        if basis == "identity":
            return np.diag(lam).astype(field.dtype)
        if basis == "haar":
            if rng is None:  # validation only
                return np.diag(lam).astype(field.dtype)
            U = haar_unitary(q, field, rng)
            return (U * lam) @ U.conj().T
        raise ConfigError(f"unknown basis {basis!r}")
    raise ConfigError("state needs one of 'bloch', 'rebit', 'eigenvalues'")


def rebit_density(s: float, theta: float) -> np.ndarray:
    c, sn = np.cos(theta), np.sin(theta)
    return (np.eye(2) + s * np.array([[c, sn], [sn, -c]])) / 2


def _seed_observable(q: int, field) -> np.ndarray:
    # odd integers -q+1 .. q-1; a spacing of 2 keeps narrow Gaussian-kernel Grams well conditioned
    return np.diag(np.arange(-q + 1, q, 2, dtype=float)).astype(Field.coerce(field).dtype)


def build_design(spec: dict, q: int, field, seed: int) -> Design:
    kind = spec["kind"]
    if kind == "haar":
        return haar_random_design(q, field, spec["n"], substream(seed, 1), _seed_observable(q, field))
    k = q.bit_length() - 1
    if kind == "mub":
        return build_mub(k).to_design()
    if kind == "pauli_tensor":
        return local_pauli_design(k)
    if kind == "bloch":
        return qubit_bloch_design(spec["vectors"])
    raise ConfigError(f"unknown design kind {kind!r}")


# ---------------------------------------------------------------- helpers

def eigen_errors(rho_hat, rho):
    """Absolute eigenvalue and aligned eigenvector errors, descending order.

    Each estimated eigenvector is multiplied by the unit phase maximizing
    ``Re <v_hat, v>`` before the difference is taken.
    """
    w, V = np.linalg.eigh(rho)
    wh, Vh = np.linalg.eigh((rho_hat + rho_hat.conj().T) / 2)
    w, V, wh, Vh = w[::-1], V[:, ::-1], wh[::-1], Vh[:, ::-1]
    c = np.einsum("ai,ai->i", Vh.conj(), V)
    ph = np.where(np.abs(c) > 0, c / np.where(np.abs(c) > 0, np.abs(c), 1), 1)
    vec_err = np.linalg.norm(Vh * ph - V, axis=0)
    return np.abs(wh - w), vec_err


def _fro2(A) -> float:
    return float(np.real(np.vdot(A, A)))


def _aggregate(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def _threads() -> int:
    env = os.environ.get("QST_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"QST_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("QST_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_reps(fn, reps: int, seed: int, threads: int | None = None):
    """Evaluate ``fn(j, rng_j)`` for every repetition; returns (results, seconds)."""
    threads = threads or _threads()

    def chunk(lo):
        out, secs = [], []
        for j in range(lo, min(lo + CHUNK, reps)):
            t0 = time.perf_counter()
            out.append(fn(j, rep_rng(seed, j)))
            secs.append(time.perf_counter() - t0)
        return out, secs

    starts = range(0, reps, CHUNK)
    if threads == 1 or reps <= CHUNK:
        parts = [chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, starts))  # map preserves submission order
    results = [x for p in parts for x in p[0]]
    seconds = [x for p in parts for x in p[1]]
    return results, seconds


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs_header: list
    runs: list
    aggregate_header: list
    aggregate: list
    histograms: dict = dc_field(default_factory=dict)
    seconds: list = dc_field(default_factory=list)


def _histogram(values, bins: int):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return [[float(edges[i]), float(edges[i + 1]), int(counts[i])] for i in range(bins)]


# ---------------------------------------------------------------- experiments

def run_rebit(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    n, r = cfg["n"], cfg["r"]
    angles = uniform_angles(n) if cfg.get("angles", "uniform") == "uniform" else np.asarray(cfg["angles"], float)
    d = rebit_design(angles)
    rho = check_density(_build_state(cfg["state"], 2, Field.REAL, substream(cfg.seed, 2)))
    B, c0 = lse_linear_map(d)
    probs = d.probabilities(rho).reshape(d.n, 2)
    sp = d.space

    def one(j, rng):
        p = (rng.multinomial(r, probs) / r).ravel()
        rho_hat = sp.devectorize(B @ p + c0)
        z = complex(rho_hat[0, 0] - rho_hat[1, 1], 2 * rho_hat[0, 1])
        s_hat, th = abs(z), float(np.angle(z))
        active = s_hat > 1
        shrunk = rebit_density(min(s_hat, 1.0), th)
        return [j, _fro2(rho_hat - rho), s_hat, th, active, _fro2(shrunk - rho)]

    rows, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    mse = [x[1] for x in rows]
    m, se = _aggregate(mse)
    ms, ses = _aggregate([x[5] for x in rows])
    theory = lse_mse_formula(2, 0.5, purity(rho), n, r) if cfg.get("angles", "uniform") == "uniform" else float("nan")
    theory_exact = linear_estimator_mse(d, B, rho, r)
    s_vals = [x[2] for x in rows]
    agg = [
        ["lse", m, se, theory, theory_exact],
        ["lse_shrunk", ms, ses, float("nan"), float("nan")],
        ["shrink_rate", float(np.mean([x[4] for x in rows])), float("nan"), float("nan"), float("nan")],
        ["s_hat_min", float(np.min(s_vals)), float("nan"), float("nan"), float("nan")],
        ["s_hat_max", float(np.max(s_vals)), float("nan"), float("nan"), float("nan")],
        ["s_hat_mean", *_aggregate(s_vals), float("nan"), float("nan")],
    ]
    bins = cfg.get("histogram_bins", 50)
    hists = {"s_hat": _histogram(s_vals, bins), "theta_hat": _histogram([x[3] for x in rows], bins)}
    return ExperimentResult(
        cfg,
        ["rep", "mse", "s_hat", "theta_hat", "shrink_active", "mse_shrunk"],
        rows,
        ["quantity", "mean", "stderr", "theory", "theory_exact"],
        agg,
        hists,
        secs,
    )


def _estimators(cfg, d):
    """Linear maps for LSE and every configured kernel."""
    B, c0 = lse_linear_map(d)
    out = [("lse", B, c0)]
    for spec in cfg.get("kernels", []):
        ops = quark_operators(d, make_kernel(spec))
        Bk, ck = quark_linear_map(ops)
        out.append((f"quark:{ops.kernel!r}", Bk, ck))
    return out


def _lse_theory(d: Design, rho, r) -> float:
    if not d.rank_one:
        return float("nan")
    return lse_mse_formula(d.q, design_alpha(d), purity(rho), d.n, r)


def run_spectral(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    q, field, r = cfg["q"], Field.coerce(cfg["field"]), cfg["r"]
    d = build_design(cfg["design"], q, field, cfg.seed)
    rho = check_density(_build_state(cfg["state"], q, field, substream(cfg.seed, 2)))
    ests = _estimators(cfg, d)
    sp = d.space
    probs = d.probabilities(rho)
    uniform_sizes = bool(np.all(d.sizes == d.sizes[0]))

    def one(j, rng):
        if uniform_sizes:
            p = (rng.multinomial(r, probs.reshape(d.n, -1)) / r).ravel()
        else:
            p = d.sample(rho, r, rng).flat()
        rows = []
        for name, B, c0 in ests:
            rh = sp.devectorize(B @ p + c0)
            ev, vv = eigen_errors(rh, rho)
            proj = project_to_density(rh)
            rows.append([j, name, _fro2(rh - rho), _fro2(proj - rho), *ev, *vv])
        return rows

    res, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    rows = [x for blk in res for x in blk]
    agg = []
    for e, (name, B, _) in enumerate(ests):
        mine = [blk[e] for blk in res]
        m, se = _aggregate([x[2] for x in mine])
        mp, sep = _aggregate([x[3] for x in mine])
        theory = _lse_theory(d, rho, r) if name == "lse" else float("nan")
        eig_mean = np.mean([x[4:4 + q] for x in mine], axis=0)
        vec_mean = np.mean([x[4 + q:] for x in mine], axis=0)
        agg.append([name, m, se, theory, linear_estimator_mse(d, B, rho, r), mp, sep, *eig_mean, *vec_mean])
    eig_cols = [f"eig_err_{i + 1}" for i in range(q)]
    vec_cols = [f"vec_err_{i + 1}" for i in range(q)]
    return ExperimentResult(
        cfg,
        ["rep", "estimator", "mse", "mse_projected", *eig_cols, *vec_cols],
        rows,
        ["estimator", "mean_mse", "stderr", "theory", "theory_exact", "mean_mse_projected", "stderr_projected",
         *eig_cols, *vec_cols],
        agg,
        {},
        secs,
    )


def run_mse_vs_r(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    q, field = cfg["q"], Field.coerce(cfg["field"])
    d = build_design(cfg["design"], q, field, cfg.seed)
    rho = check_density(_build_state(cfg["state"], q, field, substream(cfg.seed, 2)))
    ests = _estimators(cfg, d)
    sp = d.space
    grid = list(cfg["r_grid"])
    probs = d.probabilities(rho)
    uniform_sizes = bool(np.all(d.sizes == d.sizes[0]))

    def one(j, rng):
        rows = []
        for r in grid:
            if uniform_sizes:
                p = (rng.multinomial(r, probs.reshape(d.n, -1)) / r).ravel()
            else:
                p = d.sample(rho, r, rng).flat()
            for name, B, c0 in ests:
                rows.append([j, r, name, _fro2(sp.devectorize(B @ p + c0) - rho)])
        return rows

    res, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    rows = [x for blk in res for x in blk]
    agg = []
    ne = len(ests)
    for gi, r in enumerate(grid):
        for e, (name, B, _) in enumerate(ests):
            vals = [blk[gi * ne + e][3] for blk in res]
            m, se = _aggregate(vals)
            theory = _lse_theory(d, rho, r) if name == "lse" else float("nan")
            agg.append([r, name, m, se, theory, linear_estimator_mse(d, B, rho, r)])
    return ExperimentResult(
        cfg,
        ["rep", "r", "estimator", "mse"],
        rows,
        ["r", "estimator", "mean_mse", "stderr", "theory", "theory_exact"],
        agg,
        {},
        secs,
    )


def _mub_state(spec: dict, q: int, rng) -> np.ndarray:
    if "eigenvalues" in spec:
        lam = np.asarray(spec["eigenvalues"], dtype=float)
        if lam.size > q or lam.min() < 0 or abs(lam.sum() - 1) > 1e-12:
            raise ConfigError("state.eigenvalues must be non-negative, sum to 1 and fit in dimension q")
    else:
        rank = int(spec["rank"])
        if not 1 <= rank <= q:
            raise ConfigError(f"state.rank must lie in 1..{q}")
        lam = np.full(rank, 1.0 / rank)
    U = haar_unitary(q, "complex", rng)[:, : lam.size]
    return (U * lam) @ U.conj().T


def run_mub_vs_theory(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    r = cfg["r"]
    ks = list(cfg["k"])
    setups = []
    for k in ks:
        mub = build_mub(k)
        rho = _mub_state(cfg["state"], mub.q, substream(cfg.seed, 2, k))
        setups.append((k, mub, rho, mub.probabilities(rho)))

    def one(j, rng):
        rows = []
        for k, mub, rho, probs in setups:
            P = rng.multinomial(r, probs) / r
            rows.append([j, k, _fro2(mub_reconstruct(mub, P) - rho)])
        return rows

    res, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    rows = [x for blk in res for x in blk]
    agg = []
    for i, (k, mub, rho, _) in enumerate(setups):
        m, se = _aggregate([blk[i][2] for blk in res])
        q = mub.q
        agg.append([k, q, m, se, lse_mse_formula(q, 1 / (q + 1), purity(rho), q + 1, r)])
    return ExperimentResult(
        cfg,
        ["rep", "k", "mse"],
        rows,
        ["k", "q", "mean_mse", "stderr", "theory"],
        agg,
        {},
        secs,
    )


def _random_axis(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def run_qmd_noise(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    K = make_kernel(cfg["kernel"])
    etas = [float(e) for e in cfg["eta_grid"]]
    grid = fibonacci_sphere(cfg.get("grid_points", 10_000))
    c = sigma_z_contrast(K)

    def one(j, rng):
        u, ut = _random_axis(rng), _random_axis(rng)
        a = _random_axis(rng) * rng.random() ** (1 / 3)
        O, Ot = np.einsum("i,iab->ab", u, PAULIS), np.einsum("i,iab->ab", ut, PAULIS)
        rho = bloch_to_density(a)
        eta_t = float(rng.random()) / 2
        exact = Povm.from_observable(O)
        rows = []
        for eta in etas:
            v_bf = qmd_bitflip(O, eta, rho, K)
            b_bf = brute_qmd_pure_search(exact, bitflip_povm(O, eta), K, grid=grid).value
            two = qmd_two_noisy(O, Ot, eta, eta_t, rho, K)
            b_two = brute_qmd_pure_search(bitflip_povm(O, eta), bitflip_povm(Ot, eta_t), K, grid=grid).value
            rows.append([j, eta, eta_t, v_bf, eta * c, b_bf, two.value, two.bound, b_two])
        return rows

    res, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    rows = [x for blk in res for x in blk]
    agg = []
    for gi, eta in enumerate(etas):
        mine = [blk[gi] for blk in res]
        agg.append([
            eta,
            float(np.max([abs(x[4] - x[5]) for x in mine])),
            float(np.max([abs(x[7] - x[8]) for x in mine])),
            float(np.mean([x[3] for x in mine])),
        ])
    return ExperimentResult(
        cfg,
        ["rep", "eta", "eta_tilde", "bitflip_value", "bitflip_sup", "bitflip_sup_brute",
         "two_noisy_value", "two_noisy_sup", "two_noisy_sup_brute"],
        rows,
        ["eta", "max_gap_bitflip", "max_gap_two_noisy", "mean_bitflip_value"],
        agg,
        {},
        secs,
    )


def random_traceless_directions(count: int, q: int, rng) -> np.ndarray:
    """Unit-Frobenius traceless Hermitian matrices."""
    out = []
    for _ in range(count):
        X = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
        X = (X + X.conj().T) / 2
        X -= np.trace(X) / q * np.eye(q)
        out.append(X / np.sqrt(_fro2(X)))
    return np.array(out)


def run_concentration(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    r = cfg["r"]
    d = build_design(cfg["design"], 2, Field.COMPLEX, cfg.seed)
    rho = check_density(_build_state(cfg["state"], 2, Field.COMPLEX, substream(cfg.seed, 2)))
    ops = quark_operators(d, make_kernel(cfg["kernel"]))
    B, c0 = quark_linear_map(ops)
    sp = d.space
    dirs = random_traceless_directions(cfg["directions"], 2, substream(cfg.seed, 3))
    svec = np.array([sp.vectorize(S) for S in dirs])
    x_true = sp.vectorize(rho)
    probs = d.probabilities(rho)
    uniform_sizes = bool(np.all(d.sizes == d.sizes[0]))

    def one(j, rng):
        if uniform_sizes:
            p = (rng.multinomial(r, probs.reshape(d.n, -1)) / r).ravel()
        else:
            p = d.sample(rho, r, rng).flat()
        dev = svec @ (B @ p + c0 - x_true)
        return [[j, i, float(v)] for i, v in enumerate(dev)]

    res, secs = run_reps(one, cfg.repetitions, cfg.seed, threads)
    rows = [x for blk in res for x in blk]
    agg = []
    nt = cfg["t_points"]
    for i, S in enumerate(dirs):
        vals = np.array([blk[i][2] for blk in res])
        probe = concentration_bound(ops, rho, S, [1.0], r)
        sigma = np.sqrt(probe.variance)
        if sigma == 0:
            continue
        ts = np.linspace(0, 4 * sigma, nt + 1)[1:]
        cb = concentration_bound(ops, rho, S, ts, r)
        for t, bn, bs in zip(ts, cb.bennett, cb.bernstein):
            agg.append([i, float(t), float(t / sigma), float(np.mean(vals > t)), float(bn), float(bs),
                        cb.variance, cb.summand_bound])
    return ExperimentResult(
        cfg,
        ["rep", "direction", "deviation"],
        rows,
        ["direction", "t", "t_over_sigma", "empirical_tail", "bennett", "bernstein", "variance", "summand_bound"],
        agg,
        {},
        secs,
    )


RUNNERS = {
    "rebit": run_rebit,
    "spectral": run_spectral,
    "mse_vs_r": run_mse_vs_r,
    "mub_vs_theory": run_mub_vs_theory,
    "qmd_noise": run_qmd_noise,
    "concentration": run_concentration,
}


def run_experiment(cfg, threads: int | None = None) -> ExperimentResult:
    if not isinstance(cfg, ExperimentConfig):
        cfg = parse_config(cfg)
    return RUNNERS[cfg.kind](cfg, threads)


def write_outputs(res: ExperimentResult, out_dir) -> list[Path]:
    """Write runs/aggregate/histogram tables plus the config and timing side files.

    Everything except ``timing.csv`` is a pure function of the config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        write_csv(out / "runs.csv", "runs", res.runs_header, res.runs),
        write_csv(out / "aggregate.csv", "aggregate", res.aggregate_header, res.aggregate),
    ]
    for name, rows in sorted(res.histograms.items()):
        paths.append(write_csv(out / f"histogram_{name}.csv", "histogram", ["bin_left", "bin_right", "count"], rows))
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(res.config.to_json(), indent=2, sort_keys=True) + "\n")
    paths.append(cfg_path)
    paths.append(write_csv(out / "timing.csv", "timing", ["rep", "wall_seconds"], list(enumerate(res.seconds))))
    return paths


# ---------------------------------------------------------------- presets

SPECTRUM_8 = [0.4, 0.2, 0.15, 0.08, 0.06, 0.05, 0.04, 0.02]
R_GRID = [4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048]

PRESETS = {
    "rebit-single": {
        "kind": "rebit", "seed": 1, "repetitions": 1, "n": 5, "r": 50,
        "state": {"rebit": {"s": 0.8, "theta": 0.0}},
    },
    "rebit": {
        "kind": "rebit", "seed": 1, "repetitions": 100_000, "n": 100, "r": 50, "histogram_bins": 60,
        "state": {"rebit": {"s": 0.8, "theta": 0.0}},
    },
    "spectral": {
        "kind": "spectral", "seed": 7, "repetitions": 1000, "q": 8, "field": "complex", "r": 50,
        "design": {"kind": "haar", "n": 100},
        "state": {"eigenvalues": SPECTRUM_8, "basis": "identity"},
        "kernels": [{"kind": "gaussian", "c": 0.01}, {"kind": "gaussian", "c": 1.0}, {"kind": "gaussian", "c": 100.0}],
    },
    "mse-vs-r": {
        "kind": "mse_vs_r", "seed": 11, "repetitions": 200, "q": 8, "field": "complex", "r_grid": R_GRID,
        "design": {"kind": "haar", "n": 100},
        "state": {"eigenvalues": SPECTRUM_8, "basis": "identity"},
        "kernels": [{"kind": "gaussian", "c": 0.01}, {"kind": "gaussian", "c": 1.0}, {"kind": "gaussian", "c": 100.0}],
    },
    "mub": {
        "kind": "mub_vs_theory", "seed": 3, "repetitions": 20, "k": [2, 3, 4, 5, 6], "r": 100,
        "state": {"rank": 3},
    },
    "qmd-noise": {
        "kind": "qmd_noise", "seed": 5, "repetitions": 50, "kernel": {"kind": "gaussian", "c": 0.5},
        "eta_grid": [0.0, 0.05, 0.1, 0.2, 0.3, 0.5],
    },
    "concentration": {
        "kind": "concentration", "seed": 9, "repetitions": 100_000, "r": 100, "directions": 5, "t_points": 40,
        "design": {"kind": "bloch", "vectors": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
        "kernel": {"kind": "zero_one"},
        "state": {"bloch": [0.3, 0.2, 0.5]},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return json.loads(json.dumps(PRESETS[name]))
