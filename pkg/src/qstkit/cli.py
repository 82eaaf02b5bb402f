"""``qst`` command line.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import formats
from .design import (
    check_complete,
    check_unitary_design,
    haar_random_design,
    local_pauli_design,
    qubit_bloch_design,
)
from .errors import ArgumentError, NumericalError, QstError, ValidationError
from .estimators import lse_fit, quark_fit, quark_operators
from .hermitian import Field
from .kernels import make_kernel, qmd_bitflip, qmd_modular, qmd_pauli, qmd_two_noisy
from .measurement import PAULIS, bloch_to_density, check_density
from .mub import build_mub
from .projection import project_to_density, spta

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated numbers, got {text!r}") from None


def _kernel(text: str):
    """``zero_one``, ``gaussian:C``, ``polynomial:DEG`` or an inline JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return make_kernel(json.loads(text))
    name, _, arg = text.partition(":")
    if name == "gaussian":
        return make_kernel({"kind": "gaussian", "c": float(arg)} if arg else {"kind": "gaussian"})
    if name == "polynomial":
        return make_kernel({"kind": "polynomial", "degree": int(arg or 2)})
    return make_kernel({"kind": name})


def _emit(doc, out):
    if out:
        formats.save_json(out, doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


def _fmt(x: float) -> str:
    x = round(float(x), 12)
    return f"{x + 0.0:.12g}"  # + 0.0 turns -0.0 into 0.0


# ---------------------------------------------------------------- design

def cmd_design_check(args):
    d = formats.design_from_json(formats.load_json(args.design))
    comp = check_complete(d)
    rep = check_unitary_design(d, args.tol)
    print(f"q = {d.q}  field = {d.field.value}  observables = {d.n}")
    print(f"complete = {comp.complete}  null_space_dim = {comp.null_space_dim}")
    print(f"alpha = {rep.alpha_theory:.12g}")
    print(f"alpha_hat = {rep.alpha_hat:.12g}")
    print(f"deviation = {rep.deviation:.3e}")
    print(f"unitary = {rep.is_unitary}")
    return EXIT_OK


def cmd_design_gen(args):
    if args.kind == "haar":
        if args.q is None or args.n is None or args.seed is None:
            raise ArgumentError("haar designs need --q, --n and --seed")
        field = Field.coerce(args.field)
        seed_obs = np.diag(np.arange(-args.q + 1, args.q, 2, dtype=float))
        d = haar_random_design(args.q, field, args.n, args.seed, seed_obs)
    elif args.kind == "mub":
        if args.k is None:
            raise ArgumentError("mub designs need --k")
        d = build_mub(args.k).to_design()
    elif args.kind == "pauli":
        if args.k is None:
            raise ArgumentError("pauli designs need --k")
        d = local_pauli_design(args.k)
    else:
        vecs = args.vectors or "1,0,0;0,1,0;0,0,1"
        d = qubit_bloch_design(np.reshape(_floats(vecs), (-1, 3)))
    _emit(formats.design_to_json(d), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- data

def _state(args, q: int, field) -> np.ndarray:
    if args.bloch:
        return bloch_to_density(_floats(args.bloch))
    if args.eigenvalues:
        lam = np.asarray(_floats(args.eigenvalues))
        if lam.shape != (q,):
            raise ArgumentError(f"need {q} eigenvalues")
        return check_density(np.diag(lam).astype(Field.coerce(field).dtype))
    if args.state:
        doc = formats.load_json(args.state)
        return check_density(formats.unflatten_matrix(doc["rho"], q, field))
    raise ArgumentError("give the state with --bloch, --eigenvalues or --state")


def cmd_sample(args):
    d = formats.design_from_json(formats.load_json(args.design))
    rho = _state(args, d.q, d.field)
    if args.exact:
        counts = d.exact_counts(rho)
    else:
        if args.r is None or args.seed is None:
            raise ArgumentError("sampling needs --r and --seed (or --exact)")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
        counts = d.sample(rho, args.r, rng)
    formats.write_counts(args.out, d, counts)
    return EXIT_OK


def cmd_estimate(args):
    d = formats.design_from_json(formats.load_json(args.design))
    counts = formats.read_counts(args.counts, d)
    if args.estimator == "lse":
        res = lse_fit(d, counts)
        rho = res.rho_hat
        diag = {
            "loss": res.loss,
            "used_closed_form": res.used_closed_form,
            "null_space_dim": res.null_space_dim,
            "alpha": res.alpha,
        }
    else:
        kernel = _kernel(args.kernel)
        ops = quark_operators(d, kernel, counts=counts)
        res = quark_fit(ops)
        rho = res.rho_hat
        diag = {
            "kernel": kernel.to_dict(),
            "lagrange_lambda": res.lagrange_lambda,
            "superop_condition": res.superop_condition,
        }
    if args.project:
        diag["rho_projected"] = project_to_density(rho)
    _emit(formats.estimate_to_json(args.estimator, rho, d.field, **diag), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- experiments

def cmd_simulate(args):
    from .simlab import parse_config, preset, run_experiment, write_outputs

    if bool(args.config) == bool(args.preset):
        raise ArgumentError("give exactly one of --config or --preset")
    raw = formats.load_json(args.config) if args.config else preset(args.preset)
    if args.repetitions is not None:
        raw["repetitions"] = args.repetitions
    cfg = parse_config(raw)
    res = run_experiment(cfg, threads=args.threads)
    for p in write_outputs(res, args.out):
        print(p)
    if args.report:
        from .report import render_report

        for p in render_report(args.out):
            print(p)
    return EXIT_OK


def cmd_presets(args):
    from .simlab import PRESETS, preset

    if args.name:
        print(json.dumps(preset(args.name), indent=2, sort_keys=True))
    else:
        for name in sorted(PRESETS):
            print(f"{name:15s} {PRESETS[name]['kind']}")
    return EXIT_OK


def cmd_report(args):
    from .report import render_report

    for p in render_report(args.out):
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------- qmd

def _axis_observable(text: str) -> np.ndarray:
    u = np.asarray(_floats(text))
    if u.shape != (3,) or np.linalg.norm(u) == 0:
        raise ArgumentError("axis must be a non-zero 3-vector")
    u = u / np.linalg.norm(u)
    return np.einsum("i,iab->ab", u, PAULIS)


def cmd_qmd(args):
    K = _kernel(args.kernel)
    if args.which == "modular":
        eta = _floats(args.eta)
        q = len(eta)
        lam = _floats(args.diag) if args.diag else [1.0 / q] * q
        if len(lam) != q:
            raise ArgumentError("--diag must have one entry per noise weight")
        res = qmd_modular(np.diag(np.arange(q, dtype=float)), eta, check_density(np.diag(lam)), K)
        print(f"value = {res.value:.12g}")
        print(f"bound = {res.bound:.12g}")
        print(f"argmax_index = {res.argmax_index}")
        return EXIT_OK
    rho = bloch_to_density(_floats(args.bloch))
    if args.which == "pauli":
        print(f"value = {qmd_pauli(args.i, args.j, rho, K):.12g}")
    elif args.which == "bitflip":
        print(f"value = {qmd_bitflip(_axis_observable(args.axis), float(args.eta), rho, K):.12g}")
    else:
        res = qmd_two_noisy(_axis_observable(args.axis), _axis_observable(args.axis2),
                            float(args.eta), float(args.eta2), rho, K)
        print(f"value = {res.value:.12g}")
        print(f"bound = {res.bound:.12g}")
    return EXIT_OK


def cmd_spta(args):
    doc = formats.load_json(args.input)
    vec = doc["vector"] if isinstance(doc, dict) else doc
    out = spta(np.asarray(vec, dtype=float))
    print("(" + ", ".join(_fmt(x) for x in out) + ")")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qst", description="Quantum state tomography toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", help="generate or check measurement designs")
    dsub = design.add_subparsers(dest="design_command", required=True)
    chk = dsub.add_parser("check", help="completeness and unitary-design diagnostics")
    chk.add_argument("design")
    chk.add_argument("--tol", type=float, default=1e-8)
    chk.set_defaults(func=cmd_design_check)
    gen = dsub.add_parser("gen", help="write a design JSON")
    gen.add_argument("--kind", choices=["haar", "mub", "pauli", "bloch"], required=True)
    gen.add_argument("--q", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--n", type=int)
    gen.add_argument("--field", default="complex", choices=["real", "complex"])
    gen.add_argument("--seed", type=int)
    gen.add_argument("--vectors", help="Bloch directions 'x,y,z;x,y,z;...' (default: the three Paulis)")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_design_gen)

    def state_args(sp):
        sp.add_argument("--bloch", help="qubit Bloch vector 'x,y,z'")
        sp.add_argument("--eigenvalues", help="diagonal state 'l1,l2,...'")
        sp.add_argument("--state", help="JSON file with key 'rho' (flattened matrix)")

    smp = sub.add_parser("sample", help="simulate measurement counts for a design")
    smp.add_argument("--design", required=True)
    state_args(smp)
    smp.add_argument("--r", type=int)
    smp.add_argument("--seed", type=int)
    smp.add_argument("--exact", action="store_true", help="write exact probabilities instead of counts")
    smp.add_argument("--out", required=True)
    smp.set_defaults(func=cmd_sample)

    est = sub.add_parser("estimate", help="estimate a state from counts")
    est.add_argument("estimator", choices=["lse", "quark"])
    est.add_argument("--design", required=True)
    est.add_argument("--counts", required=True)
    est.add_argument("--kernel", default="zero_one", help="zero_one | gaussian:C | polynomial:DEG | JSON")
    est.add_argument("--project", action="store_true", help="also report the nearest density matrix")
    est.add_argument("--out")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config")
    sim.add_argument("--preset")
    sim.add_argument("--repetitions", type=int, help="override the repetition count")
    sim.add_argument("--threads", type=int)
    sim.add_argument("--out", required=True)
    sim.add_argument("--report", action="store_true", help="render figures after the run")
    sim.set_defaults(func=cmd_simulate)

    pre = sub.add_parser("presets", help="list shipped experiment configs or print one")
    pre.add_argument("name", nargs="?")
    pre.set_defaults(func=cmd_presets)

    rep = sub.add_parser("report", help="render PNG figures from simulation output")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)

    qmd = sub.add_parser("qmd", help="closed-form maximum discrepancies")
    qsub = qmd.add_subparsers(dest="which", required=True)
    for name in ("pauli", "bitflip", "two-noisy", "modular"):
        sp = qsub.add_parser(name)
        sp.add_argument("--kernel", default="zero_one")
        if name != "modular":
            sp.add_argument("--bloch", required=True)
        sp.set_defaults(func=cmd_qmd)
        if name == "pauli":
            sp.add_argument("--i", required=True, help="x, y or z")
            sp.add_argument("--j", required=True, help="x, y or z")
        elif name == "bitflip":
            sp.add_argument("--axis", required=True)
            sp.add_argument("--eta", required=True)
        elif name == "two-noisy":
            sp.add_argument("--axis", required=True)
            sp.add_argument("--axis2", required=True)
            sp.add_argument("--eta", required=True)
            sp.add_argument("--eta2", required=True)
        else:
            sp.add_argument("--eta", required=True, help="noise weights 'e0,e1,...'")
            sp.add_argument("--diag", help="diagonal of the state (default maximally mixed)")

    sp = sub.add_parser("spta", help="project a sorted vector onto the probability simplex")
    sp.add_argument("--input", required=True, help="JSON list or object with key 'vector'")
    sp.set_defaults(func=cmd_spta)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"qst: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, QstError, NotImplementedError, KeyError, json.JSONDecodeError) as exc:
        print(f"qst: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"qst: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
