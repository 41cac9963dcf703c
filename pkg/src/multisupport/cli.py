"""Command-line front end: ``python -m multisupport <command> ...``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import theory
from .boosting import boosted_recover, match_distance
from .estimator import RecoveryOptions, recover, recover_overlapping_two
from .harness.container import read_container, write_container
from .harness.digits import run_digits
from .harness.idx import IdxImages, IdxLabels, parse_idx
from .harness.sweep import format_csv, load_config, run_sweep
from .model import ModelParams, generate_batch


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _model_flags(p: argparse.ArgumentParser, n: bool = True) -> None:
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--m", type=int, default=4)
    if n:
        p.add_argument("--n", type=int, default=10000)
    p.add_argument("--lambda0", type=float, default=1.0)
    p.add_argument("--ensemble", default="gaussian", choices=["gaussian", "rademacher"])
    p.add_argument("--seed", type=int, default=0)


def _params(args, d=None) -> ModelParams:
    return ModelParams(d=args.d if d is None else d, k=args.k, l=args.l, m=args.m,
                       lambda0=args.lambda0, sample_dist=args.ensemble, matrix_dist=args.ensemble)


def _union_size(value):
    if value is None or value == "auto":
        return value
    return int(value)


def _write(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _support_lines(parts) -> str:
    return "".join(" ".join(str(c) for c in sorted(p)) + "\n" for p in parts)


def cmd_recover(args) -> int:
    if args.input:
        data = read_container(args.input, lambda0=args.lambda0, ensemble=args.ensemble)
    elif args.synthetic:
        data = generate_batch(_params(args), args.n, args.seed, stratified=args.stratified)
    else:
        raise SystemExit("recover needs --input or --synthetic")
    k, l = data.params.k, data.params.l
    if args.tau is not None:
        s1, s2 = recover_overlapping_two(data, k, args.tau, _union_size(args.union_size))
        _write(_support_lines([s1, s2]), args.out)
        return 0
    options = RecoveryOptions(union_size=_union_size(args.union_size), restarts=args.restarts,
                              seed=args.seed)
    if args.boost:
        est = boosted_recover(data, args.boost, k, l, args.eps, options).supports
    else:
        est = recover(data, k, l, options).supports_est
    _write(_support_lines(est), args.out)
    if data.truth is not None and args.report_distance:
        sys.stderr.write(f"distance {match_distance(data.truth, est).distance}\n")
    return 0


def theory_report(params: ModelParams, eps: float, delta: float, validate: int = 0, seed: int = 0) -> str:
    lines = []
    g = theory.gamma_terms(params.k, params.m, params.matrix_dist)
    for name in ("g1s", "g1sd", "g1d", "g2s", "g2sd", "g2d", "g3s", "g3sd", "g3d"):
        lines.append(f"{name} {_fmt(getattr(g, name))}")
    spec = theory.expected_affinity(params)
    sp = theory.block_spectrum(spec)
    nb = theory.operator_norm_bound(params)
    sc = theory.sample_complexity_bounds(params, eps, delta)
    mc = theory.monte_carlo_affinity(params, validate, seed) if validate else None
    rows = [("mu_on", spec.mu_on, "mu_on"), ("mu_off", spec.mu_off, "mu_off"),
            ("mu0", spec.mu0, "mu0")]
    for label, value, attr in rows:
        line = f"{label} {_fmt(value)}"
        if mc is not None:
            line += f" mc {_fmt(getattr(mc, attr))} se {_fmt(getattr(mc, attr + '_se'))}"
        lines.append(line)
    lines += [
        f"mu0_bound {_fmt(spec.mu0_bound)}",
        f"nu1 {_fmt(sp.nu1)}",
        f"nu_mid {_fmt(sp.nu_mid)}",
        f"nu_low {_fmt(sp.nu_low)}",
        f"gap {_fmt(sp.gap)}",
        f"opnorm_bound {_fmt(nb.bound)}",
        f"n_union {_fmt(sc.n_union)}",
        f"n_cluster {_fmt(sc.n_cluster)}",
    ]
    return "\n".join(lines) + "\n"


def cmd_theory(args) -> int:
    d = args.d if args.d is not None else max(100, args.k * args.l + 1)
    _write(theory_report(_params(args, d=d), args.eps, args.delta, args.validate, args.seed), None)
    return 0


def cmd_montecarlo(args) -> int:
    params = _params(args, d=args.k * args.l)
    spec = theory.expected_affinity(params)
    mc = theory.monte_carlo_affinity(params, args.n, args.seed)
    out = ["quantity closed_form estimate se z"]
    for name in ("mu0", "mu_on", "mu_off"):
        exact, est, se = getattr(spec, name), getattr(mc, name), getattr(mc, name + "_se")
        z = (est - exact) / se if se > 0 else 0.0
        out.append(f"{name} {_fmt(exact)} {_fmt(est)} {_fmt(se)} {z:.3f}")
    _write("\n".join(out) + "\n", None)
    return 0


def cmd_sweep(args) -> int:
    records = run_sweep(load_config(args.config), threads=args.threads, timing=args.timing)
    _write(format_csv(records), args.out)
    return 0


def cmd_mnist(args) -> int:
    images, labels = parse_idx(args.images), parse_idx(args.labels)
    if not isinstance(images, IdxImages) or not isinstance(labels, IdxLabels):
        raise SystemExit("expected an image file and a label file")
    digits = tuple(int(v) for v in args.digits.split(","))
    res = run_digits(images.pixels, labels.labels, digits, args.m, args.n, args.seed, args.out_dir)
    out = [f"intersection_size {res.info['intersection_size']}",
           f"union_size {res.info['union_size']}",
           f"distance_to_thresholded {res.distance}"]
    out += [f"mask {p}" for p in res.paths]
    _write("\n".join(out) + "\n", None)
    return 0


def cmd_generate(args) -> int:
    data = generate_batch(_params(args), args.n, args.seed, stratified=args.stratified)
    write_container(data, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multisupport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="recover supports from a container or synthetic data")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input")
    src.add_argument("--synthetic", action="store_true")
    _model_flags(p)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--union-size", default=None)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--boost", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--out", default=None)
    p.add_argument("--report-distance", action="store_true")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("theory", help="closed-form block entries, spectrum and sample sizes")
    _model_flags(p, n=False)
    p.set_defaults(d=None, k=3, m=2)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--validate", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("montecarlo-et", help="Monte Carlo block entries of E[T] against closed forms")
    _model_flags(p)
    p.set_defaults(k=3, m=2, n=200000)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall time (output no longer reproducible)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mnist", help="two-digit support recovery from IDX files")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--digits", default="1,5")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_mnist)

    p = sub.add_parser("generate", help="write a synthetic dataset container")
    _model_flags(p)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
