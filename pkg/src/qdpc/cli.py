"""Command line interface.

Subcommands: ptf, simulate, reconstruct, evaluate, bench, phantom.
Each exits 0 on success; failures print one ``qdpc: error: ...`` line
on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .metrics import rpsnr
from .optics import (
    PAIR_ANGLES,
    OpticalConfig,
    SourceSpec,
    build_transfer_functions,
    load_optics_json,
)
from .phantoms import KINDS, make_phantom
from .qpfio import load_phase, read_qpf, write_qpf
from .simulate import DegradationSpec, DpcStack, degrade, simulate_ideal
from .solvers import ALPHA_FLOOR, SolverConfig, solve

_METHOD_ALIASES = {
    "tikhonov": "tikhonov",
    "tv": "tv_dpc", "tv_dpc": "tv_dpc",
    "iso": "iso_dpc", "iso_dpc": "iso_dpc",
    "l2retinex": "l2_retinex", "l2_retinex": "l2_retinex",
    "l1retinex": "l1_retinex", "l1_retinex": "l1_retinex",
}

_DEFAULT_OPTICS = {
    "wavelength_um": 0.53,
    "na": 0.3,
    "magnification": 10.0,
    "camera_pixel_um": 3.46,
}


def _tfs_from_config(config: OpticalConfig, source: dict):
    return build_transfer_functions(
        config,
        kind=source.get("kind", "half_disc"),
        inner_fraction=float(source.get("inner_fraction", 0.0)),
    )


def _cmd_ptf(args) -> int:
    config, source = load_optics_json(args.config)
    tfs = _tfs_from_config(config, source)
    index = list(PAIR_ANGLES).index(args.pair)
    kernel = tfs.kernels[index]
    meta = {
        "optics": config.to_dict(),
        "source": {**source, "pair": args.pair},
        "peak": float(np.abs(kernel).max()),
    }
    write_qpf(args.out, kernel, meta)
    print(f"wrote {args.out}: pair {args.pair}, peak |H| = {meta['peak']:.6g}")
    return 0


def _cmd_simulate(args) -> int:
    config, source = load_optics_json(args.config)
    phi, _ = load_phase(args.phase, phase_max=args.phase_max)
    if phi.shape != config.shape.array_shape:
        raise ValueError(
            f"phase grid {phi.shape[1]}x{phi.shape[0]} does not match config "
            f"{config.shape.width}x{config.shape.height}"
        )
    tfs = _tfs_from_config(config, source)
    spec = DegradationSpec(snr_db=args.snr_db, strength_a=args.background_a, seed=args.seed)
    stack = degrade(simulate_ideal(phi, tfs), spec)
    meta = {
        "optics": config.to_dict(),
        "source": source,
        "pairs": list(PAIR_ANGLES),
        "degradation": spec.to_dict(),
        "provenance": "simulated",
    }
    write_qpf(args.out, stack.images, meta)
    print(f"wrote {args.out}: {stack.n_images} images, snr {args.snr_db:g} dB, "
          f"A {args.background_a:g}")
    return 0


def _stack_from_file(path: str) -> DpcStack:
    images, meta = read_qpf(path)
    if "optics" not in meta:
        raise ValueError(f"{path} carries no optics block; cannot rebuild kernels")
    config = OpticalConfig.from_dict(meta["optics"])
    source = meta.get("source", {"kind": "half_disc", "inner_fraction": 0.0})
    tfs = _tfs_from_config(config, source)
    return DpcStack(images=images.astype(np.float64), tfs=tfs,
                    provenance=meta.get("provenance", "measured"))


def _cmd_reconstruct(args) -> int:
    stack = _stack_from_file(args.stack)
    alpha = "auto" if args.alpha == "auto" else float(args.alpha)
    config = SolverConfig(
        method=_METHOD_ALIASES[args.method],
        alpha=alpha,
        beta=args.beta,
        gamma=args.gamma,
        max_iterations=args.max_iter,
        eta=args.eta,
        tv_mode=args.tv_mode,
    )
    result = solve(stack, config)
    if alpha == "auto":
        print(f"alpha resolved: {result.alpha:.6g} (auto, floor {ALPHA_FLOOR:g})")
    meta = {
        "method": config.method,
        "solver": config.to_dict(),
        "alpha_resolved": result.alpha,
        "iterations_run": result.iterations_run,
    }
    write_qpf(args.out, result.phi, meta)
    print(f"wrote {args.out}: {config.method}, {result.iterations_run} iteration(s), "
          f"final residual {result.residual_trace[-1]:.3e}")
    return 0


def _cmd_evaluate(args) -> int:
    recon, _ = load_phase(args.recon, phase_max=args.phase_max)
    truth, _ = load_phase(args.truth, phase_max=args.phase_max)
    report = rpsnr(truth, recon)
    print(f"rpsnr_db={report.rpsnr_db:.4f} offset_c={report.offset_c:.6g}")
    return 0


def _cmd_bench(args) -> int:
    if args.config:
        config, source = load_optics_json(args.config)
        optics_dict = {**config.to_dict()}
    else:
        optics_dict = dict(_DEFAULT_OPTICS)
        source = {"kind": "half_disc", "inner_fraction": 0.0}
    optics_dict["width"] = args.size
    optics_dict["height"] = args.size
    config = OpticalConfig.from_dict(optics_dict)
    tfs = _tfs_from_config(config, source)
    patterns = bench_mod.load_patterns(args.patterns, args.size)
    snrs = tuple(args.snr_db) if args.snr_db else bench_mod.BENCH_SNRS
    strengths = tuple(args.strength_a) if args.strength_a else bench_mod.BENCH_STRENGTHS
    methods = tuple(_METHOD_ALIASES[m] for m in args.methods) if args.methods \
        else bench_mod.BENCH_METHODS
    records, _ = bench_mod.run_bench_suite(
        patterns, tfs, trials=args.trials, base_seed=args.seed,
        snrs=snrs, strengths=strengths, methods=methods,
    )
    run_config = {
        "optics": optics_dict,
        "source": source,
        "trials": args.trials,
        "base_seed": args.seed,
        "snrs": list(snrs),
        "strengths": list(strengths),
        "methods": list(methods),
        "size": args.size,
    }
    bench_mod.write_bench_csv(args.out, records, run_config)
    print(f"wrote {args.out}: {len(records)} rows")
    if args.figures:
        from .report import render_bench_figures

        for path in render_bench_figures(records, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_phantom(args) -> int:
    phi = make_phantom((args.size, args.size), kind=args.kind, seed=args.seed)
    write_qpf(args.out, phi, {"kind": args.kind, "seed": args.seed, "size": args.size})
    print(f"wrote {args.out}: {args.kind} phantom, {args.size}x{args.size}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdpc",
                                     description="Differential phase contrast toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ptf", help="export a phase transfer kernel")
    p.add_argument("--config", required=True)
    p.add_argument("--pair", choices=sorted(PAIR_ANGLES), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_ptf)

    p = sub.add_parser("simulate", help="simulate a degraded contrast stack")
    p.add_argument("--phase", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--snr-db", type=float, default=math.inf)
    p.add_argument("--background-a", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-max", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="recover phase from a stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--method", choices=sorted(_METHOD_ALIASES), default="l1retinex")
    p.add_argument("--alpha", default="auto")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=40)
    p.add_argument("--eta", type=float, default=1e-6)
    p.add_argument("--tv-mode", choices=("isotropic", "anisotropic"), default="isotropic")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--phase-max", type=float, default=1.0)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("bench", help="run the factorial benchmark")
    p.add_argument("--patterns", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--snr-db", type=float, action="append")
    p.add_argument("--strength-a", type=float, action="append")
    p.add_argument("--methods", action="append", choices=sorted(_METHOD_ALIASES))
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("phantom", help="generate a synthetic phase target")
    p.add_argument("--kind", choices=KINDS, default="mixed")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_phantom)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # one-line, machine-parseable failure
        print(f"qdpc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
