"""Command-line interface.

Subcommands:
  run           one experiment (config file and/or flags), emits CSV or JSON
  sweep         learning-rate sweep over optimizers, prints a summary table
  target        target-state utilities (gen-hexgkp)
  gradcheck     finite-difference verification of Jacobian and loss gradient

Flags override config-file values; the effective config is echoed next to
every output (embedded in JSON, sidecar file next to CSV).
"""

import argparse
import json
import math
import sys

from . import harness, targets
from .errors import FockngdError


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--task", choices=harness.TASKS)
    p.add_argument("--layers", type=int)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam", "ngd"))
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--ngd-lambda", type=float, dest="ngd_lambda")
    p.add_argument("--ngd-structure", choices=("full", "block"), dest="ngd_structure")
    p.add_argument("--steps", type=int)
    p.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    p.add_argument("--init-scale", type=float, dest="init_scale")
    p.add_argument("--target-path", dest="target_path")
    p.add_argument("--output", help="output path for convergence records")


def _config_from_args(args) -> harness.ExperimentConfig:
    overrides = {
        key: getattr(args, key)
        for key in (
            "task",
            "layers",
            "cutoff",
            "optimizer",
            "learning_rate",
            "ngd_lambda",
            "ngd_structure",
            "steps",
            "init_scale",
            "target_path",
            "output",
        )
    }
    if args.seeds is not None:
        overrides["seeds"] = harness.coerce_config_value("seeds", args.seeds)
    return harness.load_config(args.config, overrides)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    records = harness.run(config)
    for rec in records:
        reached = rec.steps_to_threshold()
        reach_txt = f"reached {harness.CONVERGENCE_THRESHOLD:g} at step {reached}" if reached is not None else "threshold not reached"
        print(
            f"seed {rec.seed}: final loss {rec.final_loss():.6e} "
            f"[{rec.status}] {reach_txt}"
            + (" [leakage warning]" if rec.leakage_warning else "")
        )
    if config.output:
        fmt = args.format or ("json" if str(config.output).endswith(".json") else "csv")
        harness.emit(records, fmt, config.output)
        print(f"wrote {fmt} to {config.output}")
        if fmt == "csv":
            sidecar = str(config.output) + ".config.txt"
            with open(sidecar, "w", encoding="utf-8") as fh:
                fh.write(harness.format_config(config))
            print(f"wrote effective config to {sidecar}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    rates = (
        tuple(float(r) for r in args.rates.replace(",", " ").split())
        if args.rates
        else harness.DEFAULT_RATE_GRID
    )
    optimizers = (
        tuple(args.optimizers.replace(",", " ").split())
        if args.optimizers
        else ("sgd", "adam", "ngd")
    )
    summary = harness.sweep(config, rates=rates, optimizers=optimizers)
    print(summary.table())
    for opt, rate in summary.optimal.items():
        print(f"optimal rate for {opt}: {rate:g}")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            payload = summary.to_dict()
            payload["config"] = config.as_dict()
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote sweep summary to {args.output}")
    return 0


def _cmd_target_gen_hexgkp(args) -> int:
    spec = targets.HexGkpSpec(d=args.d, mu=args.mu, delta=args.delta, cutoff=args.cutoff)
    target = targets.hex_gkp_target(spec)
    targets.save_target(target, args.out)
    print(f"wrote {target.label} ({args.cutoff} amplitudes) to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    report = harness.gradient_check(args.layers, args.cutoff, args.seed)
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value:.3e}")
    worst = max(report["jacobian_max"], report["grad_max"])
    ok = worst <= 1e-6 and math.isfinite(worst)
    print(f"max relative error {worst:.3e} -> {'OK' if ok else 'FAIL'} (tolerance 1e-06)")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockngd",
        description="Optimize layered single-mode optical circuits in a "
        "truncated Fock basis (gradient descent, Adam, natural gradient).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_config_flags(p_run)
    p_run.add_argument("--format", choices=("csv", "json"), help="output format (default from extension)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="learning-rate sweep")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--rates", help="comma-separated learning rates")
    p_sweep.add_argument("--optimizers", help="comma-separated optimizer names")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_target = sub.add_parser("target", help="target-state utilities")
    target_sub = p_target.add_subparsers(dest="target_command", required=True)
    p_hex = target_sub.add_parser("gen-hexgkp", help="write a hex-GKP target file")
    p_hex.add_argument("--d", type=int, required=True)
    p_hex.add_argument("--mu", type=int, required=True)
    p_hex.add_argument("--delta", type=float, required=True)
    p_hex.add_argument("--cutoff", type=int, required=True)
    p_hex.add_argument("--out", required=True)
    p_hex.set_defaults(func=_cmd_target_gen_hexgkp)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p_grad.add_argument("--layers", type=int, default=3)
    p_grad.add_argument("--cutoff", type=int, default=20)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    logging_config()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FockngdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def logging_config():
    import logging

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


if __name__ == "__main__":
    raise SystemExit(main())
