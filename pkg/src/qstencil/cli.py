"""Command-line entry point: ``qstencil <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import MicroKernelError
from .harness import (
    HARDWARE_COLUMNS, RunConfig, convergence_slope, emit, emit_error_report, run_convergence,
    run_cost_model, run_error_propagation, run_hardware_style, run_jacobi_demo, run_metadata,
)
from .runtime import TELEMETRY_COLUMNS

log = logging.getLogger("qstencil")

COMMANDS = ("convergence", "propagation", "hardware-style", "cost-model", "jacobi-demo")
# per-command defaults that differ from RunConfig's
_DEFAULTS = {
    "convergence": {"steps": 50},
    "propagation": {"steps": 100},
    "hardware-style": {"steps": 1, "kernel": "bernoulli", "noise": "brisbane-snapshot"},
    "cost-model": {},
    "jacobi-demo": {"shots": 100_000},
}


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat YAML file of RunConfig fields")
    p.add_argument("--preset")
    p.add_argument("--kernel", choices=["bernoulli", "branching"])
    p.add_argument("--shots", "-M", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mitigation", type=_bool, metavar="on|off")
    p.add_argument("--noise")
    p.add_argument("--strategy", choices=["batch", "icf"])
    p.add_argument("--fuse-k", dest="fuse_k", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--m-sweep", dest="m_sweep", type=_ints, help="comma-separated shot counts")
    p.add_argument("--N", dest="N", type=int)
    p.add_argument("--dt-safety", dest="dt_safety", type=float)
    p.add_argument("--reference", choices=["auto", "analytic", "classical"])
    p.add_argument("--mode", choices=["sampled", "exact", "classical", "variance-probe"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstencil", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_run_flags(sub.add_parser(name))
    return parser


def _config(args) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose") and v is not None}
    base = dict(_DEFAULTS[args.command])
    if args.config is None:
        base.update(overrides)
        return RunConfig.load(None, **base)
    # file values beat command defaults, flags beat both
    cfg = RunConfig.load(args.config)
    file_keys = {k for k, v in asdict(cfg).items() if v != getattr(RunConfig(), k)}
    base = {k: v for k, v in base.items() if k not in file_keys}
    base.update(overrides)
    return RunConfig.load(args.config, **base)


def _out(cfg: RunConfig, command: str) -> Path:
    return Path(cfg.output_dir) / command


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = _out(cfg, args.command)
        if args.command == "convergence":
            report = run_convergence(cfg)
            paths = emit_error_report(report, cfg, out, args.command)
            print(f"log-log slope of mean final L2 vs M: {convergence_slope(report):.3f}")
        elif args.command == "propagation":
            report = run_error_propagation(cfg)
            paths = emit_error_report(report, cfg, out, args.command)
            final = report.aggregate()[-1]
            print(f"final relL2 {final['rel_l2_mean']:.4%} +/- {final['rel_l2_std']:.4%}, "
                  f"relLinf {final['rel_linf_mean']:.4%} +/- {final['rel_linf_std']:.4%}")
        elif args.command == "hardware-style":
            rows = run_hardware_style(cfg)
            paths = emit(out, run_metadata(cfg, args.command), {"hardware.csv": (rows, HARDWARE_COLUMNS)})
            for r in rows:
                print(f"rep {r['repetition']} {r['variant']:>9}: Linf {r['linf']:.4f}  L2 {r['l2']:.4f}")
        elif args.command == "cost-model":
            res = run_cost_model(cfg)
            g, f = res["generating"], res["fitted"]
            tel = [t.row() for recs in res["emulated"].values() for t in recs]
            fit = [{"param": "T_launch", "generating": g.T_launch, "fitted": f.T_launch},
                   {"param": "T_node", "generating": g.T_node, "fitted": f.T_node}]
            paths = emit(out, run_metadata(cfg, args.command, {"summary": res["summary"]}), {
                "telemetry.csv": (tel, TELEMETRY_COLUMNS),
                "cost_fit.csv": (fit, ["param", "generating", "fitted"]),
            })
            print(f"T_launch {f.T_launch:.4f} s (generating {g.T_launch:.4f}), "
                  f"T_node {f.T_node:.4f} s (generating {g.T_node:.4f})")
        else:
            rows = run_jacobi_demo(cfg)
            paths = emit(out, run_metadata(cfg, args.command),
                         {"jacobi.csv": (rows, ["node", "u0", "exact", "sampled", "se", "z"])})
            worst = max(abs(r["z"]) for r in rows)
            print(f"max |sampled - exact| / SE over nodes: {worst:.2f}")
    except MicroKernelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for p in paths:
        print(f"wrote {p}")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
