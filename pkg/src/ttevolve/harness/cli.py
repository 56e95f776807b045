"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import CapacityError, ConfigError, SolverError
from .config import load_config
from .runner import (
    convergence_study,
    epsilon_sweep,
    magnetization_study,
    paper_eps_grid,
    run_experiment,
    scaling_study,
)

log = logging.getLogger("ttevolve")


def _eps_list(cfg, default_grid):
    spec = cfg.study.get("eps_list", default_grid)
    if spec == "paper":
        return paper_eps_grid(1, 20)
    if spec == "paper0":
        return paper_eps_grid(0, 20)
    if not isinstance(spec, list) or not spec:
        raise ConfigError("expected a list of thresholds or 'paper'", field="study.eps_list")
    return [float(e) for e in spec]


def cmd_evolve(cfg, out):
    res = run_experiment(cfg, out_dir=out)
    last = res.rows[-1]
    print(f"{res.run_id}: t={last.t:g} norm={last.norm:.12f} max_bond={res.max_bond} "
          f"stored={last.stored_entries} wall_ms={res.wall_ms:.1f}")


def cmd_convergence(cfg, out):
    res = convergence_study(cfg, int(cfg.study.get("halvings", 4)), bool(cfg.study.get("keep_eps", False)), out)
    for row in res["table"]:
        order = "" if row["order"] is None else f" order={row['order']:.3f}"
        print(f"steps={row['steps']} error={row['error']:.3e}{order}")


def cmd_eps_sweep(cfg, out):
    res = epsilon_sweep(cfg, _eps_list(cfg, [0.0, 1e-12, 1e-9, 1e-6, 1e-3]), out)
    for row in res["rows"]:
        err = "" if row["error"] is None else f" error={row['error']:.3e}"
        print(f"eps={row['eps']:.3e}{err} max_stored={row['max_stored_entries']}")
    print(f"eps_trunc={res['eps_trunc']}")


def cmd_scaling(cfg, out):
    sizes = cfg.study.get("sizes", [10, 20, 40])
    res = scaling_study(cfg, sizes, out)
    for row in res["rows"]:
        print(f"n={row['n']} wall_ms={row['wall_ms']:.1f} max_bond={row['max_bond']}")
    print(f"wall-clock log-log slope={res['slope']}")


def cmd_magnetization(cfg, out):
    res = magnetization_study(cfg, _eps_list(cfg, "paper0"), out)
    for row in res["rows"]:
        d = "" if row["delta"] is None else f" delta={row['delta']:.3e}"
        print(f"eps={row['eps']:.3e}{d} max_bond={row['max_bond']}")
    print(f"slope={res['slope']}")


COMMANDS = {
    "evolve": cmd_evolve,
    "convergence": cmd_convergence,
    "eps-sweep": cmd_eps_sweep,
    "scaling": cmd_scaling,
    "magnetization": cmd_magnetization,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttevolve", description="Tensor-network Schrodinger time integration.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads for MPS-BUG sweeps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.threads is not None:
            changes["threads"] = args.threads
        if changes:
            cfg = cfg.replace(**changes)
        COMMANDS[args.command](cfg, args.out)
    except (ConfigError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
