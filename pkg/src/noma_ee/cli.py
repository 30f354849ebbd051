"""Command-line front end: ``noma-ee sweep-power | sweep-rf | single-trial | validate``.

Exit codes: 0 success, 1 configuration or usage error, 2 no feasible trial
anywhere, 3 solver failure (including a failed ``validate`` run).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict

from .config import ScenarioConfig, load_config
from .exceptions import ConfigError
from .sim import SCHEMES, check_schemes, run_trial, sweep_rf_chains, sweep_total_power, write_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3

logger = logging.getLogger("noma_ee")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for infeasibility."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noma-ee", description="Energy-efficient NOMA power allocation study.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value scenario file (defaults otherwise)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--trials", type=int, help="override the trial count")
    common.add_argument("--scheme", default="all", choices=SCHEMES + ("all",),
                        help="schemes to solve (skipped columns are written as nan)")
    common.add_argument("--trace", action="store_true",
                        help="dump per-trial solver diagnostics as JSON lines")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("sweep-power", parents=[common], help="EE/SE versus total power")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--power-dbm", type=float, nargs="+", help="override the dBm sweep points")

    p = sub.add_parser("sweep-rf", parents=[common], help="EE/SE versus RF-chain count")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--rf-chains", type=int, nargs="+", help="override the N_RF sweep points")
    p.add_argument("--power-dbm", type=float, help="total power (default rf_sweep_power_dbm)")

    p = sub.add_parser("single-trial", parents=[common], help="solve one trial, print JSON")
    p.add_argument("--out", help="JSON path (stdout if omitted)")
    p.add_argument("--index", type=int, default=0, help="trial index")
    p.add_argument("--power-dbm", type=float, help="total power (default first sweep point)")
    p.add_argument("--n-rf", type=int, help="RF chains (default from config)")

    p = sub.add_parser("validate", help="solver versus brute-force oracle on random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50, help="two-cluster EE instances")
    p.add_argument("--dual-instances", type=int, default=200,
                   help="single-cluster instances for the subgradient path (0 skips)")
    p.add_argument("--tol", type=float, default=1e-3, help="allowed relative EE deviation")
    return parser


def _scenario(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if getattr(args, "power_dbm", None) is not None and args.command == "sweep-power":
        changes["total_power_dbm"] = list(args.power_dbm)
    if getattr(args, "rf_chains", None) is not None:
        changes["rf_chains"] = list(args.rf_chains)
    return config.replace(**changes) if changes else config


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def _emit_trace(by_point, args):
    stream = open(args.out + ".trace.jsonl", "w") if args.out else sys.stderr
    try:
        for results in by_point:
            for r in results:
                stream.write(json.dumps(_jsonable(asdict(r))) + "\n")
    finally:
        if stream is not sys.stderr:
            stream.close()


def _sweep_exit(by_point) -> int:
    flat = [r for results in by_point for r in results]
    if any(r.status == "solver-failed" for r in flat):
        return EXIT_SOLVER
    if not any(r.ok for r in flat):
        return EXIT_INFEASIBLE
    return EXIT_OK


def _run_sweep(args, config) -> int:
    schemes = check_schemes(args.scheme)
    if args.command == "sweep-power":
        rows, by_point = sweep_total_power(config, n_jobs=args.jobs, return_trials=True,
                                           trace=args.trace, schemes=schemes)
        name, extra = "total BS transmit power [dBm]", []
    else:
        rows, by_point = sweep_rf_chains(config, total_power_dbm=args.power_dbm, n_jobs=args.jobs,
                                         return_trials=True, trace=args.trace, schemes=schemes)
        dbm = config.rf_sweep_power_dbm if args.power_dbm is None else args.power_dbm
        name = f"RF chains N_RF ({config.n_tx} = fully digital)"
        extra = [f"total power {dbm} dBm"]
    comments = extra + [f"schemes: {', '.join(schemes)}; seed {config.seed}"]
    write_csv(rows, args.out or sys.stdout, name, comments)
    if args.out:
        logger.info("wrote %d rows to %s", len(rows), args.out)
    if args.trace:
        _emit_trace(by_point, args)
    return _sweep_exit(by_point)


def _run_single(args, config) -> int:
    res = run_trial(config, args.index, args.power_dbm, args.n_rf, trace=args.trace,
                    schemes=args.scheme)
    text = json.dumps(_jsonable(asdict(res)), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if res.status == "solver-failed":
        return EXIT_SOLVER
    return EXIT_OK if res.ok else EXIT_INFEASIBLE


def _run_validate(args) -> int:
    from .validate import dual_fidelity, format_report, oracle_equivalence, report_passed

    if args.instances < 1 or args.dual_instances < 0:
        raise ConfigError("--instances must be >= 1 and --dual-instances >= 0")
    eq = oracle_equivalence(args.instances, args.seed)
    dual = dual_fidelity(args.dual_instances, args.seed) if args.dual_instances else None
    print(format_report(eq, dual, args.tol))
    return EXIT_OK if report_passed(eq, dual, args.tol) else EXIT_SOLVER


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _run_validate(args)
        config = _scenario(args)
        if args.command == "single-trial":
            return _run_single(args, config)
        return _run_sweep(args, config)
    except ConfigError as err:
        print(f"noma-ee: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
