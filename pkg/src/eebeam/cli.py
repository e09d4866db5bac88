"""Command line entry point: ``eebeam run | oracle | report``.

Results go to stdout as JSON. Failures print a JSON object with an
``error`` field to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import SCHEMES as BASELINE_SCHEMES, BaselineConfig, run_scheme
from .harness import SCHEMES, SpecError, load_spec, oracle_1d_power, run_experiment, summarize
from .power import PowerModelParams, network_circuit_power
from .scenario import ScenarioConfig, make_drop

EXIT_USAGE = 2
EXIT_FAILURE = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fail(kind, message, code, details=None):
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eebeam", description="Energy-efficient multicell beamforming experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment spec (JSON)")
    run.add_argument("spec")
    run.add_argument("--seed", type=int)
    run.add_argument("--drops", type=int)
    run.add_argument("--out")
    run.add_argument("--scheme", action="append", choices=SCHEMES,
                     help="restrict to these schemes (repeatable)")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--quiet", action="store_true", help="no per-row progress on stderr")

    oracle = sub.add_parser("oracle", help="brute-force single-user EE oracle on random drops")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--drops", type=int, default=1)
    oracle.add_argument("--scheme", action="append", choices=SCHEMES,
                        help="also run these schemes and report their EE ratio to the oracle")
    oracle.add_argument("--N", type=int, default=4)
    oracle.add_argument("--grid", type=int, default=10 ** 4)
    oracle.add_argument("--p-rd", type=float)
    oracle.add_argument("--m", type=float)
    oracle.add_argument("--out", help="also write the rows to this JSON file")
    oracle.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; ignored")

    report = sub.add_parser("report", help="per-point means of a results directory")
    report.add_argument("dir")
    report.add_argument("--scheme", action="append", choices=SCHEMES)
    return parser


def _cmd_run(args) -> int:
    spec = load_spec(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.drops is not None:
        changes["drops"] = args.drops
    if args.out is not None:
        changes["out"] = args.out
    if args.scheme:
        changes["schemes"] = list(args.scheme)
    spec = replace(spec, **changes)
    if args.jobs < 1:
        raise SpecError(["jobs: must be >= 1"])

    def progress(row):
        if not args.quiet:
            print(json.dumps({"key": row["key"], "scheme": row["scheme"], "drop": row["drop"],
                              "objective": row["objective"]}), file=sys.stderr)

    out = run_experiment(spec, jobs=args.jobs, progress=progress)
    print(json.dumps({"out": str(out), "summary": summarize(out)}, indent=1))
    return 0


def _cmd_oracle(args) -> int:
    if args.drops < 1:
        raise SpecError(["drops: must be >= 1"])
    if args.grid < 2:
        raise SpecError(["grid: must be >= 2"])
    config = ScenarioConfig(B=1, L=1, N=args.N, seed=args.seed)
    params = PowerModelParams()
    if args.p_rd is not None:
        params = params.with_(p_rd=args.p_rd)
    if args.m is not None:
        params = params.with_(m=args.m)
    p_cp = float(network_circuit_power(config, params)[0])
    rows = []
    for i in range(args.drops):
        drop = make_drop(config, i, seed=args.seed)
        best_ee, best_p = oracle_1d_power(drop.channels.h[0, 0], params, p_cp, config.alpha,
                                          config.noise_power, grid=args.grid)
        row = {"drop": i, "oracle_ee": best_ee, "oracle_power": best_p}
        for scheme in args.scheme or []:
            rep = run_scheme(scheme, drop.channels, config, params, seed=drop.seed)
            # compare against an oracle charged the same circuit power
            q = BaselineConfig(scheme).charged_q if scheme in BASELINE_SCHEMES else None
            ref = best_ee
            if q is not None:
                p_q = float(network_circuit_power(config, params, q=q)[0])
                ref = oracle_1d_power(drop.channels.h[0, 0], params, p_q, config.alpha,
                                      config.noise_power, grid=args.grid)[0]
            row[scheme] = {"ee": rep.network_ee, "ratio": rep.network_ee / ref if ref > 0 else None}
        rows.append(row)
    text = json.dumps(rows, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    return 0


def _cmd_report(args) -> int:
    if not (Path(args.dir) / "results.csv").exists():
        raise FileNotFoundError(f"{args.dir}: no results.csv")
    table = summarize(args.dir)
    if args.scheme:
        table = [row for row in table if row["scheme"] in args.scheme]
    print(json.dumps(table, indent=1))
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    handlers = {"run": _cmd_run, "oracle": _cmd_oracle, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except SpecError as exc:
        return _fail("invalid_spec", str(exc), EXIT_USAGE, exc.errors)
    except (FileNotFoundError, PermissionError) as exc:
        return _fail("io", str(exc), EXIT_FAILURE)
    except (ValueError, TypeError) as exc:
        return _fail("invalid_config", str(exc), EXIT_USAGE)
    except Exception as exc:  # noqa: BLE001 - the CLI contract is JSON on stderr
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
