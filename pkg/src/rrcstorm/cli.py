"""Command line front end: ``rrcstorm run|compare|calibrate``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import runner
from .scenario import ENGINES, Scenario, SchemaError

EXIT_OK, EXIT_SCHEMA, EXIT_ENGINE = 0, 2, 3


def _scenario(args) -> Scenario:
    scn = Scenario.load(args.scenario, args.set)
    if args.seed_offset:
        scn.data["simulation"]["seeds"] = [s + args.seed_offset for s in scn.seeds]
    if args.engine:
        scn.data["engine"] = args.engine
    return scn


def cmd_run(args):
    scn = _scenario(args)
    res = runner.run(scn, args.out, jobs=args.jobs)
    print(f"wrote {', '.join(res['files'])} and manifest.yaml to {args.out}")


def cmd_compare(args):
    rep = runner.compare(args.simulation_csv, args.analytic_csv)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        runner.write_csv(args.out, rep.rows, rep.cols)
    print(rep.summary())


def cmd_calibrate(args):
    scn = _scenario(args)
    cal = runner.calibrate(scn, jobs=args.jobs)
    files = runner.write_calibration(cal, args.out)
    print(f"lambda_h_per_s={cal.lambda_h:.6g} mu_h_per_s={cal.mu_h:.6g} "
          f"processing_scale={cal.processing_scale:.6g}")
    print(f"wrote {', '.join(files)} to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrcstorm", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out_default):
        sp.add_argument("--scenario", help="scenario YAML (defaults fill the gaps)")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
        sp.add_argument("--engine", choices=ENGINES, help="override the scenario's engine")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one scenario value, e.g. rrc.t1_s=5")

    common(sub.add_parser("run", help="run a sweep"), "out")
    common(sub.add_parser("calibrate", help="fit the analytic model to the simulator"),
           "out/calibration")
    c = sub.add_parser("compare", help="compare two output CSVs on the sweep grid")
    c.add_argument("simulation_csv")
    c.add_argument("analytic_csv")
    c.add_argument("--out", help="per-point report CSV")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "compare": cmd_compare, "calibrate": cmd_calibrate}[args.verb]
    try:
        handler(args)
    except (SchemaError, runner.GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except runner.EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
