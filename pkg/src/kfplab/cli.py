"""Command line interface: batch suite runner and report emitter.

    kfplab run --suite geometry --out out/            # one suite
    kfplab run --suite all --out out/ --seed 1        # everything
    kfplab report --out out/                          # merge + figures
    kfplab default-config > config.ini                # knob reference

Exit codes: 0 all assertions passed, 1 usage or configuration error,
2 assertion failure (the failing invariant is named on stderr).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import config as cfgmod
from . import reporting
from .errors import ConfigError, GoldenMismatch


def _cmd_run(args) -> int:
    from . import suites, workbench
    try:
        cp = cfgmod.load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.suite not in cfgmod.SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(cfgmod.SUITES)}",
              file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else int(cp["run"]["seed"])
    if args.threads is not None:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    names = [s for s in cfgmod.SUITES if s != "all"] if args.suite == "all" \
        else [args.suite]
    failed = []
    for name in names:
        print(f"[kfplab] running suite {name} (seed {seed})")
        try:
            report = suites.run_suite(name, cp, seed)
        except GoldenMismatch as exc:
            print(f"assertion failure: golden table mismatch: {exc}",
                  file=sys.stderr)
            return 2
        reporting.write_suite_report(report, args.out, seed)
        bad = reporting.failed_checks(report)
        for c in bad:
            print(f"  FAILED {c['name']}: value {c['value']:.6g} vs "
                  f"threshold {c['threshold']:.6g} {c.get('note', '')}",
                  file=sys.stderr)
        ok = len(report["checks"]) - len(bad)
        print(f"[kfplab] {name}: {ok}/{len(report['checks'])} checks passed")
        failed.extend(f"{name}/{c['name']}" for c in bad)
    workbench.clear_cache()
    if failed:
        print(f"assertion failure in: {'; '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args) -> int:
    try:
        report_dir = reporting.write_consolidated(args.out)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(reporting.human_summary(args.out))
    print(f"[kfplab] consolidated report in {report_dir}")
    return 0


def _cmd_default_config(args) -> int:
    print(cfgmod.config_text(cfgmod.default_config()), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kfplab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment suite")
    run_p.add_argument("--config", default=None, help="INI config file")
    run_p.add_argument("--suite", required=True,
                       help=f"one of: {', '.join(cfgmod.SUITES)}")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=None)
    run_p.set_defaults(func=_cmd_run)

    rep_p = sub.add_parser("report", help="merge suite outputs and render figures")
    rep_p.add_argument("--out", required=True, help="directory with suite outputs")
    rep_p.set_defaults(func=_cmd_report)

    cfg_p = sub.add_parser("default-config", help="print the default config")
    cfg_p.set_defaults(func=_cmd_default_config)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
