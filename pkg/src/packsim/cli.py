"""Command line entry point: run, sweep, compare, replay.

Output files go to ``--out`` or ``$PACKSIM_OUT`` (default: current directory).
Exit codes: 0 ok, 1 configuration error, 2 run failure.
"""
import argparse
import sys

from . import __version__
from .experiment import (OUT_ENV, RunFailure, compare, format_table, output_dir, read_rows,
                         run_experiment, sweep, write_rows)
from .network import simulate
from .scenario import ScenarioError, parse_overrides
from .trace import file_digest, read_header

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 1, 2


def parse_seeds(text):
    """``"3"``, ``"1,4,9"`` or ``"1-10"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def cmd_run(args):
    overrides = parse_overrides(args.override)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    out = output_dir(args.out)
    row, res = run_experiment(args.scenario, overrides, trace_dir=out if args.trace else None)
    write_rows(out / args.csv, [row])
    print(f"run {row['run_id']}  {row['scenario']} seed={row['seed']} variant={row['variant']} "
          f"routing={row['routing']} pack={row['pack']}")
    for key in ("throughput_bps", "loss_pct", "avg_delay_s", "overhead_pkts", "overhead_ratio"):
        print(f"  {key:15s} {row[key]:.6g}")
    print(f"  {'audit':15s} {'FAILED' if res['audit'] else 'ok'}")
    if row["trace_path"]:
        print(f"  trace           {row['trace_path']}")
    print(f"  csv             {out / args.csv}")
    return EXIT_RUN if res["audit"] else EXIT_OK


def cmd_sweep(args):
    overrides = parse_overrides(args.override)
    try:
        seeds = parse_seeds(args.seeds)
    except ValueError as exc:
        raise ScenarioError(f"--seeds: {exc}") from exc
    out = output_dir(args.out)
    rows = sweep(args.scenario, args.vary, overrides, seeds=seeds, jobs=args.jobs,
                 trace_dir=out if args.trace else None)
    write_rows(out / args.csv, rows)
    for row in rows:
        print(f"{row['run_id']}  seed={row['seed']} variant={row['variant']} "
              f"routing={row['routing']} pack={row['pack']} speed={row['speed_mps']}  "
              f"thr={row['throughput_bps']:.0f} overhead={row['overhead_pkts']}")
    print(f"{len(rows)} rows -> {out / args.csv}")
    return EXIT_OK


def cmd_compare(args):
    try:
        rows = read_rows(args.csv)
    except OSError as exc:
        raise ScenarioError(f"cannot read {args.csv}: {exc}") from exc
    by = [c.strip() for c in args.by.split(",")] if args.by else []
    table = compare(rows, args.baseline, args.treatment, by=by)
    print(format_table(table))
    return EXIT_OK


def cmd_replay(args):
    try:
        meta = read_header(args.trace)
    except (OSError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc
    cfg = meta["config"]
    try:
        res, _ = simulate(cfg, trace=True)
    except Exception as exc:
        raise RunFailure(cfg.get("name", "?"), cfg.get("seed"), {}, exc) from exc
    want = file_digest(args.trace)
    got = res["trace_digest"]
    same = want == got
    print(f"original {want}")
    print(f"replayed {got}")
    print("identical" if same else "DIFFERENT")
    return EXIT_OK if same else EXIT_RUN


def build_parser():
    p = argparse.ArgumentParser(prog="packsim", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"packsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario file or bundled name (grid7x7, mobile30)")
        sp.add_argument("-o", "--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        sp.add_argument("--csv", default="results.csv", help="CSV file name inside --out")
        sp.add_argument("--trace", action="store_true", help="write an event trace per run")

    run = sub.add_parser("run", help="run one simulation")
    common(run)
    run.add_argument("--seed", type=int)
    run.set_defaults(fn=cmd_run)

    sw = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    common(sw)
    sw.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2",
                    help="axis to sweep; repeatable; bare 'speed' sweeps 1,5,10,15,20")
    sw.add_argument("--seeds", default="1", help="e.g. 1-10 or 1,2,5")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sw.set_defaults(fn=cmd_sweep)

    cmp_ = sub.add_parser("compare", help="percent deltas between two groups of CSV rows")
    cmp_.add_argument("csv")
    cmp_.add_argument("--baseline", required=True, metavar="K=V[,K=V]")
    cmp_.add_argument("--treatment", required=True, metavar="K=V[,K=V]")
    cmp_.add_argument("--by", help="comma-separated columns to group by, e.g. variant")
    cmp_.set_defaults(fn=cmd_compare)

    rp = sub.add_parser("replay", help="rerun a trace's scenario and compare digests")
    rp.add_argument("trace")
    rp.set_defaults(fn=cmd_replay)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except RunFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except (ScenarioError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
