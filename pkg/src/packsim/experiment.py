"""Experiment orchestration: single runs as CSV rows, sweeps, comparisons."""
import csv
import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .network import simulate
from .scenario import ScenarioError, load_scenario, parse_value

CSV_FIELDS = [
    "run_id", "variant", "routing", "pack", "scenario", "seed", "speed_mps",
    "throughput_bps", "loss_pct", "avg_delay_s", "overhead_pkts", "overhead_ratio",
    "overrides", "trace_path",
]
METRICS = ["throughput_bps", "loss_pct", "avg_delay_s", "overhead_pkts", "overhead_ratio"]
DEFAULT_SPEEDS = (1, 5, 10, 15, 20)
OUT_ENV = "PACKSIM_OUT"


class RunFailure(RuntimeError):
    """A simulation raised; carries what is needed to replay it."""

    def __init__(self, scenario, seed, overrides, cause):
        self.scenario = scenario
        self.seed = seed
        self.overrides = overrides
        self.cause = cause
        ov = " ".join(f"--override {k}={v}" for k, v in sorted(overrides.items()))
        super().__init__(f"run failed ({type(cause).__name__}: {cause}); "
                         f"reproduce with: packsim run {scenario} --seed {seed} {ov}".rstrip())


def output_dir(explicit=None):
    out = Path(explicit or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_id(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.blake2b(blob, digest_size=6).hexdigest()


def _num(value):
    # undefined metrics (no data delivered) are written as nan
    return math.nan if value is None else value


def run_experiment(scenario, overrides=None, trace_dir=None):
    """One run; returns ``(csv_row, results)``.

    ``scenario`` is a path or bundled name. ``overrides`` maps dotted keys
    (or aliases) to values; it is stored verbatim in the row.
    """
    overrides = {k: str(v) for k, v in (overrides or {}).items()}
    sc = load_scenario(scenario, overrides)
    rid = run_id(sc.config)
    trace_path = None
    if trace_dir is not None:
        trace_path = str(Path(trace_dir) / f"{sc.name}-{rid}.tr")
    try:
        res, _ = simulate(sc.config, trace_path=trace_path)
    except Exception as exc:
        raise RunFailure(scenario, sc.seed, overrides, exc) from exc
    row = {
        "run_id": rid,
        "variant": sc.variant,
        "routing": sc.routing,
        "pack": str(bool(sc.pack)).lower(),
        "scenario": str(scenario),
        "seed": sc.seed,
        "speed_mps": sc.speed,
        "throughput_bps": res["throughput_bps"],
        "loss_pct": res["loss_pct"],
        "avg_delay_s": _num(res["avg_delay_s"]),
        "overhead_pkts": res["overhead_pkts"],
        "overhead_ratio": _num(res["overhead_ratio"]),
        "overrides": json.dumps(overrides, sort_keys=True),
        "trace_path": trace_path or "",
    }
    return row, res


def _run_row(args):
    scenario, overrides, trace_dir = args
    return run_experiment(scenario, overrides, trace_dir)[0]


def expand_vary(vary):
    """``["speed=1,10", "variant=reno,vegas"]`` -> list of override dicts."""
    axes = []
    for item in vary or ():
        key, _, values = item.partition("=")
        key = key.strip()
        if not key:
            raise ScenarioError(f"bad --vary {item!r}")
        if values:
            vals = [v.strip() for v in values.split(",") if v.strip()]
        elif key in ("speed", "speed_mps", "mobility.v_max"):
            vals = [str(v) for v in DEFAULT_SPEEDS]
        else:
            raise ScenarioError(f"--vary {key} needs values")
        axes.append([(key, v) for v in vals])
    return [dict(combo) for combo in itertools.product(*axes)]


def sweep(scenario, vary, base_overrides=None, seeds=(1,), jobs=1, trace_dir=None):
    """Cartesian sweep over ``vary`` and ``seeds``; returns CSV rows in order."""
    tasks = []
    for combo in expand_vary(vary):
        for seed in seeds:
            ov = dict(base_overrides or {})
            ov.update(combo)
            ov["seed"] = str(seed)
            # fail fast on bad keys before launching anything
            load_scenario(scenario, ov)
            tasks.append((scenario, ov, trace_dir))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_row, tasks))
    return [_run_row(t) for t in tasks]


def write_rows(path, rows, append=True):
    path = Path(path)
    new = not path.exists() or not append
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new:
            w.writeheader()
        for row in rows:
            w.writerow(row)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def parse_filter(text):
    """``"routing=part,pack=true"`` -> dict. Empty text matches everything."""
    out = {}
    for part in (text or "").split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ScenarioError(f"filter term {part!r} is not key=value")
        k, v = part.split("=", 1)
        if k.strip() not in CSV_FIELDS:
            raise ScenarioError(f"filter key {k.strip()!r} is not a CSV column")
        out[k.strip()] = v.strip()
    return out


def _matches(row, flt):
    for k, v in flt.items():
        have = row.get(k)
        if have == v:
            continue
        # numeric columns compare by value so speed=20 matches 20.0
        a, b = parse_value(str(have)), parse_value(v)
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and a == b:
            continue
        if isinstance(a, bool) or isinstance(b, bool):
            if str(a).lower() == str(b).lower():
                continue
        return False
    return True


def percent_delta(baseline, treatment):
    if baseline == 0:
        return 0.0 if treatment == 0 else math.copysign(math.inf, treatment)
    return 100.0 * (treatment - baseline) / baseline


def _summary(values):
    return sum(values) / len(values), min(values), max(values)


def compare(rows, baseline, treatment, by=()):
    """Per-metric deltas of treatment vs baseline, ``(t - b) / b`` in percent.

    Rows are grouped by the ``by`` columns first; each group must contain
    both filtered sets.
    """
    bflt, tflt = parse_filter(baseline), parse_filter(treatment)
    for c in by:
        if c not in CSV_FIELDS:
            raise ScenarioError(f"group-by column {c!r} is not a CSV column")
    groups = {}
    for row in rows:
        key = tuple(row[c] for c in by)
        groups.setdefault(key, []).append(row)
    if not groups:
        raise ScenarioError("no rows to compare")
    table = []
    for key in sorted(groups):
        members = groups[key]
        base = [r for r in members if _matches(r, bflt)]
        treat = [r for r in members if _matches(r, tflt)]
        label = ",".join(f"{c}={v}" for c, v in zip(by, key))
        if not base:
            raise ScenarioError(f"baseline filter {baseline!r} matches no rows {label}".rstrip())
        if not treat:
            raise ScenarioError(f"treatment filter {treatment!r} matches no rows {label}".rstrip())
        for metric in METRICS:
            bv = [float(r[metric]) for r in base]
            tv = [float(r[metric]) for r in treat]
            bm, bmin, bmax = _summary(bv)
            tm, tmin, tmax = _summary(tv)
            table.append({
                "group": label, "metric": metric,
                "baseline_n": len(bv), "baseline_mean": bm, "baseline_min": bmin,
                "baseline_max": bmax,
                "treatment_n": len(tv), "treatment_mean": tm, "treatment_min": tmin,
                "treatment_max": tmax,
                "delta_pct": percent_delta(bm, tm),
            })
    return table


def format_table(table):
    cols = ["group", "metric", "baseline_n", "baseline_mean", "baseline_min", "baseline_max",
            "treatment_n", "treatment_mean", "treatment_min", "treatment_max", "delta_pct"]
    if not any(r["group"] for r in table):
        cols.remove("group")

    def fmt(v):
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    cells = [cols] + [[fmt(r[c]) for c in cols] for r in table]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                     for row in cells)
