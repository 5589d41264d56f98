"""Regenerate every experiment table as CSV under --out (default: results/).

    python3 scripts/run_experiments.py --out results --seeds 1000
"""

import argparse
import csv
from collections import Counter
from pathlib import Path

from dcconsol.cli import cmd_consolidate, cmd_place, cmd_sweep, cmd_timing
from dcconsol.metrics import SlaSpec, allowed_downtime, format_duration, reports_to_csv
from dcconsol.scenario import SweepSpec, load_scenario


def write_rows(path: Path, header, rows):
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def placement(out: Path, seeds: int):
    scen = load_scenario("table1-placement")
    reports = [cmd_place(scen, "ffd", t) for t in (1.0, 0.9)]
    randoms = [cmd_place(scen, "random", 0.9, seed=s) for s in range(seeds)]
    (out / "placement.csv").write_text(reports_to_csv(reports + randoms[:1]))
    print(f"wrote {out / 'placement.csv'}")
    hist = Counter(r.bins_used for r in randoms)
    write_rows(out / "random_bins_histogram.csv", ["bins_used", "seeds"], sorted(hist.items()))


def sweep(out: Path):
    rows = cmd_sweep(load_scenario("table1-placement"), SweepSpec.parse("0.7:1.0:0.05"))
    write_rows(out / "threshold_sweep.csv", ["threshold", "lower_bound", "ffd_bins"], rows)


def consolidation(out: Path):
    reports = []
    for name in ("consolidation-demo", "consolidation-demo-9192"):
        scen = load_scenario(name)
        for mode in ("vm", "container"):
            reports.append(cmd_consolidate(scen, mode)[0])
    (out / "consolidation.csv").write_text(reports_to_csv(reports))
    print(f"wrote {out / 'consolidation.csv'}")


def timing(out: Path):
    rows = cmd_timing(load_scenario("consolidation-demo"), vm_ram=[1024, 2048, 4096], resident=[16, 32, 512])
    keys = ["kind", "size_mb", "rounds", "downtime_s", "total_s"]
    write_rows(out / "timing_comparison.csv", keys, [[r[k] for k in keys] for r in rows])


def sla(out: Path):
    rows = []
    for level in (0.99, 0.999, 0.9999, 0.99999):
        for horizon in ("day", "month", "year"):
            s = allowed_downtime(SlaSpec(level, horizon))
            rows.append([level, horizon, repr(s), format_duration(s)])
    write_rows(out / "sla_budget.csv", ["level", "horizon", "allowed_downtime_s", "readable"], rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seeds", type=int, default=1000, help="random-placement seeds")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    placement(args.out, args.seeds)
    sweep(args.out)
    consolidation(args.out)
    timing(args.out)
    sla(args.out)


if __name__ == "__main__":
    main()
