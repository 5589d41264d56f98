"""Command-line entry point: ``dcconsol {place,consolidate,sweep,timing}``.

Exit codes: 0 success, 2 usage or parse error, 3 infeasible scenario,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from .consolidation import ConsolidationPolicy, MigrationMode, consolidate
from .errors import DcError, DomainError, InfeasibleScenarioError, NotFoundError, PreconditionError, ScenarioError
from .metrics import RunReport, build_report, power, report_to_json, reports_to_csv
from .model import ThresholdPolicy, Vm, validate
from .placement import ffd_place, lower_bound, place_vms_on_hosts, random_place
from .scenario import Scenario, SweepSpec, build_state, load_scenario
from .timing import container_migration_time, plan_timing, vm_migration_time

log = logging.getLogger("dcconsol")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


class UsageError(DcError):
    pass


def _write(out: Path | None, stem: str, report: RunReport, fmt: str, metadata: dict) -> list[Path]:
    if out is None:
        return []
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = out / f"{stem}.csv"
        p.write_text(reports_to_csv([report]))
        written.append(p)
    if fmt in ("json", "both"):
        p = out / f"{stem}.json"
        meta = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"), **metadata}
        p.write_text(report_to_json(report, meta) + "\n")
        written.append(p)
    return written


def cmd_place(scen: Scenario, algo: str = "ffd", threshold: float | None = None,
              seed: int | None = None, out: Path | None = None, fmt: str = "both") -> RunReport:
    """Pack the scenario's containers into a pool of its VM type and count the VMs used."""
    if not scen.vms:
        raise UsageError("placement needs at least one VM to use as the pool template")
    t = scen.threshold if threshold is None else threshold
    seed = scen.seed if seed is None else seed
    pool = scen.vms[0].spec
    if algo == "ffd":
        res = ffd_place(scen.containers, scen.vms, t, pool=pool)
    elif algo == "random":
        res = random_place(scen.containers, scen.vms, t, seed, pool=pool)
    else:
        raise UsageError(f"unknown algorithm {algo!r}")

    # Host-level packing of the VMs actually used is informational only.
    used = sorted(set(res.placement.values()))
    specs = {v.id: v.spec for v in scen.vms}
    used_vms = [Vm(v, specs.get(v, pool)) for v in used]
    hres = place_vms_on_hosts(used_vms, scen.hosts, t, algo, seed,
                              pool=scen.hosts[0].spec if scen.hosts else None)
    p = power(hres.bins_used, scen.power_model)
    report = RunReport(
        scenario=scen.name, mode=algo, threshold=t, seed=seed, bins_used=res.bins_used,
        hosts_before=hres.bins_used, hosts_after=hres.bins_used, power_w_before=p,
        power_w_after=p, sla_level=scen.sla.level,
    )
    meta = {
        "lower_bound": lower_bound(sum(c.spec.ram_mb for c in scen.containers), pool.ram_mb, t),
        "leftover": list(res.leftover),
        "placement": res.placement,
        "vm_host": hres.placement,
    }
    _write(out, f"{scen.name}_place_{algo}", report, fmt, meta)
    return report


def cmd_consolidate(scen: Scenario, mode: str = "container", threshold: float | None = None,
                    out: Path | None = None, fmt: str = "both"):
    """Consolidate the scenario's explicit layout; returns ``(report, after_state, plan)``."""
    try:
        before = build_state(scen)
    except PreconditionError as e:
        raise UsageError(str(e)) from None
    t = scen.threshold if threshold is None else threshold
    policy = ConsolidationPolicy(threshold=ThresholdPolicy(t), mode=MigrationMode(mode))
    if validate(before, policy.threshold):
        raise InfeasibleScenarioError("initial layout violates the threshold")
    after, plan = consolidate(before, policy)
    params = scen.timing_params
    timing = plan_timing(plan, before, params)
    report = build_report(before, after, plan, timing, scen.sla, scen.power_model,
                          policy=policy, scenario=scen.name, mode=mode, seed=scen.seed)
    _write(out, f"{scen.name}_consolidate_{mode}", report, fmt,
           {"freed_hosts": list(plan.freed_hosts), "freed_vms": list(plan.freed_vms)})
    return report, after, plan


def cmd_sweep(scen: Scenario, sweep: SweepSpec, out: Path | None = None) -> list[tuple[float, int, int]]:
    """Lower bound and FFD VM count per threshold, ascending."""
    ts = sweep.thresholds()
    if not ts:
        raise UsageError("empty threshold range")
    pool = scen.vms[0].spec
    total = sum(c.spec.ram_mb for c in scen.containers)
    rows = []
    for t in ts:
        res = ffd_place(scen.containers, scen.vms, t, pool=pool)
        rows.append((t, lower_bound(total, pool.ram_mb, t), res.bins_used))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("threshold", "lower_bound", "ffd_bins"))
        w.writerows(rows)
        (out / f"{scen.name}_sweep.csv").write_text(buf.getvalue())
    return rows


TIMING_COLUMNS = ("move_id", "kind", "subject", "size_mb", "rounds", "downtime_s", "total_s")


def cmd_timing(scen: Scenario, vm_ram=(), resident=(), vm_ids=(), container_ids=(),
               plan_path: Path | None = None, out: Path | None = None) -> list[dict]:
    """One timing row per requested migration."""
    params = scen.timing_params
    vms = {v.id: v for v in scen.vms}
    cnts = {c.id: c for c in scen.containers}
    jobs = []  # (kind, subject, size)
    for size in vm_ram:
        jobs.append(("vm", f"vm-{size:g}MB", size))
    for size in resident:
        jobs.append(("container", f"container-{size:g}MB", size))
    for v in vm_ids:
        if v not in vms:
            raise NotFoundError(f"unknown vm {v!r}")
        jobs.append(("vm", v, vms[v].spec.ram_mb))
    for c in container_ids:
        if c not in cnts:
            raise NotFoundError(f"unknown container {c!r}")
        jobs.append(("container", c, cnts[c].resident_mb))
    if plan_path is not None:
        doc = json.loads(Path(plan_path).read_text())
        for m in doc.get("moves", []):
            kind, subj = m["kind"], m["subject"]
            if kind == "vm":
                if subj not in vms:
                    raise NotFoundError(f"unknown vm {subj!r}")
                jobs.append(("vm", subj, vms[subj].spec.ram_mb))
            else:
                if subj not in cnts:
                    raise NotFoundError(f"unknown container {subj!r}")
                jobs.append(("container", subj, cnts[subj].resident_mb))
    if not jobs:
        raise UsageError("nothing to time: give --vm-ram, --resident, --vm, --container or --plan")

    rows = []
    for i, (kind, subj, size) in enumerate(jobs):
        t = vm_migration_time(size, params) if kind == "vm" else container_migration_time(size, params)
        rows.append({"move_id": i, "kind": kind, "subject": subj, "size_mb": size,
                     "rounds": len(t.rounds), "downtime_s": t.downtime_s, "total_s": t.total_s})
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.DictWriter(buf, TIMING_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows)
        (out / f"{scen.name}_timing.csv").write_text(buf.getvalue())
    return rows


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcconsol", description="Container/VM placement and consolidation simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True,
                        help="scenario JSON path or a shipped name (table1-placement, consolidation-demo, ...)")
        sp.add_argument("--out", type=Path, default=Path("results"))
        return sp

    sp = common(sub.add_parser("place", help="container placement (FFD or random)"))
    sp.add_argument("--algo", choices=("ffd", "random"), default="ffd")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--format", choices=("csv", "json", "both"), default="both")

    sp = common(sub.add_parser("consolidate", help="drain coldspots by VM or container migration"))
    sp.add_argument("--mode", choices=("vm", "container"), default="container")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--format", choices=("csv", "json", "both"), default="both")

    sp = common(sub.add_parser("sweep", help="lower bound and FFD VM count over thresholds"))
    sp.add_argument("--thresholds", required=True, metavar="FROM:TO:STEP")

    sp = common(sub.add_parser("timing", help="migration time and downtime per move"))
    sp.add_argument("--vm-ram", type=float, action="append", default=[], metavar="MB")
    sp.add_argument("--resident", type=float, action="append", default=[], metavar="MB")
    sp.add_argument("--vm", action="append", default=[], metavar="ID")
    sp.add_argument("--container", action="append", default=[], metavar="ID")
    sp.add_argument("--plan", type=Path, help="JSON report from `consolidate` whose moves to time")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        scen = load_scenario(args.scenario)
        if getattr(args, "threshold", None) is not None and not 0 < args.threshold <= 1:
            raise UsageError(f"threshold must be in (0, 1], got {args.threshold}")
        if args.cmd == "place":
            r = cmd_place(scen, args.algo, args.threshold, args.seed, args.out, args.format)
            print(f"{scen.name} {r.mode} threshold={r.threshold} seed={r.seed}: {r.bins_used} VMs")
        elif args.cmd == "consolidate":
            r, _, _ = cmd_consolidate(scen, args.mode, args.threshold, args.out, args.format)
            print(f"{scen.name} {r.mode}: hosts {r.hosts_before}->{r.hosts_after}, "
                  f"power {r.power_w_before:g}->{r.power_w_after:g} W, "
                  f"moves vm={r.vm_moves} container={r.cnt_moves}")
        elif args.cmd == "sweep":
            for t, lb, ffd in cmd_sweep(scen, SweepSpec.parse(args.thresholds), args.out):
                print(f"{t:.2f} lower_bound={lb} ffd={ffd}")
        elif args.cmd == "timing":
            for row in cmd_timing(scen, args.vm_ram, args.resident, args.vm, args.container, args.plan, args.out):
                print(f"{row['kind']} {row['subject']}: downtime {row['downtime_s']:.4f} s, "
                      f"total {row['total_s']:.4f} s")
    except InfeasibleScenarioError as e:
        print(f"infeasible scenario: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, UsageError, NotFoundError, DomainError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
