"""Power, migration counts, SLA downtime budgets and run reports.

Power follows the all-or-nothing host model: every active host draws its
full rated power, idle hosts draw nothing.

An SLA violation is a modeling choice of this package: a container violates
its SLA when the downtime it accumulates from migrations exceeds the
allowed downtime for the SLA level over the chosen horizon.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Literal, Mapping

from .consolidation import replay
from .errors import DomainError, IntegrityError
from .model import DatacenterState, MoveKind, active_hosts

DAY_S = 86400.0
YEAR_MINUTES = 525960.0  # 365.25 days

CSV_COLUMNS = (
    "scenario", "mode", "threshold", "seed", "bins_used", "hosts_before", "hosts_after",
    "power_w_before", "power_w_after", "vm_moves", "cnt_moves", "total_migration_s",
    "sum_downtime_s", "max_downtime_s", "sla_level", "sla_violations",
)


@dataclass(frozen=True)
class PowerModel:
    pmax_w: float = 250.0

    def __post_init__(self):
        if not self.pmax_w > 0:
            raise DomainError("pmax_w must be > 0")


@dataclass(frozen=True)
class SlaSpec:
    level: float = 0.9999
    horizon: Literal["day", "month", "year"] = "day"
    year_minutes: float = YEAR_MINUTES

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise DomainError(f"SLA level must be in (0, 1), got {self.level}")
        if self.horizon not in ("day", "month", "year"):
            raise DomainError(f"unknown horizon {self.horizon!r}")

    @property
    def horizon_s(self) -> float:
        year = self.year_minutes * 60.0
        return {"day": DAY_S, "month": year / 12.0, "year": year}[self.horizon]


def power(active_host_count: int, model: PowerModel = PowerModel()) -> float:
    if active_host_count < 0:
        raise DomainError("host count must be >= 0")
    return model.pmax_w * active_host_count


def allowed_downtime(sla: SlaSpec) -> float:
    """Seconds of downtime the SLA tolerates over its horizon."""
    return (1.0 - sla.level) * sla.horizon_s


def format_duration(seconds: float) -> str:
    """``3155.76`` -> ``'52 min 36 s'`` (rounded to whole seconds)."""
    whole = round(seconds)
    h, rest = divmod(whole, 3600)
    m, s = divmod(rest, 60)
    parts = ([f"{h} h"] if h else []) + ([f"{m} min"] if m or h else []) + [f"{s} s"]
    return " ".join(parts)


@dataclass(frozen=True)
class SlaResult:
    count: int
    offending: tuple[str, ...]


def sla_violations(per_container_downtime_s: Mapping[str, float], sla: SlaSpec) -> SlaResult:
    budget = allowed_downtime(sla)
    bad = []
    for c, d in per_container_downtime_s.items():
        if d < 0:
            raise DomainError(f"negative downtime for {c}")
        if d > budget:
            bad.append(c)
    return SlaResult(len(bad), tuple(sorted(bad)))


def container_downtime(before: DatacenterState, timing) -> dict[str, float]:
    """Accumulated downtime per container.

    A VM move stalls every container inside that VM.
    """
    out: dict[str, float] = defaultdict(float)
    for row in timing.moves:
        m = row.move
        if m.kind is MoveKind.CNT:
            out[m.subject_id] += row.timing.downtime_s
        else:
            for c in before.containers_on(m.subject_id):
                out[c] += row.timing.downtime_s
    return dict(out)


@dataclass(frozen=True)
class RunReport:
    scenario: str
    mode: str
    threshold: float
    seed: int
    bins_used: int
    hosts_before: int
    hosts_after: int
    power_w_before: float
    power_w_after: float
    vm_moves: int = 0
    cnt_moves: int = 0
    total_migration_s: float = 0.0
    sum_downtime_s: float = 0.0
    max_downtime_s: float = 0.0
    sla_level: float = 0.9999
    sla_violations: int = 0
    violating_containers: tuple[str, ...] = ()
    moves: tuple[dict, ...] = field(default=(), repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


def build_report(
    before: DatacenterState,
    after: DatacenterState,
    plan,
    timing,
    sla: SlaSpec,
    model: PowerModel,
    *,
    policy,
    scenario: str = "",
    mode: str = "",
    seed: int = 0,
) -> RunReport:
    """Assemble a report; ``plan`` replayed over ``before`` must give ``after``."""
    if replay(before, plan, policy) != after:
        raise IntegrityError("replaying the plan over the initial state does not give the final state")
    if len(timing.moves) != len(plan.moves) or any(r.move != m for r, m in zip(timing.moves, plan.moves)):
        raise IntegrityError("timing rows do not match the plan's moves")

    h0, h1 = active_hosts(before), active_hosts(after)
    sla_res = sla_violations(container_downtime(before, timing), sla)
    threshold = getattr(policy, "threshold", policy)
    return RunReport(
        scenario=scenario,
        mode=mode,
        threshold=threshold.upper,
        seed=seed,
        bins_used=len({v for v in after.vm_of.values()}),
        hosts_before=h0,
        hosts_after=h1,
        power_w_before=power(h0, model),
        power_w_after=power(h1, model),
        vm_moves=plan.count(MoveKind.VM),
        cnt_moves=plan.count(MoveKind.CNT),
        total_migration_s=timing.total_s,
        sum_downtime_s=timing.sum_downtime_s,
        max_downtime_s=timing.max_downtime_s,
        sla_level=sla.level,
        sla_violations=sla_res.count,
        violating_containers=sla_res.offending,
        moves=tuple(
            {
                "step": r.step,
                "kind": r.move.kind.value,
                "subject": r.move.subject_id,
                "from": r.move.from_id,
                "to": r.move.to_id,
                "size_mb": r.size_mb,
                "rounds": len(r.timing.rounds),
                "downtime_s": r.timing.downtime_s,
                "total_s": r.timing.total_s,
            }
            for r in timing.moves
        ),
    )


def _fmt(v) -> str:
    # repr keeps every significant digit (never fewer than the value needs).
    return repr(v) if isinstance(v, float) else str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([_fmt(v) for v in r.row().values()])
    return buf.getvalue()


def report_to_json(report: RunReport, metadata: Mapping | None = None) -> str:
    doc = asdict(report)
    doc["violating_containers"] = list(report.violating_containers)
    doc["moves"] = list(report.moves)
    if metadata:
        doc["metadata"] = dict(metadata)
    return json.dumps(doc, indent=2)
