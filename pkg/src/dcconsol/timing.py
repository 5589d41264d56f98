"""Parametric live-migration timing.

VMs use iterative pre-copy followed by stop-and-copy. Containers use a
single checkpoint/transfer/restore cycle of their resident set, or
optionally the same pre-copy loop before the final dump.

Units: sizes in MB, rates in MB/s, times in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Literal

from .errors import DomainError, PreconditionError
from .model import DatacenterState, Move, MoveKind

CntMode = Literal["freeze-copy", "precopy"]


@dataclass(frozen=True)
class TimingParams:
    bandwidth_mb_s: float = 125.0
    vm_dirty_rate_mb_s: float = 32.0
    cnt_dirty_rate_mb_s: float = 4.0
    stop_threshold_mb: float = 8.0
    max_rounds: int = 30
    reservation_s: float = 0.1
    vm_resume_s: float = 0.5
    cnt_freeze_s: float = 0.05
    cnt_restore_s: float = 0.1
    cnt_mode: CntMode = "freeze-copy"

    def __post_init__(self):
        if not self.bandwidth_mb_s > 0:
            raise DomainError("bandwidth_mb_s must be > 0")
        if not self.stop_threshold_mb > 0:
            raise DomainError("stop_threshold_mb must be > 0")
        if self.max_rounds < 1:
            raise DomainError("max_rounds must be >= 1")
        for name in ("vm_dirty_rate_mb_s", "cnt_dirty_rate_mb_s", "reservation_s",
                     "vm_resume_s", "cnt_freeze_s", "cnt_restore_s"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.cnt_mode not in ("freeze-copy", "precopy"):
            raise DomainError(f"unknown cnt_mode {self.cnt_mode!r}")

    def override(self, **kw) -> "TimingParams":
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise DomainError(f"unknown timing parameter(s): {sorted(bad)}")
        return replace(self, **kw)


@dataclass(frozen=True)
class PrecopyRound:
    round_index: int
    transferred_mb: float
    duration_s: float
    residual_mb: float


@dataclass(frozen=True)
class MigrationTiming:
    rounds: tuple[PrecopyRound, ...]
    downtime_s: float
    total_s: float

    @property
    def precopy_s(self) -> float:
        return sum(r.duration_s for r in self.rounds)


def precopy_schedule(size_mb: float, dirty_rate: float, params: TimingParams):
    """Iterative pre-copy rounds; returns ``(rounds, residual_mb)``.

    Round i sends ``v_i`` MB in ``v_i / B`` s, during which
    ``min(dirty_rate * v_i / B, size_mb)`` MB get dirtied again. The loop
    stops once the dirtied volume drops to the stop threshold, stops
    shrinking, or ``max_rounds`` is reached.
    """
    if not size_mb > 0:
        raise DomainError(f"size must be > 0, got {size_mb}")
    if dirty_rate < 0:
        raise DomainError("dirty rate must be >= 0")
    bw = params.bandwidth_mb_s
    v = float(size_mb)
    rounds: list[PrecopyRound] = []
    if v <= params.stop_threshold_mb:
        return rounds, v
    while True:
        duration = v / bw
        nxt = min(dirty_rate * duration, float(size_mb))
        rounds.append(PrecopyRound(len(rounds), v, duration, nxt))
        if nxt <= params.stop_threshold_mb or nxt >= v or len(rounds) >= params.max_rounds:
            return rounds, nxt
        v = nxt


def vm_migration_time(vm_ram_mb: float, params: TimingParams) -> MigrationTiming:
    rounds, residual = precopy_schedule(vm_ram_mb, params.vm_dirty_rate_mb_s, params)
    downtime = residual / params.bandwidth_mb_s + params.vm_resume_s
    total = params.reservation_s + sum(r.duration_s for r in rounds) + downtime
    return MigrationTiming(tuple(rounds), downtime, total)


def container_migration_time(resident_mb: float, params: TimingParams) -> MigrationTiming:
    if not resident_mb > 0:
        raise DomainError(f"resident size must be > 0, got {resident_mb}")
    overhead = params.cnt_freeze_s + params.cnt_restore_s
    if params.cnt_mode == "freeze-copy":
        downtime = params.cnt_freeze_s + resident_mb / params.bandwidth_mb_s + params.cnt_restore_s
        return MigrationTiming((), downtime, params.reservation_s + downtime)
    rounds, residual = precopy_schedule(resident_mb, params.cnt_dirty_rate_mb_s, params)
    downtime = residual / params.bandwidth_mb_s + overhead
    total = params.reservation_s + sum(r.duration_s for r in rounds) + downtime
    return MigrationTiming(tuple(rounds), downtime, total)


@dataclass(frozen=True)
class MoveTiming:
    step: int
    move: Move
    size_mb: float
    timing: MigrationTiming


@dataclass(frozen=True)
class PlanTiming:
    total_s: float = 0.0
    max_downtime_s: float = 0.0
    sum_downtime_s: float = 0.0
    moves: tuple[MoveTiming, ...] = ()


def move_timing(move: Move, state: DatacenterState, params: TimingParams) -> tuple[float, MigrationTiming]:
    if move.kind is MoveKind.VM:
        size = state.vms[move.subject_id].spec.ram_mb
        return size, vm_migration_time(size, params)
    size = state.containers[move.subject_id].resident_mb
    return size, container_migration_time(size, params)


def plan_timing(plan, state: DatacenterState, params: TimingParams) -> PlanTiming:
    """Time a committed plan, moves executed one after another.

    ``state`` is the state the plan starts from.
    """
    if not plan.committed:
        raise PreconditionError("cannot time an uncommitted plan")
    rows = []
    for step, m in enumerate(plan.moves):
        size, t = move_timing(m, state, params)
        rows.append(MoveTiming(step, m, size, t))
    if not rows:
        return PlanTiming()
    return PlanTiming(
        total_s=sum(r.timing.total_s for r in rows),
        max_downtime_s=max(r.timing.downtime_s for r in rows),
        sum_downtime_s=sum(r.timing.downtime_s for r in rows),
        moves=tuple(rows),
    )
