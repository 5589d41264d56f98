"""Threshold-driven consolidation, hotspot relief and admission control.

Drains are all-or-nothing by default: either every VM (or container) on the
source host finds a home and the host is switched off, or the input state
comes back untouched with an uncommitted plan.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import NotFoundError, PreconditionError
from .model import (
    DatacenterState,
    Move,
    MoveKind,
    ResourceSpec,
    ThresholdPolicy,
    apply_move,
    host_load,
    host_used_ram,
    id_key,
    release,
    vm_load,
    vm_used_ram,
)


class MigrationMode(str, Enum):
    VM = "vm"
    CONTAINER = "container"


@dataclass(frozen=True)
class ConsolidationPolicy:
    threshold: ThresholdPolicy = ThresholdPolicy()
    mode: MigrationMode = MigrationMode.CONTAINER
    atomic_drain: bool = True


@dataclass(frozen=True)
class MigrationPlan:
    moves: tuple[Move, ...] = ()
    freed_hosts: tuple[str, ...] = ()
    freed_vms: tuple[str, ...] = ()
    committed: bool = True
    still_overloaded: bool = False

    def __post_init__(self):
        if not self.committed and (self.freed_hosts or self.freed_vms):
            raise PreconditionError("an uncommitted plan cannot free resources")

    def count(self, kind: MoveKind) -> int:
        return sum(1 for m in self.moves if m.kind is kind)


@dataclass(frozen=True)
class AdmissionDecision:
    accepted: bool
    target_vm: str | None
    reason: str


def _require_host(state: DatacenterState, host_id: str):
    if host_id not in state.hosts:
        raise NotFoundError(f"unknown host {host_id!r}")


def _active_host_ids(state: DatacenterState) -> list[str]:
    loaded = set(state.host_of.values())
    return [h for h in state.host_ids() if h in loaded and state.hosts[h].active]


def _fullest_hosts(state: DatacenterState, exclude: str) -> list[str]:
    hosts = [h for h in _active_host_ids(state) if h != exclude]
    return sorted(hosts, key=lambda h: (-host_load(state, h), id_key(h)))


def _fullest_vms(state: DatacenterState, exclude_host: str | None = None) -> list[str]:
    active = set(_active_host_ids(state))
    vms = [v for v in state.vm_ids() if state.host_of.get(v) in active and state.host_of[v] != exclude_host]
    return sorted(vms, key=lambda v: (-vm_load(state, v), id_key(v)))


def find_coldspots(state: DatacenterState, policy: ConsolidationPolicy | ThresholdPolicy | None = None) -> list[str]:
    """Active hosts, least loaded first (ties by id); empty hosts are skipped."""
    return sorted(_active_host_ids(state), key=lambda h: (host_load(state, h), id_key(h)))


def _threshold(policy) -> ThresholdPolicy:
    return policy.threshold if isinstance(policy, ConsolidationPolicy) else policy


def drain_host_by_vm_migration(state: DatacenterState, host_id: str, policy: ConsolidationPolicy):
    """Move every VM off ``host_id`` onto the fullest other host with room."""
    _require_host(state, host_id)
    tp = _threshold(policy)
    if not state.host_is_active(host_id):
        return state, MigrationPlan()

    src_vms = sorted(state.vms_on(host_id), key=lambda v: (-state.vms[v].spec.ram_mb, id_key(v)))
    cur = state
    moves: list[Move] = []
    for v in src_vms:
        ram = cur.vms[v].spec.ram_mb
        for h in _fullest_hosts(cur, exclude=host_id):
            if host_used_ram(cur, h) + ram <= tp.cap(cur.hosts[h].spec.ram_mb):
                move = Move(MoveKind.VM, v, host_id, h)
                cur = apply_move(cur, move, tp)
                moves.append(move)
                break
        else:
            if policy.atomic_drain:
                return state, MigrationPlan(moves=tuple(moves), committed=False)

    if cur.vms_on(host_id):
        return cur, MigrationPlan(moves=tuple(moves))
    return release(cur, host_ids=[host_id]), MigrationPlan(moves=tuple(moves), freed_hosts=(host_id,))


def drain_host_by_container_migration(state: DatacenterState, host_id: str, policy: ConsolidationPolicy):
    """Move every container off ``host_id`` into VMs on other active hosts.

    On success the emptied VMs are deallocated and the host switched off.
    """
    _require_host(state, host_id)
    tp = _threshold(policy)
    if not state.host_is_active(host_id):
        return state, MigrationPlan()

    src_vms = state.vms_on(host_id)
    src_cnts = [c for v in src_vms for c in state.containers_on(v)]
    src_cnts.sort(key=lambda c: (-state.containers[c].spec.ram_mb, id_key(c)))

    cur = state
    moves: list[Move] = []
    for c in src_cnts:
        ram = cur.containers[c].spec.ram_mb
        for v in _fullest_vms(cur, exclude_host=host_id):
            if vm_used_ram(cur, v) + ram <= tp.cap(cur.vms[v].spec.ram_mb):
                move = Move(MoveKind.CNT, c, cur.vm_of[c], v)
                cur = apply_move(cur, move, tp)
                moves.append(move)
                break
        else:
            if policy.atomic_drain:
                return state, MigrationPlan(moves=tuple(moves), committed=False)

    emptied = [v for v in src_vms if not cur.containers_on(v)]
    freed_hosts = (host_id,) if len(emptied) == len(src_vms) else ()
    cur = release(cur, vm_ids=emptied, host_ids=freed_hosts)
    return cur, MigrationPlan(moves=tuple(moves), freed_hosts=freed_hosts, freed_vms=tuple(emptied))


def distribute_hotspot(state: DatacenterState, host_id: str, policy: ConsolidationPolicy):
    """Move VMs, smallest first, off an overloaded host until it is back under the threshold."""
    _require_host(state, host_id)
    tp = _threshold(policy)
    host_ram = state.hosts[host_id].spec.ram_mb
    if host_used_ram(state, host_id) <= tp.cap(host_ram):
        raise PreconditionError(f"host {host_id} is not above the threshold")

    cur = state
    moves: list[Move] = []
    for v in sorted(state.vms_on(host_id), key=lambda v: (state.vms[v].spec.ram_mb, id_key(v))):
        if host_used_ram(cur, host_id) <= tp.cap(host_ram):
            break
        ram = cur.vms[v].spec.ram_mb
        for h in _fullest_hosts(cur, exclude=host_id):
            if host_used_ram(cur, h) + ram <= tp.cap(cur.hosts[h].spec.ram_mb):
                move = Move(MoveKind.VM, v, host_id, h)
                cur = apply_move(cur, move, tp)
                moves.append(move)
                break
    still = host_used_ram(cur, host_id) > tp.cap(host_ram)
    return cur, MigrationPlan(moves=tuple(moves), still_overloaded=still)


def _drain(state, host_id, policy: ConsolidationPolicy):
    if MigrationMode(policy.mode) is MigrationMode.VM:
        return drain_host_by_vm_migration(state, host_id, policy)
    return drain_host_by_container_migration(state, host_id, policy)


def consolidate(state: DatacenterState, policy: ConsolidationPolicy):
    """Repeatedly drain the coldest host that can be emptied.

    Only drains that actually switch a host off are kept, so every accepted
    step lowers the active-host count and the loop terminates.
    """
    cur = state
    moves: list[Move] = []
    freed_hosts: list[str] = []
    freed_vms: list[str] = []
    while True:
        for h in find_coldspots(cur, policy):
            nxt, plan = _drain(cur, h, policy)
            if plan.committed and plan.freed_hosts:
                cur = nxt
                moves.extend(plan.moves)
                freed_hosts.extend(plan.freed_hosts)
                freed_vms.extend(plan.freed_vms)
                break
        else:
            break
    return cur, MigrationPlan(tuple(moves), tuple(freed_hosts), tuple(freed_vms))


def replay(state: DatacenterState, plan: MigrationPlan, policy) -> DatacenterState:
    """Apply a committed plan's moves and releases to ``state``."""
    if not plan.committed:
        raise PreconditionError("cannot replay an uncommitted plan")
    tp = _threshold(policy)
    for m in plan.moves:
        state = apply_move(state, m, tp)
    return release(state, vm_ids=plan.freed_vms, host_ids=plan.freed_hosts)


def admit_request(state: DatacenterState, container_spec: ResourceSpec, policy) -> AdmissionDecision:
    """Accept a container request if some VM has threshold headroom for it."""
    tp = _threshold(policy)
    ram = container_spec.ram_mb
    best_room = None
    for v in _fullest_vms(state):
        room = tp.cap(state.vms[v].spec.ram_mb) - vm_used_ram(state, v)
        if ram <= room:
            return AdmissionDecision(True, v, f"placed on {v} ({room - ram} MB headroom left)")
        best_room = room if best_room is None else max(best_room, room)
    if best_room is None:
        return AdmissionDecision(False, None, "no active VM")
    return AdmissionDecision(False, None, f"no VM headroom: need {ram} MB, largest headroom {best_room} MB")
