"""Resource hierarchy (host -> VM -> container) and capacity arithmetic.

Only RAM constrains placement. PEs, MIPS and bandwidth are carried for
reporting. A VM reserves its full nominal RAM on its host whatever its
containers use.

All types are frozen values; operations never mutate their inputs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import DomainError, NotFoundError, PreconditionError, RejectedMoveError

DEFAULT_RESIDENT_MB = 32

_DIGITS = re.compile(r"(\d+)")


def id_key(ident: str):
    """Natural sort key so that ``vm-2`` sorts before ``vm-10``."""
    return tuple(int(p) if p.isdigit() else p for p in _DIGITS.split(ident))


def exact_fraction(x: float) -> Fraction:
    # 0.9 must mean 9/10, not its binary neighbour, for boundary comparisons.
    return Fraction(x).limit_denominator(1_000_000)


@dataclass(frozen=True)
class ResourceSpec:
    pes: int
    mips: int
    ram_mb: int
    bw: int = 0

    def __post_init__(self):
        if self.pes < 1:
            raise DomainError(f"pes must be >= 1, got {self.pes}")
        if self.mips < 0:
            raise DomainError(f"mips must be >= 0, got {self.mips}")
        if self.ram_mb < 1:
            raise DomainError(f"ram_mb must be >= 1, got {self.ram_mb}")
        if self.bw < 0:
            raise DomainError(f"bw must be >= 0, got {self.bw}")


@dataclass(frozen=True)
class Host:
    id: str
    spec: ResourceSpec
    max_power_w: float = 250.0
    active: bool = True

    def __post_init__(self):
        if not self.max_power_w > 0:
            raise DomainError(f"max_power_w must be > 0, got {self.max_power_w}")


@dataclass(frozen=True)
class Vm:
    id: str
    spec: ResourceSpec


@dataclass(frozen=True)
class Container:
    """A container; ``resident_mb`` is the checkpointable state size.

    When omitted it defaults to ``min(32, spec.ram_mb)``.
    """

    id: str
    spec: ResourceSpec
    resident_mb: int | None = None

    def __post_init__(self):
        if self.resident_mb is None:
            object.__setattr__(self, "resident_mb", min(DEFAULT_RESIDENT_MB, self.spec.ram_mb))
        if not 0 < self.resident_mb <= self.spec.ram_mb:
            raise DomainError(
                f"container {self.id}: resident_mb must be in (0, {self.spec.ram_mb}], "
                f"got {self.resident_mb}"
            )


@dataclass(frozen=True)
class ThresholdPolicy:
    """Upper RAM threshold, applied to VMs and hosts alike."""

    upper: float = 0.9

    def __post_init__(self):
        if not 0 < self.upper <= 1:
            raise DomainError(f"threshold must be in (0, 1], got {self.upper}")

    def bound(self, ram_mb: int) -> float:
        """Real-valued capacity, e.g. 921.6 for 1024 MB at 0.9."""
        return ram_mb * self.upper

    def cap(self, ram_mb: int) -> int:
        """Largest integer load that stays within ``bound(ram_mb)``.

        RAM loads are integers, so ``load <= bound`` iff ``load <= cap``.
        """
        return math.floor(ram_mb * exact_fraction(self.upper))


class MoveKind(str, Enum):
    VM = "vm"
    CNT = "container"


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    subject_id: str
    from_id: str
    to_id: str


@dataclass(frozen=True)
class Violation:
    entity: str
    kind: str
    actual: float
    bound: float | None = None

    def __str__(self):
        if self.bound is None:
            return f"{self.entity}: {self.kind}"
        return f"{self.entity}: {self.kind} ({self.actual} > {self.bound})"


@dataclass(frozen=True)
class DatacenterState:
    """Snapshot of the datacenter. Treat the dicts as read-only."""

    hosts: Mapping[str, Host] = field(default_factory=dict)
    vms: Mapping[str, Vm] = field(default_factory=dict)
    containers: Mapping[str, Container] = field(default_factory=dict)
    vm_of: Mapping[str, str] = field(default_factory=dict)
    host_of: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        hosts: Iterable[Host] = (),
        vms: Iterable[Vm] = (),
        containers: Iterable[Container] = (),
        vm_of: Mapping[str, str] | None = None,
        host_of: Mapping[str, str] | None = None,
    ) -> "DatacenterState":
        def index(items, what):
            out = {}
            for it in items:
                if it.id in out:
                    raise DomainError(f"duplicate {what} id {it.id!r}")
                out[it.id] = it
            return out

        return cls(
            hosts=index(hosts, "host"),
            vms=index(vms, "vm"),
            containers=index(containers, "container"),
            vm_of=dict(vm_of or {}),
            host_of=dict(host_of or {}),
        )

    def host_ids(self) -> list[str]:
        return sorted(self.hosts, key=id_key)

    def vm_ids(self) -> list[str]:
        return sorted(self.vms, key=id_key)

    def vms_on(self, host_id: str) -> list[str]:
        return sorted((v for v, h in self.host_of.items() if h == host_id), key=id_key)

    def containers_on(self, vm_id: str) -> list[str]:
        return sorted((c for c, v in self.vm_of.items() if v == vm_id), key=id_key)

    def host_is_active(self, host_id: str) -> bool:
        return self.hosts[host_id].active and any(h == host_id for h in self.host_of.values())


def ram_utilization(total_mb: int, used_mb: int) -> float:
    """Free RAM fraction, ``(total - used) / total``.

    The quantity is traditionally called "RAM utilization" although it
    measures the free share; see :func:`used_fraction` for the complement.
    """
    if total_mb <= 0:
        raise DomainError(f"total_mb must be > 0, got {total_mb}")
    if not 0 <= used_mb <= total_mb:
        raise DomainError(f"used_mb must be in [0, {total_mb}], got {used_mb}")
    return (total_mb - used_mb) / total_mb


def used_fraction(total_mb: int, used_mb: int) -> float:
    return 1.0 - ram_utilization(total_mb, used_mb)


def vm_used_ram(state: DatacenterState, vm_id: str) -> int:
    if vm_id not in state.vms:
        raise NotFoundError(f"unknown vm {vm_id!r}")
    return sum(state.containers[c].spec.ram_mb for c, v in state.vm_of.items() if v == vm_id)


def host_used_ram(state: DatacenterState, host_id: str) -> int:
    if host_id not in state.hosts:
        raise NotFoundError(f"unknown host {host_id!r}")
    return sum(state.vms[v].spec.ram_mb for v, h in state.host_of.items() if h == host_id)


def vm_load(state: DatacenterState, vm_id: str) -> float:
    """Used share of a VM's RAM (may exceed 1 in a broken state)."""
    return vm_used_ram(state, vm_id) / state.vms[vm_id].spec.ram_mb


def host_load(state: DatacenterState, host_id: str) -> float:
    return host_used_ram(state, host_id) / state.hosts[host_id].spec.ram_mb


def validate(state: DatacenterState, policy: ThresholdPolicy) -> list[Violation]:
    """Return every violation found; an empty list means the state is valid."""
    out: list[Violation] = []
    for c in sorted(state.containers, key=id_key):
        if c not in state.vm_of:
            out.append(Violation(c, "container not placed", 0))
    for c, v in sorted(state.vm_of.items(), key=lambda kv: id_key(kv[0])):
        if c not in state.containers:
            out.append(Violation(c, "placement names unknown container", 0))
        if v not in state.vms:
            out.append(Violation(c, f"placed on unknown vm {v!r}", 0))
    for v in state.vm_ids():
        if v not in state.host_of:
            out.append(Violation(v, "vm not placed", 0))
    for v, h in sorted(state.host_of.items(), key=lambda kv: id_key(kv[0])):
        if v not in state.vms:
            out.append(Violation(v, "placement names unknown vm", 0))
        if h not in state.hosts:
            out.append(Violation(v, f"placed on unknown host {h!r}", 0))
        elif not state.hosts[h].active:
            out.append(Violation(h, f"inactive host holds vm {v!r}", 0))
    if out:
        return out

    for v in state.vm_ids():
        used = vm_used_ram(state, v)
        ram = state.vms[v].spec.ram_mb
        if used > policy.cap(ram):
            out.append(Violation(v, "vm RAM above threshold", used, policy.bound(ram)))
    for h in state.host_ids():
        used = host_used_ram(state, h)
        ram = state.hosts[h].spec.ram_mb
        if used > policy.cap(ram):
            out.append(Violation(h, "host RAM above threshold", used, policy.bound(ram)))
    return out


def active_hosts(state: DatacenterState) -> int:
    """Number of hosts carrying at least one VM."""
    return len({h for h in state.host_of.values() if h in state.hosts})


def apply_move(state: DatacenterState, move: Move, policy: ThresholdPolicy) -> DatacenterState:
    """Return a new state with ``move`` applied.

    Only the destination is checked against the threshold, so moves out of
    an already-overloaded source are allowed; a valid input always yields a
    valid output.
    """
    if move.kind is MoveKind.CNT:
        parents, subjects, targets = state.vm_of, state.containers, state.vms
    else:
        parents, subjects, targets = state.host_of, state.vms, state.hosts
    if move.subject_id not in subjects:
        raise NotFoundError(f"unknown {move.kind.value} {move.subject_id!r}")
    if move.to_id not in targets:
        raise NotFoundError(f"unknown destination {move.to_id!r}")
    if parents.get(move.subject_id) != move.from_id:
        raise PreconditionError(
            f"{move.subject_id} is on {parents.get(move.subject_id)!r}, not {move.from_id!r}"
        )
    if move.to_id == move.from_id:
        raise PreconditionError(f"{move.subject_id}: source and destination are both {move.to_id!r}")

    if move.kind is MoveKind.CNT:
        need = vm_used_ram(state, move.to_id) + subjects[move.subject_id].spec.ram_mb
        ram = state.vms[move.to_id].spec.ram_mb
        if need > policy.cap(ram):
            raise RejectedMoveError(
                f"{move.subject_id} -> {move.to_id}: {need} MB exceeds {policy.bound(ram)} MB"
            )
        return replace(state, vm_of={**state.vm_of, move.subject_id: move.to_id})

    target = state.hosts[move.to_id]
    if not target.active:
        raise RejectedMoveError(f"{move.subject_id} -> {move.to_id}: host is switched off")
    need = host_used_ram(state, move.to_id) + subjects[move.subject_id].spec.ram_mb
    if need > policy.cap(target.spec.ram_mb):
        raise RejectedMoveError(
            f"{move.subject_id} -> {move.to_id}: {need} MB exceeds "
            f"{policy.bound(target.spec.ram_mb)} MB"
        )
    return replace(state, host_of={**state.host_of, move.subject_id: move.to_id})


def release(state: DatacenterState, vm_ids: Iterable[str] = (), host_ids: Iterable[str] = ()) -> DatacenterState:
    """Deallocate empty VMs and switch hosts off."""
    vm_ids = set(vm_ids)
    host_ids = set(host_ids)
    for v in vm_ids:
        if v not in state.vms:
            raise NotFoundError(f"unknown vm {v!r}")
        if any(p == v for p in state.vm_of.values()):
            raise PreconditionError(f"vm {v} still hosts containers")
    vms = {k: v for k, v in state.vms.items() if k not in vm_ids}
    host_of = {k: h for k, h in state.host_of.items() if k not in vm_ids}
    hosts = dict(state.hosts)
    for h in host_ids:
        if h not in hosts:
            raise NotFoundError(f"unknown host {h!r}")
        if any(p == h for p in host_of.values()):
            raise PreconditionError(f"host {h} still hosts vms")
        hosts[h] = replace(hosts[h], active=False)
    return replace(state, hosts=hosts, vms=vms, host_of=host_of)
