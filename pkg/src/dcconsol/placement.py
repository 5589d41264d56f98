"""Container -> VM and VM -> host placement.

First-fit decreasing, a seeded random baseline, the volume lower bound and
an exact branch-and-bound oracle for small instances.

Two bin modes exist. In fixed mode only the given bins are used and items
that fit nowhere are reported as leftovers. In pool mode (``pool`` set to a
ResourceSpec) fresh identical bins are opened after the given ones run out,
which is how the number of VMs "needed" for a workload is counted.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DomainError, InfeasibleError, InstanceTooLargeError
from .model import Container, Host, ResourceSpec, ThresholdPolicy, Vm, exact_fraction, id_key

ORACLE_MAX_ITEMS = 14


@dataclass(frozen=True)
class BinPackInstance:
    item_sizes: tuple[int, ...]
    bin_capacity_mb: int
    threshold: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "item_sizes", tuple(self.item_sizes))
        if self.bin_capacity_mb <= 0:
            raise DomainError("bin capacity must be positive")
        ThresholdPolicy(self.threshold)

    @property
    def cap(self) -> int:
        return ThresholdPolicy(self.threshold).cap(self.bin_capacity_mb)

    def feasible(self) -> bool:
        return all(s <= self.cap for s in self.item_sizes)


@dataclass(frozen=True)
class PlacementResult:
    placement: dict[str, str]
    bins_used: int
    leftover: tuple[str, ...] = ()
    opened: tuple[str, ...] = field(default=(), repr=False)
    """Ids of the pool bins opened beyond the given ones."""


def lower_bound(total_container_ram_mb: int, vm_ram_mb: int, threshold: float) -> int:
    """Minimum bin count by volume: ``ceil(total / (vm_ram * threshold))``."""
    if vm_ram_mb <= 0 or not 0 < threshold <= 1:
        raise DomainError(f"bad divisor: vm_ram_mb={vm_ram_mb}, threshold={threshold}")
    if total_container_ram_mb < 0:
        raise DomainError("total RAM must be nonnegative")
    return math.ceil(Fraction(total_container_ram_mb) / (vm_ram_mb * exact_fraction(threshold)))


class _Bins:
    """Ordered bins with integer caps, growing on demand in pool mode."""

    def __init__(self, bins, threshold, pool: ResourceSpec | None, prefix: str):
        self.policy = ThresholdPolicy(threshold)
        self.ids = [b.id for b in sorted(bins, key=lambda b: id_key(b.id))]
        self.caps = [self.policy.cap(b.spec.ram_mb) for b in sorted(bins, key=lambda b: id_key(b.id))]
        self.used = [0] * len(self.ids)
        self.pool = pool
        self.prefix = prefix
        self.opened: list[str] = []
        taken = set(self.ids)
        self._fresh = (f"{prefix}-{i:03d}" for i in range(1, 10**9) if f"{prefix}-{i:03d}" not in taken)

    def open(self) -> int | None:
        if self.pool is None:
            return None
        new_id = next(self._fresh)
        self.ids.append(new_id)
        self.caps.append(self.policy.cap(self.pool.ram_mb))
        self.used.append(0)
        self.opened.append(new_id)
        return len(self.ids) - 1

    def fits(self, i: int, size: int) -> bool:
        return self.used[i] + size <= self.caps[i]


def _pool_fits(bins: _Bins, size: int) -> bool:
    return bins.pool is not None and size <= bins.policy.cap(bins.pool.ram_mb)


def _result(bins: _Bins, placement: dict[str, str], leftover: list[str]) -> PlacementResult:
    return PlacementResult(
        placement=placement,
        bins_used=len(set(placement.values())),
        leftover=tuple(leftover),
        opened=tuple(bins.opened),
    )


def _ffd(items: Sequence[tuple[str, int]], bins: _Bins) -> PlacementResult:
    order = sorted(items, key=lambda it: (-it[1], id_key(it[0])))
    placement: dict[str, str] = {}
    leftover: list[str] = []
    for ident, size in order:
        for i in range(len(bins.ids)):
            if bins.fits(i, size):
                break
        else:
            i = bins.open() if _pool_fits(bins, size) else None
            if i is None:
                leftover.append(ident)
                continue
        bins.used[i] += size
        placement[ident] = bins.ids[i]
    return _result(bins, placement, leftover)


def _random(items: Sequence[tuple[str, int]], bins: _Bins, seed: int) -> PlacementResult:
    rng = random.Random(seed)
    placement: dict[str, str] = {}
    leftover: list[str] = []
    for ident, size in items:
        # Uniform over bins with headroom is the same law as redrawing on misfit.
        room = [i for i in range(len(bins.ids)) if bins.fits(i, size)]
        if room:
            i = rng.choice(room)
        elif _pool_fits(bins, size):
            i = bins.open()
        else:
            leftover.append(ident)
            continue
        bins.used[i] += size
        placement[ident] = bins.ids[i]
    return _result(bins, placement, leftover)


def _container_items(containers: Sequence[Container]):
    return [(c.id, c.spec.ram_mb) for c in containers]


def ffd_place(
    containers: Sequence[Container],
    vms: Sequence[Vm],
    threshold: float,
    *,
    pool: ResourceSpec | None = None,
    pool_prefix: str = "pool-vm",
) -> PlacementResult:
    """First-fit decreasing.

    Containers are sorted by RAM descending (ties by ascending id) and each
    goes into the first VM, in id order, where ``used + ram <= threshold *
    vm_ram``.
    """
    return _ffd(_container_items(containers), _Bins(vms, threshold, pool, pool_prefix))


def random_place(
    containers: Sequence[Container],
    vms: Sequence[Vm],
    threshold: float,
    seed: int,
    *,
    pool: ResourceSpec | None = None,
    pool_prefix: str = "pool-vm",
) -> PlacementResult:
    """Assign containers, in input order, to a uniformly random VM with headroom."""
    return _random(_container_items(containers), _Bins(vms, threshold, pool, pool_prefix), seed)


def place_vms_on_hosts(
    vms: Sequence[Vm],
    hosts: Sequence[Host],
    threshold: float,
    mode: str = "ffd",
    seed: int = 0,
    *,
    pool: ResourceSpec | None = None,
    pool_prefix: str = "pool-host",
) -> PlacementResult:
    """Same contracts as the container placers, with VMs as items (nominal RAM)."""
    items = [(v.id, v.spec.ram_mb) for v in vms]
    bins = _Bins(hosts, threshold, pool, pool_prefix)
    if mode == "ffd":
        return _ffd(items, bins)
    if mode == "random":
        return _random(items, bins, seed)
    raise DomainError(f"unknown placement mode {mode!r}")


def optimal_bins(instance: BinPackInstance) -> int:
    """Exact minimum bin count by depth-first branch and bound."""
    sizes = sorted(instance.item_sizes, reverse=True)
    if len(sizes) > ORACLE_MAX_ITEMS:
        raise InstanceTooLargeError(f"{len(sizes)} items; the oracle accepts at most {ORACLE_MAX_ITEMS}")
    cap = instance.cap
    if any(s > cap for s in sizes):
        raise InfeasibleError(f"an item exceeds the bin capacity {cap}")
    if not sizes:
        return 0

    suffix = [0] * (len(sizes) + 1)
    for i in range(len(sizes) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + sizes[i]

    best = len(sizes)
    loads: list[int] = []

    def search(i: int):
        nonlocal best
        if i == len(sizes):
            best = min(best, len(loads))
            return
        free = sum(cap - x for x in loads)
        extra = max(0, math.ceil((suffix[i] - free) / cap))
        if len(loads) + extra >= best:
            return
        seen = set()
        for b in range(len(loads)):
            # Bins with equal load are interchangeable.
            if loads[b] in seen or loads[b] + sizes[i] > cap:
                continue
            seen.add(loads[b])
            loads[b] += sizes[i]
            search(i + 1)
            loads[b] -= sizes[i]
        if len(loads) + 1 < best:
            loads.append(sizes[i])
            search(i + 1)
            loads.pop()

    search(0)
    return best


def ffd_bins(instance: BinPackInstance) -> int:
    """FFD bin count for a bare instance, in pool mode."""
    items = [(f"i{k:03d}", s) for k, s in enumerate(instance.item_sizes)]
    spec = ResourceSpec(pes=1, mips=0, ram_mb=instance.bin_capacity_mb)
    res = _ffd(items, _Bins([], instance.threshold, spec, "bin"))
    if res.leftover:
        raise InfeasibleError(f"items {list(res.leftover)} exceed the bin capacity")
    return res.bins_used
