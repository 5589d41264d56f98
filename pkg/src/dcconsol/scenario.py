"""Scenario files: JSON documents describing hosts, VMs, containers and knobs.

Entities are declared in groups. A group either lists explicit ``ids`` or
gives ``name`` and ``count``, which expands to ``name-001 ... name-NNN``.
VM groups may carry a ``host`` and container groups a ``vm`` assignment
applying to every member. See README.md for a worked example.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import DomainError, InfeasibleScenarioError, PreconditionError, ScenarioError
from .metrics import PowerModel, SlaSpec
from .model import Container, DatacenterState, Host, ResourceSpec, ThresholdPolicy, Vm
from .timing import TimingParams

_GROUP_BASE = {
    "ids": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1},
    "name": {"type": "string", "minLength": 1},
    "count": {"type": "integer", "minimum": 1},
    "ram_mb": {"type": "integer", "minimum": 1},
    "pes": {"type": "integer", "minimum": 1},
    "mips": {"type": "integer", "minimum": 0},
    "bw": {"type": "integer", "minimum": 0},
}
_ONE_NAMING = {"oneOf": [{"required": ["ids"], "not": {"required": ["count"]}},
                         {"required": ["name", "count"], "not": {"required": ["ids"]}}]}


def _group(extra: dict) -> dict:
    return {
        "type": "object",
        "properties": {**_GROUP_BASE, **extra},
        "required": ["ram_mb"],
        "additionalProperties": False,
        **_ONE_NAMING,
    }


SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "seed": {"type": "integer"},
        "hosts": {"type": "array", "items": _group({"max_power_w": {"type": "number", "exclusiveMinimum": 0}})},
        "vms": {"type": "array", "items": _group({"host": {"type": "string"}})},
        "containers": {"type": "array", "items": _group({
            "resident_mb": {"type": "integer", "minimum": 1},
            "vm": {"type": "string"},
        })},
        "timing": {
            "type": "object",
            "properties": {
                "bandwidth_mb_s": {"type": "number", "exclusiveMinimum": 0},
                "vm_dirty_rate_mb_s": {"type": "number", "minimum": 0},
                "cnt_dirty_rate_mb_s": {"type": "number", "minimum": 0},
                "stop_threshold_mb": {"type": "number", "exclusiveMinimum": 0},
                "max_rounds": {"type": "integer", "minimum": 1},
                "reservation_s": {"type": "number", "minimum": 0},
                "vm_resume_s": {"type": "number", "minimum": 0},
                "cnt_freeze_s": {"type": "number", "minimum": 0},
                "cnt_restore_s": {"type": "number", "minimum": 0},
                "cnt_mode": {"enum": ["freeze-copy", "precopy"]},
            },
            "additionalProperties": False,
        },
        "sla": {
            "type": "object",
            "properties": {
                "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "horizon": {"enum": ["day", "month", "year"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["name", "hosts", "vms", "containers"],
    "additionalProperties": False,
}

BUILTIN = ("table1-placement", "consolidation-demo", "consolidation-demo-9192")


@dataclass(frozen=True)
class Scenario:
    name: str
    hosts: tuple[Host, ...]
    vms: tuple[Vm, ...]
    containers: tuple[Container, ...]
    vm_host: dict[str, str] = field(default_factory=dict)
    container_vm: dict[str, str] = field(default_factory=dict)
    threshold: float = 0.9
    timing: dict = field(default_factory=dict)
    sla: SlaSpec = SlaSpec()
    seed: int = 0

    @property
    def policy(self) -> ThresholdPolicy:
        return ThresholdPolicy(self.threshold)

    @property
    def timing_params(self) -> TimingParams:
        return TimingParams().override(**self.timing)

    @property
    def power_model(self) -> PowerModel:
        return PowerModel(self.hosts[0].max_power_w if self.hosts else 250.0)

    def fully_assigned(self) -> bool:
        return (all(v.id in self.vm_host for v in self.vms)
                and all(c.id in self.container_vm for c in self.containers))


@dataclass(frozen=True)
class SweepSpec:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (0 < self.start <= self.stop <= 1 and self.step > 0):
            raise DomainError(f"bad threshold range {self.start}:{self.stop}:{self.step}")

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        try:
            a, b, c = (float(x) for x in text.split(":"))
        except ValueError:
            raise DomainError(f"expected FROM:TO:STEP, got {text!r}") from None
        return cls(a, b, c)

    def thresholds(self) -> list[float]:
        # Integer stepping avoids 0.7 + 6 * 0.05 drifting past 1.0.
        n = int((self.stop - self.start) / self.step + 1e-9)
        return [round(self.start + k * self.step, 10) for k in range(n + 1)]


def _expand(group: dict) -> list[str]:
    if "ids" in group:
        return list(group["ids"])
    return [f"{group['name']}-{i:03d}" for i in range(1, group["count"] + 1)]


def _spec(group: dict, path: str) -> ResourceSpec:
    try:
        return ResourceSpec(group.get("pes", 1), group.get("mips", 0), group["ram_mb"], group.get("bw", 0))
    except DomainError as e:
        raise ScenarioError(str(e), path) from None


def parse_scenario_data(doc) -> Scenario:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise ScenarioError(e.message, e.json_path)

    seen: dict[str, str] = {}

    def claim(ident, path):
        if ident in seen:
            raise ScenarioError(f"duplicate id {ident!r} (first at {seen[ident]})", path)
        seen[ident] = path

    hosts, vms, containers = [], [], []
    vm_host, container_vm = {}, {}
    where: dict[str, str] = {}
    for i, g in enumerate(doc["hosts"]):
        path = f"$.hosts[{i}]"
        for ident in _expand(g):
            claim(ident, path)
            hosts.append(Host(ident, _spec(g, path), float(g.get("max_power_w", 250.0))))
    for i, g in enumerate(doc["vms"]):
        path = f"$.vms[{i}]"
        for ident in _expand(g):
            claim(ident, path)
            where[ident] = path
            vms.append(Vm(ident, _spec(g, path)))
            if "host" in g:
                vm_host[ident] = g["host"]
    for i, g in enumerate(doc["containers"]):
        path = f"$.containers[{i}]"
        spec = _spec(g, path)
        for ident in _expand(g):
            claim(ident, path)
            try:
                containers.append(Container(ident, spec, g.get("resident_mb")))
            except DomainError as e:
                raise ScenarioError(str(e), f"{path}.resident_mb") from None
            if "vm" in g:
                container_vm[ident] = g["vm"]

    host_ids = {h.id for h in hosts}
    vm_ids = {v.id for v in vms}
    for v, h in vm_host.items():
        if h not in host_ids:
            raise ScenarioError(f"unknown host {h!r}", f"{where[v]}.host")
    for c, v in container_vm.items():
        if v not in vm_ids:
            raise ScenarioError(f"unknown vm {v!r}", f"{seen[c]}.vm")

    try:
        sla = SlaSpec(**doc.get("sla", {}))
    except DomainError as e:
        raise ScenarioError(str(e), "$.sla") from None
    threshold = float(doc.get("threshold", 0.9))
    scen = Scenario(
        name=doc["name"],
        hosts=tuple(hosts),
        vms=tuple(vms),
        containers=tuple(containers),
        vm_host=vm_host,
        container_vm=container_vm,
        threshold=threshold,
        timing=dict(doc.get("timing", {})),
        sla=sla,
        seed=int(doc.get("seed", 0)),
    )
    _check_capacity(scen, where, seen)
    return scen


def _check_capacity(scen: Scenario, where, seen):
    policy = scen.policy
    vram = {v.id: v.spec.ram_mb for v in scen.vms}
    load: dict[str, int] = {}
    for c in scen.containers:
        if c.id in scen.container_vm:
            v = scen.container_vm[c.id]
            load[v] = load.get(v, 0) + c.spec.ram_mb
    for v, used in load.items():
        if used > policy.cap(vram[v]):
            raise InfeasibleScenarioError(
                f"vm {v} holds {used} MB, above {policy.bound(vram[v])} MB", where[v])
    hram = {h.id: h.spec.ram_mb for h in scen.hosts}
    hload: dict[str, int] = {}
    for v, h in scen.vm_host.items():
        hload[h] = hload.get(h, 0) + vram[v]
    for h, used in hload.items():
        if used > policy.cap(hram[h]):
            raise InfeasibleScenarioError(
                f"host {h} holds {used} MB of VMs, above {policy.bound(hram[h])} MB", seen[h])


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg} (line {e.lineno})") from None
    return parse_scenario_data(doc)


def emit_scenario(s: Scenario) -> str:
    """Serialize with one group per entity; ``parse_scenario`` inverts it."""

    def base(ent):
        return {"ids": [ent.id], "ram_mb": ent.spec.ram_mb, "pes": ent.spec.pes,
                "mips": ent.spec.mips, "bw": ent.spec.bw}

    hosts = [{**base(h), "max_power_w": h.max_power_w} for h in s.hosts]
    vms = []
    for v in s.vms:
        g = base(v)
        if v.id in s.vm_host:
            g["host"] = s.vm_host[v.id]
        vms.append(g)
    cnts = []
    for c in s.containers:
        g = {**base(c), "resident_mb": c.resident_mb}
        if c.id in s.container_vm:
            g["vm"] = s.container_vm[c.id]
        cnts.append(g)
    doc = {
        "name": s.name,
        "threshold": s.threshold,
        "seed": s.seed,
        "hosts": hosts,
        "vms": vms,
        "containers": cnts,
        "timing": dict(s.timing),
        "sla": {"level": s.sla.level, "horizon": s.sla.horizon},
    }
    return json.dumps(doc, indent=2)


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a path, or one of the shipped ones by name."""
    p = Path(ref)
    if p.exists():
        return parse_scenario(p.read_text())
    if str(ref) in BUILTIN:
        text = resources.files("dcconsol.scenarios").joinpath(f"{ref}.json").read_text()
        return parse_scenario(text)
    raise FileNotFoundError(f"no scenario file {str(ref)!r}")


def build_state(s: Scenario) -> DatacenterState:
    """Datacenter state from a scenario whose entities are all assigned."""
    if not s.fully_assigned():
        raise PreconditionError(f"scenario {s.name!r} lacks explicit VM/container assignments")
    return DatacenterState.build(s.hosts, s.vms, s.containers, s.container_vm, s.vm_host)
