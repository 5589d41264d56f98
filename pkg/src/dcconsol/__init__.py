"""Container placement and VM/container consolidation simulator."""

from .consolidation import (
    AdmissionDecision,
    ConsolidationPolicy,
    MigrationMode,
    MigrationPlan,
    admit_request,
    consolidate,
    distribute_hotspot,
    drain_host_by_container_migration,
    drain_host_by_vm_migration,
    find_coldspots,
    replay,
)
from .metrics import PowerModel, RunReport, SlaSpec, allowed_downtime, build_report, power, sla_violations
from .model import (
    Container,
    DatacenterState,
    Host,
    Move,
    MoveKind,
    ResourceSpec,
    ThresholdPolicy,
    Vm,
    active_hosts,
    apply_move,
    host_used_ram,
    ram_utilization,
    used_fraction,
    validate,
    vm_used_ram,
)
from .placement import BinPackInstance, PlacementResult, ffd_place, lower_bound, optimal_bins, place_vms_on_hosts, random_place
from .scenario import Scenario, SweepSpec, emit_scenario, load_scenario, parse_scenario
from .timing import MigrationTiming, TimingParams, container_migration_time, plan_timing, precopy_schedule, vm_migration_time

__version__ = "0.1.0"
