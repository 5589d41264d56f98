"""Library-level broker: admission, monitoring and rebalancing over one state.

Stands in for the broker / resource manager / monitor trio of a cloud
control plane. There is no network service; callers drive it directly.
"""

from __future__ import annotations

from dataclasses import replace

from .consolidation import AdmissionDecision, ConsolidationPolicy, admit_request, consolidate
from .model import Container, DatacenterState, host_load, validate, vm_load
from .timing import TimingParams, plan_timing


class Broker:
    def __init__(self, state: DatacenterState, policy: ConsolidationPolicy, params: TimingParams = TimingParams()):
        self.state = state
        self.policy = policy
        self.params = params
        self.history = []

    def submit(self, container: Container) -> AdmissionDecision:
        """Admit and place a new container, or refuse it."""
        decision = admit_request(self.state, container.spec, self.policy)
        if decision.accepted:
            s = self.state
            s = replace(s, containers={**s.containers, container.id: container},
                        vm_of={**s.vm_of, container.id: decision.target_vm})
            self.state = s
        return decision

    def monitor(self) -> dict:
        s = self.state
        return {
            "hosts": {h: host_load(s, h) for h in s.host_ids()},
            "vms": {v: vm_load(s, v) for v in s.vm_ids()},
            "violations": validate(s, self.policy.threshold),
        }

    def rebalance(self):
        """Consolidate; returns the plan and its timing."""
        before = self.state
        self.state, plan = consolidate(before, self.policy)
        timing = plan_timing(plan, before, self.params)
        self.history.append((plan, timing))
        return plan, timing
