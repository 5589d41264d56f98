import pytest
from hypothesis import assume, given, strategies as st

from dcconsol.consolidation import ConsolidationPolicy, MigrationPlan, consolidate
from dcconsol.errors import DomainError, PreconditionError
from dcconsol.model import Move, MoveKind, ThresholdPolicy
from dcconsol.timing import (
    TimingParams,
    container_migration_time,
    plan_timing,
    precopy_schedule,
    vm_migration_time,
)

from builders import demo_state

P128 = TimingParams(bandwidth_mb_s=128, vm_dirty_rate_mb_s=32, stop_threshold_mb=8,
                    vm_resume_s=0.3, reservation_s=0.1)


def closed_form(size, bw, rho, n):
    return (size / bw) * (1 - rho**n) / (1 - rho)


def test_precopy_geometric():
    rounds, residual = precopy_schedule(1024, 32, P128)
    assert [r.duration_s for r in rounds] == [8, 2, 0.5, 0.125]
    assert residual == 4
    assert [r.round_index for r in rounds] == [0, 1, 2, 3]


def test_precopy_non_convergent():
    p = TimingParams(bandwidth_mb_s=100, stop_threshold_mb=8)
    rounds, residual = precopy_schedule(100, 200, p)
    assert [r.duration_s for r in rounds] == [1.0]
    assert residual == 100


def test_precopy_below_stop_threshold():
    rounds, residual = precopy_schedule(4, 1000, P128)
    assert rounds == [] and residual == 4


def test_precopy_zero_dirty_rate():
    rounds, residual = precopy_schedule(2048, 0, P128)
    assert len(rounds) == 1 and residual == 0


def test_precopy_respects_max_rounds():
    p = TimingParams(bandwidth_mb_s=100, stop_threshold_mb=1, max_rounds=3)
    rounds, residual = precopy_schedule(4096, 90, p)
    assert len(rounds) == 3
    assert residual == pytest.approx(4096 * 0.9**3)


def test_precopy_domain():
    with pytest.raises(DomainError):
        precopy_schedule(0, 1, P128)
    with pytest.raises(DomainError):
        TimingParams(bandwidth_mb_s=0)
    with pytest.raises(DomainError):
        TimingParams(max_rounds=0)
    with pytest.raises(DomainError):
        TimingParams(cnt_mode="lazy")
    with pytest.raises(DomainError):
        TimingParams().override(warp_factor=9)


def test_vm_timing_examples():
    t = vm_migration_time(1024, P128)
    assert t.downtime_s == pytest.approx(0.33125, rel=1e-12)
    assert t.total_s == pytest.approx(11.05625, rel=1e-12)

    t = vm_migration_time(2048, TimingParams(bandwidth_mb_s=128, vm_dirty_rate_mb_s=0, vm_resume_s=0.3,
                                             reservation_s=0))
    assert len(t.rounds) == 1 and t.rounds[0].duration_s == 16
    assert t.downtime_s == pytest.approx(0.3) and t.total_s == pytest.approx(16.3)

    t = vm_migration_time(100, TimingParams(bandwidth_mb_s=100, vm_dirty_rate_mb_s=200, vm_resume_s=0.3))
    assert t.downtime_s == pytest.approx(1.3)


def test_container_timing_examples():
    p = TimingParams(bandwidth_mb_s=128)
    t = container_migration_time(32, p)
    assert t.rounds == () and t.downtime_s == pytest.approx(0.4) and t.total_s == pytest.approx(0.5)
    assert container_migration_time(512, p).downtime_s == pytest.approx(4.15)

    pre = TimingParams(bandwidth_mb_s=128, cnt_mode="precopy", cnt_dirty_rate_mb_s=0)
    t = container_migration_time(512, pre)
    assert len(t.rounds) == 1
    assert t.downtime_s == pytest.approx(0.15)
    assert t.total_s == pytest.approx(0.1 + 4 + 0.15)


def test_container_defaults():
    t = container_migration_time(32, TimingParams())
    assert t.downtime_s == pytest.approx(0.406) and t.total_s == pytest.approx(0.506)


def test_defaults_order_container_below_vm():
    p = TimingParams()
    v, c = vm_migration_time(2048, p), container_migration_time(32, p)
    assert c.total_s < v.total_s and c.downtime_s < v.downtime_s


def test_plan_timing_demo():
    s = demo_state()
    _, plan = consolidate(s, ConsolidationPolicy(ThresholdPolicy(0.9)))
    agg = plan_timing(plan, s, TimingParams(bandwidth_mb_s=128))
    assert agg.total_s == pytest.approx(1.0)
    assert agg.sum_downtime_s == pytest.approx(0.8)
    assert agg.max_downtime_s == pytest.approx(0.4)
    assert [r.step for r in agg.moves] == [0, 1]


def test_plan_timing_empty_and_uncommitted():
    agg = plan_timing(MigrationPlan(), demo_state(), TimingParams())
    assert (agg.total_s, agg.max_downtime_s, agg.sum_downtime_s, agg.moves) == (0, 0, 0, ())
    with pytest.raises(PreconditionError):
        plan_timing(MigrationPlan(committed=False), demo_state(), TimingParams())


def test_plan_timing_vm_move_uses_nominal_ram():
    s = demo_state(9192)
    plan = MigrationPlan(moves=(Move(MoveKind.VM, "vm-7", "host-3", "host-1"),))
    agg = plan_timing(plan, s, TimingParams())
    assert agg.total_s == vm_migration_time(2048, TimingParams()).total_s


@given(st.sampled_from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
       st.integers(9, 8192), st.floats(10, 2000))
def test_precopy_matches_closed_form(rho, size, bw):
    p = TimingParams(bandwidth_mb_s=bw, stop_threshold_mb=8, max_rounds=30)
    rounds, _ = precopy_schedule(size, rho * bw, p)
    n = len(rounds)
    assert sum(r.duration_s for r in rounds) == pytest.approx(closed_form(size, bw, rho, n), rel=1e-9)


params_st = st.builds(
    TimingParams,
    bandwidth_mb_s=st.floats(1, 2000),
    vm_dirty_rate_mb_s=st.floats(0, 500),
    cnt_dirty_rate_mb_s=st.floats(0, 500),
    stop_threshold_mb=st.floats(0.5, 64),
    max_rounds=st.integers(1, 40),
    cnt_mode=st.sampled_from(["freeze-copy", "precopy"]),
)


@given(params_st, st.floats(0.5, 8192))
def test_downtime_never_exceeds_total(p, size):
    for t in (vm_migration_time(size, p), container_migration_time(size, p)):
        assert 0 <= t.downtime_s <= t.total_s
        assert t.total_s == pytest.approx(p.reservation_s + t.precopy_s + t.downtime_s)


@given(params_st, st.floats(0.5, 4096), st.floats(0.5, 4096))
def test_total_nondecreasing_in_size(p, a, b):
    lo, hi = sorted((a, b))
    assert vm_migration_time(lo, p).total_s <= vm_migration_time(hi, p).total_s * (1 + 1e-12)
    assert container_migration_time(lo, p).total_s <= container_migration_time(hi, p).total_s * (1 + 1e-12)


@given(st.floats(1, 4096), st.floats(10, 1000), st.floats(0, 0.99), st.floats(0, 0.99))
def test_vm_total_nondecreasing_in_dirty_rate_when_convergent(size, bw, r1, r2):
    lo, hi = sorted((r1, r2))
    p_lo = TimingParams(bandwidth_mb_s=bw, vm_dirty_rate_mb_s=lo * bw)
    p_hi = TimingParams(bandwidth_mb_s=bw, vm_dirty_rate_mb_s=hi * bw)
    assert vm_migration_time(size, p_lo).total_s <= vm_migration_time(size, p_hi).total_s * (1 + 1e-12)


@given(st.floats(1, 4096), st.floats(0, 200), st.floats(1, 2000), st.floats(1, 2000))
def test_vm_total_nonincreasing_in_bandwidth_when_convergent(size, dirty, b1, b2):
    lo, hi = sorted((b1, b2))
    assume(dirty < lo)
    slow = vm_migration_time(size, TimingParams(bandwidth_mb_s=lo, vm_dirty_rate_mb_s=dirty))
    fast = vm_migration_time(size, TimingParams(bandwidth_mb_s=hi, vm_dirty_rate_mb_s=dirty))
    assert fast.total_s <= slow.total_s * (1 + 1e-12)


@given(st.floats(1, 4096), st.floats(1, 4096), st.floats(1, 2000), st.floats(1, 2000))
def test_freeze_copy_monotone(s1, s2, b1, b2):
    s_lo, s_hi = sorted((s1, s2))
    b_lo, b_hi = sorted((b1, b2))
    slow = TimingParams(bandwidth_mb_s=b_lo)
    fast = TimingParams(bandwidth_mb_s=b_hi)
    assert container_migration_time(s_lo, slow).downtime_s <= container_migration_time(s_hi, slow).downtime_s
    assert container_migration_time(s_hi, fast).downtime_s <= container_migration_time(s_hi, slow).downtime_s


@given(st.floats(0.5, 8192), st.floats(1, 2000))
def test_zero_dirty_rate_single_round(size, bw):
    p = TimingParams(bandwidth_mb_s=bw, vm_dirty_rate_mb_s=0)
    rounds, residual = precopy_schedule(size, 0, p)
    if size > p.stop_threshold_mb:
        assert len(rounds) == 1 and residual == 0
    else:
        assert rounds == [] and residual == size
