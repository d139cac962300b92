"""Cost model reproduction and idle-ratio arithmetic."""

import pytest

from shardsim import (
    FunctionExecutor,
    GradientTensor,
    InvalidArgumentError,
    ObjectStore,
    PlatformLimits,
    PriceSheet,
    Topology,
    cost_from_counts,
    cost_of_round,
    execute_round,
    feasibility_threshold,
    idle_ratio,
    plan,
)

N = 20
MEMORY_GB = 3008 / 1024

# Observed single-function sweep rows for the 512.3 MB gradient:
# (M, billed seconds per function, expected $/1K rounds)
REFERENCE_SWEEP = [
    (1, 179.9 + 1.96, 9.03),
    (2, 93.9 + 1.00, 9.53),
    (4, 56.8 + 0.51, 11.70),
    (8, 25.3 + 0.26, 11.00),
    (16, 11.1 + 0.13, 10.74),
]

# Cross-architecture gradsharding rows: (memory MB, wall s, functions, puts, gets, $/1K)
REFERENCE_CROSS_ARCH = [
    (472, 7.9, 4, 84, 160, 0.70),
    (835, 67.2, 4, 84, 160, 3.82),
    (2665, 362.5, 4, 84, 160, 59.29),
    (2370, 299.4, 8, 168, 320, 85.66),
]


def test_default_prices():
    sheet = PriceSheet()
    assert sheet.lambda_gb_second == 0.0000166667
    assert sheet.s3_put == pytest.approx(5e-6)
    assert sheet.s3_get == pytest.approx(4e-7)


@pytest.mark.parametrize("m,per_fn_s,expected", REFERENCE_SWEEP)
def test_sweep_cost_rows_within_15_percent(m, per_fn_s, expected):
    report = cost_from_counts(m * MEMORY_GB * per_fn_s, N * m + m, 2 * N * m)
    assert report.per_1k_rounds == pytest.approx(expected, rel=0.15)


def test_cost_anchor_row_within_2_percent():
    m, per_fn_s, expected = REFERENCE_SWEEP[0]
    report = cost_from_counts(m * MEMORY_GB * per_fn_s, N * m + m, 2 * N * m)
    assert report.per_1k_rounds == pytest.approx(expected, rel=0.02)


def test_s3_component_at_m16_within_2_percent():
    report = cost_from_counts(0.0, N * 16 + 16, 2 * N * 16)
    assert 1000 * report.s3_cost == pytest.approx(1.94, rel=0.02)


def test_s3_only_round_cost_by_hand():
    report = cost_from_counts(0.0, 84, 160)
    assert report.total == pytest.approx(84 * 0.000005 + 160 * 0.0000004)
    assert report.total == pytest.approx(0.000484)


def test_zero_round_costs_nothing():
    report = cost_from_counts(0.0, 0, 0)
    assert report.total == 0.0 and report.per_1k_rounds == 0.0


@pytest.mark.parametrize("memory_mb,wall_s,fns,puts,gets,expected", REFERENCE_CROSS_ARCH)
def test_cross_arch_single_phase_rows_within_15_percent(memory_mb, wall_s, fns,
                                                        puts, gets, expected):
    gb_seconds = fns * (memory_mb / 1024) * wall_s
    report = cost_from_counts(gb_seconds, puts, gets)
    assert report.per_1k_rounds == pytest.approx(expected, rel=0.15)


def test_cost_is_linear_in_every_counter():
    base = cost_from_counts(100.0, 50, 80)
    assert cost_from_counts(200.0, 50, 80).lambda_cost == pytest.approx(2 * base.lambda_cost)
    assert cost_from_counts(100.0, 100, 80).s3_put_cost == pytest.approx(2 * base.s3_put_cost)
    assert cost_from_counts(100.0, 50, 160).s3_get_cost == pytest.approx(2 * base.s3_get_cost)


def test_prices_flow_from_sheet():
    doubled = PriceSheet(lambda_gb_second=2 * 0.0000166667, s3_put=1e-5, s3_get=8e-7)
    base = cost_from_counts(10.0, 10, 10)
    scaled = cost_from_counts(10.0, 10, 10, doubled)
    assert scaled.total == pytest.approx(2 * base.total)


def test_cost_of_round_uses_full_round_trip_ops():
    clients = [GradientTensor.phantom_mb(5.0) for _ in range(20)]
    metrics = execute_round(plan(Topology("gradsharding", 4), 20, clients[0]),
                            ObjectStore(), FunctionExecutor(), clients)
    report = cost_of_round(metrics)
    assert report.s3_put_cost == pytest.approx(84 * 5e-6)
    assert report.s3_get_cost == pytest.approx(160 * 4e-7)
    assert report.lambda_cost == pytest.approx(
        metrics.billed_gb_seconds * 0.0000166667)
    assert report.per_1k_rounds == pytest.approx(1000 * report.total)


@pytest.mark.parametrize("t_train,t_agg,expected_pct", [
    (2154, 544, 79.8),
    (55562, 218, 99.6),
    (93919, 1072, 98.9),
    (187515, 1701, 99.1),
])
def test_idle_ratio_reference_rows(t_train, t_agg, expected_pct):
    assert idle_ratio(t_train, t_agg).idle_pct == pytest.approx(expected_pct, abs=0.1)


def test_idle_ratio_degenerate_inputs():
    assert idle_ratio(100.0, 0.0).idle_ratio == 1.0
    assert idle_ratio(0.0, 100.0).idle_ratio == 0.0
    with pytest.raises(InvalidArgumentError):
        idle_ratio(0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        idle_ratio(-1.0, 5.0)


def test_feasibility_threshold_values():
    assert feasibility_threshold() == pytest.approx((10240 - 450) / 3)
    assert feasibility_threshold() == pytest.approx(3263.33, abs=0.01)
    no_overhead = PlatformLimits(max_memory_mb=10240, runtime_overhead_mb=0.0,
                                 streaming_multiplier=1.0)
    assert feasibility_threshold(no_overhead) == pytest.approx(10240.0)
    halved = PlatformLimits(streaming_multiplier=2.0)
    assert feasibility_threshold(halved) == pytest.approx(4895.0)
