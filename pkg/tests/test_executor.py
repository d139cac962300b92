"""Memory model, feasibility, invocation timing, and phase semantics."""

import math

import pytest

from shardsim import (
    AggregationTask,
    FunctionExecutor,
    FunctionSpec,
    GradientTensor,
    InvalidArgumentError,
    ObjectKey,
    ObjectStore,
    OutOfMemoryError,
    PlatformLimits,
    Role,
    StateError,
    TimeoutExceededError,
    TransferModel,
    VirtualClock,
    check_feasibility,
    collect_peak_memory,
    compute_time_model,
    estimate_peak_memory,
    provision,
    streaming_lower_bound,
)
from shardsim.executor import MODE_MEAN, MODE_PARTIAL_SUM


# -- memory model ------------------------------------------------------------

def test_peak_memory_anchor_values():
    assert estimate_peak_memory(2953.0) == 9309.0
    assert estimate_peak_memory(5120.0) == 15810.0
    assert round(estimate_peak_memory(2953.0 / 4)) == 2665
    assert estimate_peak_memory(5120.0 / 8) == 2370.0
    assert estimate_peak_memory(738.0) == pytest.approx(2664.0)
    assert estimate_peak_memory(0.0) == 450.0


def test_peak_memory_strictly_increasing():
    values = [estimate_peak_memory(mb) for mb in (0, 1, 10, 100, 1000)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_streaming_lower_bound_reference_column():
    assert streaming_lower_bound(11_200_000, 1) == pytest.approx(85.4, rel=0.01)
    assert streaming_lower_bound(11_200_000, 16) == pytest.approx(5.3, rel=0.01)
    assert streaming_lower_bound(134_000_000, 1) == pytest.approx(1024.0, rel=0.01)
    assert streaming_lower_bound(134_000_000, 4) == pytest.approx(256.0, rel=0.01)
    assert streaming_lower_bound(134_000_000, 16) == pytest.approx(64.0, rel=0.01)


def test_streaming_lower_bound_m1_is_twice_gradient():
    params = 134_000_000
    one_gradient_mb = params * 4 / (1024 * 1024)
    assert streaming_lower_bound(params, 1) == pytest.approx(2 * one_gradient_mb)


def test_collect_then_average_reconstruction():
    # (N + 1) buffered shards; matches observed peaks of that style
    assert collect_peak_memory(20, 512.3) == pytest.approx(10758.3)
    assert collect_peak_memory(20, 42.7) == pytest.approx(896.7)


def test_feasibility_verdicts():
    v = check_feasibility(2953.0, 1)
    assert v.feasible and v.required_mb == 9309.0
    assert v.utilization == pytest.approx(0.909, abs=0.001)
    assert v.high_utilization

    v = check_feasibility(5120.0, 1)
    assert not v.feasible and v.required_mb == 15810.0

    v = check_feasibility(5120.0, 8)
    assert v.feasible and v.required_mb == 2370.0 and not v.high_utilization


def test_feasibility_integer_boundary():
    assert check_feasibility(3263, 1).feasible
    assert not check_feasibility(3264, 1).feasible


def test_feasibility_monotone_in_shard_count():
    for m in range(1, 40):
        if check_feasibility(9000.0, m).feasible:
            assert check_feasibility(9000.0, m + 1).feasible


def test_limits_validation():
    with pytest.raises(InvalidArgumentError):
        PlatformLimits(max_memory_mb=0)


# -- provisioning --------------------------------------------------------------

def test_provision_defaults_to_ceil_peak():
    spec = provision(stream_mb=128.075, input_bytes=0)
    assert spec.allocated_memory_mb == math.ceil(3 * 128.075 + 450)
    assert spec.timeout_s == 900.0


def test_provision_clamps_to_platform_minimum():
    assert provision(stream_mb=0.001, input_bytes=0).allocated_memory_mb >= 128


def test_provision_honors_override():
    spec = provision(stream_mb=512.3, input_bytes=0, memory_override_mb=3008)
    assert spec.allocated_memory_mb == 3008


def test_function_spec_validation():
    with pytest.raises(InvalidArgumentError):
        FunctionSpec(allocated_memory_mb=64, timeout_s=900)
    with pytest.raises(InvalidArgumentError):
        FunctionSpec(allocated_memory_mb=512, timeout_s=0)


# -- compute model ---------------------------------------------------------------

def test_compute_time_reference_points():
    mib = 1024 * 1024
    assert compute_time_model(int(20 * 512.3 * mib), 5225.0) == pytest.approx(1.96, abs=0.01)
    assert compute_time_model(int(20 * 32.0 * mib), 5225.0) == pytest.approx(0.13, rel=0.10)
    assert compute_time_model(0, 5225.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        compute_time_model(100, 0.0)


# -- invocation -------------------------------------------------------------------

def _store_with_gradients(n, mb, throughput):
    tm = TransferModel(read_throughput=throughput, write_throughput=throughput,
                       per_op_latency=0.05)
    store = ObjectStore(tm)
    template = GradientTensor.phantom_mb(mb)
    for c in range(n):
        store.put(ObjectKey(0, Role.CLIENT_GRADIENT, client_id=c), template)
    store.reset_stats()
    return store, template


def _mean_task(n, capacity):
    return AggregationTask(
        name="agg",
        inputs=tuple(ObjectKey(0, Role.CLIENT_GRADIENT, client_id=c) for c in range(n)),
        output=ObjectKey(0, Role.ROOT_RESULT),
        mode=MODE_MEAN,
        capacity=capacity,
    )


def test_invoke_full_gradient_read_time_window():
    store, template = _store_with_gradients(20, 512.3, 57.0)
    executor = FunctionExecutor()
    spec = provision(template.mb, template.byte_size * 20)
    record = executor.invoke(spec, _mean_task(20, template.param_count), store)
    assert 158 <= record.read_time_s <= 202
    assert record.compute_time_s == pytest.approx(1.96, abs=0.02)
    assert record.total_time_s == pytest.approx(
        record.read_time_s + record.compute_time_s + record.write_time_s)
    assert store.stats().gets == 20 and store.stats().puts == 1


def test_invoke_oom_when_allocation_below_requirement():
    store, template = _store_with_gradients(4, 738.25, 57.0)
    spec = FunctionSpec(allocated_memory_mb=2048, timeout_s=900,
                        stream_mb=template.mb)
    with pytest.raises(OutOfMemoryError) as err:
        FunctionExecutor().invoke(spec, _mean_task(4, template.param_count), store)
    assert err.value.required_mb == pytest.approx(2665, abs=1)
    assert store.stats().gets == 0  # failed before any I/O


def test_invoke_timeout_is_an_error_not_truncation():
    store, template = _store_with_gradients(20, 512.3, 57.0)
    spec = FunctionSpec(allocated_memory_mb=2048, timeout_s=30.0,
                        stream_mb=template.mb)
    with pytest.raises(TimeoutExceededError):
        FunctionExecutor().invoke(spec, _mean_task(20, template.param_count), store)


def test_empty_task_is_a_state_error():
    with pytest.raises(StateError):
        AggregationTask(name="empty", inputs=(),
                        output=ObjectKey(0, Role.ROOT_RESULT),
                        mode=MODE_MEAN, capacity=4)


def test_billing_rounds_up_to_millisecond():
    store, template = _store_with_gradients(1, 1.0, 50.0)
    executor = FunctionExecutor()
    spec = provision(template.mb, template.byte_size)
    record = executor.invoke(spec, _mean_task(1, template.param_count), store)
    assert record.billed_duration_s == math.ceil(record.total_time_s * 1000) / 1000
    assert record.billed_gb_seconds == pytest.approx(
        spec.allocated_memory_mb / 1024 * record.billed_duration_s)


def test_cold_start_penalty_applies_when_configured():
    def run(cold):
        store, template = _store_with_gradients(2, 1.0, 50.0)
        executor = FunctionExecutor(cold_start_s=cold)
        spec = provision(template.mb, 2 * template.byte_size)
        return executor.invoke(spec, _mean_task(2, template.param_count), store)

    warm, cold = run(0.0), run(3.0)
    assert cold.total_time_s == pytest.approx(warm.total_time_s + 3.0)
    assert cold.cold_start_penalty_s == 3.0 and warm.cold_start_penalty_s == 0.0


def test_live_buffers_stay_within_streaming_bound():
    store = ObjectStore()
    clients = [GradientTensor.from_seed(5000, seed=i) for i in range(8)]
    for c, g in enumerate(clients):
        store.put(ObjectKey(0, Role.CLIENT_GRADIENT, client_id=c), g)
    executor = FunctionExecutor()
    spec = provision(clients[0].mb, clients[0].byte_size * 8)
    record = executor.invoke(spec, _mean_task(8, 5000), store)
    assert record.live_buffer_bytes <= 2 * 5000 * 4 + 1024 * 1024
    assert record.measured_compute_s is not None


def test_phase_wall_clock_is_max_and_billing_is_sum():
    tm = TransferModel(per_op_latency=0.0)
    store = ObjectStore(tm)
    sizes = (10.0, 30.0)  # second function reads more, dominates the phase
    for i, mb in enumerate(sizes):
        store.put(ObjectKey(0, Role.CLIENT_SHARD, client_id=0, shard_index=i),
                  GradientTensor.phantom_mb(mb))
    executor = FunctionExecutor()
    invocations = []
    for i, mb in enumerate(sizes):
        task = AggregationTask(
            name=f"agg-{i}",
            inputs=(ObjectKey(0, Role.CLIENT_SHARD, client_id=0, shard_index=i),),
            output=ObjectKey(0, Role.SHARD_RESULT, shard_index=i),
            mode=MODE_MEAN,
            capacity=GradientTensor.phantom_mb(mb).param_count,
        )
        invocations.append((provision(mb, 0), task))
    phase = executor.run_phase("test-phase", invocations, store)
    totals = [r.total_time_s for r in phase.records]
    assert phase.wall_clock_s == max(totals)
    assert phase.wall_clock_s < sum(totals)
    assert phase.billed_gb_seconds == pytest.approx(
        sum(r.billed_gb_seconds for r in phase.records))
    assert executor.clock.now == phase.wall_clock_s


def test_single_invocation_phase_equals_its_total():
    store, template = _store_with_gradients(3, 2.0, 50.0)
    executor = FunctionExecutor()
    spec = provision(template.mb, 3 * template.byte_size)
    phase = executor.run_phase("solo", [(spec, _mean_task(3, template.param_count))], store)
    assert phase.wall_clock_s == phase.records[0].total_time_s


def test_partial_sum_mode_writes_partial_update():
    store, template = _store_with_gradients(3, 1.0, 50.0)
    task = AggregationTask(
        name="leaf",
        inputs=tuple(ObjectKey(0, Role.CLIENT_GRADIENT, client_id=c) for c in range(3)),
        output=ObjectKey(0, Role.LEAF_PARTIAL, level_index=0),
        mode=MODE_PARTIAL_SUM,
        capacity=template.param_count,
    )
    FunctionExecutor().invoke(provision(template.mb, 0), task, store)
    blob, _ = store.get(ObjectKey(0, Role.LEAF_PARTIAL, level_index=0))
    assert blob.weight == 3.0


def test_records_are_deterministic():
    def run():
        store, template = _store_with_gradients(5, 3.0, 48.0)
        executor = FunctionExecutor()
        spec = provision(template.mb, 5 * template.byte_size)
        return executor.invoke(spec, _mean_task(5, template.param_count), store)

    a, b = run(), run()
    assert (a.read_time_s, a.compute_time_s, a.write_time_s, a.billed_gb_seconds) \
        == (b.read_time_s, b.compute_time_s, b.write_time_s, b.billed_gb_seconds)


def test_virtual_clock_rejects_negative_steps():
    clock = VirtualClock()
    clock.advance(1.5)
    assert clock.now == 1.5
    with pytest.raises(InvalidArgumentError):
        clock.advance(-1.0)
