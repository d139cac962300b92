"""Randomized invariant checks for the sharding algebra, tree shapes,
and end-to-end topology equivalence."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shardsim import (
    FunctionExecutor,
    GradientTensor,
    ObjectStore,
    ShardPlan,
    StreamingAccumulator,
    Topology,
    TransferModel,
    check_feasibility,
    concat,
    execute_round,
    fedavg_flat,
    lambda_fl_shape,
    lifl_shape,
    plan,
    predicted_s3_ops,
    shard,
)
from shardsim.topology import balanced_groups

# Reassociation causes only tiny absolute drift; the floor covers
# coordinates whose true mean sits near zero.
TREE_RTOL = 1e-5
TREE_ATOL = 1e-6


@given(st.integers(1, 2000), st.integers(1, 64))
def test_shard_plan_is_balanced_and_covers(total, m):
    m = min(m, total)
    plan_ = ShardPlan(total, m)
    sizes = plan_.shard_sizes
    assert sum(sizes) == total
    assert max(sizes) - min(sizes) <= 1
    assert plan_.boundaries[0][0] == 0
    assert plan_.boundaries[-1][1] == total
    for (_, end), (start, _) in zip(plan_.boundaries, plan_.boundaries[1:]):
        assert end == start


@given(st.integers(1, 3000), st.integers(1, 40), st.integers(0, 2**31))
def test_shard_concat_roundtrip(params, m, seed):
    m = min(m, params)
    g = GradientTensor.from_seed(params, seed=seed)
    assert np.array_equal(concat(shard(g, m)).values, g.values)


@given(st.integers(1, 3000), st.integers(1, 40))
def test_phantom_shards_partition_bytes(params, m):
    m = min(m, params)
    parts = shard(GradientTensor.phantom(params), m)
    assert sum(p.byte_size for p in parts) == params * 4


@given(st.integers(1, 10_000))
def test_lambda_fl_shape_invariants(n):
    shape = lambda_fl_shape(n)
    assert shape.clients_per_leaf == max(2, math.ceil(math.sqrt(n)))
    assert shape.leaf_count == math.ceil(n / shape.clients_per_leaf)
    groups = balanced_groups(n, shape.leaf_count)
    assert sorted(c for g in groups for c in g) == list(range(n))
    assert all(len(g) <= shape.clients_per_leaf for g in groups)


@given(st.integers(1, 10_000))
def test_lifl_shape_invariants(n):
    shape = lifl_shape(n)
    b = shape.branching
    assert (b - 1) ** 3 < n <= b ** 3
    assert shape.l1_count == math.ceil(n / b)
    assert shape.l2_count == math.ceil(shape.l1_count / b)


@given(st.integers(1, 128), st.integers(1, 32))
def test_gradsharding_op_forecast_closed_form(n, m):
    ops = predicted_s3_ops(Topology("gradsharding", m), n)
    assert ops.total == 3 * n * m + m


@given(st.floats(1.0, 20_000.0), st.integers(1, 64))
def test_feasibility_monotone_in_m(gradient_mb, m):
    if check_feasibility(gradient_mb, m).feasible:
        assert check_feasibility(gradient_mb, m + 1).feasible


@given(st.integers(0, 10**9))
def test_transfer_duration_monotone(byte_size):
    tm = TransferModel(read_throughput=47.0, write_throughput=53.0,
                       per_op_latency=0.01)
    assert tm.read_seconds(byte_size + 1024) > tm.read_seconds(byte_size)
    assert tm.write_seconds(byte_size + 1024) > tm.write_seconds(byte_size)


@given(st.lists(st.floats(-1.0, 1.0, width=32), min_size=1, max_size=40),
       st.integers(1, 30))
def test_streaming_sum_matches_reference_for_repeated_vector(values, n):
    g = GradientTensor.materialized(values)
    acc = StreamingAccumulator(g.param_count)
    for _ in range(n):
        acc.accumulate(g)
    assert np.array_equal(acc.finalize().values, fedavg_flat([g] * n).values)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(1, 8), st.integers(8, 600), st.integers(0, 10**6))
def test_all_topologies_match_flat_reference(n, m, params, seed):
    m = min(m, params)
    clients = [GradientTensor.from_seed(params, seed=seed + i) for i in range(n)]
    reference = fedavg_flat(clients).values
    for topo in (Topology("gradsharding", m), Topology("lambdafl"), Topology("lifl")):
        metrics = execute_round(plan(topo, n, clients[0]), ObjectStore(),
                                FunctionExecutor(), clients)
        got = metrics.result.require_values()
        if topo.kind == "gradsharding":
            assert np.array_equal(got, reference), topo.label
        else:
            np.testing.assert_allclose(got, reference, rtol=TREE_RTOL,
                                       atol=TREE_ATOL, err_msg=topo.label)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 16), st.integers(1, 6), st.integers(6, 2000))
def test_phantom_run_mirrors_materialized_accounting(n, m, params):
    m = min(m, params)
    topo = Topology("gradsharding", m)
    mat = execute_round(
        plan(topo, n, GradientTensor.from_seed(params, seed=1)),
        ObjectStore(), FunctionExecutor(),
        [GradientTensor.from_seed(params, seed=10 + i) for i in range(n)])
    pha = execute_round(
        plan(topo, n, GradientTensor.phantom(params)),
        ObjectStore(), FunctionExecutor(),
        [GradientTensor.phantom(params) for _ in range(n)])
    assert mat.stats.puts == pha.stats.puts
    assert mat.stats.gets == pha.stats.gets
    assert mat.stats.bytes_written == pha.stats.bytes_written
    assert mat.stats.bytes_read == pha.stats.bytes_read
    assert mat.wall_clock_s == pytest.approx(pha.wall_clock_s)
    assert mat.billed_gb_seconds == pytest.approx(pha.billed_gb_seconds)
