"""Round plans and execution for the three aggregation topologies.

* gradsharding: one concurrent phase of M shard aggregators, each
  averaging its coordinate range across all N clients.
* lambdafl: two phases, ceil(N/k) leaf aggregators over client groups
  followed by one root.
* lifl: three phases with branching ceil(cuberoot(N)); every transfer
  between levels goes through the object store.

Tree aggregators pass (partial_sum, weight) pairs upward and only the
root divides, so uneven groups merge exactly.  Every plan also carries
the client upload and read-back manifests so a full round-trip's S3 ops
can be checked against the closed-form forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from .errors import (
    InfeasibleConfigError,
    InternalInvariantError,
    InvalidArgumentError,
)
from .executor import (
    DEFAULT_LIMITS,
    AggregationTask,
    FunctionExecutor,
    FunctionSpec,
    FeasibilityVerdict,
    InvocationRecord,
    MODE_MEAN,
    MODE_PARTIAL_SUM,
    PhaseRecord,
    PlatformLimits,
    check_feasibility,
    provision,
)
from .gradients import GradientTensor, ShardPlan, concat, shard
from .store import (
    ISSUER_CLIENT_READBACK,
    ISSUER_CLIENT_UPLOAD,
    ObjectKey,
    ObjectStore,
    Role,
    StoreStats,
    Trigger,
)

GRADSHARDING = "gradsharding"
LAMBDAFL = "lambdafl"
LIFL = "lifl"
TOPOLOGY_KINDS = (GRADSHARDING, LAMBDAFL, LIFL)


@dataclass(frozen=True)
class Topology:
    kind: str
    m: int = 1

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise InvalidArgumentError(
                f"unknown topology {self.kind!r}, expected one of {TOPOLOGY_KINDS}"
            )
        if self.kind == GRADSHARDING and self.m < 1:
            raise InvalidArgumentError("gradsharding needs m >= 1")

    @property
    def label(self) -> str:
        return f"{self.kind}(m={self.m})" if self.kind == GRADSHARDING else self.kind


def _ceil_sqrt(n: int) -> int:
    s = math.isqrt(n)
    return s if s * s == n else s + 1


def _ceil_cbrt(n: int) -> int:
    b = 1
    while b * b * b < n:
        b += 1
    return b


@dataclass(frozen=True)
class LambdaFLShape:
    clients_per_leaf: int        # k = max(2, ceil(sqrt(N)))
    leaf_count: int              # ceil(N / k)


@dataclass(frozen=True)
class LIFLShape:
    branching: int               # b = ceil(N ** (1/3))
    l1_count: int                # ceil(N / b)
    l2_count: int                # ceil(l1 / b)


def lambda_fl_shape(n: int) -> LambdaFLShape:
    if n < 1:
        raise InvalidArgumentError("need at least one client")
    k = max(2, _ceil_sqrt(n))
    return LambdaFLShape(clients_per_leaf=k, leaf_count=math.ceil(n / k))


def lifl_shape(n: int) -> LIFLShape:
    if n < 1:
        raise InvalidArgumentError("need at least one client")
    b = _ceil_cbrt(n)
    l1 = math.ceil(n / b)
    return LIFLShape(branching=b, l1_count=l1, l2_count=math.ceil(l1 / b))


def balanced_groups(count: int, group_count: int) -> List[List[int]]:
    """Chunk ids 0..count-1 into contiguous groups whose sizes differ by
    at most one, extras going to the first groups."""
    if group_count < 1 or count < group_count:
        raise InvalidArgumentError(f"cannot split {count} ids into {group_count} groups")
    base, extra = divmod(count, group_count)
    groups, start = [], 0
    for g in range(group_count):
        size = base + (1 if g < extra else 0)
        groups.append(list(range(start, start + size)))
        start += size
    return groups


@dataclass(frozen=True)
class S3Ops:
    """Closed-form per-round operation forecast."""

    puts: int
    gets_aggregator: int
    gets_clients: int

    @property
    def gets(self) -> int:
        return self.gets_aggregator + self.gets_clients

    @property
    def total(self) -> int:
        return self.puts + self.gets


def predicted_s3_ops(topology: Topology, n: int) -> S3Ops:
    """Per-round PUT/GET counts for a full round-trip (uploads, aggregator
    I/O, and client read-back)."""
    if n < 1:
        raise InvalidArgumentError("need at least one client")
    if topology.kind == GRADSHARDING:
        m = topology.m
        return S3Ops(puts=n * m + m, gets_aggregator=n * m, gets_clients=n * m)
    if topology.kind == LAMBDAFL:
        leaves = lambda_fl_shape(n).leaf_count
        return S3Ops(puts=n + leaves + 1, gets_aggregator=n + leaves, gets_clients=n)
    shape = lifl_shape(n)
    aggs = shape.l1_count + shape.l2_count
    return S3Ops(puts=n + aggs + 1, gets_aggregator=n + aggs, gets_clients=n)


@dataclass(frozen=True)
class PlannedInvocation:
    name: str
    spec: FunctionSpec
    task: AggregationTask


@dataclass
class RoundPlan:
    topology: Topology
    n_clients: int
    round_index: int
    param_count: int
    gradient_mb: float
    feasibility: FeasibilityVerdict
    phase_names: List[str]
    phases: List[List[PlannedInvocation]]
    uploads: List[List[ObjectKey]]        # per client, PUT order
    readback: List[List[ObjectKey]]       # per client, GET order
    triggers: List[Trigger]
    shard_plan: Optional[ShardPlan] = None

    @property
    def aggregation_phase_count(self) -> int:
        return len(self.phases)


def plan(topology: Topology, n_clients: int, gradient: GradientTensor,
         limits: PlatformLimits = DEFAULT_LIMITS, *,
         round_index: int = 0,
         memory_override_mb: Optional[float] = None,
         timeout_s: Optional[float] = None) -> RoundPlan:
    """Lay out one aggregation round: keys, triggers, phases, provisioning.

    Raises InfeasibleConfigError when the per-aggregator memory estimate
    exceeds the platform maximum, carrying the required MB.
    """
    if n_clients < 1:
        raise InvalidArgumentError("need at least one client")
    if topology.kind == GRADSHARDING and topology.m > gradient.param_count:
        raise InvalidArgumentError(
            f"m={topology.m} exceeds param_count={gradient.param_count}"
        )

    effective_m = topology.m if topology.kind == GRADSHARDING else 1
    verdict = check_feasibility(gradient.mb, effective_m, limits)
    if not verdict.feasible:
        raise InfeasibleConfigError(verdict.required_mb, limits.max_memory_mb,
                                    detail=topology.label)

    builder = {
        GRADSHARDING: _plan_gradsharding,
        LAMBDAFL: _plan_lambdafl,
        LIFL: _plan_lifl,
    }[topology.kind]
    return builder(topology, n_clients, gradient, limits, verdict,
                   round_index, memory_override_mb, timeout_s)


def _plan_gradsharding(topology, n, gradient, limits, verdict, rnd,
                       override_mb, timeout_s) -> RoundPlan:
    m = topology.m
    splits = ShardPlan(gradient.param_count, m)
    uploads = [
        [ObjectKey(rnd, Role.CLIENT_SHARD, client_id=c, shard_index=j) for j in range(m)]
        for c in range(n)
    ]
    invocations, triggers = [], []
    for j, (start, end) in enumerate(splits.boundaries):
        size = end - start
        shard_mb = size * 4 / (1024 * 1024)
        inputs = tuple(
            ObjectKey(rnd, Role.CLIENT_SHARD, client_id=c, shard_index=j) for c in range(n)
        )
        name = f"shard-agg-{j}"
        task = AggregationTask(name=name, inputs=inputs,
                               output=ObjectKey(rnd, Role.SHARD_RESULT, shard_index=j),
                               mode=MODE_MEAN, capacity=size)
        spec = provision(shard_mb, size * 4 * n, limits, override_mb, timeout_s)
        invocations.append(PlannedInvocation(name, spec, task))
        triggers.append(Trigger(round=rnd, role=Role.CLIENT_SHARD, shard_index=j,
                                required_count=n, action=name))
    readback = [
        [ObjectKey(rnd, Role.SHARD_RESULT, shard_index=j) for j in range(m)]
        for _ in range(n)
    ]
    return RoundPlan(topology=topology, n_clients=n, round_index=rnd,
                     param_count=gradient.param_count, gradient_mb=gradient.mb,
                     feasibility=verdict, phase_names=["shard-aggregation"],
                     phases=[invocations], uploads=uploads, readback=readback,
                     triggers=triggers, shard_plan=splits)


def _tree_invocation(name, inputs, output, mode, gradient, n_streams, limits,
                     override_mb, timeout_s) -> PlannedInvocation:
    task = AggregationTask(name=name, inputs=tuple(inputs), output=output,
                           mode=mode, capacity=gradient.param_count)
    spec = provision(gradient.mb, gradient.byte_size * n_streams, limits,
                     override_mb, timeout_s)
    return PlannedInvocation(name, spec, task)


def _plan_lambdafl(topology, n, gradient, limits, verdict, rnd,
                   override_mb, timeout_s) -> RoundPlan:
    shape = lambda_fl_shape(n)
    groups = balanced_groups(n, shape.leaf_count)
    uploads = [[ObjectKey(rnd, Role.CLIENT_GRADIENT, client_id=c)] for c in range(n)]

    leaves, triggers = [], []
    for i, group in enumerate(groups):
        name = f"leaf-{i}"
        inputs = [ObjectKey(rnd, Role.CLIENT_GRADIENT, client_id=c) for c in group]
        leaves.append(_tree_invocation(
            name, inputs, ObjectKey(rnd, Role.LEAF_PARTIAL, level_index=i),
            MODE_PARTIAL_SUM, gradient, len(group), limits, override_mb, timeout_s))
        triggers.append(Trigger(round=rnd, role=Role.CLIENT_GRADIENT,
                                member_ids=frozenset(group),
                                required_count=len(group), action=name))

    root_inputs = [ObjectKey(rnd, Role.LEAF_PARTIAL, level_index=i)
                   for i in range(shape.leaf_count)]
    root = _tree_invocation("root", root_inputs, ObjectKey(rnd, Role.ROOT_RESULT),
                            MODE_MEAN, gradient, shape.leaf_count, limits,
                            override_mb, timeout_s)
    triggers.append(Trigger(round=rnd, role=Role.LEAF_PARTIAL,
                            required_count=shape.leaf_count, action="root"))

    readback = [[ObjectKey(rnd, Role.ROOT_RESULT)] for _ in range(n)]
    return RoundPlan(topology=topology, n_clients=n, round_index=rnd,
                     param_count=gradient.param_count, gradient_mb=gradient.mb,
                     feasibility=verdict,
                     phase_names=["leaf-aggregation", "root-aggregation"],
                     phases=[leaves, [root]], uploads=uploads, readback=readback,
                     triggers=triggers)


def _plan_lifl(topology, n, gradient, limits, verdict, rnd,
               override_mb, timeout_s) -> RoundPlan:
    shape = lifl_shape(n)
    l1_groups = balanced_groups(n, shape.l1_count)
    l2_groups = balanced_groups(shape.l1_count, shape.l2_count)
    uploads = [[ObjectKey(rnd, Role.CLIENT_GRADIENT, client_id=c)] for c in range(n)]

    triggers = []
    level1 = []
    for i, group in enumerate(l1_groups):
        name = f"l1-{i}"
        inputs = [ObjectKey(rnd, Role.CLIENT_GRADIENT, client_id=c) for c in group]
        level1.append(_tree_invocation(
            name, inputs, ObjectKey(rnd, Role.LEVEL1_PARTIAL, level_index=i),
            MODE_PARTIAL_SUM, gradient, len(group), limits, override_mb, timeout_s))
        triggers.append(Trigger(round=rnd, role=Role.CLIENT_GRADIENT,
                                member_ids=frozenset(group),
                                required_count=len(group), action=name))

    level2 = []
    for i, group in enumerate(l2_groups):
        name = f"l2-{i}"
        inputs = [ObjectKey(rnd, Role.LEVEL1_PARTIAL, level_index=child)
                  for child in group]
        level2.append(_tree_invocation(
            name, inputs, ObjectKey(rnd, Role.LEVEL2_PARTIAL, level_index=i),
            MODE_PARTIAL_SUM, gradient, len(group), limits, override_mb, timeout_s))
        triggers.append(Trigger(round=rnd, role=Role.LEVEL1_PARTIAL,
                                member_ids=frozenset(group),
                                required_count=len(group), action=name))

    root_inputs = [ObjectKey(rnd, Role.LEVEL2_PARTIAL, level_index=i)
                   for i in range(shape.l2_count)]
    root = _tree_invocation("root", root_inputs, ObjectKey(rnd, Role.ROOT_RESULT),
                            MODE_MEAN, gradient, shape.l2_count, limits,
                            override_mb, timeout_s)
    triggers.append(Trigger(round=rnd, role=Role.LEVEL2_PARTIAL,
                            required_count=shape.l2_count, action="root"))

    readback = [[ObjectKey(rnd, Role.ROOT_RESULT)] for _ in range(n)]
    return RoundPlan(topology=topology, n_clients=n, round_index=rnd,
                     param_count=gradient.param_count, gradient_mb=gradient.mb,
                     feasibility=verdict,
                     phase_names=["level1-aggregation", "level2-aggregation",
                                  "root-aggregation"],
                     phases=[level1, level2, [root]], uploads=uploads,
                     readback=readback, triggers=triggers)


@dataclass
class RoundMetrics:
    """Everything measured in one simulated round."""

    topology: Topology
    n_clients: int
    param_count: int
    gradient_mb: float
    feasibility: FeasibilityVerdict
    phases: List[PhaseRecord]
    wall_clock_s: float
    s3_read_s: float
    compute_s: float
    s3_write_s: float
    cold_start_s: float
    client_upload_s: float
    client_readback_s: float
    stats: StoreStats
    predicted: S3Ops
    billed_gb_seconds: float
    result: GradientTensor

    @property
    def aggregation_time_s(self) -> float:
        """Read + compute along the critical path; the result write is
        reported separately (`s3_write_s`)."""
        return self.s3_read_s + self.compute_s

    @property
    def puts(self) -> int:
        return self.stats.puts

    @property
    def gets(self) -> int:
        return self.stats.gets

    @property
    def records(self) -> List[InvocationRecord]:
        return [r for phase in self.phases for r in phase.records]

    def to_json_dict(self) -> dict:
        return {
            "topology": self.topology.kind,
            "m": self.topology.m,
            "n": self.n_clients,
            "param_count": self.param_count,
            "gradient_mb": self.gradient_mb,
            "feasible": True,
            "required_mb": self.feasibility.required_mb,
            "utilization": self.feasibility.utilization,
            "high_utilization": self.feasibility.high_utilization,
            "wall_clock_s": self.wall_clock_s,
            "aggregation_time_s": self.aggregation_time_s,
            "s3_read_s": self.s3_read_s,
            "compute_s": self.compute_s,
            "s3_write_s": self.s3_write_s,
            "client_upload_s": self.client_upload_s,
            "client_readback_s": self.client_readback_s,
            "billed_gb_seconds": self.billed_gb_seconds,
            "store": {
                "puts": self.stats.puts,
                "gets": self.stats.gets,
                "bytes_written": self.stats.bytes_written,
                "bytes_read": self.stats.bytes_read,
                "puts_by_issuer": self.stats.puts_by_issuer,
                "gets_by_issuer": self.stats.gets_by_issuer,
            },
            "predicted_ops": {
                "puts": self.predicted.puts,
                "gets_aggregator": self.predicted.gets_aggregator,
                "gets_clients": self.predicted.gets_clients,
                "total": self.predicted.total,
            },
            "phases": [
                {
                    "name": p.name,
                    "start_s": p.start_s,
                    "wall_clock_s": p.wall_clock_s,
                    "invocations": [r.to_dict() for r in p.records],
                }
                for p in self.phases
            ],
        }


def _client_blobs(plan_: RoundPlan, client: GradientTensor) -> List:
    if plan_.topology.kind == GRADSHARDING:
        return shard(client, plan_.topology.m)
    return [client]


def execute_round(plan_: RoundPlan, store: ObjectStore,
                  executor: FunctionExecutor,
                  clients: Sequence[GradientTensor]) -> RoundMetrics:
    """Simulate one full round-trip: uploads, triggered aggregation
    phases, client read-back.

    Wall clock covers first aggregator invocation to last result write,
    i.e. the sum of phase maxima; client upload/read-back happen on the
    clients' own timelines and are excluded from it but fully counted in
    the op and byte totals.
    """
    if len(clients) != plan_.n_clients:
        raise InvalidArgumentError(
            f"plan is for {plan_.n_clients} clients, got {len(clients)}"
        )
    for g in clients:
        if g.param_count != plan_.param_count:
            raise InvalidArgumentError("client gradients must match the planned size")

    baseline = store.stats()
    for trigger in plan_.triggers:
        store.register_trigger(trigger)

    # Client uploads: sequential per client, concurrent across clients.
    upload_s = 0.0
    for c, keys in enumerate(plan_.uploads):
        blobs = _client_blobs(plan_, clients[c])
        if len(blobs) != len(keys):
            raise InternalInvariantError("upload manifest does not match blob count")
        client_time = 0.0
        for key, blob in zip(keys, blobs):
            client_time += store.put(key, blob, issuer=ISSUER_CLIENT_UPLOAD)
        upload_s = max(upload_s, client_time)

    # Aggregation phases, driven by trigger firings.
    phases: List[PhaseRecord] = []
    read_s = compute_s = write_s = cold_s = 0.0
    for phase_name, planned in zip(plan_.phase_names, plan_.phases):
        fired = set(store.drain_fired())
        expected = {inv.name for inv in planned}
        if fired != expected:
            raise InternalInvariantError(
                f"phase {phase_name!r}: triggers fired for {sorted(fired)}, "
                f"plan expects {sorted(expected)}"
            )
        record = executor.run_phase(phase_name,
                                    [(inv.spec, inv.task) for inv in planned], store)
        slowest = record.slowest()
        read_s += slowest.read_time_s
        compute_s += slowest.compute_time_s
        write_s += slowest.write_time_s
        cold_s += slowest.cold_start_penalty_s
        phases.append(record)

    leftover = store.drain_fired()
    if leftover:
        raise InternalInvariantError(f"unconsumed trigger firings: {leftover}")

    # Client read-back; keep client 0's blobs to reconstruct the result.
    readback_s = 0.0
    reconstructed: List = []
    for c, keys in enumerate(plan_.readback):
        client_time = 0.0
        for key in keys:
            blob, duration = store.get(key, issuer=ISSUER_CLIENT_READBACK)
            client_time += duration
            if c == 0:
                reconstructed.append(blob)
        readback_s = max(readback_s, client_time)

    if plan_.topology.kind == GRADSHARDING:
        result = concat(reconstructed)
    else:
        result = reconstructed[0]

    stats = store.stats().since(baseline)
    predicted = predicted_s3_ops(plan_.topology, plan_.n_clients)
    _check_op_counts(stats, predicted)

    return RoundMetrics(
        topology=plan_.topology,
        n_clients=plan_.n_clients,
        param_count=plan_.param_count,
        gradient_mb=plan_.gradient_mb,
        feasibility=plan_.feasibility,
        phases=phases,
        wall_clock_s=sum(p.wall_clock_s for p in phases),
        s3_read_s=read_s,
        compute_s=compute_s,
        s3_write_s=write_s,
        cold_start_s=cold_s,
        client_upload_s=upload_s,
        client_readback_s=readback_s,
        stats=stats,
        predicted=predicted,
        billed_gb_seconds=sum(p.billed_gb_seconds for p in phases),
        result=result,
    )


def _check_op_counts(stats: StoreStats, predicted: S3Ops) -> None:
    gets_agg = stats.gets_by_issuer.get("aggregator", 0)
    gets_clients = stats.gets_by_issuer.get(ISSUER_CLIENT_READBACK, 0)
    if (stats.puts != predicted.puts or gets_agg != predicted.gets_aggregator
            or gets_clients != predicted.gets_clients):
        raise InternalInvariantError(
            f"executed ops (puts={stats.puts}, gets_agg={gets_agg}, "
            f"gets_clients={gets_clients}) disagree with forecast "
            f"({predicted.puts}/{predicted.gets_aggregator}/{predicted.gets_clients})"
        )


@dataclass
class SweepPoint:
    """One grid point of a sweep; exactly one of metrics/infeasible set."""

    topology: Topology
    n_clients: int
    gradient_mb: float
    label: str
    metrics: Optional[RoundMetrics] = None
    required_mb: Optional[float] = None
    limit_mb: Optional[float] = None
    speedup_vs_first: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.metrics is not None


GridEntry = Tuple[Topology, GradientTensor, str]


def sweep(grid: Sequence[GridEntry], n_clients: int, *,
          make_store: Callable[[], ObjectStore],
          make_executor: Callable[[], FunctionExecutor],
          make_clients: Callable[[GradientTensor], Sequence[GradientTensor]],
          limits: PlatformLimits = DEFAULT_LIMITS,
          memory_override_mb: Optional[float] = None) -> List[SweepPoint]:
    """Run one round per grid entry against fresh store/clock state.

    Infeasible entries become infeasible points instead of aborting.
    Speedup is aggregation time of the first grid point over the
    point's own (None until the first feasible point exists).
    """
    if not grid:
        raise InvalidArgumentError("sweep grid is empty")
    points: List[SweepPoint] = []
    base_time: Optional[float] = None
    for topo, gradient, label in grid:
        point = SweepPoint(topology=topo, n_clients=n_clients,
                           gradient_mb=gradient.mb, label=label)
        try:
            round_plan = plan(topo, n_clients, gradient, limits,
                              memory_override_mb=memory_override_mb)
        except InfeasibleConfigError as exc:
            point.required_mb = exc.required_mb
            point.limit_mb = exc.limit_mb
            points.append(point)
            continue
        metrics = execute_round(round_plan, make_store(), make_executor(),
                                make_clients(gradient))
        point.metrics = metrics
        if base_time is None and points == []:
            base_time = metrics.aggregation_time_s
        if base_time is not None:
            point.speedup_vs_first = base_time / metrics.aggregation_time_s
        points.append(point)
    return points
