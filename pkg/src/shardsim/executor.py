"""Simulated serverless executor: memory model, timeouts, phase execution.

Time is virtual: members of a phase share one start timestamp and the
phase takes as long as its slowest member.  Billing follows the
platform's rules: allocated GB times billed duration, rounded up to a
millisecond.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .errors import (
    InvalidArgumentError,
    OutOfMemoryError,
    PhaseError,
    StateError,
    TimeoutExceededError,
)
from .gradients import MIB, GradientTensor, PartialUpdate, StreamingAccumulator
from .store import ISSUER_AGGREGATOR, ObjectKey, ObjectStore

MIN_MEMORY_MB = 128

# Aggregation arithmetic throughput, fitted so simulated compute matches
# observed single-function timings; overridable through config.
DEFAULT_COMPUTE_THROUGHPUT = 5225.0  # MB/s

DEFAULT_COLD_START_S = 3.0


@dataclass(frozen=True)
class PlatformLimits:
    """Serverless platform constants used by the memory and time models."""

    max_memory_mb: float = 10240.0
    max_timeout_s: float = 900.0
    runtime_overhead_mb: float = 450.0
    streaming_multiplier: float = 3.0

    def __post_init__(self):
        if min(self.max_memory_mb, self.max_timeout_s, self.streaming_multiplier) <= 0:
            raise InvalidArgumentError("platform limits must be positive")
        if self.runtime_overhead_mb < 0:
            raise InvalidArgumentError("runtime overhead must be >= 0")


DEFAULT_LIMITS = PlatformLimits()


def estimate_peak_memory(input_mb: float, limits: PlatformLimits = DEFAULT_LIMITS) -> float:
    """Peak MB a streaming aggregator needs for a per-client input of
    `input_mb`: multiplier x input + fixed runtime overhead."""
    if input_mb < 0:
        raise InvalidArgumentError("input_mb must be >= 0")
    return limits.streaming_multiplier * input_mb + limits.runtime_overhead_mb


def streaming_lower_bound(param_count: int, m: int) -> float:
    """Analytic floor: two float32 buffers of one shard each, in MB."""
    if m < 1:
        raise InvalidArgumentError("shard count must be >= 1")
    return 2 * (param_count / m) * 4 / MIB


def collect_peak_memory(n_clients: int, shard_mb: float) -> float:
    """Peak MB of a collect-then-average aggregator that buffers all
    inputs before averaging: (N + 1) shards live at once.

    Reconstructed from observed peaks of that implementation style; the
    streaming path never allocates like this.
    """
    return (n_clients + 1) * shard_mb


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    required_mb: float
    utilization: float

    @property
    def high_utilization(self) -> bool:
        return self.feasible and self.utilization >= 0.9


def check_feasibility(gradient_mb: float, m: int,
                      limits: PlatformLimits = DEFAULT_LIMITS) -> FeasibilityVerdict:
    """Can an aggregator for a gradient split M ways fit on the platform?"""
    if gradient_mb <= 0:
        raise InvalidArgumentError("gradient_mb must be > 0")
    if m < 1:
        raise InvalidArgumentError("shard count must be >= 1")
    required = estimate_peak_memory(gradient_mb / m, limits)
    return FeasibilityVerdict(
        feasible=required <= limits.max_memory_mb,
        required_mb=required,
        utilization=required / limits.max_memory_mb,
    )


@dataclass(frozen=True)
class FunctionSpec:
    """Provisioning for one function invocation."""

    allocated_memory_mb: float
    timeout_s: float
    input_bytes: int = 0       # total bytes the invocation reads
    stream_mb: float = 0.0     # size of one streamed input object, drives peak memory

    def __post_init__(self):
        if self.allocated_memory_mb < MIN_MEMORY_MB:
            raise InvalidArgumentError(
                f"allocated memory below platform minimum {MIN_MEMORY_MB} MB"
            )
        if self.timeout_s <= 0:
            raise InvalidArgumentError("timeout must be > 0")


def provision(stream_mb: float, input_bytes: int,
              limits: PlatformLimits = DEFAULT_LIMITS,
              memory_override_mb: Optional[float] = None,
              timeout_s: Optional[float] = None) -> FunctionSpec:
    """Build a FunctionSpec sized from the memory model.

    Defaults to ceil(peak estimate) clamped to the platform range;
    explicit overrides reproduce hand-picked deployments.
    """
    if memory_override_mb is not None:
        alloc = memory_override_mb
    else:
        alloc = min(max(math.ceil(estimate_peak_memory(stream_mb, limits)),
                        MIN_MEMORY_MB), limits.max_memory_mb)
    return FunctionSpec(
        allocated_memory_mb=alloc,
        timeout_s=timeout_s if timeout_s is not None else limits.max_timeout_s,
        input_bytes=input_bytes,
        stream_mb=stream_mb,
    )


@dataclass(frozen=True)
class InvocationRecord:
    """Read/compute/write decomposition of one simulated invocation."""

    name: str
    read_time_s: float
    compute_time_s: float
    write_time_s: float
    cold_start_penalty_s: float
    total_time_s: float
    billed_duration_s: float
    billed_gb_seconds: float
    peak_memory_estimate_mb: float
    allocated_memory_mb: float
    live_buffer_bytes: int
    measured_compute_s: Optional[float] = None  # wall time, materialized runs only

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "read_time_s": self.read_time_s,
            "compute_time_s": self.compute_time_s,
            "write_time_s": self.write_time_s,
            "cold_start_penalty_s": self.cold_start_penalty_s,
            "total_time_s": self.total_time_s,
            "billed_gb_seconds": self.billed_gb_seconds,
            "peak_memory_estimate_mb": self.peak_memory_estimate_mb,
            "allocated_memory_mb": self.allocated_memory_mb,
        }
        if self.measured_compute_s is not None:
            out["measured_compute_s"] = self.measured_compute_s
        return out


@dataclass
class PhaseRecord:
    name: str
    start_s: float
    wall_clock_s: float
    records: List[InvocationRecord]

    @property
    def billed_gb_seconds(self) -> float:
        return sum(r.billed_gb_seconds for r in self.records)

    def slowest(self) -> InvocationRecord:
        return max(self.records, key=lambda r: r.total_time_s)


class VirtualClock:
    """Monotonic simulated time; advances only when told to."""

    def __init__(self):
        self.now = 0.0

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise InvalidArgumentError("clock cannot move backwards")
        self.now += dt
        return self.now


# Output flavors: a shard/root aggregator publishes the mean, an inner
# tree aggregator hands its raw (sum, weight) upward.
MODE_MEAN = "mean"
MODE_PARTIAL_SUM = "partial_sum"


@dataclass(frozen=True)
class AggregationTask:
    """One aggregator's work: read inputs in order, fold, write output."""

    name: str
    inputs: Tuple[ObjectKey, ...]
    output: ObjectKey
    mode: str
    capacity: int              # parameters per input object

    def __post_init__(self):
        if self.mode not in (MODE_MEAN, MODE_PARTIAL_SUM):
            raise InvalidArgumentError(f"unknown task mode {self.mode!r}")
        if not self.inputs:
            raise StateError(f"task {self.name!r} has no inputs; refusing an empty average")


def compute_time_model(bytes_processed: int, compute_throughput: float) -> float:
    """Seconds of aggregation arithmetic for a given byte volume."""
    if compute_throughput <= 0:
        raise InvalidArgumentError("compute_throughput must be > 0")
    return bytes_processed / MIB / compute_throughput


class FunctionExecutor:
    """Runs aggregation tasks against a store under a virtual clock."""

    def __init__(self, limits: PlatformLimits = DEFAULT_LIMITS,
                 compute_throughput: float = DEFAULT_COMPUTE_THROUGHPUT,
                 cold_start_s: float = 0.0,
                 clock: Optional[VirtualClock] = None):
        if cold_start_s < 0:
            raise InvalidArgumentError("cold_start_s must be >= 0")
        self.limits = limits
        self.compute_throughput = compute_throughput
        self.cold_start_s = cold_start_s
        self.clock = clock or VirtualClock()

    def invoke(self, spec: FunctionSpec, task: AggregationTask,
               store: ObjectStore) -> InvocationRecord:
        """Execute one aggregator invocation; raises on OOM or timeout."""
        peak = estimate_peak_memory(spec.stream_mb, self.limits)
        if peak > spec.allocated_memory_mb:
            raise OutOfMemoryError(peak, spec.allocated_memory_mb)

        first_blob, first_duration = store.get(task.inputs[0], issuer=ISSUER_AGGREGATOR)
        phantom = self._blob_tensor(first_blob).is_phantom
        acc = StreamingAccumulator(task.capacity, phantom=phantom)

        read_time = first_duration
        wall_start = _time.perf_counter()
        self._fold(acc, first_blob)
        for key in task.inputs[1:]:
            blob, duration = store.get(key, issuer=ISSUER_AGGREGATOR)
            read_time += duration
            self._fold(acc, blob)
        measured = None if phantom else _time.perf_counter() - wall_start

        compute_time = compute_time_model(acc.bytes_accumulated, self.compute_throughput)
        live_bytes = acc.peak_live_bytes
        if task.mode == MODE_MEAN:
            result = acc.finalize()
        else:
            result = acc.into_partial()
        write_time = store.put(task.output, result, issuer=ISSUER_AGGREGATOR)

        total = self.cold_start_s + read_time + compute_time + write_time
        if total > spec.timeout_s:
            raise TimeoutExceededError(total, spec.timeout_s)
        billed = math.ceil(total * 1000.0) / 1000.0
        return InvocationRecord(
            name=task.name,
            read_time_s=read_time,
            compute_time_s=compute_time,
            write_time_s=write_time,
            cold_start_penalty_s=self.cold_start_s,
            total_time_s=total,
            billed_duration_s=billed,
            billed_gb_seconds=(spec.allocated_memory_mb / 1024.0) * billed,
            peak_memory_estimate_mb=peak,
            allocated_memory_mb=spec.allocated_memory_mb,
            live_buffer_bytes=live_bytes,
            measured_compute_s=measured,
        )

    @staticmethod
    def _blob_tensor(blob) -> GradientTensor:
        return blob.tensor if isinstance(blob, PartialUpdate) else blob

    @staticmethod
    def _fold(acc: StreamingAccumulator, blob) -> None:
        if isinstance(blob, PartialUpdate):
            acc.absorb(blob)
        else:
            acc.accumulate(blob)

    def run_phase(self, name: str,
                  invocations: Sequence[Tuple[FunctionSpec, AggregationTask]],
                  store: ObjectStore) -> PhaseRecord:
        """Run independent invocations against one shared start time.

        Phase wall-clock is the slowest member; billing sums members.
        """
        start = self.clock.now
        records = []
        for spec, task in invocations:
            try:
                records.append(self.invoke(spec, task, store))
            except Exception as exc:
                raise PhaseError(name, task.name, exc) from exc
        wall = max(r.total_time_s for r in records) if records else 0.0
        self.clock.advance(wall)
        return PhaseRecord(name=name, start_s=start, wall_clock_s=wall, records=records)
