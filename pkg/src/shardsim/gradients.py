"""Gradient tensors, contiguous sharding, and streaming weighted averaging.

Everything downstream leans on two algebraic facts kept explicit here:

* Averaging contiguous coordinate blocks independently and concatenating
  the results is the same as averaging whole vectors, provided every
  accumulator adds contributions in the same client order and divides
  once at the end.  With that ordering fixed, sharded results are
  bit-identical to the flat average even in 32-bit arithmetic.
* Hierarchies stay exact by passing (partial_sum, weight) pairs upward
  and dividing only at the root, so unequal group sizes merge correctly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, PhantomAccessError, StateError

FLOAT_BYTES = 4
MIB = 1024 * 1024

# Upper bound on transient scratch used by a weighted in-place add; keeps
# live memory at two shard buffers plus this constant.
WEIGHTED_ADD_SLACK_BYTES = 1 * MIB
_SCRATCH_ELEMS = WEIGHTED_ADD_SLACK_BYTES // FLOAT_BYTES


def mb_to_params(mb: float) -> int:
    """Number of float32 parameters occupying `mb` MiB."""
    return int(round(mb * MIB / FLOAT_BYTES))


@dataclass(frozen=True)
class GradientTensor:
    """One client update: either real float32 data or a size-only stand-in.

    Phantom tensors carry no elements and refuse element access, which
    lets multi-GB experiments run with byte/op accounting only.
    """

    param_count: int
    values: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.param_count < 0:
            raise InvalidArgumentError("param_count must be >= 0")
        if self.values is not None:
            if self.values.dtype != np.float32:
                raise InvalidArgumentError("materialized values must be float32")
            if self.values.ndim != 1 or len(self.values) != self.param_count:
                raise InvalidArgumentError(
                    f"payload length {len(self.values)} != param_count {self.param_count}"
                )
            # immutable after construction, safe to share across threads
            self.values.flags.writeable = False

    @classmethod
    def materialized(cls, values: Sequence[float], seed: Optional[int] = None) -> "GradientTensor":
        arr = np.array(values, dtype=np.float32).reshape(-1)
        return cls(param_count=arr.size, values=arr, seed=seed)

    @classmethod
    def phantom(cls, param_count: int) -> "GradientTensor":
        return cls(param_count=param_count, values=None)

    @classmethod
    def phantom_mb(cls, mb: float) -> "GradientTensor":
        return cls.phantom(mb_to_params(mb))

    @classmethod
    def from_seed(cls, param_count: int, seed: int) -> "GradientTensor":
        """Reproducible uniform(-1, 1) float32 tensor."""
        rng = np.random.default_rng(seed)
        vals = rng.uniform(-1.0, 1.0, param_count).astype(np.float32)
        return cls(param_count=param_count, values=vals, seed=seed)

    @property
    def is_phantom(self) -> bool:
        return self.values is None

    @property
    def byte_size(self) -> int:
        return self.param_count * FLOAT_BYTES

    @property
    def mb(self) -> float:
        return self.byte_size / MIB

    def require_values(self) -> np.ndarray:
        if self.values is None:
            raise PhantomAccessError(
                "element access on a phantom tensor (size-only); materialize it first"
            )
        return self.values


@dataclass(frozen=True)
class PartialUpdate:
    """Unnormalized partial result exchanged between tree levels.

    `tensor` holds the raw weighted sum (not a mean); `weight` is the
    total contribution weight (client count for equal-weight rounds).
    Dividing only at the root keeps unequal groups exact.
    """

    tensor: GradientTensor
    weight: float

    def __post_init__(self):
        if self.weight <= 0:
            raise InvalidArgumentError("partial weight must be > 0")

    @property
    def byte_size(self) -> int:
        return self.tensor.byte_size


@dataclass(frozen=True)
class ShardPlan:
    """Balanced contiguous split of [0, total_params) into M ranges.

    The first (total mod M) shards take one extra parameter, so sizes
    differ by at most 1.
    """

    total_params: int
    shard_count: int
    boundaries: Tuple[Tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        if self.shard_count < 1:
            raise InvalidArgumentError("shard_count must be >= 1")
        if self.total_params < 0:
            raise InvalidArgumentError("total_params must be >= 0")
        base, extra = divmod(self.total_params, self.shard_count)
        bounds = []
        start = 0
        for j in range(self.shard_count):
            size = base + (1 if j < extra else 0)
            bounds.append((start, start + size))
            start += size
        object.__setattr__(self, "boundaries", tuple(bounds))

    @property
    def shard_sizes(self) -> List[int]:
        return [end - start for start, end in self.boundaries]


def shard(g: GradientTensor, m: int) -> List[GradientTensor]:
    """Split a gradient into M balanced contiguous shards.

    Materialized input yields materialized shards carrying copies of the
    coordinate ranges; phantom input yields phantom shards with the same
    size partition.
    """
    if m < 1:
        raise InvalidArgumentError(f"shard count must be >= 1, got {m}")
    if not g.is_phantom and m > g.param_count:
        raise InvalidArgumentError(
            f"cannot split {g.param_count} parameters into {m} shards"
        )
    plan = ShardPlan(g.param_count, m)
    if g.is_phantom:
        return [GradientTensor.phantom(end - start) for start, end in plan.boundaries]
    vals = g.require_values()
    return [
        GradientTensor(param_count=end - start, values=vals[start:end].copy())
        for start, end in plan.boundaries
    ]


def concat(shards: Sequence[GradientTensor]) -> GradientTensor:
    """Reassemble shards into one tensor, preserving coordinate order."""
    if not shards:
        raise InvalidArgumentError("cannot concatenate an empty shard list")
    kinds = {s.is_phantom for s in shards}
    if len(kinds) > 1:
        raise InvalidArgumentError("cannot mix phantom and materialized shards")
    total = sum(s.param_count for s in shards)
    if shards[0].is_phantom:
        return GradientTensor.phantom(total)
    return GradientTensor(
        param_count=total,
        values=np.concatenate([s.require_values() for s in shards]),
    )


class StreamingAccumulator:
    """Running weighted sum over same-sized shards, divided once at the end.

    Live gradient memory is bounded by two shard buffers (the running sum
    plus the incoming shard); a weighted add uses at most
    WEIGHTED_ADD_SLACK_BYTES of extra scratch.  Single-owner: never share
    one accumulator across concurrent execution contexts.
    """

    def __init__(self, capacity: int, phantom: bool = False):
        if capacity < 0:
            raise InvalidArgumentError("capacity must be >= 0")
        self.capacity = capacity
        self.contributions = 0
        self.weight_total = 0.0
        self.bytes_accumulated = 0
        self._finalized = False
        self._phantom = phantom
        self._sum: Optional[np.ndarray] = (
            None if phantom else np.zeros(capacity, dtype=np.float32)
        )
        # Phantom runs report the same bound a materialized run would hit.
        self._peak_live_elements = capacity

    @property
    def is_phantom(self) -> bool:
        return self._phantom

    @property
    def peak_live_elements(self) -> int:
        """High-water mark of live gradient elements held at once."""
        return self._peak_live_elements

    @property
    def peak_live_bytes(self) -> int:
        return self._peak_live_elements * FLOAT_BYTES

    def _check_open(self):
        if self._finalized:
            raise StateError("accumulator already finalized")

    def _note_incoming(self, elements: int):
        live = self.capacity + elements
        if live > self._peak_live_elements:
            self._peak_live_elements = live

    def accumulate(self, shard_tensor: GradientTensor, weight: float = 1.0):
        """Add weight x shard into the running sum."""
        self._check_open()
        if weight <= 0:
            raise InvalidArgumentError("weight must be > 0")
        if shard_tensor.param_count != self.capacity:
            raise InvalidArgumentError(
                f"shard has {shard_tensor.param_count} parameters, "
                f"accumulator capacity is {self.capacity}"
            )
        if shard_tensor.is_phantom != self._phantom:
            raise InvalidArgumentError(
                "phantom shards go to phantom accumulators and vice versa"
            )
        self._note_incoming(shard_tensor.param_count)
        if not self._phantom:
            self._add_weighted(shard_tensor.require_values(), weight)
        self.contributions += 1
        self.weight_total += weight
        self.bytes_accumulated += shard_tensor.byte_size

    def absorb(self, partial: PartialUpdate):
        """Merge a lower-level partial: sum adds at weight 1, weights add."""
        self._check_open()
        if partial.tensor.param_count != self.capacity:
            raise InvalidArgumentError(
                f"partial has {partial.tensor.param_count} parameters, "
                f"accumulator capacity is {self.capacity}"
            )
        if partial.tensor.is_phantom != self._phantom:
            raise InvalidArgumentError(
                "phantom partials go to phantom accumulators and vice versa"
            )
        self._note_incoming(partial.tensor.param_count)
        if not self._phantom:
            self._sum += partial.tensor.require_values()
        self.contributions += 1
        self.weight_total += partial.weight
        self.bytes_accumulated += partial.byte_size

    def _add_weighted(self, values: np.ndarray, weight: float):
        if weight == 1.0:
            self._sum += values
            return
        # Chunked in-place multiply-add so scratch stays below the slack bound.
        w = np.float32(weight)
        scratch = np.empty(min(_SCRATCH_ELEMS, self.capacity), dtype=np.float32)
        for start in range(0, self.capacity, len(scratch) or 1):
            end = min(start + len(scratch), self.capacity)
            np.multiply(values[start:end], w, out=scratch[: end - start])
            self._sum[start:end] += scratch[: end - start]

    def finalize(self) -> GradientTensor:
        """Divide the running sum by the total weight; single use."""
        self._check_open()
        if self.contributions < 1:
            raise StateError("finalize on an empty accumulator")
        self._finalized = True
        if self._phantom:
            return GradientTensor.phantom(self.capacity)
        result = self._sum / np.float32(self.weight_total)
        self._sum = None
        return GradientTensor(param_count=self.capacity, values=result)

    def into_partial(self) -> PartialUpdate:
        """Hand the raw (sum, weight) upward instead of dividing; single use."""
        self._check_open()
        if self.contributions < 1:
            raise StateError("partial result on an empty accumulator")
        self._finalized = True
        if self._phantom:
            tensor = GradientTensor.phantom(self.capacity)
        else:
            tensor = GradientTensor(param_count=self.capacity, values=self._sum)
            self._sum = None
        return PartialUpdate(tensor=tensor, weight=self.weight_total)


def fedavg_flat(gradients: Sequence[GradientTensor]) -> GradientTensor:
    """Element-wise arithmetic mean over full gradients, the reference
    every topology is checked against.

    Sums in client-index order, divides once at the end.  Deliberately a
    standalone loop rather than a StreamingAccumulator call so the
    reference path stays independent of the code it validates.
    """
    if not gradients:
        raise InvalidArgumentError("fedavg needs at least one gradient")
    n = gradients[0].param_count
    for g in gradients:
        if g.is_phantom:
            raise InvalidArgumentError("fedavg_flat needs materialized gradients")
        if g.param_count != n:
            raise InvalidArgumentError("all gradients must have equal param_count")
    total = np.zeros(n, dtype=np.float32)
    for g in gradients:
        total += g.require_values()
    mean = total / np.float32(float(len(gradients)))
    return GradientTensor(param_count=n, values=mean)


def save_vector(path, tensor: GradientTensor) -> None:
    """Write `<u64 param_count><raw little-endian float32 ...>`."""
    vals = tensor.require_values()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", tensor.param_count))
        fh.write(vals.astype("<f4").tobytes())


def load_vector(path) -> GradientTensor:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<Q", fh.read(8))
        vals = np.frombuffer(fh.read(count * FLOAT_BYTES), dtype="<f4")
    if vals.size != count:
        raise InvalidArgumentError(f"truncated vector file: {path}")
    return GradientTensor(param_count=count, values=vals.astype(np.float32))
