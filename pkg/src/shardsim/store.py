"""In-memory object store standing in for S3.

Keys follow a canonical `r{round}/{role}/...` path, every PUT/GET is
counted and timed against a transfer model, and prefix-completion
triggers queue aggregator invocations exactly once when their input set
becomes complete.  All mutations pass through one logical event queue,
so op counters and simulated durations are deterministic for a given
call sequence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple

from .errors import (
    InvalidArgumentError,
    NotFoundError,
    ProtocolViolationError,
)
from .gradients import MIB, GradientTensor, PartialUpdate

# Issuer tags let round-trip accounting split client and aggregator I/O.
ISSUER_CLIENT_UPLOAD = "client-upload"
ISSUER_AGGREGATOR = "aggregator"
ISSUER_CLIENT_READBACK = "client-readback"


class Role(str, enum.Enum):
    CLIENT_GRADIENT = "client_gradient"
    CLIENT_SHARD = "client_shard"
    LEAF_PARTIAL = "leaf_partial"
    LEVEL1_PARTIAL = "level1_partial"
    LEVEL2_PARTIAL = "level2_partial"
    ROOT_RESULT = "root_result"
    SHARD_RESULT = "shard_result"


_NEEDS_CLIENT = {Role.CLIENT_GRADIENT, Role.CLIENT_SHARD}
_NEEDS_SHARD = {Role.CLIENT_SHARD, Role.SHARD_RESULT}
_NEEDS_LEVEL = {Role.LEAF_PARTIAL, Role.LEVEL1_PARTIAL, Role.LEVEL2_PARTIAL}


@dataclass(frozen=True)
class ObjectKey:
    """Round/role-scoped key with optional client, shard, and level ids."""

    round: int
    role: Role
    client_id: Optional[int] = None
    shard_index: Optional[int] = None
    level_index: Optional[int] = None

    def __post_init__(self):
        if (self.role in _NEEDS_CLIENT) != (self.client_id is not None):
            raise InvalidArgumentError(f"role {self.role.value} and client_id mismatch")
        if (self.role in _NEEDS_SHARD) != (self.shard_index is not None):
            raise InvalidArgumentError(f"role {self.role.value} and shard_index mismatch")
        if (self.role in _NEEDS_LEVEL) != (self.level_index is not None):
            raise InvalidArgumentError(f"role {self.role.value} and level_index mismatch")

    def to_path(self) -> str:
        parts = [f"r{self.round}", self.role.value]
        if self.client_id is not None:
            parts.append(f"c{self.client_id:02d}")
        if self.shard_index is not None:
            parts.append(f"s{self.shard_index}")
        if self.level_index is not None:
            parts.append(f"l{self.level_index}")
        return "/".join(parts)

    @classmethod
    def from_path(cls, path: str) -> "ObjectKey":
        parts = path.split("/")
        if len(parts) < 2 or not parts[0].startswith("r"):
            raise InvalidArgumentError(f"malformed key path: {path!r}")
        rnd = int(parts[0][1:])
        role = Role(parts[1])
        client = shard_idx = level = None
        for part in parts[2:]:
            tag, value = part[0], part[1:]
            if tag == "c":
                client = int(value)
            elif tag == "s":
                shard_idx = int(value)
            elif tag == "l":
                level = int(value)
            else:
                raise InvalidArgumentError(f"malformed key segment {part!r} in {path!r}")
        return cls(round=rnd, role=role, client_id=client,
                   shard_index=shard_idx, level_index=level)


@dataclass(frozen=True)
class TransferModel:
    """Per-stream throughputs (MB/s) plus a fixed per-request latency."""

    read_throughput: float = 50.0
    write_throughput: float = 50.0
    per_op_latency: float = 0.05

    def __post_init__(self):
        if self.read_throughput <= 0 or self.write_throughput <= 0:
            raise InvalidArgumentError("throughputs must be strictly positive")
        if self.per_op_latency < 0:
            raise InvalidArgumentError("per_op_latency must be >= 0")

    def read_seconds(self, byte_size: int) -> float:
        return self.per_op_latency + byte_size / MIB / self.read_throughput

    def write_seconds(self, byte_size: int) -> float:
        return self.per_op_latency + byte_size / MIB / self.write_throughput


@dataclass
class StoreStats:
    puts: int = 0
    gets: int = 0
    bytes_written: int = 0
    bytes_read: int = 0
    puts_by_issuer: Dict[str, int] = field(default_factory=dict)
    gets_by_issuer: Dict[str, int] = field(default_factory=dict)

    def copy(self) -> "StoreStats":
        return StoreStats(
            puts=self.puts,
            gets=self.gets,
            bytes_written=self.bytes_written,
            bytes_read=self.bytes_read,
            puts_by_issuer=dict(self.puts_by_issuer),
            gets_by_issuer=dict(self.gets_by_issuer),
        )

    def since(self, baseline: "StoreStats") -> "StoreStats":
        """Counters accumulated after `baseline` was snapshotted."""
        return StoreStats(
            puts=self.puts - baseline.puts,
            gets=self.gets - baseline.gets,
            bytes_written=self.bytes_written - baseline.bytes_written,
            bytes_read=self.bytes_read - baseline.bytes_read,
            puts_by_issuer={
                k: v - baseline.puts_by_issuer.get(k, 0)
                for k, v in self.puts_by_issuer.items()
            },
            gets_by_issuer={
                k: v - baseline.gets_by_issuer.get(k, 0)
                for k, v in self.gets_by_issuer.items()
            },
        )


@dataclass
class Trigger:
    """Fires its action exactly once when `required_count` keys matching
    the prefix (and optional member filter) have been stored."""

    round: int
    role: Role
    action: object
    required_count: int
    shard_index: Optional[int] = None
    member_ids: Optional[FrozenSet[int]] = None
    fired: bool = False
    matched: int = 0

    def __post_init__(self):
        if self.required_count < 1:
            raise InvalidArgumentError("required_count must be >= 1")

    def identity(self) -> Tuple:
        return (self.round, self.role, self.shard_index, self.member_ids)

    def matches(self, key: ObjectKey) -> bool:
        if key.round != self.round or key.role != self.role:
            return False
        if self.shard_index is not None and key.shard_index != self.shard_index:
            return False
        if self.member_ids is not None:
            member = key.client_id if key.client_id is not None else key.level_index
            if member not in self.member_ids:
                return False
        return True


class ObjectStore:
    """Blob store with op counters, a transfer-time model, and triggers.

    In-memory by default; pass `spill_dir` to also write each blob to a
    file (raw float32 for materialized tensors, a one-line descriptor for
    phantoms) for offline inspection.
    """

    def __init__(self, transfer: Optional[TransferModel] = None,
                 spill_dir: Optional[Path] = None):
        self.transfer = transfer or TransferModel()
        self.spill_dir = Path(spill_dir) if spill_dir else None
        self._blobs: Dict[str, object] = {}
        self._keys: Dict[str, ObjectKey] = {}
        self._triggers: List[Trigger] = []
        self._fired_queue: List[object] = []
        self._stats = StoreStats()

    # -- blob plumbing -------------------------------------------------

    @staticmethod
    def _blob_bytes(blob) -> int:
        size = getattr(blob, "byte_size", None)
        if size is None:
            raise InvalidArgumentError(f"blob {type(blob).__name__} has no byte_size")
        return size

    def contains(self, key: ObjectKey) -> bool:
        return key.to_path() in self._blobs

    def keys(self) -> List[str]:
        return list(self._blobs)

    def put(self, key: ObjectKey, blob, issuer: str = ISSUER_CLIENT_UPLOAD) -> float:
        """Store a blob; returns the simulated transfer duration.

        Overwriting an existing key is a protocol bug, not an update.
        """
        path = key.to_path()
        if path in self._blobs:
            raise ProtocolViolationError(f"duplicate PUT for key {path}")
        size = self._blob_bytes(blob)
        self._blobs[path] = blob
        self._keys[path] = key
        self._stats.puts += 1
        self._stats.bytes_written += size
        self._stats.puts_by_issuer[issuer] = self._stats.puts_by_issuer.get(issuer, 0) + 1
        if self.spill_dir is not None:
            self._spill(path, blob)
        self._notify_put(key)
        return self.transfer.write_seconds(size)

    def get(self, key: ObjectKey, issuer: str = ISSUER_AGGREGATOR):
        """Fetch a blob; returns (blob, simulated duration)."""
        path = key.to_path()
        if path not in self._blobs:
            raise NotFoundError(f"no object at {path} (phase ordering bug?)")
        blob = self._blobs[path]
        size = self._blob_bytes(blob)
        self._stats.gets += 1
        self._stats.bytes_read += size
        self._stats.gets_by_issuer[issuer] = self._stats.gets_by_issuer.get(issuer, 0) + 1
        return blob, self.transfer.read_seconds(size)

    def _spill(self, path: str, blob) -> None:
        target = self.spill_dir / path
        target.parent.mkdir(parents=True, exist_ok=True)
        tensor = blob.tensor if isinstance(blob, PartialUpdate) else blob
        if isinstance(tensor, GradientTensor) and not tensor.is_phantom:
            target.write_bytes(tensor.require_values().astype("<f4").tobytes())
        else:
            target.write_text(f"phantom bytes={self._blob_bytes(blob)}\n")

    # -- triggers --------------------------------------------------------

    def register_trigger(self, trigger: Trigger) -> None:
        """Arm a trigger; fires immediately if already satisfied."""
        if any(t.identity() == trigger.identity() for t in self._triggers):
            raise InvalidArgumentError(
                f"duplicate trigger on prefix r{trigger.round}/{trigger.role.value}"
                f"{'' if trigger.shard_index is None else f'/s{trigger.shard_index}'}"
            )
        trigger.matched = sum(1 for key in self._keys.values() if trigger.matches(key))
        self._triggers.append(trigger)
        self._maybe_fire(trigger)

    def _notify_put(self, key: ObjectKey) -> None:
        for trig in self._triggers:
            if not trig.fired and trig.matches(key):
                trig.matched += 1
                self._maybe_fire(trig)

    def _maybe_fire(self, trig: Trigger) -> None:
        if not trig.fired and trig.matched >= trig.required_count:
            trig.fired = True
            self._fired_queue.append(trig.action)

    def drain_fired(self) -> List[object]:
        """Return queued trigger actions in firing order and clear the queue."""
        fired, self._fired_queue = self._fired_queue, []
        return fired

    # -- stats -----------------------------------------------------------

    def stats(self) -> StoreStats:
        return self._stats.copy()

    def reset_stats(self) -> None:
        self._stats = StoreStats()
