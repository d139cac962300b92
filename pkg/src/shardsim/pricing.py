"""Dollar-cost and idle-ratio analytics over round metrics.

All constants flow through PriceSheet so other regions or providers can
be modeled by swapping the sheet; nothing here hardcodes a price.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgumentError
from .executor import DEFAULT_LIMITS, PlatformLimits
from .topology import RoundMetrics


@dataclass(frozen=True)
class PriceSheet:
    """Serverless compute and object-store request pricing."""

    lambda_gb_second: float = 0.0000166667   # $ per GB-second
    s3_put: float = 0.005 / 1000.0           # $ per PUT request
    s3_get: float = 0.0004 / 1000.0          # $ per GET request

    def __post_init__(self):
        if min(self.lambda_gb_second, self.s3_put, self.s3_get) < 0:
            raise InvalidArgumentError("prices must be non-negative")


DEFAULT_PRICES = PriceSheet()


@dataclass(frozen=True)
class CostReport:
    lambda_cost: float
    s3_put_cost: float
    s3_get_cost: float

    @property
    def s3_cost(self) -> float:
        return self.s3_put_cost + self.s3_get_cost

    @property
    def total(self) -> float:
        return self.lambda_cost + self.s3_cost

    @property
    def per_1k_rounds(self) -> float:
        return 1000.0 * self.total

    def to_dict(self) -> dict:
        return {
            "lambda_cost": self.lambda_cost,
            "s3_put_cost": self.s3_put_cost,
            "s3_get_cost": self.s3_get_cost,
            "s3_cost": self.s3_cost,
            "total_per_round": self.total,
            "per_1k_rounds": self.per_1k_rounds,
        }


def cost_from_counts(gb_seconds: float, puts: int, gets: int,
                     prices: PriceSheet = DEFAULT_PRICES) -> CostReport:
    """Price a round from its raw billing counters."""
    if gb_seconds < 0 or puts < 0 or gets < 0:
        raise InvalidArgumentError("billing counters must be non-negative")
    return CostReport(
        lambda_cost=gb_seconds * prices.lambda_gb_second,
        s3_put_cost=puts * prices.s3_put,
        s3_get_cost=gets * prices.s3_get,
    )


def cost_of_round(metrics: RoundMetrics,
                  prices: PriceSheet = DEFAULT_PRICES) -> CostReport:
    """Lambda GB-seconds plus full round-trip S3 request cost (client
    uploads, aggregator reads/writes, and client read-back)."""
    return cost_from_counts(metrics.billed_gb_seconds, metrics.stats.puts,
                            metrics.stats.gets, prices)


@dataclass(frozen=True)
class IdleReport:
    t_train_ms: float
    t_agg_ms: float
    idle_ratio: float

    @property
    def idle_pct(self) -> float:
        return 100.0 * self.idle_ratio


def idle_ratio(t_train_ms: float, t_agg_ms: float) -> IdleReport:
    """Fraction of a round the aggregation server sits idle while
    clients train: t_train / (t_train + t_agg)."""
    if t_train_ms < 0 or t_agg_ms < 0:
        raise InvalidArgumentError("times must be >= 0")
    if t_train_ms == 0 and t_agg_ms == 0:
        raise InvalidArgumentError("at least one of t_train, t_agg must be > 0")
    ratio = t_train_ms / (t_train_ms + t_agg_ms)
    return IdleReport(t_train_ms=t_train_ms, t_agg_ms=t_agg_ms, idle_ratio=ratio)


def feasibility_threshold(limits: PlatformLimits = DEFAULT_LIMITS) -> float:
    """Largest full-gradient MB a single streaming aggregator can hold:
    (max_memory - overhead) / multiplier."""
    return (limits.max_memory_mb - limits.runtime_overhead_mb) / limits.streaming_multiplier
