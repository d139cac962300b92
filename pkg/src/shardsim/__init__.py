"""Deterministic simulator for serverless federated-learning gradient
aggregation: gradient sharding algebra, a simulated object store and
function executor, three aggregation topologies, and cost analytics."""

from .errors import (
    ConfigError,
    InfeasibleConfigError,
    InternalInvariantError,
    InvalidArgumentError,
    NotFoundError,
    OutOfMemoryError,
    PhantomAccessError,
    PhaseError,
    ProtocolViolationError,
    ShardSimError,
    StateError,
    TimeoutExceededError,
)
from .gradients import (
    GradientTensor,
    PartialUpdate,
    ShardPlan,
    StreamingAccumulator,
    concat,
    fedavg_flat,
    load_vector,
    save_vector,
    shard,
)
from .store import ObjectKey, ObjectStore, Role, StoreStats, TransferModel, Trigger
from .executor import (
    AggregationTask,
    FeasibilityVerdict,
    FunctionExecutor,
    FunctionSpec,
    InvocationRecord,
    PlatformLimits,
    VirtualClock,
    check_feasibility,
    collect_peak_memory,
    compute_time_model,
    estimate_peak_memory,
    provision,
    streaming_lower_bound,
)
from .topology import (
    GRADSHARDING,
    LAMBDAFL,
    LIFL,
    RoundMetrics,
    RoundPlan,
    S3Ops,
    SweepPoint,
    Topology,
    execute_round,
    lambda_fl_shape,
    lifl_shape,
    plan,
    predicted_s3_ops,
    sweep,
)
from .pricing import (
    CostReport,
    IdleReport,
    PriceSheet,
    cost_from_counts,
    cost_of_round,
    feasibility_threshold,
    idle_ratio,
)
from .models import MODEL_REGISTRY, ModelSpec, gradient_template, make_clients

__version__ = "0.1.0"
