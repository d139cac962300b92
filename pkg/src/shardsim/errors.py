"""Exception hierarchy shared by all simulator modules."""


class ShardSimError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ShardSimError, ValueError):
    """A caller passed arguments that violate an operation's contract."""


class StateError(ShardSimError, RuntimeError):
    """An object was used in a lifecycle order its contract forbids."""


class PhantomAccessError(StateError):
    """Element data was requested from a size-only (phantom) tensor."""


class NotFoundError(ShardSimError, KeyError):
    """A GET was issued for a key the store does not hold.

    Almost always a topology-phase ordering bug: a reader ran before
    its producer wrote.
    """


class ProtocolViolationError(ShardSimError):
    """The round protocol was broken, e.g. a key was written twice."""


class OutOfMemoryError(ShardSimError):
    """Estimated peak memory exceeds the function's allocation."""

    def __init__(self, required_mb: float, allocated_mb: float):
        self.required_mb = required_mb
        self.allocated_mb = allocated_mb
        super().__init__(
            f"needs {required_mb:.0f} MB but only {allocated_mb:.0f} MB allocated"
        )


class TimeoutExceededError(ShardSimError):
    """Simulated invocation duration exceeded the function timeout."""

    def __init__(self, duration_s: float, timeout_s: float):
        self.duration_s = duration_s
        self.timeout_s = timeout_s
        super().__init__(f"ran {duration_s:.1f} s, timeout is {timeout_s:.1f} s")


class InfeasibleConfigError(ShardSimError):
    """A plan requires more memory than the platform can provision."""

    def __init__(self, required_mb: float, limit_mb: float, detail: str = ""):
        self.required_mb = required_mb
        self.limit_mb = limit_mb
        msg = f"requires {required_mb:.0f} MB per aggregator, platform maximum is {limit_mb:.0f} MB"
        if detail:
            msg = f"{detail}: {msg}"
        super().__init__(msg)


class PhaseError(ShardSimError):
    """An invocation failed; carries the phase and function identity."""

    def __init__(self, phase: str, function: str, cause: Exception):
        self.phase = phase
        self.function = function
        self.cause = cause
        super().__init__(f"phase {phase!r}, function {function!r}: {cause}")


class ConfigError(ShardSimError):
    """Experiment configuration failed validation."""


class InternalInvariantError(ShardSimError):
    """A cross-module invariant the simulator guarantees was broken."""
