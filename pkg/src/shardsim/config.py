"""Experiment configuration: TOML file + CLI overrides, validated strictly.

Unknown sections or keys are rejected by name so typos fail fast.  The
merged effective configuration is echoed into every output file for
provenance.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .executor import DEFAULT_COMPUTE_THROUGHPUT, DEFAULT_COLD_START_S, PlatformLimits
from .models import DEFAULT_MATERIALIZE_THRESHOLD_MB
from .pricing import PriceSheet
from .store import TransferModel

OUTPUT_DIR_ENV = "SHARDSIM_OUTPUT_DIR"


@dataclass
class ExperimentConfig:
    topology: str = "gradsharding"
    n: int = 20
    m: int = 4
    model: Optional[str] = None
    gradient_mb: Optional[float] = None
    seed: int = 0
    repetitions: int = 1
    cold_start: bool = False

    read_throughput_mb_s: float = 50.0
    write_throughput_mb_s: float = 50.0
    per_op_latency_s: float = 0.05

    max_memory_mb: float = 10240.0
    max_timeout_s: float = 900.0
    runtime_overhead_mb: float = 450.0
    streaming_multiplier: float = 3.0

    compute_throughput_mb_s: float = DEFAULT_COMPUTE_THROUGHPUT
    cold_start_penalty_s: float = DEFAULT_COLD_START_S

    lambda_gb_second: float = PriceSheet().lambda_gb_second
    s3_put_per_op: float = PriceSheet().s3_put
    s3_get_per_op: float = PriceSheet().s3_get

    materialize_threshold_mb: float = DEFAULT_MATERIALIZE_THRESHOLD_MB
    memory_override_mb: Optional[float] = None
    output_dir: str = "."

    def transfer(self) -> TransferModel:
        return TransferModel(
            read_throughput=self.read_throughput_mb_s,
            write_throughput=self.write_throughput_mb_s,
            per_op_latency=self.per_op_latency_s,
        )

    def limits(self) -> PlatformLimits:
        return PlatformLimits(
            max_memory_mb=self.max_memory_mb,
            max_timeout_s=self.max_timeout_s,
            runtime_overhead_mb=self.runtime_overhead_mb,
            streaming_multiplier=self.streaming_multiplier,
        )

    def prices(self) -> PriceSheet:
        return PriceSheet(
            lambda_gb_second=self.lambda_gb_second,
            s3_put=self.s3_put_per_op,
            s3_get=self.s3_get_per_op,
        )

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV, self.output_dir))

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def validate(self, require_gradient: bool = True) -> "ExperimentConfig":
        if self.topology not in ("gradsharding", "lambdafl", "lifl"):
            raise ConfigError(f"topology: unknown value {self.topology!r}")
        if self.n < 1:
            raise ConfigError("n: must be >= 1")
        if self.m < 1:
            raise ConfigError("m: must be >= 1")
        if require_gradient and self.model is None and self.gradient_mb is None:
            raise ConfigError("model/gradient_mb: one of them is required")
        if self.gradient_mb is not None and self.gradient_mb <= 0:
            raise ConfigError("gradient_mb: must be > 0")
        if self.repetitions < 1:
            raise ConfigError("repetitions: must be >= 1")
        for name in ("read_throughput_mb_s", "write_throughput_mb_s",
                     "compute_throughput_mb_s", "streaming_multiplier",
                     "max_memory_mb", "max_timeout_s", "runtime_overhead_mb"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be > 0")
        for name in ("per_op_latency_s", "cold_start_penalty_s",
                     "lambda_gb_second", "s3_put_per_op", "s3_get_per_op"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        if self.memory_override_mb is not None and self.memory_override_mb < 128:
            raise ConfigError("memory_override_mb: below platform minimum 128")
        return self


# Mapping of config-file sections to the flat field names above.
_SECTIONS: Dict[str, Dict[str, str]] = {
    "experiment": {
        "topology": "topology", "n": "n", "m": "m", "model": "model",
        "gradient_mb": "gradient_mb", "seed": "seed",
        "repetitions": "repetitions", "cold_start": "cold_start",
    },
    "transfer": {
        "read_throughput_mb_s": "read_throughput_mb_s",
        "write_throughput_mb_s": "write_throughput_mb_s",
        "per_op_latency_s": "per_op_latency_s",
    },
    "limits": {
        "max_memory_mb": "max_memory_mb", "max_timeout_s": "max_timeout_s",
        "runtime_overhead_mb": "runtime_overhead_mb",
        "streaming_multiplier": "streaming_multiplier",
    },
    "compute": {
        "throughput_mb_s": "compute_throughput_mb_s",
        "cold_start_penalty_s": "cold_start_penalty_s",
    },
    "prices": {
        "lambda_gb_second": "lambda_gb_second",
        "s3_put_per_op": "s3_put_per_op",
        "s3_get_per_op": "s3_get_per_op",
    },
    "execution": {
        "materialize_threshold_mb": "materialize_threshold_mb",
        "memory_override_mb": "memory_override_mb",
        "output_dir": "output_dir",
    },
}


def load_config_file(path: Path) -> Dict[str, Any]:
    """Parse a TOML config file into flat field overrides.

    Unknown sections/keys raise ConfigError naming the offender.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file: invalid TOML: {exc}") from exc

    flat: Dict[str, Any] = {}
    for section, values in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"config file: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"config file: [{section}] must be a table")
        for key, value in values.items():
            try:
                flat[_SECTIONS[section][key]] = value
            except KeyError:
                raise ConfigError(
                    f"config file: unknown field {key!r} in [{section}]"
                ) from None
    return flat


def build_config(file_overrides: Dict[str, Any],
                 cli_overrides: Dict[str, Any],
                 require_gradient: bool = True) -> ExperimentConfig:
    """Defaults < config file < CLI flags, then validate."""
    cfg = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    for source, overrides in (("config file", file_overrides), ("flag", cli_overrides)):
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"{source}: unknown field {key!r}")
            if value is not None:
                setattr(cfg, key, value)
    return cfg.validate(require_gradient=require_gradient)
