"""Built-in model registry and client-gradient generation.

Gradient sizes and nominal parameter counts follow the published
footprints of each architecture; arbitrary sizes run as phantom tensors
via `--gradient-mb`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

from .errors import InvalidArgumentError
from .gradients import GradientTensor, mb_to_params

# Gradients at or below this size are materialized with real float32
# data; anything larger runs as a phantom so desk machines never
# allocate multi-GB arrays.
DEFAULT_MATERIALIZE_THRESHOLD_MB = 64.0


@dataclass(frozen=True)
class ModelSpec:
    name: str
    gradient_mb: float
    param_count: int


MODEL_REGISTRY: Dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec("resnet18", 42.7, 11_200_000),
        ModelSpec("vgg16", 512.3, 134_000_000),
        ModelSpec("gpt2-medium", 1354.0, 355_000_000),
        ModelSpec("gpt2-large", 2953.0, 774_000_000),
        ModelSpec("synthetic-5gb", 5120.0, 1_340_000_000),
    )
}


def resolve_model(name: str) -> ModelSpec:
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown model {name!r}; available: {', '.join(sorted(MODEL_REGISTRY))}"
        ) from None


def gradient_template(gradient_mb: float, materialize: bool,
                      param_count: int | None = None) -> GradientTensor:
    """Template tensor for planning a round of the given size.

    Phantom templates size their parameter count from the requested MB so
    byte accounting matches the configured size exactly; materialized
    runs use the true parameter count.
    """
    if gradient_mb <= 0:
        raise InvalidArgumentError("gradient_mb must be > 0")
    if materialize:
        count = param_count if param_count is not None else mb_to_params(gradient_mb)
        return GradientTensor.from_seed(count, seed=0)
    return GradientTensor.phantom_mb(gradient_mb)


def make_clients(template: GradientTensor, n_clients: int,
                 seed: int) -> List[GradientTensor]:
    """N client gradients shaped like the template.

    Materialized clients draw from per-client seeds derived from `seed`;
    phantom templates yield phantom clients of identical size.
    """
    if n_clients < 1:
        raise InvalidArgumentError("need at least one client")
    if template.is_phantom:
        return [GradientTensor.phantom(template.param_count) for _ in range(n_clients)]
    return [
        GradientTensor.from_seed(template.param_count, seed=seed * 100_003 + i)
        for i in range(n_clients)
    ]
