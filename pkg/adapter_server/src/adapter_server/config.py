"""Server configuration and attention-layer selection."""

from dataclasses import dataclass


def resolve_attention_layer(n_layers: int, override: int | None = None) -> int:
    """Pick the layer whose attention scores paths: floor(n/2) + 2, 0-indexed.

    Mid-stack layers carry the most usable relevance signal; the +2 offset is
    part of the selection rule. An override must still index a real layer.
    """
    layer = override if override is not None else n_layers // 2 + 2
    if not 0 <= layer < n_layers:
        raise ValueError(
            f"attention layer {layer} out of range for a {n_layers}-layer model; "
            "pass an explicit override"
        )
    return layer


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    device: str = "cpu"
    attention_layer_override: int | None = None
    max_context_tokens: int = 2048
