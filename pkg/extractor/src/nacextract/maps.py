"""Gradient-based activation maps at input resolution.

A channel of a convolutional layer acts as an implicit part detector, but
its output grid is coarse. Backpropagating the channel's summed output to
the input pixels yields a map at full input resolution; its strongest
response localizes what the channel fired on.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import ConfigError
from .models import resolve_layer

ZERO_OUTPUT_THRESHOLD = 1e-12


class _Capture:
    """Forward hook holding the layer output of the current pass."""

    def __init__(self, layer: nn.Module):
        self.output: torch.Tensor | None = None
        self._handle = layer.register_forward_hook(self._hook)

    def _hook(self, module, inputs, output):
        self.output = output

    def close(self) -> None:
        self._handle.remove()


def layer_output_with_graph(
    model: nn.Module, batch: torch.Tensor, layer_name: str
) -> tuple[torch.Tensor, torch.Tensor]:
    """Run a forward pass; returns (input with grad, layer output).

    The output keeps its autograd graph so per-channel gradients can be
    taken afterwards. Raises ConfigError when the layer does not produce
    spatial feature maps, which would mean it sits past the convolutional
    part of the network.
    """
    layer = resolve_layer(model, layer_name)
    batch = batch.detach().requires_grad_(True)
    capture = _Capture(layer)
    try:
        model(batch)
    finally:
        capture.close()
    output = capture.output
    if output is None:
        raise ConfigError(f"layer {layer_name!r} was never executed")
    if output.dim() != 4:
        raise ConfigError(
            f"layer {layer_name!r} must produce (batch, channels, h, w) "
            f"feature maps, got shape {tuple(output.shape)}"
        )
    return batch, output


def map_from_gradient(gradient: torch.Tensor) -> np.ndarray:
    """Collapse an input gradient (C, H, W) to one map (H, W).

    Single-channel inputs keep the signed gradient; for color inputs the
    absolute per-channel maps are added.
    """
    if gradient.shape[0] == 1:
        collapsed = gradient[0]
    else:
        collapsed = gradient.abs().sum(dim=0)
    return collapsed.detach().cpu().numpy()


def activation_map(
    model: nn.Module, image: torch.Tensor, layer_name: str, channel: int
) -> np.ndarray:
    """Input-resolution activation map of one channel for one image.

    ``image`` is (C, H, W); the result is (H, W): the gradient of the
    channel's summed layer output with respect to the input pixels,
    computed by a single backward pass.
    """
    batch, output = layer_output_with_graph(model, image.unsqueeze(0), layer_name)
    if not 0 <= channel < output.shape[1]:
        raise ConfigError(
            f"channel {channel} out of range for layer {layer_name!r} "
            f"with {output.shape[1]} channels"
        )
    (gradient,) = torch.autograd.grad(output[0, channel].sum(), batch)
    return map_from_gradient(gradient[0])


def peak_location(activation: np.ndarray, side: int) -> tuple[float, float]:
    """Argmax of |map| as an (x, y) point normalized to [0,1]^2.

    Ties resolve to the lowest row, then the lowest column; corners map to
    exactly 0 and 1 because indices divide by (side - 1).
    """
    flat_index = int(np.abs(activation).argmax())
    row, col = divmod(flat_index, activation.shape[1])
    denominator = max(side - 1, 1)
    return col / denominator, row / denominator
