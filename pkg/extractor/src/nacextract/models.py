"""Model construction and layer lookup.

Model identifiers:

- ``toy[:seed[:channels]]``: a small three-convolution network with seeded
  random weights, used for self-contained runs and tests.
- ``torchvision:<name>``: any torchvision classification architecture,
  randomly initialized unless a state-dict path is supplied.

The extraction layer must produce spatial feature maps (a 4D output); that
keeps it in the convolutional part of the network, ahead of any
fully-connected head.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ConfigError


class ToyCnn(nn.Module):
    """Three-convolution network with ReLUs and a pooled tail.

    Layer names, in order: conv1, relu1, conv2, relu2, conv3, relu3, pool.
    The stride-2 convolution and the pooling make every layer from conv2 on
    spatially coarser than the input.
    """

    def __init__(self, in_channels: int = 3, out_channels: int = 8, seed: int = 0):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, 6, kernel_size=3, padding=1)
        self.relu1 = nn.ReLU()
        self.conv2 = nn.Conv2d(6, 8, kernel_size=3, stride=2, padding=1)
        self.relu2 = nn.ReLU()
        self.conv3 = nn.Conv2d(8, out_channels, kernel_size=3, padding=1)
        self.relu3 = nn.ReLU()
        self.pool = nn.MaxPool2d(2)
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in (self.conv1, self.conv2, self.conv3):
                module.weight.copy_(
                    torch.randn(module.weight.shape, generator=generator) * 0.4
                )
                module.bias.copy_(
                    torch.randn(module.bias.shape, generator=generator) * 0.1
                )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.relu1(self.conv1(x))
        x = self.relu2(self.conv2(x))
        x = self.relu3(self.conv3(x))
        return self.pool(x)


def build_model(
    identifier: str,
    in_channels: int = 3,
    weights_path: str | None = None,
) -> nn.Module:
    """Instantiate the model named by the identifier, in eval mode."""
    if identifier == "toy" or identifier.startswith("toy:"):
        fields = identifier.split(":")
        seed = int(fields[1]) if len(fields) > 1 else 0
        channels = int(fields[2]) if len(fields) > 2 else 8
        model = ToyCnn(in_channels=in_channels, out_channels=channels, seed=seed)
    elif identifier.startswith("torchvision:"):
        try:
            import torchvision.models as zoo
        except ImportError as exc:
            raise ConfigError("torchvision is not installed") from exc
        name = identifier.split(":", 1)[1]
        factory = getattr(zoo, name, None)
        if factory is None:
            raise ConfigError(f"unknown torchvision model {name!r}")
        model = factory(weights=None)
    else:
        raise ConfigError(
            f"unknown model identifier {identifier!r}; expected "
            f"'toy[:seed[:channels]]' or 'torchvision:<name>'"
        )
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    return model


def resolve_layer(model: nn.Module, layer_name: str) -> nn.Module:
    modules = dict(model.named_modules())
    if layer_name not in modules or layer_name == "":
        known = ", ".join(sorted(name for name in modules if name))
        raise ConfigError(f"unknown layer {layer_name!r}; available: {known}")
    return modules[layer_name]
