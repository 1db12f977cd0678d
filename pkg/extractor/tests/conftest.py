import numpy as np
import pytest
import torch

from nacextract import ToyCnn


@pytest.fixture
def gray_model():
    """Double-precision single-channel toy network for gradient checks."""
    return ToyCnn(in_channels=1, out_channels=6, seed=3).double()


@pytest.fixture
def gray_image():
    generator = torch.Generator().manual_seed(11)
    return torch.rand(1, 32, 32, generator=generator, dtype=torch.double)


def random_rgb_arrays(count, height=40, width=50):
    return [
        (f"im-{i}", np.random.default_rng(100 + i).random((height, width, 3)).astype(np.float32))
        for i in range(count)
    ]


def kill_channel(model, channel, bias=-50.0):
    """Force one output channel of the last convolution permanently dead."""
    with torch.no_grad():
        model.conv3.weight[channel] = 0.0
        model.conv3.bias[channel] = bias
    return model
