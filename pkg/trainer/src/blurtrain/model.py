"""Regression backbones with a two-unit sigmoid head.

``toy`` is a small strided conv stack meant for 64x64 crops on a CPU.
``paper`` wires the standard VGG16 (trained from scratch, 224x224 input)
behind the same two-output head; it exists as a configuration preset and is
not exercised by the test suite.
"""

from __future__ import annotations

import torch
from torch import nn

BACKBONES = ("toy", "paper")


class ToyRegressor(nn.Module):
    # GroupNorm rather than BatchNorm: eval-mode loss tracks train-mode loss
    # closely, which keeps best-checkpoint selection stable at small scale
    def __init__(self, channels: int = 3):
        super().__init__()
        def block(cin, cout, kernel, stride):
            return nn.Sequential(
                nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2),
                nn.GroupNorm(8, cout),
                nn.ReLU(inplace=True),
            )
        self.features = nn.Sequential(
            block(channels, 32, 5, 2),
            block(32, 64, 3, 2),
            block(64, 128, 3, 2),
            block(128, 160, 3, 2),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(160, 2),
            nn.Sigmoid(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.pool(self.features(x)))


def _vgg16_regressor() -> nn.Module:
    from torchvision.models import vgg16

    model = vgg16(weights=None)
    model.classifier[-1] = nn.Linear(model.classifier[-1].in_features, 2)
    return nn.Sequential(model, nn.Sigmoid())


def build_model(backbone: str, channels: int = 3) -> nn.Module:
    if backbone == "toy":
        return ToyRegressor(channels)
    if backbone == "paper":
        return _vgg16_regressor()
    raise ValueError(f"unknown backbone {backbone!r}; choose from {BACKBONES}")
