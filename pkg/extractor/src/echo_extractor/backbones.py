"""Pretrained feature backbones behind a minimal protocol.

The three ImageNet networks produce global-average-pooled penultimate
activations: 1024 features from DenseNet-121 and 2048 each from Inception-v3
and ResNet-50. Anything exposing (name, dim, extract) can stand in, which is
how the tests run without downloaded weights.
"""
from __future__ import annotations

from typing import Protocol

import numpy as np

from .input_builder import InputTensor

BACKBONE_ORDER = ("densenet121", "inception_v3", "resnet50")
BACKBONE_DIMS = {"densenet121": 1024, "inception_v3": 2048, "resnet50": 2048}

# canonical ImageNet channel statistics shared by all three torchvision models
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class BackboneLoadError(RuntimeError):
    """Raised when a pretrained model cannot be loaded in this environment."""


class Backbone(Protocol):
    name: str
    dim: int

    def extract(self, tensor: InputTensor) -> np.ndarray: ...


class TorchvisionBackbone:
    """torchvision model with its classifier replaced by the identity."""

    def __init__(self, name: str, weights: str = "imagenet", device: str = "cpu", seed: int = 0):
        import torch
        import torchvision.models as tvm

        if name not in BACKBONE_DIMS:
            raise ValueError(f"unknown backbone {name!r}")
        self.name = name
        self.dim = BACKBONE_DIMS[name]
        self._torch = torch
        ctors = {
            "densenet121": (tvm.densenet121, getattr(tvm, "DenseNet121_Weights", None)),
            "inception_v3": (tvm.inception_v3, getattr(tvm, "Inception_V3_Weights", None)),
            "resnet50": (tvm.resnet50, getattr(tvm, "ResNet50_Weights", None)),
        }
        ctor, weight_enum = ctors[name]
        if weights == "imagenet":
            try:
                net = ctor(weights=weight_enum.IMAGENET1K_V1)
            except Exception as exc:
                raise BackboneLoadError(
                    f"cannot load pretrained weights for {name}: {exc}"
                ) from exc
        elif weights == "random":
            torch.manual_seed(seed)
            net = ctor(weights=None, init_weights=False) if name == "inception_v3" else ctor(weights=None)
        else:
            raise ValueError(f"weights must be 'imagenet' or 'random', got {weights!r}")
        if hasattr(net, "fc"):
            net.fc = torch.nn.Identity()
        if hasattr(net, "classifier"):
            net.classifier = torch.nn.Identity()
        net.eval()
        self._device = torch.device(device)
        self._net = net.to(self._device)

    def extract(self, tensor: InputTensor) -> np.ndarray:
        torch = self._torch
        x = torch.from_numpy(np.ascontiguousarray(tensor.pixels)).permute(2, 0, 1)
        mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
        x = ((x - mean) / std).unsqueeze(0).to(self._device)
        with torch.no_grad():
            out = self._net(x)
        vec = out.squeeze(0).cpu().numpy().astype(np.float64)
        if vec.shape != (self.dim,):
            raise RuntimeError(f"{self.name}: expected {self.dim} features, got {vec.shape}")
        return vec


def load_backbones(device: str = "cpu", weights: str = "imagenet", seed: int = 0) -> list[Backbone]:
    """The three networks in concatenation order."""
    return [TorchvisionBackbone(name, weights=weights, device=device, seed=seed)
            for name in BACKBONE_ORDER]
