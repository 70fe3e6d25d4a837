"""Feature extraction for two-view echo recordings.

Selects first/middle/last frames of a one-cycle clip, stacks them as the
three channels of a 224 x 224 input, runs DenseNet-121 / Inception-v3 /
ResNet-50, and emits the concatenated 5120-dim vectors as a CSV the
classifier package ingests directly.
"""
from .backbones import (
    BACKBONE_DIMS,
    BACKBONE_ORDER,
    Backbone,
    BackboneLoadError,
    TorchvisionBackbone,
    load_backbones,
)
from .extract import BLOCK_BOUNDARIES, FEATURE_DIM, clip_features, emit_dataset, extract_features
from .frames import (
    ClipError,
    CycleClip,
    discover_clips,
    load_clip_from_frames,
    load_clip_from_video,
    select_frame_indices,
)
from .input_builder import INPUT_SIZE, InputTensor, build_input

__all__ = [name for name in dir() if not name.startswith("_")]
