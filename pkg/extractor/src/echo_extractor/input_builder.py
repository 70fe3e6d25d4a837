"""Network-input construction from one-cycle clips."""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .frames import CycleClip, select_frame_indices

INPUT_SIZE = 224


@dataclass(frozen=True)
class InputTensor:
    """224 x 224 x 3 array; channels are the first/middle/last cycle frames."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise ValueError(
                f"input tensor must be {INPUT_SIZE}x{INPUT_SIZE}x3, got {self.pixels.shape}"
            )


def build_input(clip: CycleClip) -> InputTensor:
    """Resize the three reference frames to 224 x 224 (bilinear) and stack as channels."""
    first, middle, last = select_frame_indices(clip.frames.shape[0])
    channels = []
    for idx in (first, middle, last):
        frame = clip.frames[idx]
        if frame.shape != (INPUT_SIZE, INPUT_SIZE):
            frame = cv2.resize(frame, (INPUT_SIZE, INPUT_SIZE), interpolation=cv2.INTER_LINEAR)
        channels.append(frame.astype(np.float32))
    return InputTensor(pixels=np.stack(channels, axis=-1))
