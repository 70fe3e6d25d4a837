"""Per-view feature vectors and dataset emission in the classifier's CSV schema."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .backbones import BACKBONE_DIMS, BACKBONE_ORDER, Backbone
from .frames import VIEWS, ClipError, CycleClip
from .input_builder import build_input

FEATURE_DIM = sum(BACKBONE_DIMS.values())  # 1024 + 2048 + 2048 = 5120
BLOCK_BOUNDARIES = (1024, 3072)


def extract_features(tensor, backbones: Sequence[Backbone]) -> np.ndarray:
    """Concatenated backbone features in fixed order (densenet, inception, resnet)."""
    names = tuple(b.name for b in backbones)
    if names != BACKBONE_ORDER:
        raise ValueError(f"backbones must be ordered {BACKBONE_ORDER}, got {names}")
    parts = []
    for backbone in backbones:
        vec = np.asarray(backbone.extract(tensor), dtype=np.float64)
        if vec.shape != (backbone.dim,):
            raise RuntimeError(f"{backbone.name}: expected ({backbone.dim},), got {vec.shape}")
        parts.append(vec)
    return np.concatenate(parts)


def clip_features(clip: CycleClip, backbones: Sequence[Backbone]) -> np.ndarray:
    return extract_features(build_input(clip), backbones)


def emit_dataset(clips: Sequence[CycleClip], out_path, backbones: Sequence[Backbone]) -> int:
    """Write one CSV row per (patient, view); returns the number of patients.

    The schema matches the classifier's loader byte for byte: header
    patient_id,label,view,f0000.., floats with 17 significant digits, LF
    endings, A2C row before A4C per patient.
    """
    by_patient: dict[str, dict[str, CycleClip]] = defaultdict(dict)
    order: list[str] = []
    for clip in clips:
        if clip.patient_id not in by_patient:
            order.append(clip.patient_id)
        if clip.view in by_patient[clip.patient_id]:
            raise ClipError(f"patient {clip.patient_id!r} has duplicate {clip.view} clips")
        prior = by_patient[clip.patient_id]
        if prior and next(iter(prior.values())).label != clip.label:
            raise ClipError(f"patient {clip.patient_id!r} has disagreeing labels across views")
        by_patient[clip.patient_id][clip.view] = clip

    for pid in order:
        missing = [v for v in VIEWS if v not in by_patient[pid]]
        if missing:
            raise ClipError(f"patient {pid!r} is missing view(s) {', '.join(missing)}")

    dim = sum(b.dim for b in backbones)
    header = ["patient_id", "label", "view"] + [f"f{i:04d}" for i in range(dim)]
    lines = [",".join(header)]
    for pid in order:
        for view in VIEWS:
            clip = by_patient[pid][view]
            vec = clip_features(clip, backbones)
            values = [f"{x:.17g}" for x in vec]
            lines.append(",".join([pid, str(clip.label), view] + values))
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(order)
