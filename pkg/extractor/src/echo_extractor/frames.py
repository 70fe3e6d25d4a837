"""One-cycle clips and reference-frame selection."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

VIEWS = ("A2C", "A4C")
VIDEO_SUFFIXES = (".avi", ".mp4", ".mov", ".mkv")


class ClipError(ValueError):
    """Raised when a recording cannot be read or violates the layout."""


@dataclass(frozen=True)
class CycleClip:
    """Ordered grayscale frames of one cardiac cycle for one view."""

    patient_id: str
    view: str
    label: int
    frames: np.ndarray  # T x H x W, float32 in [0, 1]

    def __post_init__(self):
        if self.view not in VIEWS:
            raise ClipError(f"view must be one of {VIEWS}, got {self.view!r}")
        if self.label not in (0, 1):
            raise ClipError(f"label must be 0 or 1, got {self.label!r}")
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ClipError(
                f"{self.patient_id}/{self.view}: need T x H x W frames with T >= 1, "
                f"got shape {self.frames.shape}"
            )


def select_frame_indices(frame_count: int) -> tuple[int, int, int]:
    """Indices of the first, middle, and last frame of a cycle.

    For clips shorter than three frames the indices repeat.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    return 0, (frame_count - 1) // 2, frame_count - 1


def _to_unit_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2GRAY)
    return img.astype(np.float32) / 255.0


def load_clip_from_frames(frame_dir: Path, patient_id: str, view: str, label: int) -> CycleClip:
    """Read `frame_*.png` files in name order from one view directory."""
    paths = sorted(frame_dir.glob("frame_*.png"))
    if not paths:
        raise ClipError(f"{frame_dir}: no frame_*.png files")
    frames = []
    for p in paths:
        img = cv2.imread(str(p), cv2.IMREAD_GRAYSCALE)
        if img is None:
            raise ClipError(f"{p}: unreadable image")
        frames.append(_to_unit_gray(img))
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ClipError(f"{frame_dir}: frames have mixed dimensions {sorted(shapes)}")
    return CycleClip(patient_id=patient_id, view=view, label=label, frames=np.stack(frames))


def load_clip_from_video(video_path: Path, patient_id: str, view: str, label: int) -> CycleClip:
    """Decode a single-cycle video file into grayscale frames."""
    cap = cv2.VideoCapture(str(video_path))
    if not cap.isOpened():
        raise ClipError(f"{video_path}: cannot open video")
    frames = []
    try:
        while True:
            ok, img = cap.read()
            if not ok:
                break
            frames.append(_to_unit_gray(img))
    finally:
        cap.release()
    if not frames:
        raise ClipError(f"{video_path}: no decodable frames")
    return CycleClip(patient_id=patient_id, view=view, label=label, frames=np.stack(frames))


def load_labels(input_root: Path) -> dict[str, int]:
    """Parse labels.csv (patient_id,label) at the input root."""
    labels_path = input_root / "labels.csv"
    if not labels_path.exists():
        raise ClipError(f"{labels_path}: missing labels file (patient_id,label)")
    labels: dict[str, int] = {}
    lines = labels_path.read_text(encoding="utf-8").strip().split("\n")
    if not lines or lines[0] != "patient_id,label":
        raise ClipError(f"{labels_path}: header must be patient_id,label")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise ClipError(f"{labels_path}:{lineno}: expected patient_id,0|1")
        labels[parts[0]] = int(parts[1])
    return labels


def discover_clips(input_root: Path) -> list[CycleClip]:
    """Walk `<patient>/<view>` frame directories or `<patient>/<view>.<ext>` videos.

    Every listed patient must provide both views; labels come from labels.csv.
    """
    input_root = Path(input_root)
    labels = load_labels(input_root)
    clips: list[CycleClip] = []
    for patient_id in sorted(labels):
        patient_dir = input_root / patient_id
        if not patient_dir.is_dir():
            raise ClipError(f"{patient_dir}: missing directory for labelled patient")
        for view in VIEWS:
            frame_dir = patient_dir / view
            videos = [patient_dir / f"{view}{ext}" for ext in VIDEO_SUFFIXES]
            video = next((v for v in videos if v.exists()), None)
            if frame_dir.is_dir():
                clips.append(load_clip_from_frames(frame_dir, patient_id, view, labels[patient_id]))
            elif video is not None:
                clips.append(load_clip_from_video(video, patient_id, view, labels[patient_id]))
            else:
                raise ClipError(f"patient {patient_id!r} is missing view {view}")
    return clips
