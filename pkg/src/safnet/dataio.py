"""Feature CSV ingestion/emission and synthetic two-view datasets.

File schema (UTF-8, comma-separated, LF endings): one row per (patient, view),
header `patient_id,label,view,f0000,f0001,...`; view is exactly "A2C" or
"A4C", label exactly "0" or "1". Floats are written with 17 significant
digits so write -> load round-trips are bit-exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import Matrix
from .model import MultiViewSample

VIEWS = ("A2C", "A4C")


class IngestionError(ValueError):
    """Raised when a feature file violates the schema."""


@dataclass(frozen=True)
class Dataset:
    samples: tuple[MultiViewSample, ...]
    d_in: int | None  # None flags an empty (header-only) file

    def labels(self) -> list[int]:
        return [s.label for s in self.samples]

    def __len__(self) -> int:
        return len(self.samples)


def _feature_columns(d: int) -> list[str]:
    return [f"f{i:04d}" for i in range(d)]


def load_feature_csv(path) -> Dataset:
    """Parse and pair the two view rows of every patient.

    A2C fills column 0 and A4C column 1 of each sample's feature matrix;
    sample order follows first appearance in the file.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: file is empty, expected a header row")
        if len(header) < 3 or header[:3] != ["patient_id", "label", "view"]:
            raise IngestionError(f"{path}: header must start with patient_id,label,view")
        d = len(header) - 3
        if header[3:] != _feature_columns(d):
            raise IngestionError(f"{path}: feature columns must be f0000..f{max(d - 1, 0):04d}")

        order: list[str] = []
        rows: dict[str, dict[str, np.ndarray]] = {}
        labels: dict[str, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3 + d:
                raise IngestionError(f"{path}:{lineno}: expected {3 + d} fields, got {len(row)}")
            pid, label_s, view = row[0], row[1], row[2]
            if label_s not in ("0", "1"):
                raise IngestionError(f"{path}:{lineno}: label must be 0 or 1, got {label_s!r}")
            if view not in VIEWS:
                raise IngestionError(f"{path}:{lineno}: view must be A2C or A4C, got {view!r}")
            try:
                feats = np.array([float(x) for x in row[3:]], dtype=np.float64)
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: bad feature value ({exc})") from None
            if d and not np.all(np.isfinite(feats)):
                raise IngestionError(f"{path}:{lineno}: non-finite feature for patient {pid!r}")
            if pid not in rows:
                rows[pid] = {}
                order.append(pid)
                labels[pid] = int(label_s)
            elif labels[pid] != int(label_s):
                raise IngestionError(f"{path}: patient {pid!r} has disagreeing labels")
            if view in rows[pid]:
                raise IngestionError(f"{path}: patient {pid!r} has duplicate {view} rows")
            rows[pid][view] = feats

    if not order:
        return Dataset(samples=(), d_in=None)
    if d == 0:
        raise IngestionError(f"{path}: no feature columns")
    samples = []
    for pid in order:
        missing = [v for v in VIEWS if v not in rows[pid]]
        if missing:
            raise IngestionError(f"{path}: patient {pid!r} is missing view(s) {', '.join(missing)}")
        features = Matrix(np.column_stack([rows[pid]["A2C"], rows[pid]["A4C"]]))
        samples.append(MultiViewSample(patient_id=pid, label=labels[pid], features=features))
    return Dataset(samples=tuple(samples), d_in=d)


def write_feature_csv(dataset: Dataset, path) -> None:
    """Emit two rows per patient (A2C then A4C) in the fixed schema."""
    if dataset.d_in is None:
        raise ValueError("cannot write a dataset with undefined feature dimension")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "label", "view"] + _feature_columns(dataset.d_in))
        for sample in dataset.samples:
            for col, view in enumerate(VIEWS):
                values = [f"{x:.17g}" for x in sample.features.data[:, col]]
                writer.writerow([sample.patient_id, str(sample.label), view] + values)


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int
    n_pos: int
    d_in: int
    mode: str = "linear"  # linear | interaction
    signal_strength: float = 1.0
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.n_pos < self.n_samples:
            raise ValueError(f"need 0 < n_pos < n_samples, got {self.n_pos}/{self.n_samples}")
        if self.d_in < 1:
            raise ValueError("d_in must be positive")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be nonnegative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.mode not in ("linear", "interaction"):
            raise ValueError(f"mode must be linear or interaction, got {self.mode!r}")


def _unit_direction(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def synth_generate(spec: SynthSpec) -> Dataset:
    """Deterministic synthetic dataset with a planted signal.

    linear: class means sit at +/- signal_strength along one fixed random
    direction per view, so a single view suffices to classify.

    interaction: each view carries a coordinate of +/- signal_strength along
    its direction and the label is the sign of the two coordinates' product.
    Within each class the coordinate signs alternate, which makes the
    per-view class means coincide exactly when the class counts are even
    (the one leftover sample of an odd class shifts them by O(1/n_class)).
    """
    rng = np.random.default_rng(spec.seed)
    u = [_unit_direction(rng, spec.d_in) for _ in range(2)]
    labels = [1] * spec.n_pos + [0] * (spec.n_samples - spec.n_pos)

    samples = []
    seen = {0: 0, 1: 0}
    for i, label in enumerate(labels):
        flip = -1.0 if seen[label] % 2 else 1.0
        seen[label] += 1
        if spec.mode == "linear":
            z = (1.0 if label == 1 else -1.0, 1.0 if label == 1 else -1.0)
        else:
            z = (flip, flip) if label == 1 else (flip, -flip)
        cols = []
        for view in range(2):
            clean = spec.signal_strength * z[view] * u[view]
            noise = rng.normal(0.0, spec.noise_sigma, size=spec.d_in) if spec.noise_sigma else 0.0
            cols.append(clean + noise)
        features = Matrix(np.column_stack(cols))
        samples.append(MultiViewSample(patient_id=f"P{i:04d}", label=label, features=features))
    return Dataset(samples=tuple(samples), d_in=spec.d_in)


def standardize(dataset: Dataset) -> Dataset:
    """Optional per-feature z-scoring across samples (off by default everywhere).

    Each (feature, view) entry is centered and scaled by its std over the
    dataset; constant features are left centered only.
    """
    if not dataset.samples:
        return dataset
    stack = np.stack([s.features.data for s in dataset.samples])  # n x d_in x 2
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)
    std[std == 0.0] = 1.0
    samples = tuple(
        MultiViewSample(
            patient_id=s.patient_id,
            label=s.label,
            features=Matrix((s.features.data - mean) / std),
        )
        for s in dataset.samples
    )
    return Dataset(samples=samples, d_in=dataset.d_in)
