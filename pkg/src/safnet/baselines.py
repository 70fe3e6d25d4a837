"""KNN and MLP comparison classifiers over the flattened two-view feature matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import MultiViewSample
from .training import (
    AdamState,
    GradCheckReport,
    TrainConfig,
    adam_step_tensors,
    finite_difference_check,
    weighted_bce,
)


def flatten_features(sample: MultiViewSample) -> np.ndarray:
    """Row-major flattening of the d_in x 2 feature matrix (length 2 * d_in)."""
    return sample.features.data.ravel()


@dataclass(frozen=True)
class KnnModel:
    points: np.ndarray  # n x d stored training vectors
    labels: np.ndarray  # n, values 0/1
    k: int

    def __post_init__(self):
        if self.k < 1 or self.k > self.points.shape[0]:
            raise ValueError(f"k must satisfy 1 <= k <= {self.points.shape[0]}, got {self.k}")


def knn_fit(samples: Sequence[MultiViewSample], k: int) -> KnnModel:
    points = np.stack([flatten_features(s) for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return KnnModel(points=points, labels=labels, k=k)


def knn_predict(model: KnnModel, query: np.ndarray) -> tuple[int, float]:
    """Majority vote among the k nearest training points by Euclidean distance.

    Distance ties resolve toward the lower sample index (stable sort); vote
    ties resolve toward the positive class.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.points.shape[1],):
        raise ValueError(
            f"query has shape {query.shape}, stored vectors have length {model.points.shape[1]}"
        )
    dists = np.sqrt(((model.points - query) ** 2).sum(axis=1))
    nearest = np.argsort(dists, kind="stable")[: model.k]
    positive_fraction = float(model.labels[nearest].sum()) / model.k
    label = 1 if positive_fraction >= 0.5 else 0
    return label, positive_fraction


@dataclass(frozen=True)
class MlpBaseline:
    """One ReLU hidden layer plus a sigmoid output unit."""

    w1: np.ndarray  # hidden x d
    b1: np.ndarray  # hidden
    w2: np.ndarray  # hidden
    b2: float

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": np.array([self.b2]),
        }

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray]) -> "MlpBaseline":
        return cls(w1=t["w1"], b1=t["b1"], w2=t["w2"], b2=float(t["b2"][0]))


def _mlp_logit(params: MlpBaseline, x: np.ndarray) -> tuple[np.ndarray, float]:
    hidden = np.maximum(params.w1 @ x + params.b1, 0.0)
    return hidden, float(params.w2 @ hidden + params.b2)


def mlp_predict_prob(params: MlpBaseline, x: np.ndarray) -> float:
    _, logit = _mlp_logit(params, x)
    if logit >= 0:
        return 1.0 / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return e / (1.0 + e)


def mlp_predict(params: MlpBaseline, x: np.ndarray, threshold: float = 0.5) -> int:
    return 1 if mlp_predict_prob(params, x) >= threshold else 0


def mlp_backward(
    batch_x: np.ndarray,
    batch_y: Sequence[int],
    params: MlpBaseline,
    w_pos: float = 1.0,
    w_neg: float = 1.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE over the batch and exact gradients for the two-layer net."""
    n = len(batch_y)
    if n == 0:
        raise ValueError("mlp_backward: empty batch")
    g = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    total = 0.0
    for x, y in zip(batch_x, batch_y):
        hidden, logit = _mlp_logit(params, x)
        prob = mlp_predict_prob(params, x)
        total += weighted_bce(prob, y, w_pos, w_neg)
        dz = w_pos * (prob - 1.0) if y == 1 else w_neg * prob
        g["b2"][0] += dz
        g["w2"] += dz * hidden
        dh = dz * params.w2 * (hidden > 0.0)
        g["w1"] += np.outer(dh, x)
        g["b1"] += dh
    return total / n, {name: t / n for name, t in g.items()}


def mlp_train(
    samples: Sequence[MultiViewSample],
    config: TrainConfig,
    hidden: int = 128,
) -> MlpBaseline:
    """Adam on unweighted BCE over the flattened features (full batch)."""
    labels = [s.label for s in samples]
    if len(set(labels)) < 2:
        raise ValueError("mlp_train: training set contains a single class")
    batch_x = np.stack([flatten_features(s) for s in samples])
    d = batch_x.shape[1]
    rng = np.random.default_rng(config.seed)
    bound1 = math.sqrt(6.0 / (hidden + d))
    bound2 = math.sqrt(6.0 / (1 + hidden))
    params = MlpBaseline(
        w1=rng.uniform(-bound1, bound1, size=(hidden, d)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-bound2, bound2, size=hidden),
        b2=0.0,
    )
    state = AdamState.zeros_like(params.tensors())
    for _ in range(config.epochs):
        _, grads = mlp_backward(batch_x, labels, params)
        new_tensors, state = adam_step_tensors(params.tensors(), grads, state, config)
        params = MlpBaseline.from_tensors(new_tensors)
    return params


def mlp_grad_check(
    params: MlpBaseline,
    batch_x: np.ndarray,
    batch_y: Sequence[int],
    rel_tolerance: float = 1e-6,
    step: float = 1e-6,
) -> GradCheckReport:
    def loss_fn(tensors: dict[str, np.ndarray]) -> float:
        p = MlpBaseline.from_tensors(tensors)
        return sum(
            weighted_bce(mlp_predict_prob(p, x), y, 1.0, 1.0) for x, y in zip(batch_x, batch_y)
        ) / len(batch_y)

    _, grads = mlp_backward(batch_x, batch_y, params)
    return finite_difference_check(loss_fn, params.tensors(), grads, rel_tolerance, step)
