"""Weighted BCE loss, hand-derived gradients, Adam, and a finite-difference checker."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .linalg import Matrix
from .model import (
    PARAM_FIELDS,
    ModelDims,
    MultiViewSample,
    SafNetParams,
    forward,
    init_params,
)

LOSS_EPS = 1e-12  # probability clamp inside the loss, guards log(0)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_mode: int | str = "full"  # "full" or a mini-batch size
    seed: int = 0
    class_weight_pos: float | None = None  # None = derive from the training set
    class_weight_neg: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    threshold: float = 0.5

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")
        for w in (self.class_weight_pos, self.class_weight_neg):
            if w is not None and w <= 0:
                raise ValueError("class weights must be positive")
        if self.batch_mode != "full" and (not isinstance(self.batch_mode, int) or self.batch_mode < 1):
            raise ValueError("batch_mode must be 'full' or a positive batch size")


@dataclass(frozen=True)
class GradientSet:
    """One gradient array per parameter tensor, same shapes as the parameters."""

    embed_w: np.ndarray
    embed_b: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, tensors: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in tensors.items()},
            second_moment={k: np.zeros_like(v) for k, v in tensors.items()},
        )


@dataclass(frozen=True)
class TrainHistory:
    losses: tuple[float, ...]

    @property
    def final_epoch(self) -> int:
        return len(self.losses)


def class_weights(labels: Sequence[int]) -> tuple[float, float]:
    """Inverse-frequency weights w_c = N / (2 * N_c); both classes must be present."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class weights undefined: training set contains a single class")
    n = len(labels)
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def weighted_bce(prob: float, label: int, w_pos: float, w_neg: float) -> float:
    """Per-sample weighted binary cross-entropy with the probability clamped away from 0/1."""
    p = min(max(prob, LOSS_EPS), 1.0 - LOSS_EPS)
    if label == 1:
        return -w_pos * math.log(p)
    return -w_neg * math.log(1.0 - p)


def _resolved_weights(config: TrainConfig) -> tuple[float, float]:
    if config.class_weight_pos is None or config.class_weight_neg is None:
        raise ValueError("class weights are unresolved; set them or train via train_model")
    return config.class_weight_pos, config.class_weight_neg


def backward(
    batch: Sequence[MultiViewSample], params: SafNetParams, config: TrainConfig
) -> tuple[float, GradientSet]:
    """Mean weighted BCE over the batch and its exact gradient.

    Chain rule through sigmoid head, row-major flatten, softmax attention,
    ReLU, and the shared linear embedding; gradients are averaged over
    samples so learning-rate semantics do not depend on batch size.
    """
    if len(batch) == 0:
        raise ValueError("backward: empty batch")
    w_pos, w_neg = _resolved_weights(config)
    dims = params.dims
    scale = 1.0 / math.sqrt(dims.d_k)

    we = params.embed_w.data
    wq, wk, wv = params.wq.data, params.wk.data, params.wv.data
    head_w = params.head_w.data.reshape(dims.n_views, dims.d_k)

    g = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    total_loss = 0.0

    for sample in batch:
        trace = forward(sample, params)
        p, y = trace.prob, sample.label
        total_loss += weighted_bce(p, y, w_pos, w_neg)

        # d loss / d logit; the sigmoid-BCE terms collapse to w_y * (p - y)
        dz = w_pos * (p - 1.0) if y == 1 else w_neg * p

        x = trace.latent.data          # n_views x d_model
        a = trace.attn_weights.data    # n_views x n_views
        o_grad = dz * head_w           # n_views x d_k

        g["head_b"][0, 0] += dz
        g["head_w"] += dz * trace.attn_out.data.reshape(1, -1)

        da = o_grad @ trace.v.data.T                        # n_views x n_views
        dv = a.T @ o_grad                                   # n_views x d_k
        ds = a * (da - (da * a).sum(axis=1, keepdims=True))  # softmax rows
        dq = scale * (ds @ trace.k.data)
        dk = scale * (ds.T @ trace.q.data)

        g["wq"] += x.T @ dq
        g["wk"] += x.T @ dk
        g["wv"] += x.T @ dv

        dx = dq @ wq.T + dk @ wk.T + dv @ wv.T              # n_views x d_model
        dh = dx * (x > 0.0)                                  # ReLU mask, tokens as rows
        g["embed_w"] += dh.T @ sample.features.data.T
        g["embed_b"] += dh.sum(axis=0).reshape(-1, 1)

    n = float(len(batch))
    grads = GradientSet(**{name: t / n for name, t in g.items()})
    return total_loss / n, grads


def adam_step_tensors(
    tensors: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update over named tensors; purely functional."""
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.learning_rate
    t = state.step_count + 1
    new_t, new_m, new_v = {}, {}, {}
    for name, value in tensors.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ValueError(f"adam_step: gradient shape {grad.shape} != parameter shape {value.shape} for {name!r}")
        m = b1 * state.first_moment[name] + (1 - b1) * grad
        v = b2 * state.second_moment[name] + (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_t[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return new_t, AdamState(first_moment=new_m, second_moment=new_v, step_count=t)


def adam_step(
    params: SafNetParams, grads: GradientSet, state: AdamState, config: TrainConfig
) -> tuple[SafNetParams, AdamState]:
    new_tensors, new_state = adam_step_tensors(params.tensors(), grads.tensors(), state, config)
    return SafNetParams.from_tensors(new_tensors, params.dims), new_state


def train_model(
    train_set: Sequence[MultiViewSample],
    config: TrainConfig,
    dims: ModelDims | None = None,
) -> tuple[SafNetParams, TrainHistory]:
    """Train from a fresh glorot initialization; deterministic given (seed, data, config)."""
    if len(train_set) == 0:
        raise ValueError("train_model: empty training set")
    if dims is None:
        dims = ModelDims(d_in=train_set[0].features.rows)

    if config.class_weight_pos is None or config.class_weight_neg is None:
        w_pos, w_neg = class_weights([s.label for s in train_set])
        config = replace(config, class_weight_pos=w_pos, class_weight_neg=w_neg)

    rng = np.random.default_rng(config.seed)
    params = init_params(dims, rng)
    state = AdamState.zeros_like(params.tensors())

    losses: list[float] = []
    n = len(train_set)
    for _ in range(config.epochs):
        if config.batch_mode == "full":
            loss, grads = backward(train_set, params, config)
            params, state = adam_step(params, grads, state, config)
            losses.append(loss)
        else:
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, config.batch_mode):
                idx = order[start : start + config.batch_mode]
                batch = [train_set[i] for i in idx]
                loss, grads = backward(batch, params, config)
                params, state = adam_step(params, grads, state, config)
                epoch_loss += loss * len(batch)
            losses.append(epoch_loss / n)
    return params, TrainHistory(losses=tuple(losses))


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: dict[str, float]
    failed: tuple[str, ...]
    rel_tolerance: float

    @property
    def passed(self) -> bool:
        return not self.failed


ABS_FLOOR = 1e-10  # below this magnitude the comparison falls back to absolute error


def finite_difference_check(
    loss_fn: Callable[[dict[str, np.ndarray]], float],
    tensors: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    rel_tolerance: float = 1e-6,
    step: float = 1e-6,
) -> GradCheckReport:
    """Central differences on every tensor entry vs the supplied analytic gradient.

    Entries where both gradients are below ABS_FLOOR in magnitude are compared
    absolutely (against ABS_FLOOR) instead of relatively.
    """
    work = {name: t.copy() for name, t in tensors.items()}
    max_err: dict[str, float] = {}
    failed: list[str] = []
    for name, tensor in work.items():
        numeric = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(work)
            flat[i] = orig - step
            down = loss_fn(work)
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        ana = analytic[name]
        denom = np.maximum(np.abs(ana), np.abs(numeric))
        diff = np.abs(ana - numeric)
        big = denom >= ABS_FLOOR
        rel = np.where(big, diff / np.maximum(denom, ABS_FLOOR), 0.0)
        worst = float(rel.max()) if rel.size else 0.0
        max_err[name] = worst
        abs_ok = bool(np.all(diff[~big] <= ABS_FLOOR)) if np.any(~big) else True
        if worst > rel_tolerance or not abs_ok:
            failed.append(name)
    return GradCheckReport(max_rel_error=max_err, failed=tuple(failed), rel_tolerance=rel_tolerance)


def grad_check(
    params: SafNetParams,
    batch: Sequence[MultiViewSample],
    rel_tolerance: float = 1e-6,
    config: TrainConfig | None = None,
    step: float = 1e-6,
) -> GradCheckReport:
    """Check the analytic gradients of the batch loss at desk-scale dimensions."""
    if config is None:
        config = TrainConfig(class_weight_pos=1.0, class_weight_neg=1.0)
    w_pos, w_neg = _resolved_weights(config)
    dims = params.dims

    def loss_fn(tensors: dict[str, np.ndarray]) -> float:
        p = SafNetParams.from_tensors(tensors, dims)
        return sum(
            weighted_bce(forward(s, p).prob, s.label, w_pos, w_neg) for s in batch
        ) / len(batch)

    _, grads = backward(batch, params, config)
    return finite_difference_check(loss_fn, params.tensors(), grads.tensors(), rel_tolerance, step)
