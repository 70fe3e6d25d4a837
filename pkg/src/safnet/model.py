"""Forward computation of the fusion model.

Per sample: each view's feature column is embedded through a shared linear
layer with ReLU, the two embedded tokens attend to each other via scaled
dot-product self-attention, and the flattened attention output feeds a
sigmoid classification head.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import Matrix, ShapeError, glorot_uniform, matmul, relu, row_softmax, transpose

PARAM_FIELDS = ("embed_w", "embed_b", "wq", "wk", "wv", "head_w", "head_b")


@dataclass(frozen=True)
class ModelDims:
    d_in: int = 5120
    d_model: int = 64
    d_k: int = 32
    n_views: int = 2

    def __post_init__(self):
        if min(self.d_in, self.d_model, self.d_k, self.n_views) < 1:
            raise ValueError(f"all dimensions must be positive: {self}")
        if self.d_k >= self.d_model:
            raise ValueError(f"d_k ({self.d_k}) must be smaller than d_model ({self.d_model})")


@dataclass(frozen=True)
class MultiViewSample:
    """One patient's two-view feature matrix (column 0 = A2C, column 1 = A4C)."""

    patient_id: str
    label: int
    features: Matrix

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.features.cols != 2:
            raise ShapeError(
                f"sample {self.patient_id!r}: expected 2 view columns, got {self.features.cols}"
            )


@dataclass(frozen=True)
class SafNetParams:
    """All learnable weights.

    Biases and the head are stored as matrices too (d_model x 1, 1 x n*d_k,
    1 x 1) so optimizer and gradient-check code can treat every parameter
    tensor uniformly.
    """

    embed_w: Matrix   # d_model x d_in
    embed_b: Matrix   # d_model x 1
    wq: Matrix        # d_model x d_k
    wk: Matrix        # d_model x d_k
    wv: Matrix        # d_model x d_k
    head_w: Matrix    # 1 x (n_views * d_k)
    head_b: Matrix    # 1 x 1
    dims: ModelDims = field(default_factory=ModelDims)

    def __post_init__(self):
        d = self.dims
        expected = {
            "embed_w": (d.d_model, d.d_in),
            "embed_b": (d.d_model, 1),
            "wq": (d.d_model, d.d_k),
            "wk": (d.d_model, d.d_k),
            "wv": (d.d_model, d.d_k),
            "head_w": (1, d.n_views * d.d_k),
            "head_b": (1, 1),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {got}")

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name).data for name in PARAM_FIELDS}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray], dims: ModelDims) -> "SafNetParams":
        return cls(**{name: Matrix(tensors[name]) for name in PARAM_FIELDS}, dims=dims)


@dataclass(frozen=True)
class ForwardTrace:
    """Every intermediate of one forward pass, kept for the backward pass."""

    latent: Matrix        # n_views x d_model
    q: Matrix             # n_views x d_k
    k: Matrix             # n_views x d_k
    v: Matrix             # n_views x d_k
    attn_weights: Matrix  # n_views x n_views
    attn_out: Matrix      # n_views x d_k
    logit: float
    prob: float


def init_params(dims: ModelDims, rng: np.random.Generator) -> SafNetParams:
    """Glorot-uniform weight matrices, zero biases.

    Draw order is fixed (embed_w, wq, wk, wv, head_w) so a seeded generator
    always yields the same parameters.
    """
    return SafNetParams(
        embed_w=glorot_uniform(dims.d_model, dims.d_in, rng),
        embed_b=Matrix.zeros(dims.d_model, 1),
        wq=glorot_uniform(dims.d_model, dims.d_k, rng),
        wk=glorot_uniform(dims.d_model, dims.d_k, rng),
        wv=glorot_uniform(dims.d_model, dims.d_k, rng),
        head_w=glorot_uniform(1, dims.n_views * dims.d_k, rng),
        head_b=Matrix.zeros(1, 1),
        dims=dims,
    )


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def embed_views(sample: MultiViewSample, params: SafNetParams) -> Matrix:
    """Embed each view column into the latent space; returns one token per row.

    The same weights are applied to both views so the tokens live in a
    common representation space.
    """
    feats = sample.features
    if feats.rows != params.dims.d_in:
        raise ShapeError(
            f"sample {sample.patient_id!r} has {feats.rows} features, model expects {params.dims.d_in}"
        )
    if feats.cols != params.dims.n_views:
        raise ShapeError(
            f"sample {sample.patient_id!r} has {feats.cols} views, model expects {params.dims.n_views}"
        )
    pre = matmul(params.embed_w, feats).data + params.embed_b.data  # d_model x n_views
    return relu(transpose(Matrix(pre)))


def self_attention(latent: Matrix, params: SafNetParams) -> tuple[Matrix, Matrix]:
    """Scaled dot-product self-attention over the view tokens.

    Returns (attn_out, attn_weights) with attn_out = softmax(QK^T/sqrt(d_k)) V.
    """
    if latent.cols != params.dims.d_model:
        raise ShapeError(f"latent has width {latent.cols}, model expects {params.dims.d_model}")
    q = matmul(latent, params.wq)
    k = matmul(latent, params.wk)
    v = matmul(latent, params.wv)
    scores = Matrix(matmul(q, transpose(k)).data / math.sqrt(params.dims.d_k))
    attn_weights = row_softmax(scores)
    attn_out = matmul(attn_weights, v)
    return attn_out, attn_weights


def classify(attn_out: Matrix, params: SafNetParams) -> tuple[float, float]:
    """Linear head on the row-major flattened attention output, then sigmoid."""
    flat = attn_out.data.ravel()
    w = params.head_w.data.ravel()
    if flat.shape != w.shape:
        raise ShapeError(f"flattened attention output has length {flat.size}, head expects {w.size}")
    logit = float(w @ flat + params.head_b.data[0, 0])
    return logit, sigmoid(logit)


def forward(sample: MultiViewSample, params: SafNetParams) -> ForwardTrace:
    """Full forward pass, recording every intermediate."""
    latent = embed_views(sample, params)
    q = matmul(latent, params.wq)
    k = matmul(latent, params.wk)
    v = matmul(latent, params.wv)
    scores = Matrix(matmul(q, transpose(k)).data / math.sqrt(params.dims.d_k))
    attn_weights = row_softmax(scores)
    attn_out = matmul(attn_weights, v)
    logit, prob = classify(attn_out, params)
    return ForwardTrace(
        latent=latent, q=q, k=k, v=v,
        attn_weights=attn_weights, attn_out=attn_out,
        logit=logit, prob=prob,
    )


def predict_prob(sample: MultiViewSample, params: SafNetParams) -> float:
    return forward(sample, params).prob
