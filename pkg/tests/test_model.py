import math

import numpy as np
import pytest

from safnet.linalg import Matrix, ShapeError
from safnet.model import (
    ModelDims,
    MultiViewSample,
    SafNetParams,
    classify,
    embed_views,
    forward,
    init_params,
    self_attention,
)


def make_params(dims, rng):
    return init_params(dims, rng)


def make_sample(rng, d_in, label=1, pid="p"):
    return MultiViewSample(pid, label, Matrix(rng.normal(size=(d_in, 2))))


def zero_params(dims):
    return SafNetParams(
        embed_w=Matrix.zeros(dims.d_model, dims.d_in),
        embed_b=Matrix.zeros(dims.d_model, 1),
        wq=Matrix.zeros(dims.d_model, dims.d_k),
        wk=Matrix.zeros(dims.d_model, dims.d_k),
        wv=Matrix.zeros(dims.d_model, dims.d_k),
        head_w=Matrix.zeros(1, dims.n_views * dims.d_k),
        head_b=Matrix.zeros(1, 1),
        dims=dims,
    )


def naive_attention(latent, wq, wk, wv, d_k):
    """Separately coded scaled dot-product attention (loops only)."""
    n, d_model = latent.shape

    def mm(a, b):
        out = [[sum(a[i][t] * b[t][j] for t in range(len(b))) for j in range(len(b[0]))]
               for i in range(len(a))]
        return out

    q = mm(latent.tolist(), wq.tolist())
    k = mm(latent.tolist(), wk.tolist())
    v = mm(latent.tolist(), wv.tolist())
    scores = [[sum(q[i][t] * k[j][t] for t in range(d_k)) / math.sqrt(d_k) for j in range(n)]
              for i in range(n)]
    weights = []
    for row in scores:
        mx = max(row)
        es = [math.exp(x - mx) for x in row]
        z = sum(es)
        weights.append([e / z for e in es])
    out = [[sum(weights[i][m] * v[m][j] for m in range(n)) for j in range(d_k)] for i in range(n)]
    return np.array(out), np.array(weights)


def test_dims_validation():
    with pytest.raises(ValueError, match="d_k"):
        ModelDims(d_in=10, d_model=8, d_k=8)
    with pytest.raises(ValueError):
        ModelDims(d_in=0)


def test_sample_validation():
    with pytest.raises(ValueError):
        MultiViewSample("p", 2, Matrix.zeros(4, 2))
    with pytest.raises(ShapeError):
        MultiViewSample("p", 1, Matrix.zeros(4, 3))


def test_embed_zero_weights_gives_zero_latent():
    dims = ModelDims(d_in=5, d_model=3, d_k=2)
    sample = make_sample(np.random.default_rng(0), 5)
    latent = embed_views(sample, zero_params(dims))
    assert np.array_equal(latent.data, np.zeros((2, 3)))


def test_embed_identity_case():
    # d_in == d_model, identity weights, zero bias: latent rows equal feature columns
    dims = ModelDims(d_in=4, d_model=4, d_k=2)
    params = zero_params(dims)
    params = SafNetParams(
        embed_w=Matrix.identity(4), embed_b=params.embed_b,
        wq=params.wq, wk=params.wk, wv=params.wv,
        head_w=params.head_w, head_b=params.head_b, dims=dims,
    )
    feats = np.abs(np.random.default_rng(1).normal(size=(4, 2)))
    sample = MultiViewSample("p", 0, Matrix(feats))
    latent = embed_views(sample, params)
    assert np.allclose(latent.data, feats.T, atol=0)


def test_embed_matches_per_element_oracle():
    rng = np.random.default_rng(2)
    dims = ModelDims(d_in=6, d_model=3, d_k=2)
    params = make_params(dims, rng)
    sample = make_sample(rng, 6)
    latent = embed_views(sample, params).data
    for view in range(2):
        for i in range(dims.d_model):
            acc = params.embed_b.data[i, 0]
            for j in range(dims.d_in):
                acc += params.embed_w.data[i, j] * sample.features.data[j, view]
            assert latent[view, i] == pytest.approx(max(acc, 0.0), abs=1e-12)


def test_embed_dimension_mismatch():
    dims = ModelDims(d_in=5, d_model=3, d_k=2)
    params = zero_params(dims)
    bad = make_sample(np.random.default_rng(0), 7)
    with pytest.raises(ShapeError):
        embed_views(bad, params)


def test_attention_zero_query_gives_uniform_weights():
    rng = np.random.default_rng(3)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    params = SafNetParams(
        embed_w=params.embed_w, embed_b=params.embed_b,
        wq=Matrix.zeros(4, 2), wk=params.wk, wv=params.wv,
        head_w=params.head_w, head_b=params.head_b, dims=dims,
    )
    latent = Matrix(rng.normal(size=(2, 4)))
    attn_out, attn_weights = self_attention(latent, params)
    assert np.abs(attn_weights.data - 0.5).max() <= 1e-12
    v = latent.data @ params.wv.data
    mean_v = v.mean(axis=0)
    assert np.abs(attn_out.data - mean_v).max() <= 1e-12


def test_attention_single_token():
    rng = np.random.default_rng(4)
    dims = ModelDims(d_in=5, d_model=4, d_k=2, n_views=1)
    params = make_params(dims, rng)
    latent = Matrix(rng.normal(size=(1, 4)))
    attn_out, attn_weights = self_attention(latent, params)
    assert attn_weights.tolist() == [[1.0]]
    assert np.allclose(attn_out.data, latent.data @ params.wv.data, atol=1e-15)


def test_attention_matches_naive_oracle():
    rng = np.random.default_rng(5)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    latent = Matrix(rng.normal(size=(2, 4)))
    attn_out, attn_weights = self_attention(latent, params)
    want_out, want_w = naive_attention(
        latent.data, params.wq.data, params.wk.data, params.wv.data, dims.d_k
    )
    assert np.abs(attn_out.data - want_out).max() <= 1e-12
    assert np.abs(attn_weights.data - want_w).max() <= 1e-12


def test_attention_token_permutation_equivariance():
    rng = np.random.default_rng(6)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    latent = rng.normal(size=(2, 4))
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    out, w = self_attention(Matrix(latent), params)
    out_p, w_p = self_attention(Matrix(p @ latent), params)
    assert np.abs(out_p.data - p @ out.data).max() <= 1e-12
    assert np.abs(w_p.data - p @ w.data @ p.T).max() <= 1e-12


def test_attention_row_shift_neutrality():
    # adding a constant to one row of Q K^T leaves that row's weights unchanged
    rng = np.random.default_rng(13)
    from safnet.linalg import row_softmax

    scores = rng.normal(size=(2, 2))
    shifted = scores.copy()
    shifted[0, :] += 37.5
    w = row_softmax(Matrix(scores)).data
    w_s = row_softmax(Matrix(shifted)).data
    assert np.abs(w_s[0] - w[0]).max() <= 1e-12
    assert np.array_equal(w_s[1], w[1])


def test_classify_zero_head_gives_half():
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    logit, prob = classify(Matrix(np.random.default_rng(7).normal(size=(2, 2))), zero_params(dims))
    assert logit == 0.0 and prob == 0.5


def test_classify_analytic_values():
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = zero_params(dims)
    # head weight picks out a single entry so the logit is directly controlled
    head_w = np.zeros((1, 4))
    head_w[0, 0] = 1.0
    params = SafNetParams(
        embed_w=params.embed_w, embed_b=params.embed_b,
        wq=params.wq, wk=params.wk, wv=params.wv,
        head_w=Matrix(head_w), head_b=params.head_b, dims=dims,
    )
    attn = np.zeros((2, 2))
    attn[0, 0] = 30.0
    _, prob = classify(Matrix(attn), params)
    assert prob > 1 - 1e-9
    attn[0, 0] = math.log(3.0)
    _, prob = classify(Matrix(attn), params)
    assert prob == pytest.approx(0.75, abs=1e-12)


def test_forward_all_zero_params_gives_half():
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = zero_params(dims)
    rng = np.random.default_rng(8)
    for i in range(5):
        assert forward(make_sample(rng, 5, i % 2), params).prob == 0.5


def test_forward_identical_views_give_identical_rows():
    rng = np.random.default_rng(9)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    col = rng.normal(size=5)
    sample = MultiViewSample("p", 1, Matrix(np.column_stack([col, col])))
    trace = forward(sample, params)
    for mat in (trace.q, trace.k, trace.v, trace.attn_out):
        assert np.array_equal(mat.data[0], mat.data[1])


def test_forward_deterministic():
    rng = np.random.default_rng(10)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    sample = make_sample(rng, 5)
    t1, t2 = forward(sample, params), forward(sample, params)
    assert t1.logit == t2.logit and t1.prob == t2.prob
    assert np.array_equal(t1.attn_weights.data, t2.attn_weights.data)


def test_forward_prob_strictly_inside_unit_interval():
    rng = np.random.default_rng(11)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    for seed in range(20):
        params = make_params(dims, np.random.default_rng(seed))
        trace = forward(make_sample(rng, 5), params)
        assert 0.0 < trace.prob < 1.0
        assert trace.prob == pytest.approx(1.0 / (1.0 + math.exp(-trace.logit)), rel=1e-15)


def test_forward_attention_rows_sum_to_one():
    rng = np.random.default_rng(12)
    dims = ModelDims(d_in=5, d_model=4, d_k=2)
    params = make_params(dims, rng)
    trace = forward(make_sample(rng, 5), params)
    assert np.abs(trace.attn_weights.data.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.all(trace.attn_weights.data >= 0) and np.all(trace.attn_weights.data <= 1)
