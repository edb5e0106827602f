import math

import numpy as np
import pytest

from gamedepth.nnet import (ModelParams, OptState, adam_step, conv2d, init_params,
                            lr_schedule, model_backward, model_forward, model_gradcheck,
                            pixel_shuffle, pixel_unshuffle, residual_block_forward)
from gamedepth.objectives import total_loss


def dense_conv(x, w, b, stride=1):
    """Direct nested-loop 3x3 convolution with zero padding 1."""
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    ho, wo = (h - 1) // stride + 1, (wd - 1) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for bi in range(n):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = b[o]
                    for c in range(cin):
                        for ki in range(3):
                            for kj in range(3):
                                y, xx = i * stride + ki - 1, j * stride + kj - 1
                                if 0 <= y < h and 0 <= xx < wd:
                                    acc += w[o, c, ki, kj] * x[bi, c, y, xx]
                    out[bi, o, i, j] = acc
    return out


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_matches_dense_loops(rng, stride):
    x = rng.normal(size=(2, 3, 6, 8))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out, _ = conv2d(x, w, b, stride)
    np.testing.assert_allclose(out, dense_conv(x, w, b, stride), rtol=1e-12, atol=1e-12)


def test_init_is_deterministic_and_shaped():
    a, b = init_params(3), init_params(3)
    assert a.dims == (16, 4, 4)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.tensors, b.tensors))
    assert a.num_parameters() == 16 * 27 + 16 + 9 * (16 * 144 + 16) + 16 * 144 + 16
    for name, t in zip(a.names, a.tensors):
        if name.endswith(".b"):
            assert not np.any(t)


def test_init_without_blocks():
    p = init_params(0, 4, 0, 2)
    assert p.names == ["stem1.w", "stem1.b", "stem2.w", "stem2.b", "head.w", "head.b"]
    assert p.tensors[-2].shape == (4, 4, 3, 3)


def test_init_variance_is_he():
    fan_in = 16 * 9
    for seed in range(10):
        w = init_params(seed, 16, 1, 4).tensors[4]
        assert w.shape == (16, 16, 3, 3)
        assert abs(w.var() - 2.0 / fan_in) <= 0.25 * 2.0 / fan_in


@pytest.mark.parametrize("dims", [(0, 1, 4), (4, -1, 4), (4, 1, 3)])
def test_init_rejects_invalid_dims(dims):
    with pytest.raises(ValueError):
        init_params(0, *dims)


def test_params_shape_validation():
    p = init_params(0, 2, 1, 4)
    bad = p.tensors[:-1] + [np.zeros(3)]
    with pytest.raises(ValueError):
        ModelParams(2, 1, 4, bad)


def test_zero_block_is_identity(rng):
    x = rng.normal(size=(2, 5, 4, 4))
    z = np.zeros((5, 5, 3, 3))
    out, _ = residual_block_forward(x, z, np.zeros(5), z, np.zeros(5))
    np.testing.assert_array_equal(out, x)
    out2, _ = residual_block_forward(2 * x, z, np.zeros(5), z, np.zeros(5))
    np.testing.assert_array_equal(out2, 2 * out)


def test_block_with_bias_only_input_on_single_pixel(rng):
    c = 3
    w1, w2 = rng.normal(size=(c, c, 3, 3)), rng.normal(size=(c, c, 3, 3))
    b1, b2 = rng.normal(size=c), rng.normal(size=c)
    x = np.zeros((1, c, 1, 1))
    out, _ = residual_block_forward(x, w1, b1, w2, b2)
    # on a 1x1 input only the centre tap sees a non-padded value
    expected = w2[:, :, 1, 1] @ np.maximum(b1, 0) + b2
    np.testing.assert_allclose(out[0, :, 0, 0], expected, rtol=1e-14, atol=1e-14)
    dense = dense_conv(np.maximum(dense_conv(x, w1, b1), 0), w2, b2)
    np.testing.assert_allclose(out, dense, rtol=1e-14, atol=1e-14)


def test_block_rejects_channel_mismatch(rng):
    with pytest.raises(ValueError):
        residual_block_forward(np.zeros((1, 4, 2, 2)), np.zeros((3, 3, 3, 3)), np.zeros(3),
                               np.zeros((3, 3, 3, 3)), np.zeros(3))


def test_pixel_shuffle_examples(rng):
    x = rng.normal(size=(2, 3, 4, 5))
    np.testing.assert_array_equal(pixel_shuffle(x, 1), x)
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    out = pixel_shuffle(np.array([a, b, c, d]).reshape(1, 4, 1, 1), 2)
    np.testing.assert_array_equal(out[0, 0], [[a, b], [c, d]])
    with pytest.raises(ValueError):
        pixel_shuffle(np.zeros((1, 3, 2, 2)), 2)


def test_pixel_shuffle_index_rule_and_bijection(rng):
    r, c, h, w = 4, 2, 3, 5
    x = rng.normal(size=(1, c * r * r, h, w))
    y = pixel_shuffle(x, r)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                for dy in range(r):
                    for dx in range(r):
                        assert y[0, ch, i * r + dy, j * r + dx] == x[0, ch * r * r + dy * r + dx, i, j]
    np.testing.assert_array_equal(pixel_unshuffle(y, r), x)
    np.testing.assert_array_equal(np.sort(y.ravel()), np.sort(x.ravel()))


def test_zero_params_give_zero_output(rng):
    p = init_params(0, 4, 2, 4).zeros_like()
    y, _ = model_forward(p, rng.normal(size=(2, 3, 16, 16)))
    assert y.shape == (2, 1, 16, 16)
    assert not np.any(y)


@pytest.mark.parametrize("n", [1, 2, 16])
def test_forward_shape_contract(rng, n):
    p = init_params(1, 4, 1, 4)
    y, _ = model_forward(p, rng.normal(size=(n, 3, 64, 64)))
    assert y.shape == (n, 1, 64, 64)
    assert np.all(np.isfinite(y))


def test_forward_output_size_for_smaller_ratios(rng):
    for r, size in ((1, 4), (2, 8)):
        y, _ = model_forward(init_params(0, 2, 1, r), rng.normal(size=(1, 3, 16, 16)))
        assert y.shape == (1, 1, size, size)


def test_forward_batch_independent(rng):
    p = init_params(2, 6, 2, 4)
    x = rng.normal(size=(3, 3, 16, 16))
    whole, _ = model_forward(p, x)
    parts = np.concatenate([model_forward(p, x[i:i + 1])[0] for i in range(3)])
    assert whole.tobytes() == parts.tobytes()
    rev, _ = model_forward(p, x[::-1])
    assert rev[::-1].tobytes() == whole.tobytes()


def test_forward_rejects_bad_shapes(rng):
    p = init_params(0, 2, 1, 4)
    with pytest.raises(ValueError):
        model_forward(p, rng.normal(size=(1, 3, 10, 12)))
    with pytest.raises(ValueError):
        model_forward(p, rng.normal(size=(1, 1, 8, 8)))


def test_backward_zero_grad(rng):
    p = init_params(0, 3, 1, 4)
    y, cache = model_forward(p, rng.normal(size=(2, 3, 8, 8)))
    g = model_backward(p, cache, np.zeros_like(y))
    assert all(not np.any(t) for t in g.tensors)


def test_backward_rejects_stale_cache(rng):
    p = init_params(0, 3, 1, 4)
    y, cache = model_forward(p, rng.normal(size=(1, 3, 8, 8)))
    with pytest.raises(ValueError):
        model_backward(p.copy(), cache, np.zeros_like(y))
    with pytest.raises(ValueError):
        model_backward(p, cache, np.zeros((1, 1, 4, 4)))


def test_full_model_gradient_check():
    assert model_gradcheck(np.random.default_rng(5), channels=2, blocks=1, size=8) < 1e-4


def test_gradients_additive_over_batch(rng):
    p = init_params(4, 3, 1, 4)
    x = rng.normal(size=(2, 3, 8, 8))
    targets = rng.normal(size=(2, 8, 8))

    def grads_for(xb, tb):
        y, cache = model_forward(p, xb)
        g = np.stack([total_loss(y[i, 0], tb[i], 0.5, 2).grad for i in range(len(xb))])[:, None]
        return model_backward(p, cache, g)

    both = grads_for(x, targets)
    one = grads_for(x[:1], targets[:1])
    two = grads_for(x[1:], targets[1:])
    for a, b, c in zip(both.tensors, one.tensors, two.tensors):
        np.testing.assert_allclose(a, b + c, rtol=0, atol=1e-10)


def scalar_adam(w, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float ADAM on f(w) = w^2."""
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        g = 2.0 * w
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        out.append(w)
    return out


def _single(value):
    p = init_params(0, 1, 0, 1)
    p.tensors = [np.full(t.shape, value) for t in p.tensors]
    return p


def test_adam_matches_scalar_oracle():
    p = _single(1.0)
    state = OptState.for_params(p, lr=0.1)
    expected = scalar_adam(1.0, 0.1, 10)
    prev = 1.0
    for k in range(10):
        grads = ModelParams(p.channels, p.blocks, p.ratio, [2.0 * t for t in p.tensors])
        p, state = adam_step(p, grads, state)
        w = p.tensors[0].flat[0]
        assert abs(w - expected[k]) <= 1e-12
        assert w * w < prev * prev
        prev = w
    assert state.step == 10


def test_adam_first_step_magnitude():
    p = _single(0.3)
    g = ModelParams(p.channels, p.blocks, p.ratio, [np.full(t.shape, -2.5) for t in p.tensors])
    new, _ = adam_step(p, g, OptState.for_params(p, lr=1e-3))
    for a, b in zip(new.tensors, p.tensors):
        np.testing.assert_allclose(a - b, 1e-3, rtol=1e-7)


def test_adam_zero_gradient_keeps_params():
    p = init_params(1, 2, 1, 4)
    state = OptState.for_params(p)
    q = p
    for _ in range(5):
        q, state = adam_step(q, q.zeros_like(), state)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(p.tensors, q.tensors))


def test_adam_shape_mismatch():
    p = init_params(1, 2, 1, 4)
    with pytest.raises(ValueError):
        adam_step(p, init_params(1, 2, 0, 4), OptState.for_params(p))


def test_lr_schedule():
    assert lr_schedule(4e-4, 0, 100000) == 4e-4
    assert lr_schedule(4e-4, 99999, 100000) == 4e-4
    assert lr_schedule(4e-4, 100000, 100000) == 2.6e-4
    assert lr_schedule(4e-4, 200000, 100000) == 1.69e-4
    assert lr_schedule(4e-4, 200000, 100000) == pytest.approx(0.65 ** 2 * 4e-4, rel=1e-15)
    with pytest.raises(ValueError):
        lr_schedule(0.0, 0, 10)
    with pytest.raises(ValueError):
        lr_schedule(1e-3, 0, 0)
