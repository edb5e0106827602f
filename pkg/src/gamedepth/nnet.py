"""Small BN-free residual depth network with manual backprop and ADAM.

Layout (input N x 3 x H x W, H and W divisible by 4)::

    conv 3->C stride 2, ReLU
    conv C->C stride 2
    B x [x + conv(relu(conv(x)))]
    conv C->r^2
    pixel shuffle by r          -> N x 1 x (H/4 * r) x (W/4 * r)

Convolutions are 3x3 with zero padding 1. They accumulate input channels and
kernel taps in a fixed order with elementwise operations only, so a sample's
output never depends on what else is in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def conv2d(x, w, b, stride=1):
    """3x3 convolution with zero padding 1. Returns output and the padded input."""
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    if w.shape[1:] != (cin, 3, 3):
        raise ValueError(f"kernel {w.shape} does not match input with {cin} channels")
    ho = (h - 1) // stride + 1
    wo = (wd - 1) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.empty((n, cout, ho, wo))
    out[...] = b[None, :, None, None]
    for c in range(cin):
        for ki in range(3):
            for kj in range(3):
                patch = xp[:, c, ki: ki + stride * (ho - 1) + 1: stride,
                           kj: kj + stride * (wo - 1) + 1: stride]
                out += w[None, :, c, ki, kj, None, None] * patch[:, None]
    return out, xp


def conv2d_backward(dout, xp, w, stride=1):
    """Gradients of a :func:`conv2d` call given the padded input it cached."""
    n, cout, ho, wo = dout.shape
    cin = w.shape[1]
    dw = np.zeros_like(w)
    db = dout.sum(axis=(0, 2, 3))
    dxp = np.zeros_like(xp)
    for c in range(cin):
        for ki in range(3):
            for kj in range(3):
                rows = slice(ki, ki + stride * (ho - 1) + 1, stride)
                cols = slice(kj, kj + stride * (wo - 1) + 1, stride)
                dw[:, c, ki, kj] = np.einsum("nohw,nhw->o", dout, xp[:, c, rows, cols])
                dxp[:, c, rows, cols] += np.einsum("o,nohw->nhw", w[:, c, ki, kj], dout)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def pixel_shuffle(x, r):
    """(N, C*r*r, H, W) -> (N, C, H*r, W*r), sub-positions in row-major order."""
    n, ch, h, w = x.shape
    if ch % (r * r):
        raise ValueError(f"{ch} channels are not divisible by r^2 = {r * r}")
    c = ch // (r * r)
    return x.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)


def pixel_unshuffle(y, r):
    n, c, hr, wr = y.shape
    if hr % r or wr % r:
        raise ValueError(f"spatial size {hr}x{wr} is not divisible by {r}")
    h, w = hr // r, wr // r
    return y.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)


@dataclass
class ModelParams:
    channels: int
    blocks: int
    ratio: int
    tensors: list

    @staticmethod
    def shapes(channels, blocks, ratio):
        c = channels
        out = [("stem1.w", (c, 3, 3, 3)), ("stem1.b", (c,)),
               ("stem2.w", (c, c, 3, 3)), ("stem2.b", (c,))]
        for i in range(blocks):
            out += [(f"block{i}.conv1.w", (c, c, 3, 3)), (f"block{i}.conv1.b", (c,)),
                    (f"block{i}.conv2.w", (c, c, 3, 3)), (f"block{i}.conv2.b", (c,))]
        out += [("head.w", (ratio * ratio, c, 3, 3)), ("head.b", (ratio * ratio,))]
        return out

    @property
    def names(self):
        return [name for name, _ in self.shapes(self.channels, self.blocks, self.ratio)]

    @property
    def dims(self):
        return (self.channels, self.blocks, self.ratio)

    def __post_init__(self):
        expected = self.shapes(self.channels, self.blocks, self.ratio)
        if len(self.tensors) != len(expected):
            raise ValueError(f"expected {len(expected)} tensors, got {len(self.tensors)}")
        for (name, shape), t in zip(expected, self.tensors):
            if tuple(t.shape) != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {t.shape}")

    def num_parameters(self):
        return sum(t.size for t in self.tensors)

    def copy(self):
        return ModelParams(self.channels, self.blocks, self.ratio, [t.copy() for t in self.tensors])

    def zeros_like(self):
        return ModelParams(self.channels, self.blocks, self.ratio, [np.zeros_like(t) for t in self.tensors])

    def flat(self):
        return np.concatenate([t.ravel() for t in self.tensors])


def _check_dims(channels, blocks, ratio):
    if channels < 1 or blocks < 0 or ratio not in (1, 2, 4):
        raise ValueError(f"invalid model dims C={channels}, B={blocks}, r={ratio}")


def init_params(seed, channels=16, blocks=4, ratio=4) -> ModelParams:
    """He-normal kernels (variance 2 / fan_in) and zero biases."""
    _check_dims(channels, blocks, ratio)
    rng = np.random.default_rng(seed)
    tensors = []
    for name, shape in ModelParams.shapes(channels, blocks, ratio):
        if name.endswith(".b"):
            tensors.append(np.zeros(shape))
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            tensors.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape))
    return ModelParams(channels, blocks, ratio, tensors)


def residual_block_forward(x, w1, b1, w2, b2):
    if x.shape[1] != w1.shape[1]:
        raise ValueError(f"block expects {w1.shape[1]} channels, got {x.shape[1]}")
    u, xp1 = conv2d(x, w1, b1)
    v = np.maximum(u, 0.0)
    res, xp2 = conv2d(v, w2, b2)
    return x + res, (xp1, u, xp2)


@dataclass
class ForwardCache:
    params_id: int
    input_shape: tuple
    stem1_xp: np.ndarray
    stem1_pre: np.ndarray
    stem2_xp: np.ndarray
    blocks: list = field(default_factory=list)
    head_xp: np.ndarray = None


def model_forward(params: ModelParams, rgb):
    """Predict log depth for a batch of standardised RGB images.

    Returns ``(prediction, cache)``; the prediction has shape
    (N, 1, H/4 * r, W/4 * r).
    """
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim != 4 or rgb.shape[1] != 3:
        raise ValueError(f"expected an (N, 3, H, W) batch, got {rgb.shape}")
    if rgb.shape[2] % 4 or rgb.shape[3] % 4:
        raise ValueError(f"spatial dims must be divisible by 4, got {rgb.shape[2:]}")
    t = params.tensors
    a1, xp0 = conv2d(rgb, t[0], t[1], stride=2)
    h, xp1 = conv2d(np.maximum(a1, 0.0), t[2], t[3], stride=2)
    cache = ForwardCache(id(params), rgb.shape, xp0, a1, xp1)
    k = 4
    for _ in range(params.blocks):
        h, bc = residual_block_forward(h, t[k], t[k + 1], t[k + 2], t[k + 3])
        cache.blocks.append(bc)
        k += 4
    o, cache.head_xp = conv2d(h, t[k], t[k + 1])
    return pixel_shuffle(o, params.ratio), cache


def model_backward(params: ModelParams, cache: ForwardCache, grad_out) -> ModelParams:
    """Parameter gradients for the loss whose output gradient is ``grad_out``."""
    if cache.params_id != id(params):
        raise ValueError("cache was produced by a different parameter set")
    n, _, h, w = cache.input_shape
    r = params.ratio
    expected = (n, 1, h // 4 * r, w // 4 * r)
    if grad_out.shape != expected:
        raise ValueError(f"output gradient has shape {grad_out.shape}, expected {expected}")
    t = params.tensors
    grads = [None] * len(t)
    k = 4 + 4 * params.blocks
    dh, grads[k], grads[k + 1] = conv2d_backward(pixel_unshuffle(grad_out, r), cache.head_xp, t[k])
    for i in reversed(range(params.blocks)):
        k = 4 + 4 * i
        xp1, u, xp2 = cache.blocks[i]
        dv, grads[k + 2], grads[k + 3] = conv2d_backward(dh, xp2, t[k + 2])
        du = dv * (u > 0)
        dx, grads[k], grads[k + 1] = conv2d_backward(du, xp1, t[k])
        dh = dh + dx
    dr1, grads[2], grads[3] = conv2d_backward(dh, cache.stem2_xp, t[2], stride=2)
    da1 = dr1 * (cache.stem1_pre > 0)
    _, grads[0], grads[1] = conv2d_backward(da1, cache.stem1_xp, t[0], stride=2)
    return ModelParams(params.channels, params.blocks, params.ratio, grads)


@dataclass
class OptState:
    m: list
    v: list
    step: int = 0
    lr: float = 4e-4
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: ModelParams, lr=4e-4):
        return cls([np.zeros_like(t) for t in params.tensors],
                   [np.zeros_like(t) for t in params.tensors], 0, lr)


def adam_step(params: ModelParams, grads: ModelParams, state: OptState, lr=None):
    """One bias-corrected ADAM update. Returns new params and new state."""
    if len(grads.tensors) != len(params.tensors) or len(state.m) != len(params.tensors):
        raise ValueError("parameter, gradient and moment lists differ in length")
    lr = state.lr if lr is None else lr
    b1, b2 = state.beta1, state.beta2
    step = state.step + 1
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.tensors, grads.tensors, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    out = ModelParams(params.channels, params.blocks, params.ratio, new_p)
    return out, OptState(new_m, new_v, step, state.lr, b1, b2, state.eps)


def lr_schedule(base_lr, iteration, decay_every, factor=0.65):
    """``base_lr * factor ** (iteration // decay_every)``.

    The power is taken in decimal arithmetic and rounded once, so decimal
    inputs give the correctly rounded decimal result (4e-4 -> 2.6e-4 -> 1.69e-4).
    """
    if not base_lr > 0 or decay_every < 1:
        raise ValueError("need base_lr > 0 and decay_every >= 1")
    k = int(iteration) // int(decay_every)
    return float(Decimal(repr(float(base_lr))) * Decimal(repr(float(factor))) ** k)


def model_gradcheck(rng, channels=2, blocks=1, size=8, alpha=0.5, h=1e-6):
    """Central-difference check of every parameter of a tiny model under the total loss."""
    from .objectives import total_loss

    params = init_params(int(rng.integers(2**31)), channels, blocks, 4)
    for t in params.tensors:
        t += 0.1 * rng.standard_normal(t.shape)
    x = rng.standard_normal((1, 3, size, size))
    target = rng.uniform(0.0, 3.0, size=(size, size))

    def value():
        y, _ = model_forward(params, x)
        return total_loss(y[0, 0], target, alpha, 2).value

    y, cache = model_forward(params, x)
    res = total_loss(y[0, 0], target, alpha, 2)
    grads = model_backward(params, cache, res.grad[None, None])
    worst = 0.0
    for t, g in zip(params.tensors, grads.tensors):
        flat = t.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = value()
            flat[i] = keep - h
            down = value()
            flat[i] = keep
            fd = (up - down) / (2 * h)
            a = g.flat[i]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
    return worst
