"""Scale-invariant and multi-scale total-variation losses with analytic gradients.

All losses take log-depth rasters of shape (H, W) and return the gradient
with respect to the log prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LossResult:
    value: float
    grad: np.ndarray


def _log_diff(log_pred, log_gt):
    log_pred = np.asarray(log_pred, dtype=float)
    log_gt = np.asarray(log_gt, dtype=float)
    if log_pred.shape != log_gt.shape:
        raise ValueError(f"shape mismatch: {log_pred.shape} vs {log_gt.shape}")
    if log_pred.size == 0:
        raise ValueError("empty raster")
    return log_pred - log_gt


def si_loss_pairwise(log_pred, log_gt) -> float:
    """O(n^2) pairwise form; a reference for tests, far too slow for training."""
    d = _log_diff(log_pred, log_gt).ravel()
    n = d.size
    pair = d[:, None] - d[None, :]
    return float(np.sum(pair * pair) / (2.0 * n * n))


def si_loss(log_pred, log_gt) -> LossResult:
    d = _log_diff(log_pred, log_gt)
    n = d.size
    centered = d - d.mean()
    # mean(D^2) - mean(D)^2, evaluated as the variance of D for stability
    value = float(np.sum(centered * centered) / n)
    return LossResult(value, (2.0 / n) * centered)


def downsample_half(d):
    """2x2 average pooling; an odd trailing row or column is dropped."""
    d = np.asarray(d, dtype=float)
    h, w = d.shape
    if h < 2 or w < 2:
        raise ValueError(f"cannot pool a {h}x{w} raster")
    d = d[: h - h % 2, : w - w % 2]
    return 0.25 * (d[0::2, 0::2] + d[0::2, 1::2] + d[1::2, 0::2] + d[1::2, 1::2])


def _upsample_grad(g, shape):
    out = np.zeros(shape)
    h, w = g.shape
    q = 0.25 * g
    for dy in (0, 1):
        for dx in (0, 1):
            out[dy: 2 * h: 2, dx: 2 * w: 2] = q
    return out


def tv_loss(log_pred, log_gt, num_scales: int = 3) -> LossResult:
    """Squared forward differences of D summed over a factor-2 pyramid.

    Each scale is normalised by its own pixel count.
    """
    d = _log_diff(log_pred, log_gt)
    if num_scales < 1:
        raise ValueError("num_scales must be >= 1")
    pyramid = [d]
    for _ in range(num_scales - 1):
        h, w = pyramid[-1].shape
        if h < 4 or w < 4:
            raise ValueError(f"{num_scales} scales is too many for a {d.shape} raster")
        pyramid.append(downsample_half(pyramid[-1]))
    if min(pyramid[-1].shape) < 2:
        raise ValueError(f"coarsest scale {pyramid[-1].shape} is below 2x2")

    value = 0.0
    grads = []
    for level in pyramid:
        n = level.size
        gx = level[:, 1:] - level[:, :-1]
        gy = level[1:, :] - level[:-1, :]
        value += (np.sum(gx * gx) + np.sum(gy * gy)) / n
        g = np.zeros(level.shape)
        g[:, 1:] += (2.0 / n) * gx
        g[:, :-1] -= (2.0 / n) * gx
        g[1:, :] += (2.0 / n) * gy
        g[:-1, :] -= (2.0 / n) * gy
        grads.append(g)
    # fold coarse gradients back through the pooling
    for s in range(len(pyramid) - 1, 0, -1):
        grads[s - 1] = grads[s - 1] + _upsample_grad(grads[s], pyramid[s - 1].shape)
    return LossResult(float(value), grads[0])


def total_loss(log_pred, log_gt, alpha: float = 0.5, num_scales: int = 3) -> LossResult:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    si = si_loss(log_pred, log_gt)
    if alpha == 0:
        return si
    tv = tv_loss(log_pred, log_gt, num_scales)
    return LossResult(si.value + alpha * tv.value, si.grad + alpha * tv.grad)


def finite_diff_check(loss: Callable[..., LossResult], log_pred, log_gt, h: float = 1e-6) -> float:
    """Largest relative error between the analytic gradient and central differences."""
    x = np.array(log_pred, dtype=float)
    analytic = loss(x, log_gt).grad
    worst = 0.0
    flat = x.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss(x, log_gt).value
        flat[i] = keep - h
        down = loss(x, log_gt).value
        flat[i] = keep
        fd = (up - down) / (2 * h)
        a = analytic.flat[i]
        worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
    return worst
