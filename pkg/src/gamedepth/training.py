"""Training loop and evaluation runs for the residual depth network."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import depthproc
from .dataset import augment, default_max_scale, load_frames
from .io import load_checkpoint, save_checkpoint
from .metrics import MetricsReport, aggregate, evaluate
from .nnet import (ModelParams, OptState, adam_step, init_params, lr_schedule,
                   model_backward, model_forward)
from .objectives import downsample_half, si_loss, total_loss, tv_loss
from .render import FrameSample

log = logging.getLogger(__name__)

INPUT_MODES = ("standardize", "histeq", "log")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    data_dir: str
    epochs: int = 50
    batch_size: int = 16
    base_lr: float = 4e-4
    decay_every: int = 200
    alpha: float = 0.5
    num_scales: int = 3
    channels: int = 16
    blocks: int = 4
    ratio: int = 4
    seed: int = 0
    mode: str = "standardize"
    max_scale_px: Optional[int] = None
    augment: bool = True

    def __post_init__(self):
        for name in ("epochs", "batch_size", "decay_every", "num_scales", "channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.base_lr < 0 or self.alpha < 0:
            raise ValueError("base_lr and alpha must be non-negative")
        if self.mode not in INPUT_MODES:
            raise ValueError(f"mode must be one of {INPUT_MODES}")


def normalize_rgb(rgb, mode="standardize"):
    """Per-image input normalisation of an (H, W, 3) image."""
    if mode == "standardize":
        return depthproc.standardize(rgb)
    if mode == "histeq":
        return np.stack([depthproc.histogram_equalize(rgb[..., c]) for c in range(3)], axis=-1)
    if mode == "log":
        return depthproc.log_transform(rgb, d_min=1.0 / 510)
    raise ValueError(f"unknown input mode {mode!r}")


def to_batch(images, mode):
    return np.stack([normalize_rgb(im, mode) for im in images]).transpose(0, 3, 1, 2)


def log_target(depth, ratio=4):
    """Log depth at the network's output resolution (pooled when r < 4)."""
    t = depthproc.log_transform(depth)
    for _ in range({4: 0, 2: 1, 1: 2}[ratio]):
        t = downsample_half(t)
    return t


def predict_log_depth(params: ModelParams, images, mode="standardize"):
    pred, _ = model_forward(params, to_batch(images, mode))
    return pred[:, 0]


@dataclass
class TrainResult:
    params: ModelParams
    iteration: int
    log_rows: list = field(default_factory=list)

    def log_text(self) -> str:
        head = "iteration\tlr\tL_SI\tL_TV\tL_Total\n"
        return head + "".join(
            f"{it}\t{lr!r}\t{si!r}\t{tv!r}\t{tot!r}\n" for it, lr, si, tv, tot in self.log_rows)


def batch_loss(params, images, depths, config):
    """Mean loss over a batch and the matching parameter gradients."""
    pred, cache = model_forward(params, to_batch(images, config.mode))
    grad = np.zeros_like(pred)
    n = len(images)
    si_sum = tv_sum = tot_sum = 0.0
    for i in range(n):
        target = log_target(depths[i], params.ratio)
        res = total_loss(pred[i, 0], target, config.alpha, config.num_scales)
        grad[i, 0] = res.grad / n
        si_sum += si_loss(pred[i, 0], target).value
        tv_sum += tv_loss(pred[i, 0], target, config.num_scales).value
        tot_sum += res.value
    grads = model_backward(params, cache, grad)
    return (si_sum / n, tv_sum / n, tot_sum / n), grads


def train(config: TrainConfig, log_path=None, checkpoint_path=None) -> TrainResult:
    """Fit the network on a dataset directory.

    Batches are reshuffled every epoch and augmented per sample; the whole
    trajectory is a function of ``config.seed``.
    """
    rgb, depth, _ = load_frames(config.data_dir)
    n, h, w = depth.shape
    if h % 4 or w % 4:
        raise TrainingError(f"frame size {w}x{h} is not divisible by 4")
    max_scale = default_max_scale(w) if config.max_scale_px is None else config.max_scale_px

    rng = np.random.default_rng(config.seed)
    params = init_params(config.seed, config.channels, config.blocks, config.ratio)
    state = OptState.for_params(params, config.base_lr)
    result = TrainResult(params, 0)
    it = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            images, depths = [], []
            for j in idx:
                sample = FrameSample(rgb[j], depth[j], {})
                if config.augment:
                    sample = augment(sample, rng, max_scale)
                images.append(sample.rgb)
                depths.append(sample.depth)
            (l_si, l_tv, l_tot), grads = batch_loss(params, images, depths, config)
            if not all(math.isfinite(v) for v in (l_si, l_tv, l_tot)):
                raise TrainingError(f"non-finite loss at iteration {it} (epoch {epoch}): "
                                    f"L_SI={l_si}, L_TV={l_tv}, L_Total={l_tot}")
            lr = lr_schedule(config.base_lr, it, config.decay_every) if config.base_lr > 0 else 0.0
            params, state = adam_step(params, grads, state, lr=lr)
            result.log_rows.append((it, lr, l_si, l_tv, l_tot))
            it += 1
        log.debug("epoch %d done, last L_Total %.6f", epoch, result.log_rows[-1][-1])
    result.params, result.iteration = params, it
    if log_path is not None:
        Path(log_path).write_text(result.log_text(), encoding="utf-8")
    if checkpoint_path is not None:
        save_checkpoint(params, checkpoint_path, it, asdict(config))
    return result


def evaluate_params(params: ModelParams, data_dir, mode="standardize", batch_size=16) -> MetricsReport:
    rgb, depth, _ = load_frames(data_dir)
    reports = []
    for start in range(0, len(rgb), batch_size):
        pred = predict_log_depth(params, rgb[start:start + batch_size], mode)
        for p, d in zip(pred, depth[start:start + batch_size]):
            gt = np.exp(log_target(d, params.ratio))
            reports.append(evaluate(np.exp(p), gt))
    return aggregate(reports)


def evaluate_checkpoint(checkpoint_path, data_dir, expected_dims=None) -> MetricsReport:
    params, meta = load_checkpoint(checkpoint_path, expected_dims)
    mode = meta["config"].get("mode", "standardize")
    return evaluate_params(params, data_dir, mode)
