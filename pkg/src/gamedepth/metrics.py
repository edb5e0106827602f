"""Depth evaluation metrics: RMSE, RMSE(log), RMSE(SI), absrel and sqrrel.

The reports also carry the mean log ratio so that per-image reports can be
pooled exactly into the report of the concatenated data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    rmse_log: float
    rmse_si: float
    absrel: float
    sqrrel: float
    sample_count: int
    mean_log_ratio: float = 0.0

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def format_table(self) -> str:
        names = ("rmse", "rmse_log", "rmse_si", "absrel", "sqrrel")
        head = "  ".join(f"{n:>10}" for n in names)
        row = "  ".join(f"{getattr(self, n):>10.6f}" for n in names)
        kv = "\n".join(f"{k}={v!r}" for k, v in self.as_dict().items())
        return f"{head}\n{row}\n\n{kv}"


def evaluate(pred, gt) -> MetricsReport:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        raise ValueError("empty raster")
    if np.any(pred <= 0) or np.any(gt <= 0):
        raise ValueError("depths must be strictly positive")
    err = pred - gt
    d = np.log(pred) - np.log(gt)
    mean_d = d.mean()
    c = d - mean_d
    return MetricsReport(
        rmse=math.sqrt(np.mean(err * err)),
        rmse_log=math.sqrt(np.mean(d * d)),
        rmse_si=math.sqrt(np.mean(c * c)),
        absrel=float(np.mean(np.abs(err) / gt)),
        sqrrel=float(np.mean(err * err / gt)),
        sample_count=int(pred.size),
        mean_log_ratio=float(mean_d),
    )


def aggregate(reports: Sequence[MetricsReport], weights: Optional[Sequence[float]] = None) -> MetricsReport:
    """Pool per-image reports as if the images had been evaluated together.

    RMS metrics are recombined from their mean squares before the square
    root; ``weights`` default to each report's pixel count.
    """
    if not reports:
        raise ValueError("nothing to aggregate")
    if len(reports) == 1:
        return reports[0]
    if weights is None:
        weights = [r.sample_count for r in reports]
    if len(weights) != len(reports):
        raise ValueError("one weight per report is required")
    w = np.asarray(weights, dtype=float)
    total = w.sum()

    def pooled(values):
        return float(np.dot(w, np.asarray(values, dtype=float)) / total)

    mean_d = pooled([r.mean_log_ratio for r in reports])
    # within-image variance plus spread of the image means around the pooled mean
    var_d = pooled([r.rmse_si ** 2 + (r.mean_log_ratio - mean_d) ** 2 for r in reports])
    return MetricsReport(
        rmse=math.sqrt(pooled([r.rmse ** 2 for r in reports])),
        rmse_log=math.sqrt(pooled([r.rmse_log ** 2 for r in reports])),
        rmse_si=math.sqrt(var_d),
        absrel=pooled([r.absrel for r in reports]),
        sqrrel=pooled([r.sqrrel for r in reports]),
        sample_count=int(sum(r.sample_count for r in reports)),
        mean_log_ratio=mean_d,
    )
