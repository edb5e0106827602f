"""Depth and image normalisations: rank equalisation, log transform, standardisation."""

import numpy as np
from scipy.stats import rankdata

from .scenegen import NEAR_CLIP


def histogram_equalize(depth):
    """Map every sample to its mean rank, scaled to [0, 1].

    Exact ranks instead of a binned CDF, so there is no quantisation. Ties
    share their average rank; a constant raster maps to 0.5 everywhere.
    """
    x = np.asarray(depth, dtype=float)
    n = x.size
    if n < 2 or np.all(x == x.flat[0]):
        return np.full(x.shape, 0.5)
    ranks = rankdata(x, method="average", axis=None).reshape(x.shape)
    return (ranks - 1.0) / (n - 1)


def log_transform(depth, d_min=NEAR_CLIP):
    if not d_min > 0:
        raise ValueError("d_min must be positive")
    return np.log(np.maximum(np.asarray(depth, dtype=float), d_min))


def standardize(raster, epsilon=1e-8):
    """Zero-mean, unit-variance rescaling pooled over all samples and channels."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(raster, dtype=float)
    if x.size == 0 or np.all(x == x.flat[0]):
        return np.zeros(x.shape)
    mu = x.mean()
    s = x.std()
    return (x - mu) / max(s, epsilon)
