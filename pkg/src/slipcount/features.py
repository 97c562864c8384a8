"""Slip-image feature extraction.

A feature vector is the 32 x 32 box-filtered downsample of the letterboxed
180 x 180 image, mean-centred and L2-normalised (1024 dimensions). Exactly
uniform images map to the zero vector instead of blowing up in the
normalisation; downstream code treats that as "no information".

Mean-centring plus unit norm makes the feature exactly invariant to affine
intensity remaps a*I + b with a > 0, so lighting and contrast drift on the
capture rig cannot flip a label.
"""

from __future__ import annotations

import numpy as np

from .images import SYMBOL_SIZE, as_grey_array, letterbox

FEATURE_SIDE = 32
FEATURE_DIM = FEATURE_SIDE * FEATURE_SIDE
_ZERO_NORM_EPS = 1e-7


def _box_weights(n_out: int, n_in: int) -> np.ndarray:
    """Exact area-averaging weights mapping n_in samples onto n_out bins."""
    w = np.zeros((n_out, n_in), dtype=np.float64)
    step = n_in / n_out
    for i in range(n_out):
        lo, hi = i * step, (i + 1) * step
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / step
    return w


_W = _box_weights(FEATURE_SIDE, SYMBOL_SIZE)


def preprocess(image: np.ndarray) -> np.ndarray:
    """Map a greyscale raster to its unit-norm (or exactly zero) feature."""
    arr = letterbox(as_grey_array(image)).astype(np.float64)
    small = _W @ arr @ _W.T
    flat = small.ravel() - small.mean()
    norm = float(np.linalg.norm(flat))
    if norm < _ZERO_NORM_EPS:
        return np.zeros(FEATURE_DIM, dtype=np.float64)
    return flat / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two features; zero vectors compare as 0 to
    anything non-zero and as 1 to each other (identical no-information)."""
    a_zero = not np.any(a)
    b_zero = not np.any(b)
    if a_zero and b_zero:
        return 1.0
    if a_zero or b_zero:
        return 0.0
    return float(np.dot(a, b))
