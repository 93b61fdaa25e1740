"""Grey-level co-occurrence matrices and four Haralick descriptors."""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

#: distance 1 at 0, 45, 90 and 135 degrees, as (drow, dcol)
DEFAULT_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))
DEFAULT_LEVELS = 32
DEGENERATE_VAR = 1e-12


@dataclass(frozen=True)
class Glcm:
    levels: int
    probabilities: np.ndarray
    offsets_used: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class TextureFeatures:
    contrast: float
    correlation: float
    homogeneity: float
    energy: float

    def as_tuple(self) -> tuple:
        return astuple(self)


def quantize(values: np.ndarray, levels: int, maxval: int) -> np.ndarray:
    """bin = floor(v * levels / (maxval + 1)), against the declared range."""
    return (np.asarray(values, dtype=np.int64) * levels) // (maxval + 1)


def compute_glcm(patch, levels: int = DEFAULT_LEVELS, offsets=DEFAULT_OFFSETS, maxval: int | None = None) -> Glcm:
    """Symmetric, normalized co-occurrence matrix summed over ``offsets``.

    ``patch`` is a GrayImage (uses its declared maxval) or a 2D integer
    array, in which case ``maxval`` defaults to ``max(patch.max(), levels - 1)``.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    values = np.asarray(getattr(patch, "values", patch))
    if maxval is None:
        maxval = getattr(patch, "maxval", None)
        if maxval is None:
            maxval = max(int(values.max()), levels - 1)
    q = quantize(values, levels, maxval)
    h, w = q.shape
    counts = np.zeros((levels, levels), dtype=np.int64)
    for dr, dc in offsets:
        if dr == 0 and dc == 0:
            raise ValueError("offsets must be nonzero")
        if abs(dr) >= h or abs(dc) >= w:
            raise ValueError(f"a {w}x{h} patch is too small for offset {(dr, dc)}")
        a = q[max(0, -dr) : h - max(0, dr), max(0, -dc) : w - max(0, dc)]
        b = q[max(0, dr) : h + min(0, dr), max(0, dc) : w + min(0, dc)]
        np.add.at(counts, (a.ravel(), b.ravel()), 1)
    counts = counts + counts.T
    return Glcm(levels, counts / counts.sum(), tuple(tuple(o) for o in offsets))


def haralick_features(glcm: Glcm) -> TextureFeatures:
    P = glcm.probabilities
    i, j = np.indices(P.shape)
    d2 = (i - j) ** 2
    contrast = float((d2 * P).sum())
    homogeneity = float((P / (1.0 + d2)).sum())
    energy = float(np.sqrt((P**2).sum()))
    mu_i, mu_j = float((i * P).sum()), float((j * P).sum())
    sd_i = float(np.sqrt(((i - mu_i) ** 2 * P).sum()))
    sd_j = float(np.sqrt(((j - mu_j) ** 2 * P).sum()))
    if sd_i * sd_j < DEGENERATE_VAR:
        correlation = 1.0
    else:
        correlation = float(((i - mu_i) * (j - mu_j) * P).sum() / (sd_i * sd_j))
        correlation = min(1.0, max(-1.0, correlation))
    return TextureFeatures(contrast, correlation, homogeneity, energy)


def texture_feature_vector(patch, levels: int = DEFAULT_LEVELS, offsets=DEFAULT_OFFSETS, maxval=None):
    return haralick_features(compute_glcm(patch, levels, offsets, maxval))
