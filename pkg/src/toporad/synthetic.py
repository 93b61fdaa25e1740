"""Seeded synthetic patches: ring-structured lesion-like versus smooth-gradient
healthy-like texture, both with additive gaussian noise."""
from __future__ import annotations

import numpy as np

from .ingest import GrayImage, Patch
from .tables import FEATURES, FeatureTable


def ring_patch(rng, size: int = 30, noise: float = 20.0) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.full((size, size), rng.uniform(140, 180))
    for _ in range(rng.integers(1, 3)):
        cy, cx = rng.uniform(0.3 * size, 0.7 * size, 2)
        r = rng.uniform(0.15 * size, 0.35 * size)
        width = rng.uniform(1.5, 3.0)
        d = np.hypot(yy - cy, xx - cx)
        depth = rng.uniform(50, 90)
        img -= depth * np.exp(-(((d - r) / width) ** 2))
    return img + rng.normal(0.0, noise, img.shape)


def gradient_patch(rng, size: int = 30, noise: float = 20.0) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    img = rng.uniform(110, 150) + rng.uniform(20, 60) * ramp
    return img + rng.normal(0.0, noise, img.shape)


def _to_image(a: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(np.rint(a), 0, 255).astype(np.int64), 255)


def synthetic_corpus(n: int = 400, seed: int = 0, size: int = 30, noise: float = 20.0) -> list[Patch]:
    """``n`` patches, alternating pathologic (ring) and healthy (gradient)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        if i % 2 == 0:
            img, label = ring_patch(rng, size, noise), "pathologic"
        else:
            img, label = gradient_patch(rng, size, noise), "healthy"
        out.append(Patch((0, 0), size, _to_image(img), label, f"synth{i // 2:04d}"))
    return out


#: pre-set (mean, sd) per topological feature, matching the magnitudes seen on FLAIR slices
PRE_TOPO = {"euler": (-773.94, 62.98), "pe_h0": (0.44, 0.23), "pe_h1": (0.70, 0.15), "hgen": (0.30, 0.26)}


def progression_tables(n: int = 500, shift: float = 0.07, feature: str = "pe_h0", seed: int = 0):
    """A synthetic pre table and a post table equal to it except ``feature`` + ``shift``.

    Texture columns are filled with unit gaussians; labels alternate.
    """
    rng = np.random.default_rng(seed)
    X = np.empty((n, len(FEATURES)))
    for j, name in enumerate(FEATURES):
        mean, sd = PRE_TOPO.get(name, (0.0, 1.0))
        X[:, j] = rng.normal(mean, sd, n)
    X[:, 0] = np.rint(X[:, 0])
    y = np.arange(n) % 2
    ids = [f"pre{i:04d}" for i in range(n)]
    pre = FeatureTable(X, y, ids)
    Xp = X.copy()
    Xp[:, FEATURES.index(feature)] += shift
    post = FeatureTable(Xp, y, [f"post{i:04d}" for i in range(n)])
    return pre, post
