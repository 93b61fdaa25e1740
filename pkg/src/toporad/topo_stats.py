"""Scalar summaries of a barcode: Euler characteristic, persistent entropy
and generator entropy. All logarithms are base 10."""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .tda import Barcode, compute_persistence, lower_star_filtration


@dataclass(frozen=True)
class TopoFeatures:
    euler: int
    pe_h0: float
    pe_h1: float
    hgen: float

    def as_tuple(self) -> tuple:
        return astuple(self)


def _shannon10(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if w.size == 0 or total <= 0:
        return 0.0
    p = w[w > 0] / total
    h = float(-(p * np.log10(p)).sum())
    return max(h, 0.0)


def euler_characteristic(barcode: Barcode, mode: str = "all_intervals") -> int:
    """#H0 - #H1 intervals; ``persistent_only`` counts essential ones only."""
    if mode == "all_intervals":
        keep = barcode.intervals
    elif mode == "persistent_only":
        keep = [iv for iv in barcode.intervals if iv.essential]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return sum(1 for iv in keep if iv.dim == 0) - sum(1 for iv in keep if iv.dim == 1)


def persistent_entropy(barcode: Barcode, dim: int) -> float:
    """Entropy of normalized interval lengths; infinite deaths become t_max + 1."""
    cap = barcode.t_max + 1.0
    return _shannon10([iv.length(cap) for iv in barcode.dim(dim)])


def generator_entropy(barcode: Barcode) -> float:
    counts = []
    for iv in barcode.dim(1):
        if not iv.generator:
            raise ValueError(f"H1 interval [{iv.birth}, {iv.death}) has no generator")
        counts.append(len(set(iv.generator)))
    return _shannon10(counts)


def barcode_features(barcode: Barcode) -> TopoFeatures:
    return TopoFeatures(
        euler_characteristic(barcode),
        persistent_entropy(barcode, 0),
        persistent_entropy(barcode, 1),
        generator_entropy(barcode),
    )


def topo_feature_vector(patch) -> TopoFeatures:
    return barcode_features(compute_persistence(lower_star_filtration(patch)))
