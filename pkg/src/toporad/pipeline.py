"""End-to-end steps shared by the CLI, the scripts and the acceptance suite."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import learn
from .ingest import GrayImage, Patch, extract_patches, load_grayscale, load_mask, mirror_mask
from .stats import welch_t_test
from .tables import FEATURES, TEXTURE_FEATURES, TOPO_FEATURES, FeatureTable
from .texture import DEFAULT_LEVELS, DEFAULT_OFFSETS, texture_feature_vector
from .topo_stats import topo_feature_vector

log = logging.getLogger(__name__)

FEATURE_SETS = {"topo": TOPO_FEATURES, "texture": TEXTURE_FEATURES, "both": FEATURES}


def patch_features(patch: GrayImage, levels: int = DEFAULT_LEVELS, offsets=DEFAULT_OFFSETS) -> list[float]:
    """The eight per-patch features in table order."""
    topo = topo_feature_vector(patch)
    tex = texture_feature_vector(patch, levels, offsets)
    return [*topo.as_tuple(), *tex.as_tuple()]


def table_from_patches(patches: list[Patch], levels: int = DEFAULT_LEVELS, offsets=DEFAULT_OFFSETS) -> FeatureTable:
    X = [patch_features(p.pixels, levels, offsets) for p in patches]
    y = [1 if p.label == "pathologic" else 0 for p in patches]
    return FeatureTable(
        np.array(X).reshape(len(patches), len(FEATURES)), y, [p.source_id for p in patches], [p.origin for p in patches]
    )


@dataclass(frozen=True)
class ManifestItem:
    image_path: str
    mask_path: str
    label: str  # pathologic | healthy | mirror
    source_id: str


def read_manifest(path) -> list[ManifestItem]:
    """``image_path,mask_path,label,source_id`` lines; relative paths resolve
    against the manifest's directory. Label ``mirror`` derives the healthy ROI
    from the given lesion mask."""
    base = Path(path).parent
    items = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if row == ["image_path", "mask_path", "label", "source_id"]:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields")
            img, mask, label, sid = (v.strip() for v in row)
            if label not in ("pathologic", "healthy", "mirror"):
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            items.append(ManifestItem(str(base / img), str(base / mask), label, sid))
    return items


def manifest_patches(item: ManifestItem, size: int = 30, stride: int = 30, min_coverage: float = 0.5) -> list[Patch]:
    image = load_grayscale(item.image_path)
    if item.label == "mirror":
        mask = mirror_mask(load_mask(item.mask_path, "pathologic", image))
    else:
        mask = load_mask(item.mask_path, item.label, image)
    return extract_patches(image, mask, size, stride, min_coverage, item.source_id)


# --------------------------------------------------------------------------
# progression


PROGRESSION_HEADER = ["feature", "mean_pre", "sd_pre", "mean_post", "sd_post", "t", "df", "p"]


def _aggregate(table: FeatureTable, by_source: bool) -> FeatureTable:
    if not by_source:
        return table
    groups = sorted(set(table.source_ids))
    X = np.array([table.X[[s == g for s in table.source_ids]].mean(axis=0) for g in groups])
    y = [int(table.y[[s == g for s in table.source_ids]][0]) for g in groups]
    return FeatureTable(X, y, groups, [], table.names)


def progression_report(pre: FeatureTable, post: FeatureTable, features=TOPO_FEATURES, by_source: bool = False):
    if tuple(pre.names) != tuple(post.names):
        raise ValueError(f"column mismatch: {pre.names} vs {post.names}")
    pre, post = _aggregate(pre, by_source), _aggregate(post, by_source)
    rows = []
    for name in features:
        r = welch_t_test(pre.column(name), post.column(name))
        rows.append([name, r.mean_a, r.sd_a, r.mean_b, r.sd_b, r.t, r.df, r.p])
    return rows


# --------------------------------------------------------------------------
# classification


@dataclass
class ClassificationRun:
    feature_set: str
    model: learn.ClassifierModel
    selection: object
    cv: learn.CVResult
    train: learn.Metrics
    test: learn.Metrics
    train_idx: np.ndarray
    test_idx: np.ndarray


def run_classification(
    table: FeatureTable,
    feature_set: str = "both",
    seed: int = 0,
    hyper: learn.Hyper = learn.Hyper(),
    k: int = 5,
    train_fraction: float = 0.7,
    group_by_source: bool = False,
) -> ClassificationRun:
    """Split, cross-validate on the training part, refit, score the test part."""
    sub = table.columns(FEATURE_SETS[feature_set])
    train_idx, test_idx = learn.split(sub, train_fraction, seed, group_by_source)
    train, test = sub.subset(train_idx), sub.subset(test_idx)
    cv = learn.kfold_cv(train, k, seed, hyper)
    model, selection = learn.fit(train, hyper)
    return ClassificationRun(
        feature_set,
        model,
        selection,
        cv,
        learn.evaluate(model, train.X, train.y),
        learn.evaluate(model, test.X, test.y),
        train_idx,
        test_idx,
    )
