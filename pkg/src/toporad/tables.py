"""Feature tables and the shared number format for every CSV we emit."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

#: significant digits for serialized reals; golden files depend on it
SIG_DIGITS = 9

TOPO_FEATURES = ("euler", "pe_h0", "pe_h1", "hgen")
TEXTURE_FEATURES = ("contrast", "correlation", "homogeneity", "energy")
FEATURES = TOPO_FEATURES + TEXTURE_FEATURES

LABELS = {"healthy": 0, "pathologic": 1}
LABEL_NAMES = {v: k for k, v in LABELS.items()}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"  # folds -0.0
    return f"{x:.{SIG_DIGITS}g}"


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


@dataclass
class FeatureTable:
    """Per-patch feature rows; labels are 1 for pathologic, 0 for healthy."""

    X: np.ndarray
    y: np.ndarray
    source_ids: list[str]
    origins: list[tuple[int, int]] = field(default_factory=list)
    names: tuple[str, ...] = FEATURES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        self.X = X.reshape(0, len(self.names)) if X.size == 0 else X.reshape(len(self.source_ids), -1)
        self.y = np.asarray(self.y, dtype=np.int64)
        if not self.origins:
            self.origins = [(0, 0)] * len(self.source_ids)
        if self.X.shape[1] != len(self.names):
            raise ValueError(f"{self.X.shape[1]} columns but {len(self.names)} names")
        if len(self.y) != len(self.X) or len(self.origins) != len(self.X):
            raise ValueError("rows, labels and origins must have equal length")
        if not set(np.unique(self.y).tolist()) <= {0, 1}:
            raise ValueError("labels must be binary")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "FeatureTable":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureTable(
            self.X[idx], self.y[idx], [self.source_ids[i] for i in idx], [self.origins[i] for i in idx], self.names
        )

    def columns(self, names) -> "FeatureTable":
        cols = [self.names.index(n) for n in names]
        return FeatureTable(self.X[:, cols], self.y, list(self.source_ids), list(self.origins), tuple(names))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def write_csv(self, path) -> None:
        header = ["source_id", "row", "col", "label", *self.names]
        rows = (
            [sid, r, c, LABEL_NAMES[int(lab)], *x]
            for sid, (r, c), lab, x in zip(self.source_ids, self.origins, self.y, self.X.tolist())
        )
        write_rows(path, header, rows)

    @classmethod
    def read_csv(cls, path) -> "FeatureTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:4] != ["source_id", "row", "col", "label"]:
                raise ValueError(f"{path}: missing feature-table header")
            names = tuple(header[4:])
            sids, origins, labels, X = [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                sids.append(row[0])
                origins.append((int(row[1]), int(row[2])))
                try:
                    labels.append(LABELS[row[3]])
                except KeyError:
                    raise ValueError(f"{path}:{lineno}: unknown label {row[3]!r}") from None
                X.append([float(v) for v in row[4:]])
        return cls(np.array(X).reshape(len(sids), len(names)), np.array(labels), sids, origins, names)
