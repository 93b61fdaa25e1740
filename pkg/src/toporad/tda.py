"""Filtered simplicial complexes and persistent homology up to H1.

Two filtrations are supported: the lower-star filtration of a pixel grid
(Freudenthal triangulation, diagonal from top-left to bottom-right) and the
Vietoris-Rips filtration of a planar point cloud truncated at 2-simplices.

Persistence is computed over Z/2. H0 pairs come from a union-find pass with
the elder rule, which yields exactly the pairing of the column reduction of
the edge block. H1 pairs come from reducing the triangle columns, with
columns stored as Python integers used as bitsets over edge indices.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

try:
    from . import _kernels
except ImportError:  # numba missing
    _kernels = None

INF = math.inf

#: complexity guard for Rips complexes
DEFAULT_MAX_POINTS = 1500
#: size cap for the brute-force Betti oracle
ORACLE_MAX_SIMPLICES = 5000


class FiltrationOrderError(ValueError):
    """A simplex appears before one of its faces, or with a smaller value."""


class ComplexTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FilteredComplex:
    """Simplices in filtration order.

    ``verts`` is an ``(n, 3)`` integer array padded with ``-1``; row ``k`` is
    the ``k``-th simplex of the total order (value, dimension, vertices).
    """

    n_vertices: int
    dims: np.ndarray
    values: np.ndarray
    verts: np.ndarray

    @classmethod
    def from_simplices(cls, n_vertices: int, verts: np.ndarray, values: np.ndarray) -> "FilteredComplex":
        verts = np.asarray(verts, dtype=np.int64).reshape(-1, 3)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        # sort each simplex's vertices ascending, keeping -1 padding at the end
        key = np.where(verts < 0, np.iinfo(np.int64).max, verts)
        key.sort(axis=1)
        verts = np.where(key == np.iinfo(np.int64).max, -1, key)
        dims = (verts >= 0).sum(axis=1) - 1
        order = np.lexsort((verts[:, 2], verts[:, 1], verts[:, 0], dims, values))
        return cls(n_vertices, dims[order], values[order], verts[order])

    def __len__(self) -> int:
        return len(self.values)

    @property
    def t_max(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0

    def counts(self) -> tuple[int, int, int]:
        return tuple(int((self.dims == d).sum()) for d in range(3))  # type: ignore[return-value]

    def simplices(self) -> list[tuple[tuple[int, ...], int, float]]:
        out = []
        for v, d, f in zip(self.verts.tolist(), self.dims.tolist(), self.values.tolist()):
            out.append((tuple(v[: d + 1]), d, f))
        return out

    def validate(self) -> None:
        """Raise FiltrationOrderError unless every face precedes its cofaces."""
        _positions(self)


@dataclass(frozen=True)
class Interval:
    dim: int
    birth: float
    death: float
    generator: tuple[int, ...] = ()
    #: the representative cycle as (u, v) vertex pairs; not serialized
    cycle: tuple[tuple[int, int], ...] = field(default=(), compare=False, repr=False)

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)

    def length(self, cap: float | None = None) -> float:
        death = cap if (self.essential and cap is not None) else self.death
        return death - self.birth


@dataclass(frozen=True)
class Barcode:
    intervals: tuple[Interval, ...] = ()
    t_max: float = 0.0

    def dim(self, d: int) -> list[Interval]:
        return [iv for iv in self.intervals if iv.dim == d]

    def __len__(self) -> int:
        return len(self.intervals)

    def shifted(self, delta: float) -> "Barcode":
        return Barcode(
            tuple(Interval(iv.dim, iv.birth + delta, iv.death + delta, iv.generator, iv.cycle) for iv in self.intervals),
            self.t_max + delta,
        )


# --------------------------------------------------------------------------
# filtrations


def lower_star_filtration(image) -> FilteredComplex:
    """Lower-star filtration of a grey image on the Freudenthal triangulation.

    Vertex ``r * width + c`` carries the intensity of pixel ``(r, c)``; every
    edge and triangle enters at the max of its vertex values.
    """
    values = np.asarray(getattr(image, "values", image))
    if values.ndim != 2 or values.size == 0:
        raise ValueError("image must be a non-empty 2D array")
    h, w = values.shape
    f = values.astype(np.float64).ravel()
    ids = np.arange(h * w).reshape(h, w)

    pieces = [np.column_stack([ids.ravel(), np.full(h * w, -1), np.full(h * w, -1)])]
    for a, b in (
        (ids[:, :-1], ids[:, 1:]),  # horizontal
        (ids[:-1, :], ids[1:, :]),  # vertical
        (ids[:-1, :-1], ids[1:, 1:]),  # diagonal
    ):
        a, b = a.ravel(), b.ravel()
        pieces.append(np.column_stack([a, b, np.full(a.size, -1)]))
    tl, tr = ids[:-1, :-1].ravel(), ids[:-1, 1:].ravel()
    bl, br = ids[1:, :-1].ravel(), ids[1:, 1:].ravel()
    pieces.append(np.column_stack([tl, tr, br]))
    pieces.append(np.column_stack([tl, bl, br]))

    verts = np.concatenate(pieces)
    vals = np.where(verts >= 0, f[np.maximum(verts, 0)], -np.inf).max(axis=1)
    return FilteredComplex.from_simplices(h * w, verts, vals)


def rips_filtration(points, t_max: float, max_points: int = DEFAULT_MAX_POINTS) -> FilteredComplex:
    """Vietoris-Rips filtration up to triangles, edges of length <= ``t_max``."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise ValueError("point cloud is empty")
    if n > max_points:
        raise ComplexTooLarge(f"point cloud has {n} points, cap is {max_points}")
    if not np.isfinite(pts).all():
        raise ValueError("point coordinates must be finite")

    dist = squareform(pdist(pts)) if n > 1 else np.zeros((1, 1))
    adj = dist <= t_max
    np.fill_diagonal(adj, False)
    iu, ju = np.nonzero(np.triu(adj, 1))

    tri = []
    upper = np.triu(adj, 1)
    for i, j in zip(iu.tolist(), ju.tolist()):
        ks = np.nonzero(upper[i] & upper[j])[0]
        ks = ks[ks > j]
        if ks.size:
            tri.append(np.column_stack([np.full(ks.size, i), np.full(ks.size, j), ks]))
    tri = np.concatenate(tri) if tri else np.empty((0, 3), dtype=np.int64)

    verts = np.concatenate(
        [
            np.column_stack([np.arange(n), np.full(n, -1), np.full(n, -1)]),
            np.column_stack([iu, ju, np.full(iu.size, -1)]),
            tri,
        ]
    )
    vals = np.concatenate(
        [
            np.zeros(n),
            dist[iu, ju],
            np.maximum.reduce([dist[tri[:, 0], tri[:, 1]], dist[tri[:, 0], tri[:, 2]], dist[tri[:, 1], tri[:, 2]]])
            if len(tri)
            else np.empty(0),
        ]
    )
    return FilteredComplex.from_simplices(n, verts, vals)


# --------------------------------------------------------------------------
# persistence


def _positions(cx: FilteredComplex):
    """Vectorized face lookup; check the face-ordering invariant.

    Returns vertex positions indexed by vertex id, the edge block as
    ``(pos, u, v)`` arrays and the triangle block as ``(pos, ranks)`` where
    ``ranks`` holds the edge ranks of each triangle's three edges.
    """
    dims, vals, verts = cx.dims, cx.values, cx.verts
    if len(dims) and (dims.min() < 0 or dims.max() > 2):
        raise FiltrationOrderError("only simplices of dimension 0, 1, 2 are supported")
    pos = np.arange(len(dims))
    n = max(cx.n_vertices, int(verts.max()) + 1 if len(verts) else 0)

    vmask = dims == 0
    vids = verts[vmask, 0]
    vpos = np.full(n, -1, dtype=np.int64)
    vpos[vids] = pos[vmask]

    emask = dims == 1
    epos, eu, ev = pos[emask], verts[emask, 0], verts[emask, 1]
    for end in (eu, ev):
        p = vpos[end]
        if (p < 0).any() or (p > epos).any() or (vals[np.maximum(p, 0)] > vals[epos]).any():
            bad = int(np.argmax((p < 0) | (p > epos)))
            raise FiltrationOrderError(f"edge {(int(eu[bad]), int(ev[bad]))} precedes one of its vertices")

    tmask = dims == 2
    tpos, tv = pos[tmask], verts[tmask]
    ekey = eu * n + ev
    order = np.argsort(ekey, kind="stable")
    skey = ekey[order]
    ranks = np.empty((len(tpos), 3), dtype=np.int64)
    for col, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
        key = tv[:, i] * n + tv[:, j]
        at = np.searchsorted(skey, key)
        at = np.minimum(at, max(len(skey) - 1, 0))
        found = (skey[at] == key) if len(skey) else np.zeros(len(key), dtype=bool)
        r = order[at] if len(skey) else np.zeros(len(key), dtype=np.int64)
        if len(key) and (not found.all() or (epos[r] > tpos).any() or (vals[epos[r]] > vals[tpos]).any()):
            bad = int(np.argmin(found & (epos[r] < tpos)))
            raise FiltrationOrderError(f"triangle {tuple(int(x) for x in tv[bad])} precedes one of its edges")
        ranks[:, col] = r
    return vpos, (epos, eu, ev), (tpos, ranks)


def _reduce_triangles_py(ranks: np.ndarray):
    """Reference reduction with bitset columns; returns (low, cycle) per killing triangle."""
    pivot_col: dict[int, int] = {}
    out = []
    for t, (e0, e1, e2) in enumerate(ranks.tolist()):
        col = (1 << e0) ^ (1 << e1) ^ (1 << e2)
        while col:
            other = pivot_col.get(col.bit_length() - 1)
            if other is None:
                break
            col ^= other
        if col:
            low = col.bit_length() - 1
            pivot_col[low] = col
            out.append((t, low, _bits(col)))
    return out


def _reduce_triangles_fast(ranks: np.ndarray, n_edges: int, positive: list[int]):
    """Same output as the reference reduction, computed in two passes.

    The coboundary pass finds which triangles kill a class; only those columns
    are then reduced in filtration order. Triangles that reduce to zero never
    own a pivot, so skipping them leaves every killing column unchanged.
    """
    n_tri = len(ranks)
    pos_mask = np.zeros(n_edges, dtype=np.bool_)
    pos_mask[positive] = True
    flat_e = ranks.ravel()
    flat_t = np.repeat(np.arange(n_tri, dtype=np.int64), 3)
    order = np.lexsort((flat_t, flat_e))
    cob_idx = flat_t[order]
    cob_ptr = np.zeros(n_edges + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat_e, minlength=n_edges), out=cob_ptr[1:])
    paired = _kernels.cohomology_pairs(cob_ptr, cob_idx, pos_mask)

    killers = np.sort(paired[paired >= 0])
    tri_low, tri_slot, starts, lens, pool = _kernels.reduce_columns(np.ascontiguousarray(ranks[killers]), n_edges)
    out = []
    for i, t in enumerate(killers.tolist()):
        if tri_low[i] < 0 or paired[tri_low[i]] != t:
            raise RuntimeError("cohomology and homology pairings disagree")
        s = tri_slot[i]
        out.append((t, int(tri_low[i]), pool[starts[s] : starts[s] + lens[s]].tolist()))
    return out


def compute_persistence(cx: FilteredComplex, kernel: str = "auto") -> Barcode:
    """Barcode in dimensions 0 and 1 with H1 representative cycles.

    Finite H1 classes carry the reduced column of the triangle that kills
    them; essential H1 classes carry the transformation column of their
    creating edge, which for a graph is the edge plus the unique path joining
    its endpoints in the forest of negative edges.

    ``kernel`` selects the triangle reduction: ``"python"`` (bitset
    reference), ``"numba"``, or ``"auto"`` (numba when importable).
    """
    vpos, (epos, eu, ev), (tpos, ranks) = _positions(cx)
    vals = cx.values.tolist()
    epos_l, eu_l, ev_l = epos.tolist(), eu.tolist(), ev.tolist()
    intervals: list[Interval] = []

    # H0 by union-find, elder rule on filtration position
    present = np.nonzero(vpos >= 0)[0]
    parent = list(range(len(vpos)))
    birth_pos = vpos.tolist()  # root -> position of its oldest vertex

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    positive: list[int] = []  # edge ranks that create cycles
    forest: dict[int, list[tuple[int, int]]] = {}  # vertex -> [(nbr, edge rank)]
    for r, (k, u, v) in enumerate(zip(epos_l, eu_l, ev_l)):
        ru, rv = find(u), find(v)
        if ru == rv:
            positive.append(r)
            continue
        if birth_pos[ru] < birth_pos[rv]:
            ru, rv = rv, ru
        # ru is the younger root and dies here
        b, d = vals[birth_pos[ru]], vals[k]
        if d > b:
            intervals.append(Interval(0, b, d))
        parent[ru] = rv
        forest.setdefault(u, []).append((v, r))
        forest.setdefault(v, []).append((u, r))
    for v in present[np.argsort(vpos[present])].tolist():
        if find(v) == v:
            intervals.append(Interval(0, vals[vpos[v]], INF))

    # H1 by reduction of the triangle block
    if kernel == "auto":
        kernel = "numba" if _kernels is not None and len(ranks) > 64 else "python"
    if kernel == "numba":
        if _kernels is None:
            raise RuntimeError("numba is not available")
        killers = _reduce_triangles_fast(ranks, len(epos_l), positive)
    elif kernel == "python":
        killers = _reduce_triangles_py(ranks)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    def vertices_of(edge_ranks) -> tuple[int, ...]:
        return tuple(sorted({x for r in edge_ranks for x in (eu_l[r], ev_l[r])}))

    def edges_of(edge_ranks) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((eu_l[r], ev_l[r]) for r in edge_ranks))

    tpos_l = tpos.tolist()
    killed = set()
    for t, low, cycle in killers:
        killed.add(low)
        b, d = vals[epos_l[low]], vals[tpos_l[t]]
        if d > b:
            intervals.append(Interval(1, b, d, vertices_of(cycle), edges_of(cycle)))

    for r in positive:
        if r not in killed:
            path = [r, *_forest_path(forest, eu_l[r], ev_l[r])]
            intervals.append(Interval(1, vals[epos_l[r]], INF, vertices_of(path), edges_of(path)))

    return Barcode(tuple(intervals), cx.t_max)


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def _forest_path(forest, src: int, dst: int) -> list[int]:
    """Edge ranks along the unique forest path from src to dst."""
    prev: dict[int, tuple[int, int]] = {src: (-1, -1)}
    stack = [src]
    while stack:
        x = stack.pop()
        if x == dst:
            break
        for y, r in forest.get(x, ()):
            if y not in prev:
                prev[y] = (x, r)
                stack.append(y)
    if dst not in prev:
        raise RuntimeError("positive edge endpoints are not connected in the forest")
    out, x = [], dst
    while x != src:
        x, r = prev[x]
        out.append(r)
    return out


# --------------------------------------------------------------------------
# Betti numbers


def betti_curve(barcode: Barcode, dim: int, thresholds: Iterable[float]) -> list[int]:
    ivs = barcode.dim(dim)
    return [sum(1 for iv in ivs if iv.birth <= t < iv.death) for t in thresholds]


def _gf2_rank(rows: list[int]) -> int:
    # xor basis keyed by leading bit
    basis: dict[int, int] = {}
    rank = 0
    for x in rows:
        while x:
            lead = x.bit_length() - 1
            if lead in basis:
                x ^= basis[lead]
            else:
                basis[lead] = x
                rank += 1
                break
    return rank


def brute_force_betti(cx: FilteredComplex, t: float) -> tuple[int, int]:
    """Betti numbers of the sublevel complex at ``t`` computed from scratch.

    beta0 is the number of connected components, beta1 follows from the
    Euler relation beta0 - beta1 + beta2 = V - E + T with beta2 the nullity
    of the triangle boundary map (zero for planar triangulations).
    """
    if len(cx) > ORACLE_MAX_SIMPLICES:
        raise ComplexTooLarge(f"{len(cx)} simplices exceed the oracle cap of {ORACLE_MAX_SIMPLICES}")
    keep = cx.values <= t
    verts = cx.verts[keep]
    dims = cx.dims[keep]
    vs = sorted(set(verts[dims == 0, 0].tolist()))
    es = [tuple(e) for e in verts[dims == 1, :2].tolist()]
    ts = [tuple(x) for x in verts[dims == 2].tolist()]
    if not vs:
        return 0, 0
    vidx = {v: i for i, v in enumerate(vs)}
    if es:
        rows = [vidx[u] for u, _ in es]
        cols = [vidx[v] for _, v in es]
        graph = coo_matrix((np.ones(len(es)), (rows, cols)), shape=(len(vs), len(vs)))
        b0 = int(connected_components(graph, directed=False)[0])
    else:
        b0 = len(vs)
    eidx = {e: i for i, e in enumerate(es)}
    boundary = [(1 << eidx[(a, b)]) | (1 << eidx[(a, c)]) | (1 << eidx[(b, c)]) for a, b, c in ts]
    b2 = len(ts) - _gf2_rank(boundary)
    chi = len(vs) - len(es) + len(ts)
    return b0, b0 - chi + b2


# --------------------------------------------------------------------------
# barcode files


def write_barcode_csv(barcode: Barcode, path, generators_path=None) -> None:
    from .tables import fmt

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dim", "birth", "death", "generator_vertices"])
        for iv in barcode.intervals:
            w.writerow([iv.dim, fmt(iv.birth), fmt(iv.death), len(iv.generator)])
    if generators_path is not None:
        with open(generators_path, "w") as fh:
            for iv in barcode.intervals:
                fh.write(" ".join(str(v) for v in iv.generator) + "\n")


def read_barcode_csv(path, t_max: float | None = None) -> Barcode:
    intervals = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:3] != ["dim", "birth", "death"]:
            raise ValueError(f"{path}: not a barcode CSV")
        for row in reader:
            intervals.append(Interval(int(row["dim"]), float(row["birth"]), float(row["death"])))
    finite = [x for iv in intervals for x in (iv.birth, iv.death) if not math.isinf(x)]
    return Barcode(tuple(intervals), t_max if t_max is not None else (max(finite) if finite else 0.0))
