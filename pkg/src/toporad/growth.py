"""Three-species tumour growth model on a radial grid, plus the topological
time series and onset analysis built on sampled cell clouds.

Proliferating (p), quiescent (q) and necrotic (n) densities evolve as

    dp/dt = d/dx( p/(p+q) d(p+q)/dx ) + g(c) p (1 - p - q - n) - f(c) p
    dq/dt = d/dx( q/(p+q) d(p+q)/dx ) + f(c) p - h(c) q
    dn/dt = h(c) q

with nutrient c = c0 gamma / (gamma + p) * (1 - alpha (p + q + n)).
Integrated with explicit Euler, conservative half-node fluxes and zero-flux
boundaries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .tda import Barcode, compute_persistence, rips_filtration
from .topo_stats import generator_entropy, persistent_entropy

log = logging.getLogger(__name__)

CELL_TYPES = ("proliferative", "quiescent", "necrotic")
GOLDEN_ANGLE = 2.399963
VACUUM = 1e-12


class GrowthDiverged(RuntimeError):
    def __init__(self, step: int, msg: str = "non-finite density"):
        super().__init__(f"{msg} at step {step}")
        self.step = step


@dataclass(frozen=True)
class GrowthParams:
    alpha: float = 0.0
    gamma: float = 10.0
    beta: float = 0.5
    c0: float = 1.0
    dx: float = 0.05
    dt: float = 5e-4
    n_nodes: int = 201
    t_end: float = 20.0
    epsilon: float = 0.5  # width of the initial gaussian seed

    def __post_init__(self):
        for name in ("gamma", "beta", "c0", "dx", "dt", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.dt > self.dx**2 / 2:
            raise ValueError(f"dt={self.dt} violates the stability bound dx^2/2={self.dx**2 / 2}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def grid(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dx


@dataclass(frozen=True)
class GrowthState:
    x: np.ndarray
    p: np.ndarray
    q: np.ndarray
    n: np.ndarray
    c: np.ndarray
    step: int = 0
    clamped: int = 0  # cumulative count of clamped negative node values

    def density(self, cell_type: str) -> np.ndarray:
        return {"proliferative": self.p, "quiescent": self.q, "necrotic": self.n}[cell_type]


@dataclass(frozen=True)
class CellClouds:
    proliferative: np.ndarray
    quiescent: np.ndarray
    necrotic: np.ndarray
    step: int = 0

    def of(self, cell_type: str) -> np.ndarray:
        return getattr(self, cell_type)


def reaction_terms(c, beta: float = 0.5):
    """Return (f, g, h): quiescence, proliferation and necrosis rates."""
    f = (1.0 - np.tanh(4.0 * c - 2.0)) / 2.0
    g = beta * np.exp(beta * c)
    return f, g, f / 2.0


def nutrient(p, q, n, params: GrowthParams):
    return params.c0 * params.gamma / (params.gamma + p) * (1.0 - params.alpha * (p + q + n))


def initial_state(params: GrowthParams) -> GrowthState:
    x = params.grid()
    p = np.exp(-((x / params.epsilon) ** 2))
    q = np.zeros_like(x)
    n = np.zeros_like(x)
    return GrowthState(x, p, q, n, nutrient(p, q, n, params), 0)


def _fluxes(p, q, dx):
    s = p + q
    s_half = 0.5 * (s[1:] + s[:-1])
    grad = (s[1:] - s[:-1]) / dx
    safe = s_half >= VACUUM
    denom = np.where(safe, s_half, 1.0)
    jp = np.where(safe, 0.5 * (p[1:] + p[:-1]) / denom * grad, 0.0)
    jq = np.where(safe, 0.5 * (q[1:] + q[:-1]) / denom * grad, 0.0)

    def div(j):
        padded = np.concatenate(([0.0], j, [0.0]))  # zero flux at both ends
        return (padded[1:] - padded[:-1]) / dx

    return div(jp), div(jq)


def step(state: GrowthState, params: GrowthParams, reactions: bool = True) -> GrowthState:
    p, q, n = state.p, state.q, state.n
    dt = params.dt
    with np.errstate(all="ignore"):  # non-finite results are caught below
        dp, dq = _fluxes(p, q, params.dx)
        dn = np.zeros_like(n)
        if reactions:
            c = nutrient(p, q, n, params)
            f, g, h = reaction_terms(c, params.beta)
            dp = dp + g * p * (1.0 - p - q - n) - f * p
            dq = dq + f * p - h * q
            dn = h * q
        p1, q1, n1 = p + dt * dp, q + dt * dq, n + dt * dn
    k = state.step + 1
    if not (np.isfinite(p1).all() and np.isfinite(q1).all() and np.isfinite(n1).all()):
        raise GrowthDiverged(k)
    neg = int((p1 < 0).sum() + (q1 < 0).sum() + (n1 < 0).sum())
    if neg:
        log.debug("step %d: clamped %d negative values", k, neg)
        p1, q1, n1 = np.maximum(p1, 0.0), np.maximum(q1, 0.0), np.maximum(n1, 0.0)
    return GrowthState(state.x, p1, q1, n1, nutrient(p1, q1, n1, params), k, state.clamped + neg)


def simulate(params: GrowthParams, sample_every: int = 100) -> list[GrowthState]:
    """Integrate to ``t_end``; keep step 0 and every ``sample_every``-th step."""
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    state = initial_state(params)
    frames = [state]
    for _ in range(params.n_steps):
        state = step(state, params)
        if state.step % sample_every == 0:
            frames.append(state)
    if state.clamped:
        log.warning("alpha=%g: %d negative densities clamped", params.alpha, state.clamped)
    return frames


def _ring_points(radius: float, count: int, offset: float) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(count) / count + offset
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def sample_counts(density: np.ndarray, kappa: float) -> np.ndarray:
    # round half up, not half to even
    return np.floor(np.asarray(density) * kappa + 0.5).astype(np.int64)


def sample_cloud(x: np.ndarray, density: np.ndarray, kappa: float) -> np.ndarray:
    counts = sample_counts(density, kappa)
    rings = [_ring_points(x[i], int(k), i * GOLDEN_ANGLE) for i, k in enumerate(counts.tolist()) if k > 0]
    return np.concatenate(rings) if rings else np.empty((0, 2))


def sample_clouds(state: GrowthState, kappa: float = 8) -> CellClouds:
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    clouds = {t: sample_cloud(state.x, state.density(t), kappa) for t in CELL_TYPES}
    return CellClouds(step=state.step, **clouds)


@dataclass(frozen=True)
class SeriesRow:
    frame: int
    cell_type: str
    points: int
    pe_h0: float
    pe_h1: float
    hgen: float


def cloud_statistics(points: np.ndarray, rips_t_max: float, max_points: int | None = None) -> tuple[float, float, float]:
    """PE(H0), PE(H1) and generator entropy of a cloud's Rips barcode."""
    if len(points) == 0:
        return 0.0, 0.0, 0.0
    kw = {} if max_points is None else {"max_points": max_points}
    bc: Barcode = compute_persistence(rips_filtration(points, rips_t_max, **kw))
    return persistent_entropy(bc, 0), persistent_entropy(bc, 1), generator_entropy(bc)


def topo_time_series(
    frames, rips_t_max: float = 2.0, kappa: float = 8, max_points: int | None = None
) -> list[SeriesRow]:
    """One row per frame and cell type.

    ``frames`` may hold GrowthState or CellClouds objects.
    """
    if not frames:
        raise ValueError("no frames")
    rows = []
    for i, fr in enumerate(frames):
        clouds = fr if isinstance(fr, CellClouds) else sample_clouds(fr, kappa)
        for t in CELL_TYPES:
            pts = clouds.of(t)
            rows.append(SeriesRow(i, t, len(pts), *cloud_statistics(pts, rips_t_max, max_points)))
    return rows


def onset_analysis(frames, cell_type: str, kappa: float = 8) -> int | None:
    """Index of the first frame whose sampled cloud of ``cell_type`` is non-empty."""
    if not frames:
        raise ValueError("no frames")
    for i, fr in enumerate(frames):
        if isinstance(fr, CellClouds):
            if len(fr.of(cell_type)):
                return i
        elif sample_counts(fr.density(cell_type), kappa).sum() > 0:
            return i
    return None


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    onset_quiescent: int | None
    onset_necrotic: int | None


def alpha_sweep(alphas, base: GrowthParams | None = None, sample_every: int = 100, kappa: float = 8) -> list[SweepRow]:
    base = base or GrowthParams()
    out = []
    for a in alphas:
        frames = simulate(replace(base, alpha=float(a)), sample_every)
        out.append(SweepRow(float(a), onset_analysis(frames, "quiescent", kappa), onset_analysis(frames, "necrotic", kappa)))
    return out
