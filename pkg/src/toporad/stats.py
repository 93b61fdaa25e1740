"""Two-sample and rank statistics, standardization and feature selection."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

log = logging.getLogger(__name__)

CONSTANT_STD = 1e-12
EXACT_SPEARMAN_MAX_N = 9


class AllFeaturesDropped(ValueError):
    pass


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    degenerate: bool = False


def student_t_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t)))))


def welch_t_test(a, b) -> WelchResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("samples must be finite")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    na, nb = len(a), len(b)
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0:
        if ma == mb:
            log.warning("Welch test on two identical constant samples: t=0, p=1 by convention")
            return WelchResult(0.0, float(na + nb - 2), 1.0, ma, mb, 0.0, 0.0, degenerate=True)
        t = math.copysign(math.inf, ma - mb)
        return WelchResult(t, float(na + nb - 2), 0.0, ma, mb, 0.0, 0.0, degenerate=True)
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    return WelchResult(t, df, student_t_two_tailed(t, df), ma, mb, math.sqrt(va), math.sqrt(vb))


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int8)


def _pearson(u: np.ndarray, v: np.ndarray) -> float:
    u = u - u.mean()
    v = v - v.mean()
    den = math.sqrt(float((u * u).sum() * (v * v).sum()))
    return float((u * v).sum() / den)


def spearman(x, y) -> tuple[float, float]:
    """Rank correlation and its two-tailed p-value.

    For n <= 9 the p-value is exact: the fraction of all orderings of ``y``
    whose |rho| reaches the observed one. Larger samples use the t
    approximation with n - 2 degrees of freedom. A constant input returns
    (0, 1) and is logged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y) or n < 3:
        raise ValueError("spearman needs two samples of equal length >= 3")
    rx, ry = rankdata(x), rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        log.debug("spearman: constant input, correlation undefined")
        return 0.0, 1.0
    rho = max(-1.0, min(1.0, _pearson(rx, ry)))
    if n <= EXACT_SPEARMAN_MAX_N:
        u = rx - rx.mean()
        v = ry - ry.mean()
        den = math.sqrt(float((u * u).sum() * (v * v).sum()))
        perm_rho = (v[_permutations(n)] @ u) / den
        p = float(np.mean(np.abs(perm_rho) >= abs(rho) - 1e-12))
        return rho, p
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, student_t_two_tailed(t, n - 2)


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.stds < CONSTANT_STD


def standardize_fit(X) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    return Standardizer(X.mean(axis=0), X.std(axis=0))


def standardize_apply(st: Standardizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    const = st.constant
    scale = np.where(const, 1.0, st.stds)
    return np.where(const, 0.0, (X - st.means) / scale)


@dataclass
class FeatureSelection:
    name: str
    rho: float
    p: float
    kept: bool = True
    reason: str = "none"  # none | insignificant | redundant


@dataclass
class SelectionReport:
    features: list[FeatureSelection]
    alpha_sig: float = 0.05
    redundancy_rho: float = 0.95
    inter_rho: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def mask(self) -> np.ndarray:
        return np.array([f.kept for f in self.features], dtype=bool)

    @property
    def kept(self) -> list[str]:
        return [f.name for f in self.features if f.kept]


def select_features(X, y, names=None, alpha_sig: float = 0.05, redundancy_rho: float = 0.95) -> SelectionReport:
    """Outcome-correlation filter followed by redundancy elimination.

    A feature survives if its Spearman p-value against the outcome is at most
    ``alpha_sig``. Then, while two survivors correlate with |rho| above
    ``redundancy_rho``, the survivor with the weakest outcome correlation
    among those involved is dropped (later column on ties).
    """
    X = np.asarray(X, dtype=np.float64)
    k = X.shape[1]
    if k < 2:
        raise ValueError("feature selection needs at least two features")
    names = list(names) if names is not None else [f"f{i}" for i in range(k)]
    report = SelectionReport([], alpha_sig, redundancy_rho)
    for j in range(k):
        rho, p = spearman(X[:, j], y)
        sel = FeatureSelection(names[j], rho, p)
        if not p <= alpha_sig:
            sel.kept, sel.reason = False, "insignificant"
        report.features.append(sel)

    inter = np.eye(k)
    for a, b in itertools.combinations(range(k), 2):
        inter[a, b] = inter[b, a] = spearman(X[:, a], X[:, b])[0]
    report.inter_rho = inter

    while True:
        alive = [j for j in range(k) if report.features[j].kept]
        involved = sorted(
            {j for a, b in itertools.combinations(alive, 2) if abs(inter[a, b]) > redundancy_rho for j in (a, b)}
        )
        if not involved:
            break
        drop = min(involved, key=lambda j: (abs(report.features[j].rho), -j))
        report.features[drop].kept, report.features[drop].reason = False, "redundant"

    if not report.mask.any():
        raise AllFeaturesDropped("feature selection dropped every feature")
    return report
