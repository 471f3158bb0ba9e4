"""Distribution statistics for comparing score populations.

Gaussian KDE, the KDE overlapping coefficient, rank-based ROC AUC, min-max
scaling, Pearson correlation and box-plot summaries.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .errors import DegenerateRange, DegenerateSample

GRID_SIZE = 512
GRID_PAD = 4.0  # bandwidths beyond the sample extremes
WHISKER = 1.5

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ScoreDistribution:
    metric: str
    condition: str
    values: tuple
    undefined_count: int = 0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"{self.metric}/{self.condition}: non-finite score")
        if self.undefined_count < 0:
            raise ValueError("undefined_count must be >= 0")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_scores(cls, metric, condition, scores):
        """Build from raw scores, counting ``None`` and NaN as undefined."""
        kept = [s for s in scores if s is not None and not math.isnan(s)]
        return cls(metric, condition, tuple(kept), len(scores) - len(kept))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self):
        return float(np.trapezoid(self.density, self.grid))


@dataclass(frozen=True)
class SeparabilityResult:
    overlap_percent: float
    roc_auc: float
    n_pos: int
    n_neg: int
    dropped: int = 0


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple = field(default_factory=tuple)


def _values(x):
    if isinstance(x, ScoreDistribution):
        x = x.values
    return np.asarray(x, dtype=np.float64).ravel()


def scott_bandwidth(samples):
    x = _values(samples)
    if x.size < 2:
        raise DegenerateSample(f"need at least 2 samples, got {x.size}")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise DegenerateSample("sample variance is zero")
    return sd * x.size ** (-0.2)


def kde_evaluate(samples, bandwidth, points, chunk=1 << 20):
    """Gaussian KDE of ``samples`` at ``points``."""
    x = _values(samples)
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty(pts.shape, dtype=np.float64)
    flat_pts, flat_out = pts.ravel(), out.reshape(-1)
    step = max(1, chunk // max(1, x.size))
    for start in range(0, flat_pts.size, step):
        u = (flat_pts[start:start + step, None] - x[None, :]) / bandwidth
        flat_out[start:start + step] = np.exp(-0.5 * u * u).sum(axis=1)
    return out / (x.size * bandwidth * _SQRT_2PI)


def gaussian_kde(samples, bandwidth=None, grid_size=GRID_SIZE):
    x = _values(samples)
    h = scott_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if x.size < 2 or not np.std(x) > 0:
        raise DegenerateSample("KDE needs at least 2 samples with positive variance")
    grid = np.linspace(x.min() - GRID_PAD * h, x.max() + GRID_PAD * h, grid_size)
    return DensityCurve(grid, kde_evaluate(x, h, grid), h)


def overlap_percent(a, b, bandwidth_a=None, bandwidth_b=None, grid_size=GRID_SIZE):
    """Overlapping coefficient of two KDEs, as a percentage.

    Both densities are evaluated on one grid covering the union of their
    spans and the pointwise minimum is integrated with the trapezoid rule.
    """
    xa, xb = _values(a), _values(b)
    ha = scott_bandwidth(xa) if bandwidth_a is None else float(bandwidth_a)
    hb = scott_bandwidth(xb) if bandwidth_b is None else float(bandwidth_b)
    lo = min(xa.min() - GRID_PAD * ha, xb.min() - GRID_PAD * hb)
    hi = max(xa.max() + GRID_PAD * ha, xb.max() + GRID_PAD * hb)
    grid = np.linspace(lo, hi, grid_size)
    common = np.minimum(kde_evaluate(xa, ha, grid), kde_evaluate(xb, hb, grid))
    return float(np.clip(100.0 * np.trapezoid(common, grid), 0.0, 100.0))


def auc_counts(pos, neg):
    """Return ``(2*wins + ties, 2*n_pos*n_neg)`` as exact integers."""
    p, n = _values(pos), _values(neg)
    if p.size == 0 or n.size == 0:
        raise ValueError("roc_auc needs non-empty positive and negative sets")
    n_sorted = np.sort(n)
    below = np.searchsorted(n_sorted, p, side="left")
    upto = np.searchsorted(n_sorted, p, side="right")
    wins = int(below.sum())
    ties = int((upto - below).sum())
    return 2 * wins + ties, 2 * p.size * n.size


def roc_auc(pos, neg):
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg)."""
    num, den = auc_counts(pos, neg)
    return num / den


def min_max_normalize(values, lo=None, hi=None):
    v = _values(values)
    lo = float(v.min()) if lo is None else float(lo)
    hi = float(v.max()) if hi is None else float(hi)
    if not hi > lo:
        raise DegenerateRange(f"cannot normalize with lo={lo} >= hi={hi}")
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def t_two_sided_p(r, df):
    # the t statistic r*sqrt(df)/sqrt(1-r^2) satisfies df/(df+t^2) = 1-r^2
    if abs(r) >= 1.0:
        return 0.0
    return float(special.betainc(0.5 * df, 0.5, 1.0 - r * r))


def pearson(x, y):
    """Pearson r with a two-sided p-value from Student's t on n-2 dof."""
    xv, yv = _values(x), _values(y)
    if xv.size != yv.size:
        raise ValueError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 3:
        raise DegenerateSample("pearson needs at least 3 pairs")
    dx = xv - math.fsum(xv.tolist()) / xv.size
    dy = yv - math.fsum(yv.tolist()) / yv.size
    sxx = math.fsum((dx * dx).tolist())
    syy = math.fsum((dy * dy).tolist())
    if sxx == 0 or syy == 0:
        raise DegenerateSample("pearson needs positive variance in both inputs")
    sxy = math.fsum((dx * dy).tolist())
    r = sxy / math.sqrt(sxx * syy)
    r = min(1.0, max(-1.0, r))
    return r, t_two_sided_p(r, xv.size - 2)


def box_stats(values):
    v = np.sort(_values(values))
    if v.size == 0:
        raise ValueError("box_stats needs at least one value")
    q1, med, q3 = (float(q) for q in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - WHISKER * iqr, q3 + WHISKER * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = tuple(float(x) for x in v[(v < lo_fence) | (v > hi_fence)])
    return BoxStats(med, q1, q3, iqr, float(inside.min()), float(inside.max()), outliers)


def separability(pos, neg, normalize=True, dropped=0):
    """Overlap and AUC of two score populations, ``pos`` taken as the positive class."""
    p, n = _values(pos), _values(neg)
    for name, arr in (("positive", p), ("negative", n)):
        if arr.size < 2:
            raise DegenerateSample(f"{name} set has {arr.size} values, need at least 2")
    if normalize:
        pooled = np.concatenate([p, n])
        lo, hi = float(pooled.min()), float(pooled.max())
        p, n = min_max_normalize(p, lo, hi), min_max_normalize(n, lo, hi)
    return SeparabilityResult(
        overlap_percent=overlap_percent(p, n),
        roc_auc=roc_auc(p, n),
        n_pos=int(p.size),
        n_neg=int(n.size),
        dropped=dropped,
    )
