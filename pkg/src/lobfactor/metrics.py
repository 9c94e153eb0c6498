"""Tail realism metrics: Hill indices, tail point clouds, and optimal transport.

The quantity of interest is the shape of the upper 5% of absolute
standardized returns. That tail is summarized two ways: the Hill index
(a scalar power-law exponent estimate) and the full vector of tail
log-ratios treated as a one-dimensional point cloud, compared against
reference clouds by exact optimal transport with squared-distance cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateSeriesError(ValueError):
    """A statistic is undefined on the given series (zero variance, zero tail)."""


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # shape (n, d)
    source_id: str = ""

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError(f"points must be a nonempty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class TailStats:
    hill: float
    k_used: int
    n_samples: int


@dataclass(frozen=True)
class StylizedFactReport:
    kurtosis: float  # excess
    vol_volume_corr: float | None
    abs_autocorr: dict[int, float] = field(default_factory=dict)


def standardize(returns) -> np.ndarray:
    """Affine map to mean 0, standard deviation 1 (population normalization)."""
    x = np.asarray(returns, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D series with at least 2 samples")
    std = x.std()
    if std == 0.0 or not np.isfinite(std):
        raise DegenerateSeriesError("series has zero or undefined variance")
    return (x - x.mean()) / std


def default_tail_k(n_samples: int) -> int:
    """Upper-5% tail size, never below one point."""
    return max(1, int(0.05 * n_samples))


def tail_log_ratios(abs_returns, k: int) -> np.ndarray:
    """log of the k-th largest over the (K+1)-th largest, k = 1..K (nonincreasing)."""
    x = np.asarray(abs_returns, dtype=float)
    n = x.size
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= K < N, got K={k}, N={n}")
    order = np.sort(x)[::-1]
    pivot = order[k]
    if pivot <= 0.0:
        raise DegenerateSeriesError("tail pivot is zero; fewer than K+1 positive samples")
    return np.log(order[:k] / pivot)


def hill_index(abs_returns, k: int | None = None) -> TailStats:
    x = np.asarray(abs_returns, dtype=float)
    if k is None:
        k = default_tail_k(x.size)
    ratios = tail_log_ratios(x, k)
    total = float(ratios.sum())
    if total == 0.0:
        raise DegenerateSeriesError("all top-K samples tied; Hill index undefined")
    return TailStats(hill=k / total, k_used=k, n_samples=x.size)


def build_tail_cloud(abs_returns, k: int | None = None, source_id: str = "") -> PointCloud:
    x = np.asarray(abs_returns, dtype=float)
    if k is None:
        k = default_tail_k(x.size)
    return PointCloud(tail_log_ratios(x, k).reshape(-1, 1), source_id=source_id)


def subsample(cloud: PointCloud, size: int, rng: np.random.Generator) -> PointCloud:
    if size > cloud.size:
        raise ValueError(f"cannot take {size} of {cloud.size} points without replacement")
    idx = rng.choice(cloud.size, size=size, replace=False)
    return PointCloud(cloud.points[idx], source_id=cloud.source_id)


def ot_distance(a: PointCloud, b: PointCloud) -> float:
    """Exact OT cost between uniform empirical measures, squared-distance ground cost.

    One-dimensional clouds only: the monotone (sorted) coupling is optimal
    for convex costs, realized here by northwest-corner marching over
    integer masses (each of the K points on one side carries L units, each
    of the L points on the other carries K units), so no tolerance is lost
    to fractional arithmetic.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.dim != 1:
        raise NotImplementedError("only 1-D clouds are supported")
    xa = np.sort(a.points[:, 0])
    xb = np.sort(b.points[:, 0])
    n_a, n_b = xa.size, xb.size
    if n_a == n_b:
        d = xa - xb
        return float(np.dot(d, d)) / n_a
    cost_units = 0.0
    i = j = 0
    rem_a, rem_b = n_b, n_a  # units left at the current point of each side
    while i < n_a and j < n_b:
        moved = rem_a if rem_a <= rem_b else rem_b
        d = xa[i] - xb[j]
        cost_units += moved * d * d
        rem_a -= moved
        rem_b -= moved
        if rem_a == 0:
            i += 1
            rem_a = n_b
        if rem_b == 0:
            j += 1
            rem_b = n_a
    return cost_units / (n_a * n_b)


def mean_ot(syn: PointCloud, refs: list[PointCloud]) -> float:
    if not refs:
        raise ValueError("need at least one reference cloud")
    return float(np.mean([ot_distance(syn, ref) for ref in refs]))


def theoretical_hill(z0: float, z1: float, z2: float) -> float:
    """Additive two-component prediction: z0 minus each component's solo drop."""
    return z1 + z2 - z0


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeriesError("zero-variance input to correlation")
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def stylized_facts(returns, volumes=None, lags: tuple[int, ...] = (1, 10, 20, 30)) -> StylizedFactReport:
    """Excess kurtosis, |return|-volume correlation, |return| autocorrelation."""
    r = np.asarray(returns, dtype=float)
    if r.size <= max(lags) + 1:
        raise ValueError(f"need more than {max(lags) + 1} returns, got {r.size}")
    m2 = r.var()
    if m2 == 0.0:
        raise DegenerateSeriesError("constant return series")
    kurt = float(((r - r.mean()) ** 4).mean() / m2**2 - 3.0)
    abs_r = np.abs(r)
    corr = None
    if volumes is not None:
        v = np.asarray(volumes, dtype=float)
        if v.size != r.size:
            raise ValueError(f"volumes length {v.size} does not match returns length {r.size}")
        corr = _pearson(abs_r, v)
    autocorr = {lag: _pearson(abs_r[lag:], abs_r[:-lag]) for lag in lags}
    return StylizedFactReport(kurtosis=kurt, vol_volume_corr=corr, abs_autocorr=autocorr)
