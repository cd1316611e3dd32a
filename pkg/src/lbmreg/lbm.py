"""Local binning median estimator.

The unit cube is cut into ``m^d`` equal boxes; the estimate on a box is the
lower median of the responses whose design points fall inside it.  Query
points are located with half-open bins ``[(j-1)/m, j/m)`` (the last bin on
each axis is closed at 1); design points are grouped by index so that bins
hold equal numbers of observations.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .core import (GridSpec, TestFunction, as_point_array, check_unit_cube,
                   lower_median_rank, median)
from .exceptions import CapacityError, DimensionError, DomainError, EmptyBinError


@dataclass(frozen=True)
class BinningSpec:
    m: int
    d: int
    s: int  # smallest bin occupancy

    @property
    def n_bins(self) -> int:
        return self.m**self.d


@dataclass(frozen=True, eq=False)
class LbmFit:
    binning: BinningSpec
    z: np.ndarray
    s_counts: np.ndarray

    @property
    def m(self) -> int:
        return self.binning.m

    @property
    def d(self) -> int:
        return self.binning.d

    def bin_multi_indices(self) -> np.ndarray:
        """1-based multi-indices of all bins, row-major, shape ``(m^d, d)``."""
        return np.indices((self.m,) * self.d).reshape(self.d, -1).T + 1

    def centers(self) -> np.ndarray:
        """Bin anchors ``j/m`` used by the post-processors, shape ``(m^d, d)``."""
        return self.bin_multi_indices() / self.m

    def predict(self, x) -> np.ndarray:
        """Piecewise-constant prediction at one or many query points."""
        pts = as_point_array(x, self.d)
        return self.z[point_bin_labels(pts, self.m)]

    def to_csv(self, path: str | os.PathLike) -> None:
        idx = self.bin_multi_indices()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"j_{k + 1}" for k in range(self.d)] + ["z", "s_count"])
            for row, zj, sj in zip(idx, self.z, self.s_counts):
                w.writerow(list(map(int, row)) + [repr(float(zj)), int(sj)])


def read_fit_csv(path: str | os.PathLike) -> LbmFit:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    jcols = sorted((c for c in rows[0] if c.startswith("j_")), key=lambda c: int(c[2:]))
    d = len(jcols)
    m = max(int(r[jcols[0]]) for r in rows)
    z = np.array([float(r["z"]) for r in rows])
    counts = np.array([int(r["s_count"]) for r in rows])
    return LbmFit(BinningSpec(m, d, int(counts.min())), z, counts)


# ---------------------------------------------------------------------------
# Bin geometry
# ---------------------------------------------------------------------------


def _axis_bins(coord: np.ndarray, m: int) -> np.ndarray:
    # 0-based bin per coordinate; boundaries compared as floats k/m so that a
    # query sitting exactly on a boundary goes to the right-hand bin
    k = np.floor(coord * m).astype(np.int64)
    k = np.clip(k, 0, m - 1)
    k = np.where((k + 1 < m) & ((k + 1) / m <= coord), k + 1, k)
    k = np.where((k > 0) & (k / m > coord), k - 1, k)
    return k


def bin_index(x, m: int) -> tuple[int, ...]:
    """1-based multi-index ``j`` of the bin containing point ``x``.

    ``j_k = min(floor(x_k m) + 1, m)``.

    >>> bin_index(0.35, 10)
    (4,)
    >>> bin_index((0.05, 0.95), 2)
    (1, 2)
    """
    pt = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    check_unit_cube(pt)
    return tuple(int(_axis_bins(pt[:, k], m)[0]) + 1 for k in range(pt.shape[1]))


def point_bin_labels(points: np.ndarray, m: int) -> np.ndarray:
    """Row-major flat bin label (0-based) for each row of ``points``."""
    check_unit_cube(points)
    label = np.zeros(points.shape[0], dtype=np.int64)
    for k in range(points.shape[1]):
        label = label * m + _axis_bins(points[:, k], m)
    return label


def grid_bin_labels(grid: GridSpec, m: int) -> np.ndarray:
    """Flat bin labels for the design points, computed in exact integer arithmetic.

    Design point ``i/p`` goes to bin ``ceil(i m / p)``, i.e. consecutive runs
    of ``p/m`` indices share a bin, so every bin holds exactly ``s = n/m^d``
    points whenever ``m`` divides ``p`` (and ``floor``/``ceil`` of that
    otherwise).  Query points use the half-open rule of :func:`bin_index`; the
    two only disagree on the measure-zero set of bin boundaries.
    """
    if m < 1:
        raise DomainError(f"need m >= 1, got {m}")
    if m > 1 and grid.d * math.log2(m) >= 62:
        raise CapacityError(f"m**d = {m}**{grid.d} bins overflow the index range")
    idx = grid.multi_indices()  # i in 1..p
    axis = (idx * m - 1) // grid.p
    label = np.zeros(grid.n, dtype=np.int64)
    for k in range(grid.d):
        label = label * m + axis[:, k]
    return label


def binning_for(grid: GridSpec, m: int, strict: bool = False) -> tuple[BinningSpec, np.ndarray]:
    labels = grid_bin_labels(grid, m)
    counts = np.bincount(labels, minlength=m**grid.d)
    if strict and grid.n % (m**grid.d):
        raise DomainError(f"strict binning needs m^d | n, got n={grid.n}, m={m}, d={grid.d}")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        j = tuple(int(v) + 1 for v in np.unravel_index(empty[0], (m,) * grid.d))
        raise EmptyBinError(f"bin {j} holds no design points (m={m} > p={grid.p})")
    return BinningSpec(m=m, d=grid.d, s=int(counts.min())), labels


def grouped_lower_median(labels: np.ndarray, values: np.ndarray, n_groups: int):
    """Lower median of ``values`` within each label group; returns ``(medians, counts)``."""
    order = np.lexsort((values, labels))
    counts = np.bincount(labels, minlength=n_groups)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    picks = starts + (counts + 1) // 2 - 1
    return values[order][picks], counts


# ---------------------------------------------------------------------------
# Fitting and prediction
# ---------------------------------------------------------------------------


def lbm_fit(grid: GridSpec, y, m: int, strict: bool = False) -> LbmFit:
    """Per-bin lower medians ``z_j`` of the responses.

    Parameters
    ----------
    grid : GridSpec
        Fixed design the responses were observed on.
    y : array_like, shape (n,)
        Responses in grid order.
    m : int
        Bins per axis.
    strict : bool
        Require ``m^d`` to divide ``n``; otherwise bins may differ in size by
        the rounding of ``p/m`` and the per-bin counts are recorded.

    Raises
    ------
    EmptyBinError
        If ``m > p`` leaves a bin without design points.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.n,):
        raise DimensionError(f"expected {grid.n} responses, got shape {y.shape}")
    if np.isnan(y).any():
        raise DomainError("responses contain NaN")
    spec, labels = binning_for(grid, int(m), strict=strict)
    z, counts = grouped_lower_median(labels, y, spec.n_bins)
    return LbmFit(binning=spec, z=z, s_counts=counts)


def lbm_predict(fit: LbmFit, x0) -> float:
    """Value of the bin median at a single query point."""
    return float(fit.predict(np.atleast_1d(np.asarray(x0, dtype=float)).reshape(1, -1))[0])


def choose_m_holder(n: int, beta: float, L: float, d: int) -> int:
    """Bins per axis balancing binning bias and median variance.

    ``round(n^{1/(2b+d)} L^{2/(2b+d)})`` with ``b = min(beta, 1)``; callers
    clamp the result to ``[1, p]``.

    >>> choose_m_holder(10**6, 1.0, 1.0, 1)
    100
    """
    if n < 1 or beta <= 0 or L <= 0 or d < 1:
        raise DomainError("need n >= 1, beta > 0, L > 0, d >= 1")
    b = min(beta, 1.0)
    expo = 1.0 / (2 * b + d)
    return max(1, int(round(n**expo * L ** (2 * expo))))


def occupancy_cap(n: int, d: int, occupancy: float = 8.0) -> int:
    """Largest ``m`` whose bins keep at least ``occupancy * log(m^d)`` points.

    The adversary-count bound needs bins of size ``s >= C log m`` before
    every bin has a benign majority; ``occupancy`` plays the role of ``C``.
    """
    best = 1
    m = 1
    while True:
        m += 1
        s = n // m**d
        if s < 1 or s < occupancy * math.log(m**d):
            return best
        best = m


def auto_bins(grid: GridSpec, beta: float, L: float, occupancy: float = 8.0) -> int:
    """Rate-optimal ``m`` clamped to ``[1, p]`` and to :func:`occupancy_cap`."""
    m = choose_m_holder(grid.n, beta, L, grid.d)
    return max(1, min(m, grid.p, occupancy_cap(grid.n, grid.d, occupancy)))


# ---------------------------------------------------------------------------
# Diagnostics and worst-case median oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinDecomposition:
    """``z_j = f(j/m) + delta_j + eta_j`` with ``eta_j`` the median residual."""

    f_center: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    bound: np.ndarray  # max over the bin of |f(x_i) - f(j/m)|


def decompose(fit: LbmFit, grid: GridSpec, y, f: TestFunction) -> BinDecomposition:
    """Split each bin median into centre value, binning bias and noise median.

    Needs the true ``f``, so it is a diagnostic for simulations only.  Raises
    ``AssertionError`` if the binning bias escapes the sandwich bound.
    """
    y = np.asarray(y, dtype=float)
    x = grid.points()
    fx = f(x)
    labels = grid_bin_labels(grid, fit.m)
    eta, _ = grouped_lower_median(labels, y - fx, fit.binning.n_bins)
    f_center = f(fit.centers())
    delta = fit.z - eta - f_center
    gap = np.abs(fx - f_center[labels])
    bound = np.zeros(fit.binning.n_bins)
    np.maximum.at(bound, labels, gap)
    slack = 1e-9 * (1.0 + np.abs(fit.z) + np.abs(eta))
    worst = np.max(np.abs(delta) - bound - slack)
    assert worst <= 0, f"sandwich bound violated by {worst:.3g}"
    return BinDecomposition(f_center=f_center, delta=delta, eta=eta, bound=bound)


def worst_case_median_bounds(fixed, s_prime: int) -> tuple[float, float]:
    """Range of the lower median when ``s_prime`` of ``s`` values are arbitrary.

    With ``k = ceil(s/2)`` and the untouched values sorted ascending, the
    adversary can push the median no higher than the ``k``-th smallest and no
    lower than the ``(k - s_prime)``-th smallest.  Requires ``s_prime < s/4``.

    >>> worst_case_median_bounds([1, 2, 3, 4, 5, 6, 7], 1)
    (3.0, 4.0)
    """
    v = np.sort(np.asarray(fixed, dtype=float).ravel())
    s_prime = int(s_prime)
    s = v.size + s_prime
    if s_prime < 0 or 4 * s_prime >= s:
        raise DomainError(f"need 0 <= s' < s/4, got s'={s_prime}, s={s}")
    k = lower_median_rank(s)
    return float(v[k - s_prime - 1]), float(v[k - 1])


def median_completion_extrema(fixed, s_prime: int) -> tuple[float, float]:
    """Brute-force extremes of the lower median over adversarial completions.

    The median is monotone in every argument, so filling all free slots with
    ``-inf`` (resp. ``+inf``) attains the minimum (resp. maximum).
    """
    v = np.asarray(fixed, dtype=float).ravel()
    lo = median(np.concatenate((v, np.full(s_prime, -np.inf))))
    hi = median(np.concatenate((v, np.full(s_prime, np.inf))))
    return lo, hi
