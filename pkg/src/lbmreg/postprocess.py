"""Smoothing the bin medians: kernel smoothing (1-D) and local polynomial fits.

The kernel weight of bin ``j`` at ``x`` is the kernel mass over the bin,
``(1/h) * int_{(j-1)/m}^{j/m} K((x - u)/h) du``, evaluated in closed form
through the kernel's antiderivative.  Local polynomial regression treats the
medians as responses located at ``j/m`` and returns the fitted intercept.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .core import as_point_array, solve_normal_equations
from .exceptions import BoundaryError, ConditioningError, DimensionError, DomainError, WindowError
from .lbm import LbmFit, occupancy_cap

PIVOT_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel supported on ``[-1, 1]`` integrating to one.

    ``antideriv(u)`` is ``int_{-1}^{u} K``; ``moment_order`` is the largest
    ``k`` for which moments ``1..k`` vanish; ``energy`` is ``int K^2``.
    """

    kind: str
    eval: Callable[[np.ndarray], np.ndarray]
    antideriv: Callable[[np.ndarray], np.ndarray]
    moment_order: int
    energy: float


def _box(u):
    return np.where(np.abs(u) <= 1, 0.5, 0.0)


def _box_cdf(u):
    return (np.clip(u, -1.0, 1.0) + 1.0) / 2.0


def _tri(u):
    return np.clip(1.0 - np.abs(u), 0.0, None)


def _tri_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return np.where(u <= 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)


def _epa(u):
    return np.clip(0.75 * (1.0 - u**2), 0.0, None)


def _epa_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + 0.75 * (u - u**3 / 3.0)


def box_kernel() -> KernelSpec:
    return KernelSpec("box", _box, _box_cdf, moment_order=1, energy=0.5)


def triangular_kernel() -> KernelSpec:
    return KernelSpec("triangular", _tri, _tri_cdf, moment_order=1, energy=2.0 / 3.0)


def epanechnikov_kernel() -> KernelSpec:
    return KernelSpec("epanechnikov", _epa, _epa_cdf, moment_order=1, energy=0.6)


KERNELS = {
    "box": box_kernel,
    "triangular": triangular_kernel,
    "epanechnikov": epanechnikov_kernel,
}


def get_kernel(name: str) -> KernelSpec:
    try:
        return KERNELS[name]()
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


def custom_kernel(evaluate: Callable, antideriv: Callable, max_order: int = 6,
                  tol: float = 1e-8) -> KernelSpec:
    """Wrap a user kernel, measuring its moment order and energy by quadrature."""
    mass, _ = integrate.quad(lambda t: float(evaluate(np.array(t))), -1, 1)
    if abs(mass - 1) > tol:
        raise DomainError(f"kernel integrates to {mass}, not 1")
    order = 0
    for k in range(1, max_order + 1):
        mom, _ = integrate.quad(lambda t: float(evaluate(np.array(t))) * t**k, -1, 1)
        if abs(mom) > tol:
            break
        order = k
    energy, _ = integrate.quad(lambda t: float(evaluate(np.array(t))) ** 2, -1, 1)
    return KernelSpec("custom", evaluate, antideriv, moment_order=order, energy=energy)


# ---------------------------------------------------------------------------
# Integrated kernel weights
# ---------------------------------------------------------------------------


def _check_bandwidth(h: float) -> None:
    if not 0 < h < 0.5:
        raise DomainError(f"bandwidth must lie in (0, 1/2), got {h}")


def _check_interior(x: np.ndarray, lo: float, hi: float, closed: bool) -> None:
    bad = (x < lo) | (x > hi) if closed else (x <= lo) | (x >= hi)
    if np.any(bad):
        raise BoundaryError(
            f"query {float(x[np.argmax(bad)])} outside the interior "
            f"{'[' if closed else '('}{lo}, {hi}{']' if closed else ')'}"
        )


def kernel_weight(j: int, m: int, h: float, x: float, kernel: KernelSpec) -> float:
    """Integrated weight ``K_j^h(x)`` of bin ``j`` (1-based) for query ``x in (h, 1-h)``."""
    if not 1 <= j <= m:
        raise DomainError(f"bin {j} outside 1..{m}")
    _check_bandwidth(h)
    _check_interior(np.atleast_1d(float(x)), h, 1 - h, closed=False)
    return float(kernel.antideriv((x - (j - 1) / m) / h) - kernel.antideriv((x - j / m) / h))


def kernel_weights(m: int, h: float, x: float, kernel: KernelSpec) -> np.ndarray:
    """All ``m`` weights ``K_j^h(x)``; they sum to one for interior ``x``."""
    _check_bandwidth(h)
    _check_interior(np.atleast_1d(float(x)), h, 1 - h, closed=False)
    edges = np.arange(m + 1) / m
    cdf = kernel.antideriv((x - edges) / h)
    return cdf[:-1] - cdf[1:]


def window_weights(m: int, h: float, xs: np.ndarray, kernel: KernelSpec):
    """Sparse integrated weights for many queries at once.

    Returns ``(cells, weights)``, both ``(len(xs), W)``: 0-based cell indices
    and their weights.  Cells beyond the kernel window carry weight exactly
    zero, so values stored there never influence a prediction.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    width = int(math.ceil(2 * h * m)) + 3
    first = np.floor((xs - h) * m).astype(np.int64) - 1
    cells = first[:, None] + np.arange(width)[None, :]
    valid = (cells >= 0) & (cells < m)
    left = kernel.antideriv((xs[:, None] - cells / m) / h)
    right = kernel.antideriv((xs[:, None] - (cells + 1) / m) / h)
    w = np.where(valid, left - right, 0.0)
    return np.clip(cells, 0, m - 1), w


@dataclass(frozen=True)
class BandwidthPlan:
    h: float
    m: int
    interior_margin: float

    def __post_init__(self):
        _check_bandwidth(self.h)
        if not 0 < self.interior_margin < 0.5:
            raise DomainError(f"interior margin must lie in (0, 1/2), got {self.interior_margin}")
        if self.interior_margin < self.h:
            raise DomainError("interior margin must be at least the bandwidth")


def ks_predict_many(fit: LbmFit, plan: BandwidthPlan, kernel: KernelSpec, xs) -> np.ndarray:
    """Kernel-smoothed medians ``sum_j K_j^h(x) z_j`` at each query in ``xs``."""
    if fit.d != 1:
        raise DimensionError("kernel post-processing is one-dimensional; use LPR for d > 1")
    if plan.m != fit.m:
        raise DomainError(f"plan built for m={plan.m} but fit has m={fit.m}")
    xs = np.asarray(xs, dtype=float).ravel()
    c = plan.interior_margin
    _check_interior(xs, c, 1 - c, closed=True)
    cells, w = window_weights(fit.m, plan.h, xs, kernel)
    return np.sum(w * fit.z[cells], axis=1)


def ks_predict(fit: LbmFit, plan: BandwidthPlan, kernel: KernelSpec, x0: float) -> float:
    return float(ks_predict_many(fit, plan, kernel, [x0])[0])


# ---------------------------------------------------------------------------
# Local polynomial regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyBasis:
    """Full tensor polynomial features of degree ``<= degree`` in ``d`` variables."""

    degree: int
    d: int

    def __post_init__(self):
        if self.degree < 0 or self.d < 1:
            raise DomainError(f"invalid polynomial basis {self}")

    @property
    def D(self) -> int:
        return sum(self.d**j for j in range(self.degree + 1))

    @property
    def n_monomials(self) -> int:
        """Dimension of the polynomial space (distinct monomials)."""
        return math.comb(self.degree + self.d, self.d)

    def index_tuples(self):
        """Feature layout: ``()`` then each degree block in lexicographic order."""
        out = [()]
        for j in range(1, self.degree + 1):
            out.extend(itertools.product(range(self.d), repeat=j))
        return out


def poly_features(basis: PolyBasis, x, h: float, z) -> np.ndarray:
    """Feature map ``psi_{x,h}(z)``: products of scaled offsets ``(z_i - x_i)/h``.

    ``z`` may be a single point (returns shape ``(D,)``) or an ``(N, d)``
    batch (returns ``(N, D)``).

    >>> poly_features(PolyBasis(2, 1), [0.0], 1.0, [0.5]).tolist()
    [1.0, 0.5, 0.25]
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    single = np.asarray(z).ndim <= 1 and basis.d == np.asarray(z).size
    zz = as_point_array(z, basis.d) if not single else np.asarray(z, dtype=float).reshape(1, -1)
    if x.size != basis.d or zz.shape[1] != basis.d:
        raise DimensionError("point dimension does not match the basis")
    u = (zz - x[None, :]) / h
    cols = [np.ones(u.shape[0])]
    for tup in basis.index_tuples()[1:]:
        cols.append(np.prod(u[:, list(tup)], axis=1))
    out = np.stack(cols, axis=1)
    return out[0] if single else out


def lattice_window(count: int, d: int, x0: np.ndarray, h: float):
    """Lattice points ``j/count`` (``j = 1..count`` per axis) within sup-distance ``h`` of ``x0``.

    Returns ``(labels, coords)`` with row-major flat labels.
    """
    axes = []
    for k in range(d):
        lo = max(1, int(math.floor((x0[k] - h) * count)) - 1)
        hi = min(count, int(math.ceil((x0[k] + h) * count)) + 1)
        j = np.arange(lo, hi + 1)
        j = j[np.abs(j / count - x0[k]) <= h]
        axes.append(j)
    if any(a.size == 0 for a in axes):
        return np.zeros(0, dtype=np.int64), np.zeros((0, d))
    mesh = np.meshgrid(*axes, indexing="ij")
    idx = np.stack([g.ravel() for g in mesh], axis=1)
    labels = np.zeros(idx.shape[0], dtype=np.int64)
    for k in range(d):
        labels = labels * count + (idx[:, k] - 1)
    return labels, idx / count


def local_poly_weights(coords: np.ndarray, x0: np.ndarray, h: float, basis: PolyBasis) -> np.ndarray:
    """Effective weights ``w`` with ``prediction = w @ values`` for a local fit.

    Solves the normal equations by pivoted Cholesky with relative pivot
    threshold ``PIVOT_RTOL``; redundant tensor features are dropped by the
    pivoting.  The intercept column is always eliminated first.
    """
    if coords.shape[0] < basis.D:
        raise WindowError(
            f"window of half-width {h} holds {coords.shape[0]} points, need {basis.D}"
        )
    psi = poly_features(basis, x0, h, coords)
    if psi.ndim == 1:
        psi = psi[None, :]
    gram = psi.T @ psi
    e0 = np.zeros(basis.D)
    e0[0] = 1.0
    u, rank = solve_normal_equations(gram, e0, rtol=PIVOT_RTOL, lead=0)
    if rank < basis.n_monomials:
        raise ConditioningError(
            f"normal matrix has numerical rank {rank} < {basis.n_monomials} at x0={x0.tolist()}"
        )
    return psi @ u


def lpr_weights(fit, h: float, basis: PolyBasis, x0):
    """Bin labels in the window around ``x0`` and their effective LPR weights."""
    if basis.d != fit.d:
        raise DimensionError(f"basis dimension {basis.d} != fit dimension {fit.d}")
    if h <= 0:
        raise DomainError(f"bandwidth must be positive, got {h}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    labels, coords = lattice_window(fit.m, fit.d, x0, h)
    return labels, local_poly_weights(coords, x0, h, basis)


def lpr_predict(fit: LbmFit, h: float, basis: PolyBasis, x0) -> float:
    """Local polynomial fit of the bin medians over the sup-norm ball ``B_h(x0)``.

    Returns the fitted intercept, i.e. the fitted polynomial evaluated at
    ``x0``.

    Raises
    ------
    WindowError
        Fewer than ``basis.D`` bin anchors inside the window.
    ConditioningError
        The window's anchors cannot determine a degree-``basis.degree`` fit.
    """
    labels, w = lpr_weights(fit, h, basis, x0)
    return float(w @ fit.z[labels])


def lpr_predict_many(fit: LbmFit, h: float, basis: PolyBasis, xs) -> np.ndarray:
    pts = as_point_array(xs, fit.d)
    return np.array([lpr_predict(fit, h, basis, p) for p in pts])


def lpr_weight_l1_norm(fit, h: float, basis: PolyBasis, x0) -> float:
    """``||psi(x0)^T (Psi^T Psi)^+ Psi^T||_1``: how much bin-level bias can move a prediction.

    ``fit`` only needs ``m`` and ``d`` attributes (an :class:`LbmFit` or a
    :class:`~lbmreg.lbm.BinningSpec`).
    """
    _, w = lpr_weights(fit, h, basis, x0)
    return float(np.abs(w).sum())


# ---------------------------------------------------------------------------
# Tuning
# ---------------------------------------------------------------------------


def choose_postprocess_params(n: int, beta: float, L: float, d: int, p: int | None = None,
                              occupancy: float | None = None) -> tuple[int, float]:
    """Bins and bandwidth for median-then-smooth estimation.

    ``m = round(sqrt(n) / log(n)^{1/4})`` and ``h = (n L^2)^{-1/(2 beta + d)}``.
    ``m`` is clamped to ``[1, p]`` (and, if ``occupancy`` is given, to
    :func:`~lbmreg.lbm.occupancy_cap`); ``h`` is clamped into ``(1/m, 1/2)``.

    >>> choose_postprocess_params(10**4, 1.5, 1.0, 1)
    (57, 0.1)
    """
    if n < 1 or beta <= 0 or L <= 0 or d < 1:
        raise DomainError("need n >= 1, beta > 0, L > 0, d >= 1")
    if p is None:
        p = int(round(n ** (1.0 / d)))
    m = int(round(math.sqrt(n) / math.log(n) ** 0.25)) if n > 1 else 1
    m = max(1, min(m, p))
    if occupancy is not None:
        m = max(1, min(m, occupancy_cap(n, d, occupancy)))
    h = (n * L**2) ** (-1.0 / (2 * beta + d))
    h = min(max(h, np.nextafter(1.0 / m, 1.0)), np.nextafter(0.5, 0.0))
    return m, float(h)
