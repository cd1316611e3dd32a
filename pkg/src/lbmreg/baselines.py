"""Non-robust comparison estimators fitted directly on the raw responses.

Direct kernel smoothing reuses the integrated weights from
:mod:`lbmreg.postprocess` with one cell per observation, so the only
difference from median-then-smooth is the median step itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridSpec, as_point_array
from .exceptions import DimensionError, DomainError
from .postprocess import (KernelSpec, PolyBasis, _check_bandwidth, _check_interior,
                          lattice_window, local_poly_weights, window_weights)


@dataclass(frozen=True)
class TruncationSpec:
    """Clamp level ``T = L_bound + c_margin`` for truncated kernel smoothing."""

    L_bound: float
    c_margin: float = 3.0

    def __post_init__(self):
        if self.c_margin <= 1:
            raise DomainError(f"truncation margin must exceed 1, got {self.c_margin}")
        if self.L_bound < 0:
            raise DomainError(f"sup-norm bound must be non-negative, got {self.L_bound}")

    @property
    def T(self) -> float:
        return self.L_bound + self.c_margin


def clamp(y, T: float) -> np.ndarray:
    return np.clip(np.asarray(y, dtype=float), -T, T)


def direct_kernel_predict_many(grid: GridSpec, y, h: float, kernel: KernelSpec, xs) -> np.ndarray:
    """``sum_i K_i^h(x) y_i`` with observation ``i`` owning the cell ``[(i-1)/n, i/n)``."""
    if grid.d != 1:
        raise DimensionError("direct kernel smoothing is implemented for d = 1")
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.n,):
        raise DimensionError(f"expected {grid.n} responses, got shape {y.shape}")
    _check_bandwidth(h)
    xs = np.asarray(xs, dtype=float).ravel()
    _check_interior(xs, h, 1 - h, closed=False)
    cells, w = window_weights(grid.n, h, xs, kernel)
    return np.sum(w * y[cells], axis=1)


def direct_kernel_predict(grid: GridSpec, y, h: float, kernel: KernelSpec, x0: float) -> float:
    return float(direct_kernel_predict_many(grid, y, h, kernel, [x0])[0])


def truncated_kernel_predict_many(grid: GridSpec, y, h: float, kernel: KernelSpec,
                                  trunc: TruncationSpec, xs) -> np.ndarray:
    return direct_kernel_predict_many(grid, clamp(y, trunc.T), h, kernel, xs)


def truncated_kernel_predict(grid: GridSpec, y, h: float, kernel: KernelSpec,
                             trunc: TruncationSpec, x0: float) -> float:
    """Kernel smoothing after clamping every response into ``[-T, T]``."""
    return float(truncated_kernel_predict_many(grid, y, h, kernel, trunc, [x0])[0])


def direct_lpr_predict(grid: GridSpec, y, h: float, basis: PolyBasis, x0) -> float:
    """Local polynomial regression on the raw ``(x_i, y_i)`` pairs."""
    if basis.d != grid.d:
        raise DimensionError(f"basis dimension {basis.d} != grid dimension {grid.d}")
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    labels, coords = lattice_window(grid.p, grid.d, x0, h)
    w = local_poly_weights(coords, x0, h, basis)
    return float(w @ y[labels])


def direct_lpr_predict_many(grid: GridSpec, y, h: float, basis: PolyBasis, xs) -> np.ndarray:
    pts = as_point_array(xs, grid.d)
    return np.array([direct_lpr_predict(grid, y, h, basis, p) for p in pts])
