"""Fixed design grids, test functions, the lower median and small solvers.

Everything here is pure: functions take arrays and return new arrays, so they
can be called from any number of threads or processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import CapacityError, DimensionError, DomainError


# ---------------------------------------------------------------------------
# Design grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Evenly spaced fixed design ``x_i = (i_1/p, ..., i_d/p)``, ``i_k in 1..p``."""

    p: int
    d: int

    @property
    def n(self) -> int:
        return self.p**self.d

    def points(self) -> np.ndarray:
        """Design points as an ``(n, d)`` array in row-major multi-index order."""
        axis = np.arange(1, self.p + 1) / self.p
        if self.d == 1:
            return axis[:, None]
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def multi_indices(self) -> np.ndarray:
        """Integer multi-indices ``(i_1, ..., i_d)`` matching :meth:`points`."""
        idx = np.indices((self.p,) * self.d).reshape(self.d, -1).T
        return idx + 1


def make_grid(p: int, d: int) -> GridSpec:
    """Build the fixed design grid with ``p`` points per axis in ``d`` dimensions.

    Raises
    ------
    CapacityError
        If ``p**d`` does not fit in a signed 64-bit integer.
    """
    p, d = int(p), int(d)
    if p < 1 or d < 1:
        raise DomainError(f"grid needs p >= 1 and d >= 1, got p={p}, d={d}")
    if p > 1 and d * math.log2(p) >= 63:
        raise CapacityError(f"p**d = {p}**{d} overflows the 64-bit index range")
    return GridSpec(p=p, d=d)


def grid_from_points(x: np.ndarray) -> GridSpec:
    """Recover the :class:`GridSpec` that generated ``x`` (rows in grid order).

    Used when observations are read back from disk.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    p = int(round(n ** (1.0 / d)))
    for cand in (p - 1, p, p + 1):
        if cand >= 1 and cand**d == n:
            p = cand
            break
    else:
        raise DimensionError(f"{n} points is not a perfect {d}-th power")
    grid = make_grid(p, d)
    if not np.allclose(grid.points(), x, rtol=0, atol=1e-9):
        raise DimensionError("points do not lie on the regular design grid i/p")
    return grid


# ---------------------------------------------------------------------------
# Smoothness classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderSpec:
    beta: float
    L: float

    def __post_init__(self):
        if not (self.beta > 0 and self.L > 0):
            raise DomainError(f"Holder class needs beta > 0 and L > 0, got {self}")

    @property
    def ell(self) -> int:
        return int(math.floor(self.beta))


@dataclass(frozen=True)
class SobolevSpec:
    beta: int
    p_int: int
    L: float

    def __post_init__(self):
        if self.beta < 1 or self.p_int < 1 or self.L <= 0:
            raise DomainError(f"invalid Sobolev class {self}")

    def check_embedding(self, d: int) -> None:
        """Raise unless ``(beta - 1)/d >= 1/p_int`` (needed for local polynomial fits)."""
        if self.p_int < d:
            raise DomainError(f"Sobolev integrability p={self.p_int} must be >= d={d}")
        if (self.beta - 1) * self.p_int < d:
            raise DomainError(
                f"embedding condition (beta-1)/d >= 1/p fails for beta={self.beta}, "
                f"p={self.p_int}, d={d}"
            )


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """A regression function on ``[0, 1]^dim``.

    Build instances with :func:`ramp`, :func:`constant`, :func:`polynomial`
    or :func:`peak2d`; call them on an ``(N, dim)`` array (a 1-D array is
    accepted when ``dim == 1``).
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    dim: int
    params: dict = field(default_factory=dict, hash=False)

    def __call__(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        return _EVALUATORS[self.kind](x, **self.params)

    def sup_norm(self, grid_points: int = 513) -> float:
        """Numerical sup-norm on a regular grid (exact for the shipped ramps)."""
        if self.kind == "constant":
            return abs(self.params["value"])
        if self.kind == "ramp":
            return self.params["L"] * self.params["rho"] ** self.params["beta"]
        ax = np.linspace(0.0, 1.0, grid_points)
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        return float(np.max(np.abs(self(pts))))

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if dim == 1 else x[None, :]
    if x.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got {x.shape[1]}")
    return x


def _eval_ramp(x, rho, beta, L):
    # L * (rho - x)^beta left of rho, zero to the right; first coordinate only
    t = np.clip(rho - x[:, 0], 0.0, None)
    return L * t**beta


def _eval_constant(x, value):
    return np.full(x.shape[0], float(value))


def _eval_polynomial(x, terms):
    out = np.zeros(x.shape[0])
    for exps, coef in terms:
        out += coef * np.prod(x ** np.asarray(exps, dtype=float), axis=1)
    return out


def _eval_peak2d(x, scale):
    # MATLAB ``peaks`` pulled back from [-3, 3]^2 to the unit square
    u = 6.0 * x[:, 0] - 3.0
    v = 6.0 * x[:, 1] - 3.0
    z = (
        3 * (1 - u) ** 2 * np.exp(-(u**2) - (v + 1) ** 2)
        - 10 * (u / 5 - u**3 - v**5) * np.exp(-(u**2) - v**2)
        - np.exp(-((u + 1) ** 2) - v**2) / 3
    )
    return scale * z


_EVALUATORS = {
    "ramp": _eval_ramp,
    "constant": _eval_constant,
    "polynomial": _eval_polynomial,
    "peak2d": _eval_peak2d,
}


def ramp(rho: float, beta: float, L: float, dim: int = 1) -> TestFunction:
    """``L * (rho - x)^beta`` for ``x <= rho`` and 0 otherwise (varies along axis 1)."""
    if not (0 < rho <= 1 and beta > 0 and L > 0):
        raise DomainError(f"invalid ramp parameters rho={rho}, beta={beta}, L={L}")
    return TestFunction("ramp", dim, {"rho": float(rho), "beta": float(beta), "L": float(L)})


def constant(value: float, dim: int = 1) -> TestFunction:
    return TestFunction("constant", dim, {"value": float(value)})


def polynomial(terms, dim: int = 1) -> TestFunction:
    """Polynomial from ``{exponent_tuple: coefficient}`` or, for ``dim == 1``,
    an ascending coefficient sequence ``[c0, c1, ...]``."""
    if isinstance(terms, dict):
        items = [(tuple(int(e) for e in k), float(c)) for k, c in terms.items()]
    else:
        if dim != 1:
            raise DimensionError("coefficient lists describe 1-D polynomials only")
        items = [((k,), float(c)) for k, c in enumerate(terms)]
    for exps, _ in items:
        if len(exps) != dim or min(exps) < 0:
            raise DimensionError(f"bad exponent tuple {exps} for dim={dim}")
    items = tuple(sorted(items))
    return TestFunction("polynomial", dim, {"terms": items})


def peak2d(scale: float = 1.0) -> TestFunction:
    return TestFunction("peak2d", 2, {"scale": float(scale)})


def polynomial_degree(f: TestFunction) -> int:
    return max((sum(e) for e, c in f.params["terms"] if c != 0), default=0)


def polynomial_holder_constant(f: TestFunction) -> float:
    """Upper bound on ``L`` such that ``f`` lies in the Holder class for every
    ``beta >= degree``.

    Sums, over every derivative multi-index up to the degree, a bound on the
    sup-norm of that derivative on the unit cube; top-order derivatives are
    constant so their difference quotients vanish.
    """
    if f.kind != "polynomial":
        raise DomainError("only polynomials carry a closed-form Holder bound")
    deg = polynomial_degree(f)
    total = 0.0
    for alpha in np.ndindex(*([deg + 1] * f.dim)):
        if sum(alpha) > deg:
            continue
        bound = 0.0
        for exps, coef in f.params["terms"]:
            if all(e >= a for e, a in zip(exps, alpha)):
                falling = 1.0
                for e, a in zip(exps, alpha):
                    falling *= math.perm(e, a)
                bound += abs(coef) * falling
        total += bound
    return total


# ---------------------------------------------------------------------------
# Median
# ---------------------------------------------------------------------------


def lower_median_rank(s: int) -> int:
    """1-based rank of the lower median among ``s`` sorted values: ``ceil(s/2)``."""
    return (int(s) + 1) // 2


def median(values) -> float:
    """Lower median: the ``ceil(s/2)``-th smallest element, never an average.

    ``+inf`` and ``-inf`` are allowed as sentinels; NaN is rejected.

    >>> median([4, 1, 3, 2])
    2.0
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("median of an empty sequence")
    if np.isnan(v).any():
        raise ValueError("median input contains NaN")
    k = lower_median_rank(v.size) - 1
    return float(np.partition(v, k)[k])


# ---------------------------------------------------------------------------
# Holder seminorm check
# ---------------------------------------------------------------------------


def holder_seminorm_estimate(f: TestFunction, spec: HolderSpec, samples: int = 10_000,
                             seed: int = 0) -> float:
    """Empirical max of ``|f(x) - f(x')| / ||x - x'||_inf^min(beta, 1)``.

    Samples ``samples`` random point pairs; a certificate for test fixtures,
    not a membership decision.  For ramps half of the pairs pin one end at the
    kink so the supremum is approached.
    """
    if samples < 2:
        raise DomainError("need at least two samples")
    rng = np.random.default_rng(seed)
    a = rng.random((samples, f.dim))
    b = rng.random((samples, f.dim))
    if f.kind == "ramp":
        a[: samples // 2, 0] = f.params["rho"]
    dist = np.max(np.abs(a - b), axis=1)
    keep = dist > 0
    expo = min(spec.beta, 1.0)
    ratio = np.abs(f(a[keep]) - f(b[keep])) / dist[keep] ** expo
    return float(ratio.max()) if ratio.size else 0.0


# ---------------------------------------------------------------------------
# Small symmetric solves
# ---------------------------------------------------------------------------


def pivoted_cholesky(A: np.ndarray, rtol: float = 1e-10, lead: int | None = 0):
    """Diagonally pivoted Cholesky of a symmetric PSD matrix.

    Factorisation stops once the largest remaining pivot falls below
    ``rtol * max(diag(A))``.  ``lead`` forces that column to be eliminated
    first (the intercept for local polynomial fits).

    Returns
    -------
    factor : ndarray, shape (rank, rank)
        Lower-triangular factor of ``A[perm[:rank]][:, perm[:rank]]``.
    perm : ndarray of int
        Column permutation.
    rank : int
    """
    W = np.array(A, dtype=float, copy=True)
    n = W.shape[0]
    perm = np.arange(n)
    scale = float(np.max(np.diag(W))) if n else 0.0
    if scale <= 0:
        return np.zeros((0, 0)), perm, 0
    tol = rtol * scale
    rank = 0
    for k in range(n):
        if k == 0 and lead is not None:
            piv = lead
        else:
            piv = k + int(np.argmax(np.diag(W)[k:]))
        if W[piv, piv] <= tol:
            break
        if piv != k:
            W[[k, piv], :] = W[[piv, k], :]
            W[:, [k, piv]] = W[:, [piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
        W[k, k] = math.sqrt(W[k, k])
        W[k + 1:, k] /= W[k, k]
        W[k + 1:, k + 1:] -= np.outer(W[k + 1:, k], W[k + 1:, k])
        rank = k + 1
    return np.tril(W[:rank, :rank]), perm, rank


def solve_normal_equations(A: np.ndarray, b: np.ndarray, rtol: float = 1e-10,
                           lead: int | None = 0):
    """Solve ``A x = b`` for symmetric PSD ``A`` on its numerically full-rank part.

    Columns dropped by the pivot threshold get a zero coefficient, which yields
    a basic least-squares solution when ``A`` is a Gram matrix with redundant
    columns.  ``b`` may be a vector or a matrix of right-hand sides.

    Returns ``(x, rank)``.
    """
    factor, perm, rank = pivoted_cholesky(A, rtol=rtol, lead=lead)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b, dtype=float)
    if rank == 0:
        return x, 0
    keep = perm[:rank]
    y = solve_triangular(factor, b[keep], lower=True)
    x[keep] = solve_triangular(factor.T, y, lower=False)
    return x, rank


def as_point_array(x, d: int) -> np.ndarray:
    """Coerce a single point or a batch into an ``(N, d)`` float array."""
    return _as_points(x, d)


def check_unit_cube(x: np.ndarray) -> None:
    if np.any(x < 0) or np.any(x > 1) or np.isnan(x).any():
        bad = x[np.any((x < 0) | (x > 1) | np.isnan(x), axis=1)][0]
        raise DomainError(f"point {bad.tolist()} lies outside [0, 1]^d")
