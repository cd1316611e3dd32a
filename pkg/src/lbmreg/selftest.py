"""Quick randomised checks of the identities the estimators rely on.

Each check returns ``(name, passed, detail)``; :func:`run_selftest` prints
one ``PASS``/``FAIL`` line per check.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from . import contam, core, lbm, postprocess


def check_kernel_normalisation(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in postprocess.KERNELS:
        kernel = postprocess.get_kernel(name)
        for m in (10, 57, 200):
            for h in (0.05, 0.1, 0.3):
                xs = rng.uniform(h, 1 - h, 200)
                xs = xs[(xs > h) & (xs < 1 - h)]
                _, w = postprocess.window_weights(m, h, xs, kernel)
                worst = max(worst, float(np.max(np.abs(w.sum(axis=1) - 1))))
    return "kernel weights sum to one", worst <= 1e-10, f"max deviation {worst:.2e}"


def dyadic_sample(rng, size: int, scale: float) -> np.ndarray:
    """Gaussian draws rounded to multiples of 2**-20, so sums and differences are exact."""
    return np.round(rng.normal(scale=scale, size=size) * 2.0**20) / 2.0**20


def check_median_sandwich(trials: int = 2000, seed: int = 1):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        s = int(rng.integers(1, 201))
        a, b = dyadic_sample(rng, s, 1.0), dyadic_sample(rng, s, 10.0)
        diff = core.median(a + b) - core.median(b)
        bad += not (a.min() <= diff <= a.max())
    return "median sandwich", bad == 0, f"{bad} violations in {trials} pairs"


def check_worst_case_median(trials: int = 500, seed: int = 2):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        s = int(rng.integers(1, 61))
        s_prime = int(rng.integers(0, (s - 1) // 4 + 1))
        fixed = rng.normal(size=s - s_prime)
        bad += lbm.worst_case_median_bounds(fixed, s_prime) != lbm.median_completion_extrema(fixed, s_prime)
    return "worst-case median bounds", bad == 0, f"{bad} mismatches in {trials} instances"


def check_lpr_exactness(trials: int = 10, seed: int = 3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in (1, 2):
        m = 40 if d == 1 else 20
        for ell in (0, 1, 2):
            basis = postprocess.PolyBasis(ell, d)
            anchors = np.indices((m,) * d).reshape(d, -1).T + 1
            for _ in range(trials):
                terms = {}
                for exps in np.ndindex(*(ell + 1,) * d):
                    if sum(exps) <= ell:
                        terms[exps] = float(rng.normal())
                f = core.polynomial(terms, dim=d)
                fit = lbm.LbmFit(lbm.BinningSpec(m, d, 1), f(anchors / m), np.ones(m**d, int))
                x0 = rng.uniform(0.3, 0.7, d)
                err = abs(postprocess.lpr_predict(fit, 0.2, basis, x0) - float(f(x0[None, :])[0]))
                worst = max(worst, err)
    return "local polynomial exactness", worst <= 1e-8, f"max error {worst:.2e}"


def check_adversary_concentration(trials: int = 200, seed: int = 4):
    eps, s, m = 0.1, 100, 100
    grid = core.make_grid(s * m, 1)
    model = contam.ContaminationModel(eps, contam.point_mass(0.0))
    f = core.constant(0.0)
    bound = 4 * (s * eps + math.log(m))
    hits = 0
    for k in range(trials):
        obs = contam.sample_observations(f, grid, model, contam.derive_seed(seed, k))
        hits += contam.count_adversaries_per_bin(obs, m).max() <= bound
    return "per-bin adversary count", hits >= 0.99 * trials, f"{hits}/{trials} seeds within bound"


CHECKS = (
    check_kernel_normalisation,
    check_median_sandwich,
    check_worst_case_median,
    check_lpr_exactness,
    check_adversary_concentration,
)


def run_selftest(stream=None) -> bool:
    stream = stream or sys.stdout
    ok = True
    for check in CHECKS:
        name, passed, detail = check()
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}", file=stream)
    return ok
