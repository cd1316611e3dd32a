"""Deterministic SVG figures for experiment reports.

Figures are built on :class:`matplotlib.figure.Figure` directly (no pyplot
state) and saved with a fixed hash salt and no date stamp, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib
import numpy as np
from matplotlib.figure import Figure

_RC = {"svg.hashsalt": "lbmreg", "svg.fonttype": "path", "path.simplify": False}


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


def plot_risk_curves(report, path) -> None:
    """Mean risk against ``n`` on log-log axes, one line per estimator."""
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    for est in sorted(report.estimators):
        n = np.array(report.n_values, dtype=float)
        r = np.array([report.mean_risk(est, k) for k in report.n_values])
        ok = np.isfinite(r) & (r > 0)
        if ok.any():
            ax.plot(n[ok], r[ok], marker="o", label=est)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean integrated squared error")
    ax.grid(True, which="both", alpha=0.3)
    if ax.lines:
        ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_fit_example(example: dict, path, max_points: int = 2000) -> None:
    """Data and fitted curves from one replicate.

    In one dimension a thinned sample of observations is drawn (adversarial
    ones as red crosses, clipped to the plotting range) with each estimator's
    curve and the truth.  In two dimensions each estimator gets a heat map.
    """
    pts, f = example["points"], example["function"]
    curves = example["curves"]
    d = pts.shape[1]
    if d == 1:
        fig = Figure(figsize=(7, 4.5))
        ax = fig.add_subplot()
        x, y, mask = pts[:, 0], example["y"], example["mask"]
        step = max(1, math.ceil(x.size / max_points))
        xs, ys, ms = x[::step], y[::step], mask[::step]
        truth = f(np.linspace(0, 1, 1001)[:, None])
        pad = max(1.0, 0.5 * (truth.max() - truth.min()))
        lo, hi = truth.min() - 2 * pad, truth.max() + 2 * pad
        ax.scatter(xs[~ms], np.clip(ys[~ms], lo, hi), s=3, color="0.6", label="benign")
        if ms.any():
            ax.scatter(xs[ms], np.clip(ys[ms], lo, hi), s=12, marker="x", color="red",
                       label="adversarial")
        grid = np.linspace(0, 1, 1001)
        ax.plot(grid, truth, color="black", lw=1.5, label="truth")
        for key in sorted(curves):
            q, v = curves[key]
            ax.plot(q[:, 0], v, lw=1, label=key)
        ax.set_ylim(lo, hi)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.legend(fontsize="small")
    else:
        keys = ["truth"] + sorted(curves)
        fig = Figure(figsize=(3.2 * len(keys), 3.2))
        for i, key in enumerate(keys, 1):
            ax = fig.add_subplot(1, len(keys), i)
            if key == "truth":
                g = np.linspace(0, 1, 101)
                u, v = np.meshgrid(g, g, indexing="ij")
                q = np.stack([u.ravel(), v.ravel()], axis=1)
                vals = f(q)
            else:
                q, vals = curves[key]
            k = int(round(math.sqrt(len(vals))))
            lo_q, hi_q = q.min(axis=0), q.max(axis=0)
            ax.imshow(np.asarray(vals).reshape(k, k).T, origin="lower",
                      extent=(lo_q[0], hi_q[0], lo_q[1], hi_q[1]), aspect="equal")
            ax.set_title(key)
    fig.suptitle(f"n = {example['n']}")
    fig.tight_layout()
    _save(fig, path)
