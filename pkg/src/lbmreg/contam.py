"""Huber contamination: ``y_i ~ (1 - eps) N(f(x_i), sd^2) + eps Q(x_i)``.

Every observation carries a flag recording whether it came from the
adversary.  Estimators never see the flag: their entry points take a grid and
a response vector only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import GridSpec, TestFunction, grid_from_points
from .exceptions import DimensionError, DomainError
from .lbm import grid_bin_labels

# custom adversaries: name -> sampler(points, rng) -> values
_SAMPLERS: dict[str, Callable[[np.ndarray, np.random.Generator], np.ndarray]] = {}


def register_adversary(name: str, sampler: Callable) -> None:
    """Register ``sampler(points, rng) -> values`` under ``name`` for custom adversaries.

    The sampler receives the ``(k, d)`` design points of the contaminated
    observations, so location-dependent adversaries are possible.
    """
    _SAMPLERS[name] = sampler


@dataclass(frozen=True)
class AdversaryKind:
    kind: str
    params: dict = field(default_factory=dict, hash=False)

    def sample(self, points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        k = points.shape[0]
        p = self.params
        if self.kind == "point_mass":
            return np.full(k, float(p["value"]))
        if self.kind == "symmetric_bernoulli":
            signs = np.where(rng.random(k) < 0.5, 1.0, -1.0)
            return signs * float(p["magnitude"])
        if self.kind == "shifted_gaussian":
            return float(p["mean"]) + float(p["sd"]) * rng.standard_normal(k)
        if self.kind == "custom":
            try:
                sampler = _SAMPLERS[p["sampler_id"]]
            except KeyError:
                raise DomainError(f"no adversary registered as {p['sampler_id']!r}") from None
            out = np.asarray(sampler(points, rng), dtype=float)
            if out.shape != (k,):
                raise DimensionError(f"custom sampler returned shape {out.shape}, wanted ({k},)")
            return out
        raise DomainError(f"unknown adversary kind {self.kind!r}")

    def describe(self) -> str:
        return f"{self.kind}{json.dumps(self.params, sort_keys=True)}"


def point_mass(value: float) -> AdversaryKind:
    return AdversaryKind("point_mass", {"value": float(value)})


def symmetric_bernoulli(magnitude: float) -> AdversaryKind:
    return AdversaryKind("symmetric_bernoulli", {"magnitude": float(magnitude)})


def shifted_gaussian(mean: float, sd: float = 1.0) -> AdversaryKind:
    return AdversaryKind("shifted_gaussian", {"mean": float(mean), "sd": float(sd)})


def custom(sampler_id: str) -> AdversaryKind:
    return AdversaryKind("custom", {"sampler_id": str(sampler_id)})


@dataclass(frozen=True)
class ContaminationModel:
    epsilon: float
    adversary: AdversaryKind
    benign_sd: float = 1.0

    def __post_init__(self):
        # epsilon = 1 is admitted as the degenerate all-adversary mixture
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.benign_sd > 0:
            raise DomainError(f"benign_sd must be positive, got {self.benign_sd}")


@dataclass(frozen=True, eq=False)
class Observations:
    grid: GridSpec
    y: np.ndarray
    adversary_mask: np.ndarray
    seed: int
    model: ContaminationModel | None = None

    def __post_init__(self):
        if self.y.shape != (self.grid.n,) or self.adversary_mask.shape != (self.grid.n,):
            raise DimensionError("y and adversary_mask must both have length grid.n")

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.y).tobytes()).hexdigest()[:16]


def derive_seed(root_seed: int, *keys: int) -> int:
    """Child seed for replicate cells, mixing integer keys into the root seed.

    Uses numpy's ``SeedSequence`` spawn keys, so cells are independent streams
    and no generator state is shared between them.
    """
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_observations(f: TestFunction, grid: GridSpec, model: ContaminationModel,
                        seed: int) -> Observations:
    """Draw one contaminated data set on ``grid``.

    Each design point independently takes the adversarial branch with
    probability ``model.epsilon``; identical arguments give bit-identical
    output.
    """
    if f.dim != grid.d:
        raise DimensionError(f"function dimension {f.dim} != grid dimension {grid.d}")
    rng = np.random.default_rng(seed)
    x = grid.points()
    mask = rng.random(grid.n) < model.epsilon
    y = f(x) + model.benign_sd * rng.standard_normal(grid.n)
    if mask.any():
        y[mask] = model.adversary.sample(x[mask], rng)
    return Observations(grid=grid, y=y, adversary_mask=mask, seed=int(seed), model=model)


def count_adversaries_per_bin(obs: Observations, m: int) -> np.ndarray:
    """Number of adversarial observations ``s_j`` in each of the ``m^d`` bins."""
    labels = grid_bin_labels(obs.grid, m)
    return np.bincount(labels[obs.adversary_mask], minlength=m**obs.grid.d)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

_HEADER_TAG = "# lbmreg-observations"


def write_observations_csv(obs: Observations, path: str | os.PathLike) -> None:
    """Write ``index, x_1..x_d, y, adversary`` with a one-line comment header."""
    meta = {"seed": obs.seed}
    if obs.model is not None:
        meta.update(
            epsilon=obs.model.epsilon,
            adversary=obs.model.adversary.kind,
            adversary_params=obs.model.adversary.params,
            benign_sd=obs.model.benign_sd,
        )
    x = obs.grid.points()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{_HEADER_TAG} {json.dumps(meta, sort_keys=True)}\n")
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x_{k + 1}" for k in range(obs.grid.d)] + ["y", "adversary"])
        for i in range(obs.grid.n):
            w.writerow([i] + [repr(float(v)) for v in x[i]]
                       + [repr(float(obs.y[i])), int(obs.adversary_mask[i])])


def read_observations_csv(path: str | os.PathLike) -> Observations:
    """Inverse of :func:`write_observations_csv`.

    The ``adversary`` column and the comment header are optional, so plain
    ``x_1..x_d, y`` tables on the design grid can be read as well.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        meta = {}
        if first.startswith("#"):
            payload = first[len(_HEADER_TAG):].strip() if first.startswith(_HEADER_TAG) else ""
            meta = json.loads(payload) if payload else {}
        else:
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DimensionError(f"{path}: no observations")
    xcols = sorted((c for c in rows[0] if c.startswith("x_")), key=lambda c: int(c[2:]))
    if not xcols or "y" not in rows[0]:
        raise DimensionError(f"{path}: need columns x_1..x_d and y")
    x = np.array([[float(r[c]) for c in xcols] for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    mask = np.array([r.get("adversary", "0") in ("1", "True", "true") for r in rows])
    grid = grid_from_points(x)
    model = None
    if "epsilon" in meta:
        model = ContaminationModel(
            epsilon=meta["epsilon"],
            adversary=AdversaryKind(meta["adversary"], meta.get("adversary_params", {})),
            benign_sd=meta.get("benign_sd", 1.0),
        )
    return Observations(grid=grid, y=y, adversary_mask=mask, seed=int(meta.get("seed", 0)),
                        model=model)
