"""Monte Carlo experiments: sampling, paired estimator runs, risks and rates.

An experiment is described by a flat ``key = value`` text file (see
:data:`DEFAULT_CONFIG`).  For every sample size ``n`` and replicate a child
seed is derived from the root seed, one contaminated data set is drawn, and
every configured estimator is evaluated on that same data set.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import baselines, contam, core, lbm, postprocess
from .exceptions import ConditioningError, ConfigError, DomainError, LbmregError, WindowError

log = logging.getLogger(__name__)

ESTIMATORS = ("lbm", "lbm_ks", "lbm_lpr", "kernel", "t_kernel", "lpr")
KERNEL_TYPES = ("lbm_ks", "kernel", "t_kernel")
HYPERPARAMS = ("m", "h", "ell", "kernel", "trunc_L", "trunc_c")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorSettings:
    """Hyperparameters for one estimator; ``None`` means "auto"."""

    key: str
    m: int | None = None
    h: float | None = None
    ell: int | None = None
    kernel: str = "triangular"
    trunc_L: float | None = None
    trunc_c: float = 3.0

    def __post_init__(self):
        if self.key not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.key!r}; choose from {', '.join(ESTIMATORS)}")


@dataclass(frozen=True)
class ExperimentConfig:
    function: core.TestFunction
    beta: float
    L: float
    n_values: tuple[int, ...]
    d: int
    contamination: contam.ContaminationModel
    estimators: tuple[EstimatorSettings, ...]
    replicates: int = 20
    root_seed: int = 0
    margin: float | None = None
    risk_grid_points: int = 2000
    occupancy: float = 8.0
    plot_fits: bool = True

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.n_values:
            raise ConfigError("at least one sample size is required")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigError("n values must be strictly increasing")
        if self.function.dim != self.d:
            raise ConfigError(f"function dimension {self.function.dim} != d={self.d}")
        if self.margin is not None and not 0 <= self.margin < 0.5:
            raise ConfigError("margin must lie in [0, 1/2)")
        if self.risk_grid_points < 1:
            raise ConfigError("risk_grid_points must be >= 1")
        if not self.estimators:
            raise ConfigError("no estimators configured")


DEFAULT_CONFIG = """\
# lbmreg experiment configuration (flat key = value; '#' starts a comment)
function = ramp            # ramp | constant | polynomial | peak2d
rho = 0.2                  # ramp kink
beta = 0.5                 # smoothness used by the ramp and by every auto rule
L = 10                     # smoothness constant used by the ramp and auto rules
value = 0                  # constant function level
coeffs = 0, 1              # polynomial coefficients, ascending (d = 1)
scale = 1                  # peak2d amplitude
d = 1
n = 8192                   # comma-separated, strictly increasing; each a perfect d-th power
epsilon = 0.1
adversary = symmetric_bernoulli   # point_mass | symmetric_bernoulli | shifted_gaussian | custom
adversary_value = 100      # point mass location / Bernoulli magnitude / Gaussian mean
adversary_sd = 1           # shifted_gaussian spread
adversary_id =             # custom sampler name (see contam.register_adversary)
benign_sd = 1
estimators = lbm, t_kernel
m = auto                   # bins per axis
h = auto                   # bandwidth
ell = auto                 # local polynomial degree
kernel = triangular        # box | triangular | epanechnikov
trunc_L = auto             # sup-norm bound for truncation (auto: L)
trunc_c = 3                # truncation margin, must exceed 1
replicates = 20
root_seed = 0
margin = auto              # risk domain [c, 1-c]^d; auto: 0, or h for kernel estimators
risk_grid_points = 2000    # midpoint-rule cells per axis
occupancy = 8              # auto m keeps >= occupancy * log(m^d) points per bin
plot_fits = true
# per-estimator overrides use <estimator>.<param>, e.g. t_kernel.h = 0.02
"""

_GLOBAL_KEYS = {
    "function", "rho", "beta", "L", "value", "coeffs", "scale", "d", "n", "epsilon",
    "adversary", "adversary_value", "adversary_sd", "adversary_id", "benign_sd",
    "estimators", "replicates", "root_seed", "margin", "risk_grid_points", "occupancy",
    "plot_fits",
} | set(HYPERPARAMS)


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." in key:
            est, param = key.split(".", 1)
            if est not in ESTIMATORS or param not in HYPERPARAMS:
                raise ConfigError(f"line {lineno}: unknown override {key!r}")
        elif key not in _GLOBAL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _num(raw: dict, key: str, cast=float, auto_ok: bool = False):
    value = raw[key]
    if auto_ok and value in ("auto", ""):
        return None
    try:
        return cast(value)
    except ValueError:
        raise ConfigError(f"{key} = {value!r} is not a valid {cast.__name__}") from None


def _num_list(raw: dict, key: str, cast=float) -> tuple:
    try:
        return tuple(cast(v) for v in raw[key].split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key} = {raw[key]!r} is not a list of {cast.__name__}") from None


def config_from_mapping(user: dict[str, str]) -> ExperimentConfig:
    raw = parse_config_text(DEFAULT_CONFIG)
    raw.update(user)
    d = _num(raw, "d", int)
    beta, L = _num(raw, "beta"), _num(raw, "L")
    kind = raw["function"]
    try:
        if kind == "ramp":
            f = core.ramp(_num(raw, "rho"), beta, L, dim=d)
        elif kind == "constant":
            f = core.constant(_num(raw, "value"), dim=d)
        elif kind == "polynomial":
            if d != 1:
                raise ConfigError("config polynomials are one-dimensional")
            f = core.polynomial(list(_num_list(raw, "coeffs")))
        elif kind == "peak2d":
            if d != 2:
                raise ConfigError("peak2d needs d = 2")
            f = core.peak2d(_num(raw, "scale"))
        else:
            raise ConfigError(f"unknown function {kind!r}")
        core.HolderSpec(beta, L)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    adv_kind, adv_value = raw["adversary"], _num(raw, "adversary_value")
    if adv_kind == "point_mass":
        adversary = contam.point_mass(adv_value)
    elif adv_kind == "symmetric_bernoulli":
        adversary = contam.symmetric_bernoulli(adv_value)
    elif adv_kind == "shifted_gaussian":
        adversary = contam.shifted_gaussian(adv_value, _num(raw, "adversary_sd"))
    elif adv_kind == "custom":
        adversary = contam.custom(raw["adversary_id"])
    else:
        raise ConfigError(f"unknown adversary {adv_kind!r}")
    try:
        model = contam.ContaminationModel(_num(raw, "epsilon"), adversary, _num(raw, "benign_sd"))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    keys = [k.strip() for k in raw["estimators"].split(",") if k.strip()]
    settings = []
    for key in keys:
        local = {p: raw.get(f"{key}.{p}", raw[p]) for p in HYPERPARAMS}
        settings.append(EstimatorSettings(
            key=key,
            m=_num(local, "m", int, auto_ok=True),
            h=_num(local, "h", float, auto_ok=True),
            ell=_num(local, "ell", int, auto_ok=True),
            kernel=local["kernel"],
            trunc_L=_num(local, "trunc_L", float, auto_ok=True),
            trunc_c=_num(local, "trunc_c", float),
        ))
        if local["kernel"] not in postprocess.KERNELS:
            raise ConfigError(f"unknown kernel {local['kernel']!r}")
    n_values = _num_list(raw, "n", int)
    for n in n_values:
        _grid_for(n, d)
    return ExperimentConfig(
        function=f, beta=beta, L=L, n_values=n_values, d=d, contamination=model,
        estimators=tuple(settings),
        replicates=_num(raw, "replicates", int),
        root_seed=_num(raw, "root_seed", int),
        margin=_num(raw, "margin", float, auto_ok=True),
        risk_grid_points=_num(raw, "risk_grid_points", int),
        occupancy=_num(raw, "occupancy"),
        plot_fits=raw["plot_fits"].lower() in ("1", "true", "yes", "on"),
    )


def parse_config(text: str) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(text))


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _grid_for(n: int, d: int) -> core.GridSpec:
    p = int(round(n ** (1.0 / d)))
    if p**d != n:
        raise ConfigError(f"n = {n} is not a perfect {d}-th power")
    return core.make_grid(p, d)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


@dataclass
class Predictor:
    """A fitted estimator: ``__call__`` maps ``(N, d)`` query points to values."""

    key: str
    fn: Callable[[np.ndarray], np.ndarray]
    margin: float
    params: dict = field(default_factory=dict)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.fn(pts)


def _kernel_bandwidth(n: int, beta: float, L: float) -> float:
    h = (n * L**2) ** (-1.0 / (2 * beta + 1))
    return float(min(max(h, np.nextafter(1.0 / n, 1.0)), np.nextafter(0.5, 0.0)))


def _widening(fn, h: float, factor: float = 1.25):
    """Retry a local fit with a wider window until it is well posed."""

    def call(pt):
        width = h
        while True:
            try:
                return fn(width, pt)
            except (WindowError, ConditioningError):
                if width >= 0.5:
                    raise
                width = min(width * factor, 0.5)

    return call


def build_predictor(settings: EstimatorSettings, grid: core.GridSpec, y: np.ndarray,
                    beta: float, L: float, margin: float | None = None,
                    occupancy: float = 8.0) -> Predictor:
    """Fit one estimator on ``(grid, y)``, resolving "auto" hyperparameters.

    Only the grid and responses are passed in; adversary labels never reach an
    estimator.
    """
    n, d = grid.n, grid.d
    key = settings.key
    kernel = postprocess.get_kernel(settings.kernel)
    ell = settings.ell if settings.ell is not None else int(math.floor(beta))
    basis = postprocess.PolyBasis(ell, d)

    if key == "lbm":
        m = settings.m or lbm.auto_bins(grid, beta, L, occupancy)
        fit = lbm.lbm_fit(grid, y, m)
        return Predictor(key, fit.predict, margin or 0.0, {"m": m})

    if key in ("lbm_ks", "lbm_lpr"):
        m_auto, h_auto = postprocess.choose_postprocess_params(n, beta, L, d, grid.p, occupancy)
        m = settings.m or m_auto
        h = settings.h or h_auto
        fit = lbm.lbm_fit(grid, y, m)
        if key == "lbm_ks":
            c = max(margin or 0.0, h)
            plan = postprocess.BandwidthPlan(h=h, m=m, interior_margin=c)
            return Predictor(key, lambda pts: postprocess.ks_predict_many(fit, plan, kernel, pts),
                             c, {"m": m, "h": h, "kernel": kernel.kind})
        one = _widening(lambda w, pt: postprocess.lpr_predict(fit, w, basis, pt), h)
        return Predictor(key, lambda pts: np.array([one(p) for p in pts]), margin or 0.0,
                         {"m": m, "h": h, "ell": ell})

    if key in ("kernel", "t_kernel"):
        h = settings.h or _kernel_bandwidth(n, beta, L)
        c = max(margin or 0.0, h)
        params = {"h": h, "kernel": kernel.kind}
        if key == "kernel":
            fn = lambda pts: baselines.direct_kernel_predict_many(grid, y, h, kernel, pts)  # noqa: E731
        else:
            trunc = baselines.TruncationSpec(
                settings.trunc_L if settings.trunc_L is not None else L, settings.trunc_c)
            params["T"] = trunc.T
            fn = lambda pts: baselines.truncated_kernel_predict_many(  # noqa: E731
                grid, y, h, kernel, trunc, pts)
        return Predictor(key, fn, c, params)

    # direct local polynomial regression on raw data
    h = settings.h or min((n * L**2) ** (-1.0 / (2 * beta + d)), 0.5)
    one = _widening(lambda w, pt: baselines.direct_lpr_predict(grid, y, w, basis, pt), h)
    return Predictor(key, lambda pts: np.array([one(p) for p in pts]), margin or 0.0,
                     {"h": h, "ell": ell})


# ---------------------------------------------------------------------------
# Risk
# ---------------------------------------------------------------------------


def risk_points(d: int, c: float, grid_points: int) -> tuple[np.ndarray, float]:
    """Midpoints of a regular ``grid_points^d`` partition of ``[c, 1-c]^d`` and the cell volume."""
    width = (1.0 - 2.0 * c) / grid_points
    axis = c + (np.arange(grid_points) + 0.5) * width
    if d == 1:
        return axis[:, None], width
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1), width**d


def evaluate(predictor, pts: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(predictor(pts), dtype=float)
    except LbmregError as exc:
        for pt in pts:
            try:
                predictor(pt[None, :])
            except LbmregError:
                raise type(exc)(f"{exc} [query point {pt.tolist()}]") from exc
        raise


def l2_risk(predictor, f: core.TestFunction, d: int, c: float = 0.0,
            grid_points: int = 2000) -> float:
    """Midpoint-rule estimate of ``int_{[c,1-c]^d} (fhat - f)^2``."""
    if not 0 <= c < 0.5:
        raise DomainError(f"margin must lie in [0, 1/2), got {c}")
    pts, vol = risk_points(d, c, grid_points)
    err = evaluate(predictor, pts) - f(pts)
    return float(np.sum(err**2) * vol)


# ---------------------------------------------------------------------------
# Runs and reports
# ---------------------------------------------------------------------------


@dataclass
class RiskReport:
    estimators: list[str]
    n_values: list[int]
    replicates: int
    risks: dict[tuple[str, int, int], float] = field(default_factory=dict)
    failures: dict[tuple[str, int, int], str] = field(default_factory=dict)
    checksums: dict[tuple[int, int], str] = field(default_factory=dict)
    params: dict[tuple[str, int], dict] = field(default_factory=dict)
    fit_example: dict | None = None

    def cell_risks(self, est: str, n: int) -> np.ndarray:
        vals = [self.risks.get((est, n, r), math.nan) for r in range(self.replicates)]
        return np.array([v for v in vals if not math.isnan(v)])

    def mean_risk(self, est: str, n: int) -> float:
        v = self.cell_risks(est, n)
        return float(v.mean()) if v.size else math.nan

    def summary(self) -> list[tuple[str, int, float, float]]:
        rows = []
        for est in sorted(self.estimators):
            for n in self.n_values:
                v = self.cell_risks(est, n)
                mean = float(v.mean()) if v.size else math.nan
                se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
                rows.append((est, n, mean, se))
        return rows

    def rates(self) -> list[tuple[str, float, float]]:
        rows = []
        if len(set(self.n_values)) < 3:
            return rows
        for est in sorted(self.estimators):
            pairs = [(n, self.mean_risk(est, n)) for n in self.n_values]
            pairs = [(n, r) for n, r in pairs if not math.isnan(r)]
            try:
                slope, se = fit_rate(pairs)
            except DomainError:
                continue
            rows.append((est, slope, se))
        return rows

    @property
    def complete(self) -> bool:
        return not self.failures


def fit_rate(pairs) -> tuple[float, float]:
    """Least-squares slope of ``log(risk)`` on ``log(n)`` and its standard error."""
    pairs = list(pairs)
    if len({n for n, _ in pairs}) < 3:
        raise DomainError("need at least three distinct sample sizes to fit a rate")
    n = np.array([p[0] for p in pairs], dtype=float)
    r = np.array([p[1] for p in pairs], dtype=float)
    if np.any(r <= 0) or np.any(n <= 0):
        raise DomainError("rates need positive sample sizes and risks")
    res = stats.linregress(np.log(n), np.log(r))
    return float(res.slope), float(res.stderr)


def run_experiment(cfg: ExperimentConfig) -> RiskReport:
    """Run every (n, replicate) cell and evaluate all estimators on shared data."""
    keys = [s.key for s in cfg.estimators]
    report = RiskReport(estimators=keys, n_values=list(cfg.n_values), replicates=cfg.replicates)
    seen: dict[int, tuple[int, int]] = {}
    for n in cfg.n_values:
        grid = _grid_for(n, cfg.d)
        for rep in range(cfg.replicates):
            seed = contam.derive_seed(cfg.root_seed, n, rep)
            if seed in seen:
                raise RuntimeError(f"seed collision between cells {seen[seed]} and {(n, rep)}")
            seen[seed] = (n, rep)
            obs = contam.sample_observations(cfg.function, grid, cfg.contamination, seed)
            report.checksums[(n, rep)] = obs.checksum()
            log.debug("n=%d rep=%d seed=%d data=%s", n, rep, seed, report.checksums[(n, rep)])
            keep_curves = cfg.plot_fits and n == cfg.n_values[-1] and rep == 0
            curves = {}
            for settings in cfg.estimators:
                cell = (settings.key, n, rep)
                try:
                    pred = build_predictor(settings, grid, obs.y, cfg.beta, cfg.L,
                                           cfg.margin, cfg.occupancy)
                    pts, vol = risk_points(cfg.d, pred.margin, cfg.risk_grid_points)
                    values = evaluate(pred, pts)
                    report.risks[cell] = float(np.sum((values - cfg.function(pts)) ** 2) * vol)
                    report.params.setdefault((settings.key, n), pred.params)
                    if keep_curves:
                        curves[settings.key] = (pts, values)
                except LbmregError as exc:
                    log.warning("estimator %s failed at n=%d rep=%d: %s", *cell, exc)
                    report.risks[cell] = math.nan
                    report.failures[cell] = f"{type(exc).__name__}: {exc}"
            if keep_curves:
                report.fit_example = {
                    "n": n, "points": grid.points(), "y": obs.y,
                    "mask": obs.adversary_mask, "function": cfg.function, "curves": curves,
                }
    return report


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_report(report: RiskReport, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``risks.csv``, ``summary.csv``, ``rates.csv`` and ``risk_vs_n.svg``.

    Adds ``failures.csv`` when cells failed, ``settings.csv`` with the
    resolved hyperparameters, and ``fits.svg`` when a fit example was kept.
    Rows are ordered by estimator, n, replicate; output is byte-deterministic.
    """
    from . import plotting

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    written = []
    rows = [(e, n, r, report.risks[(e, n, r)]) for (e, n, r) in sorted(report.risks)]
    _write_csv(out / "risks.csv", ["estimator", "n", "replicate", "risk"], rows)
    _write_csv(out / "summary.csv", ["estimator", "n", "mean", "stderr"], report.summary())
    _write_csv(out / "rates.csv", ["estimator", "slope", "stderr"], report.rates())
    written += [out / "risks.csv", out / "summary.csv", out / "rates.csv"]
    settings_rows = [(e, n, k, v) for (e, n), p in sorted(report.params.items())
                     for k, v in sorted(p.items())]
    _write_csv(out / "settings.csv", ["estimator", "n", "parameter", "value"], settings_rows)
    written.append(out / "settings.csv")
    if report.failures:
        _write_csv(out / "failures.csv", ["estimator", "n", "replicate", "error"],
                   [(*k, v) for k, v in sorted(report.failures.items())])
        written.append(out / "failures.csv")
    plotting.plot_risk_curves(report, out / "risk_vs_n.svg")
    written.append(out / "risk_vs_n.svg")
    if report.fit_example is not None:
        plotting.plot_fit_example(report.fit_example, out / "fits.svg")
        written.append(out / "fits.svg")
    return written


def with_estimators(cfg: ExperimentConfig, *settings: EstimatorSettings) -> ExperimentConfig:
    return replace(cfg, estimators=tuple(settings))
