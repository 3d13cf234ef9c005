"""Persistence-based test statistics, Monte-Carlo calibration and GoF tests."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np
from scipy import stats as _st

from .directed_network import BranchDiagram, beta_arrow, build_dsf, build_gilbert, directed_persistence
from .errors import CalibrationError, ParameterError
from .filtration import build_complex
from .persistence import PersistenceDiagram, compute_persistence, h0_diagram
from .point_process import (MaternParams, PointPattern, StraussParams, Window,
                            estimate_intensity, sample_model, sample_poisson)
from .seeding import derive_seed, tag

WORKERS_ENV = "CYLPERSIST_WORKERS"

# defaults picked from null pilots at intensity 2 on a 15 x 5 window
DEFAULT_R_C = 0.5
DEFAULT_R_L = 0.6
DEFAULT_R_F = 1.0
DEFAULT_T = 1.0


# --- scalar functionals of diagrams ----------------------------------------------

def apf(diagram: PersistenceDiagram, q: int, r_L: float, r_f: float) -> float:
    """Accumulated lifetime of finite ``q``-features born by ``r_L`` and dead by ``r_f``."""
    if r_L > r_f:
        raise ParameterError("need r_L <= r_f")
    b, d = diagram.births, diagram.deaths
    m = (diagram.dims == q) & np.isfinite(d) & (b <= r_L) & (d <= r_f)
    return math.fsum((d[m] - b[m]).tolist())


def cluster_deaths_statistic(diagram: PersistenceDiagram, r_C: float, lam: float,
                             window_area: float, adapt: bool = True) -> float:
    """Integrated count of cluster deaths up to ``r_C / sqrt(lam)``.

    Closed form of the integral of ``u -> #{deaths <= u}``, normalized by
    ``sqrt(lam) * |W|``.  With ``adapt=False`` the intensity is taken as 1.
    """
    if window_area <= 0:
        raise ParameterError("window area must be positive")
    lam = lam if adapt else 1.0
    if not lam > 0:
        raise ParameterError("intensity must be positive")
    root = math.sqrt(lam)
    horizon = r_C / root
    d = diagram.deaths[(diagram.dims == 0) & np.isfinite(diagram.deaths)]
    gaps = horizon - d[d < horizon]
    return math.fsum(gaps.tolist()) / (root * window_area)


def directed_apf(diagram: BranchDiagram, r_L: float, r_f: float) -> float:
    """Accumulated lifetime of finite branches in window coordinates shifted to start at 0."""
    if r_L > r_f:
        raise ParameterError("need r_L <= r_f")
    x0 = diagram.window.x_min
    b = diagram.births - x0
    d = diagram.deaths - x0
    m = np.isfinite(d) & (b <= r_L) & (d <= r_f)
    return math.fsum((d[m] - b[m]).tolist())


# --- statistic specifications ---------------------------------------------------------

@dataclass(frozen=True)
class APF:
    """Loop (or cluster) APF on a Čech/VR filtration."""

    q: int = 1
    r_L: float = DEFAULT_R_L
    r_f: float = DEFAULT_R_F
    complex_kind: str = "cech"
    T: float = DEFAULT_T

    def __post_init__(self):
        if self.q not in (0, 1):
            raise ParameterError("q must be 0 or 1")
        if not 0 <= self.r_L <= self.r_f:
            raise ParameterError("need 0 <= r_L <= r_f")

    @property
    def name(self) -> str:
        return f"T_L[{self.complex_kind},q={self.q}]"

    def evaluate(self, pattern: PointPattern) -> float:
        # deaths beyond r_f never contribute, so the filtration prefix up to
        # r_f yields the same value
        level = min(self.T, self.r_f)
        if self.q == 0:
            diagram = h0_diagram(pattern.points, level)
        else:
            diagram = compute_persistence(build_complex(pattern, self.complex_kind, level))
        return apf(diagram, self.q, self.r_L, self.r_f)


@dataclass(frozen=True)
class ClusterDeaths:
    """Intensity-adapted integrated cluster-death count ``T_C``."""

    r_C: float = DEFAULT_R_C
    adapt_intensity: bool = True
    complex_kind: str = "cech"
    T: float = DEFAULT_T

    def __post_init__(self):
        if not self.r_C > 0:
            raise ParameterError("r_C must be positive")

    @property
    def name(self) -> str:
        return f"T_C[{self.complex_kind}]"

    def evaluate(self, pattern: PointPattern) -> float:
        lam = estimate_intensity(pattern) if self.adapt_intensity else 1.0
        if lam == 0:
            return 0.0
        level = min(self.T, self.r_C / math.sqrt(lam))
        diagram = h0_diagram(pattern.points, level)
        return cluster_deaths_statistic(diagram, self.r_C, lam, pattern.window.area(),
                                        self.adapt_intensity)


@dataclass(frozen=True)
class DirectedAPF:
    """Branch APF on a directed network.

    ``None`` thresholds default to the full window length, so every finite
    branch counts.
    """

    r_L: float | None = None
    r_f: float | None = None
    network: str = "dsf"
    radius: float | None = None

    def __post_init__(self):
        if self.r_L is not None and self.r_f is not None and self.r_L > self.r_f:
            raise ParameterError("need r_L <= r_f")
        if self.network not in ("dsf", "gilbert"):
            raise ParameterError(f"unknown network rule {self.network!r}")
        if self.network == "gilbert" and not (self.radius and self.radius > 0):
            raise ParameterError("the Gilbert graph needs a positive radius")

    @property
    def name(self) -> str:
        return f"T_L[{self.network}]"

    def thresholds(self, window: Window) -> tuple[float, float]:
        r_L = self.r_L if self.r_L is not None else window.width
        r_f = self.r_f if self.r_f is not None else window.width
        return r_L, r_f

    def evaluate(self, pattern: PointPattern) -> float:
        if len(pattern) == 0:
            return 0.0
        net = build_dsf(pattern) if self.network == "dsf" else build_gilbert(pattern, self.radius)
        return directed_apf(directed_persistence(net), *self.thresholds(pattern.window))


@dataclass(frozen=True)
class BetaArrow:
    """Directed persistent Betti number ``beta_->^{r,s}`` of the DSF on a centered window."""

    r: float = 0.25
    s: float = 1.0

    @property
    def name(self) -> str:
        return f"beta_arrow[r={self.r},s={self.s}]"

    def evaluate(self, pattern: PointPattern) -> float:
        if len(pattern) == 0:
            return 0.0
        diagram = directed_persistence(build_dsf(pattern))
        return float(beta_arrow(diagram, pattern.window.width, self.r, self.s))


Statistic = Union[APF, ClusterDeaths, DirectedAPF, BetaArrow]


def statistic_from_dict(d: dict[str, Any]) -> Statistic:
    d = dict(d)
    kind = d.pop("kind")
    classes = {"apf": APF, "cluster_deaths": ClusterDeaths, "directed_apf": DirectedAPF,
               "beta_arrow": BetaArrow}
    if kind not in classes:
        raise ParameterError(f"unknown statistic kind {kind!r}")
    return classes[kind](**d)


def statistic_to_dict(spec: Statistic) -> dict[str, Any]:
    kinds = {APF: "apf", ClusterDeaths: "cluster_deaths", DirectedAPF: "directed_apf",
             BetaArrow: "beta_arrow"}
    return {"kind": kinds[type(spec)], **asdict(spec)}


# --- Monte-Carlo plumbing -------------------------------------------------------------

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(func: Callable, items: Sequence, workers: int | None = None,
                 chunksize: int = 16) -> list:
    """Order-preserving map, fanned out over processes when ``workers > 1``."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))


def _evaluate_task(task) -> list[float]:
    window, model, params, seed, specs = task
    pattern = sample_model(window, model, params, seed)
    return [spec.evaluate(pattern) for spec in specs]


def simulate_many(specs: Sequence[Statistic], window: Window, model: str, params: Any,
                  n: int, seed: int, workers: int | None = None) -> np.ndarray:
    """Statistic values on ``n`` independent patterns, shape ``(n, len(specs))``.

    Pattern ``i`` uses seed ``derive_seed(seed, i)`` so results do not depend
    on the worker count.
    """
    tasks = [(window, model, params, derive_seed(seed, i), tuple(specs)) for i in range(n)]
    out = parallel_map(_evaluate_task, tasks, workers)
    return np.array(out, dtype=float).reshape(n, len(specs))


def simulate(spec: Statistic, window: Window, model: str, params: Any, n: int, seed: int,
             workers: int | None = None) -> np.ndarray:
    return simulate_many([spec], window, model, params, n, seed, workers)[:, 0]


# --- calibration and tests ------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    mean: float
    sd: float
    n_cal: int
    seed: int

    def __post_init__(self):
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise CalibrationError("calibration needs a positive, finite standard deviation")
        if self.n_cal < 100:
            raise ParameterError("calibration needs at least 100 replications")


def _mean_sd(values: np.ndarray) -> tuple[float, float]:
    vals = [float(v) for v in values]
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def calibration_from_samples(samples: Sequence[float], seed: int) -> Calibration:
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 100:
        raise ParameterError("calibration needs at least 100 replications")
    mean, sd = _mean_sd(samples)
    if sd == 0:
        raise CalibrationError("statistic is constant under the null model")
    return Calibration(mean, sd, len(samples), seed)


def calibrate(spec: Statistic, null_intensity: float, window: Window, n_cal: int, seed: int,
              workers: int | None = None) -> Calibration:
    """Monte-Carlo mean and standard deviation of ``spec`` under Poisson(null_intensity)."""
    if n_cal < 100:
        raise ParameterError("calibration needs at least 100 replications")
    samples = simulate(spec, window, "poisson", {"intensity": null_intensity}, n_cal, seed, workers)
    return calibration_from_samples(samples, seed)


@dataclass(frozen=True)
class TestReport:
    statistic: float
    z: float
    p_value: float
    reject: bool
    level: float

    __test__ = False  # not a pytest class


def critical_value(level: float) -> float:
    if not 0 < level < 1:
        raise ParameterError("level must lie in (0, 1)")
    return float(_st.norm.isf(level / 2))


def z_test(value: float, calibration: Calibration, level: float = 0.05) -> TestReport:
    """Two-sided asymptotic Gaussian test of an already evaluated statistic."""
    z = (value - calibration.mean) / calibration.sd
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return TestReport(float(value), z, p, abs(z) > critical_value(level), level)


def gof_test(pattern: PointPattern, spec: Statistic, calibration: Calibration,
             level: float = 0.05) -> TestReport:
    return z_test(spec.evaluate(pattern), calibration, level)


# --- rejection-rate experiments ---------------------------------------------------------

MODEL_LABELS = {"poisson": "Poi", "matern": "MatC", "strauss": "Str"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Rows are null intensities, columns are point-process models.

    At row intensity ``lam`` the Matérn column uses ``MatC(lam / mu, radius, mu)``
    and the Strauss column ``Str(strauss_beta[lam], gamma, r)``.
    """

    specs: tuple[Statistic, ...]
    intensities: tuple[float, ...] = (1.6, 2.0, 2.4)
    models: tuple[str, ...] = ("poisson", "matern", "strauss")
    window: Window = field(default_factory=lambda: Window.centered(15.0, 5.0))
    matern_radius: float = 0.5
    matern_mu: float = 1.0
    strauss_beta: tuple[float, ...] = (2.7, 4.0, 5.4)
    strauss_gamma: float = 0.6
    strauss_r: float = 0.5
    strauss_steps: int | None = None
    n_reps: int = 1000
    n_cal: int = 10000
    level: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if len(self.strauss_beta) != len(self.intensities):
            raise ParameterError("need one Strauss beta per intensity")
        if self.n_reps < 1:
            raise ParameterError("n_reps must be positive")
        if self.n_cal < 100:
            raise ParameterError("calibration needs at least 100 replications")
        for m in self.models:
            if m not in MODEL_LABELS:
                raise ParameterError(f"unknown model {m!r}")
        critical_value(self.level)

    def model_params(self, row: int, model: str) -> Any:
        lam = self.intensities[row]
        if model == "poisson":
            return {"intensity": lam}
        if model == "matern":
            return MaternParams(lam / self.matern_mu, self.matern_radius, self.matern_mu)
        return StraussParams(self.strauss_beta[row], self.strauss_gamma, self.strauss_r,
                             self.strauss_steps)


@dataclass
class ExperimentCell:
    intensity: float
    model: str
    n_reps: int
    n_reject: int

    @property
    def rate(self) -> float:
        return self.n_reject / self.n_reps

    @property
    def se(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.n_reps)


@dataclass
class ExperimentTable:
    statistic: str
    calibrations: dict[float, Calibration]
    cells: list[ExperimentCell]
    intensities: tuple[float, ...]
    models: tuple[str, ...]
    level: float

    def cell(self, intensity: float, model: str) -> ExperimentCell:
        for c in self.cells:
            if c.intensity == intensity and c.model == model:
                return c
        raise KeyError((intensity, model))

    def rate(self, intensity: float, model: str) -> float:
        return self.cell(intensity, model).rate

    def to_csv(self) -> str:
        lines = ["intensity," + ",".join(MODEL_LABELS[m] for m in self.models)]
        for lam in self.intensities:
            row = [f"{100 * self.rate(lam, m):.1f}%" for m in self.models]
            lines.append(f"{lam}," + ",".join(row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "level": self.level,
            "calibrations": {str(k): asdict(v) for k, v in self.calibrations.items()},
            "cells": [{"intensity": c.intensity, "model": c.model, "n_reps": c.n_reps,
                       "n_reject": c.n_reject, "rate": c.rate, "se": c.se} for c in self.cells],
        }


def _load_values(path: Path | None) -> np.ndarray | None:
    if path is not None and path.exists():
        return np.array(json.loads(path.read_text())["values"], dtype=float)
    return None


def _store_values(path: Path | None, values: np.ndarray) -> None:
    if path is None:
        return
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"values": values.tolist()}))
    tmp.replace(path)


def rejection_experiment(config: ExperimentConfig, workers: int | None = None,
                         checkpoint_dir: str | Path | None = None,
                         progress: Callable[[str], None] | None = None) -> list[ExperimentTable]:
    """Rejection rates of every statistic in ``config.specs`` across models and intensities.

    All statistics are evaluated on the same patterns.  With ``checkpoint_dir``
    each finished calibration and cell stores its raw statistic values, and a
    rerun reuses them instead of recomputing.
    """
    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt is not None:
        ckpt.mkdir(parents=True, exist_ok=True)
    specs = list(config.specs)
    cal_tag, rep_tag = tag("cal"), tag("rep")

    calibrations: list[dict[float, Calibration]] = [{} for _ in specs]
    rejects: list[list[ExperimentCell]] = [[] for _ in specs]
    for row, lam in enumerate(config.intensities):
        path = ckpt / f"cal_{row}.json" if ckpt else None
        values = _load_values(path)
        cal_seed = derive_seed(config.seed, cal_tag, row)
        if values is None:
            values = simulate_many(specs, config.window, "poisson", {"intensity": lam},
                                   config.n_cal, cal_seed, workers)
            _store_values(path, values)
        for k in range(len(specs)):
            calibrations[k][lam] = calibration_from_samples(values[:, k], cal_seed)
        if progress:
            progress(f"calibrated intensity {lam}")

        for col, model in enumerate(config.models):
            path = ckpt / f"cell_{row}_{col}.json" if ckpt else None
            values = _load_values(path)
            if values is None:
                values = simulate_many(specs, config.window, model,
                                       config.model_params(row, model), config.n_reps,
                                       derive_seed(config.seed, rep_tag, row, col), workers)
                _store_values(path, values)
            for k in range(len(specs)):
                cal = calibrations[k][lam]
                n_rej = sum(z_test(v, cal, config.level).reject for v in values[:, k])
                rejects[k].append(ExperimentCell(lam, model, config.n_reps, int(n_rej)))
            if progress:
                progress(f"finished cell intensity={lam} model={model}")

    return [ExperimentTable(spec.name, calibrations[k], rejects[k], tuple(config.intensities),
                            tuple(config.models), config.level) for k, spec in enumerate(specs)]


# --- diagnostics -----------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalityReport:
    ks_distance: float
    skewness: float
    excess_kurtosis: float
    hist_edges: np.ndarray
    hist_density: np.ndarray
    qq_theoretical: np.ndarray
    qq_sample: np.ndarray


def normality_diagnostics(samples: Iterable[float], bins: int = 40) -> NormalityReport:
    """Distance of standardized samples from the standard normal law."""
    x = np.asarray(list(samples), dtype=float)
    if len(x) < 1000:
        raise ParameterError("normality diagnostics need at least 1000 samples")
    mean, sd = _mean_sd(x)
    if sd == 0:
        raise CalibrationError("samples have zero variance")
    z = (x - mean) / sd
    ks = float(_st.kstest(z, "norm").statistic)
    density, edges = np.histogram(z, bins=bins, density=True)
    zs = np.sort(z)
    probs = (np.arange(1, len(zs) + 1) - 0.5) / len(zs)
    return NormalityReport(ks, float(_st.skew(z)), float(_st.kurtosis(z)), edges, density,
                           _st.norm.ppf(probs), zs)


@dataclass(frozen=True)
class VarianceRow:
    length: float
    mean: float
    variance: float

    @property
    def ratio(self) -> float:
        return self.variance / self.length


def _scaling_task(task) -> float:
    window, intensity, seed, statistic = task
    pattern = sample_poisson(window, intensity, seed)
    return float(statistic(pattern) if callable(statistic) and not hasattr(statistic, "evaluate")
                 else statistic.evaluate(pattern))


def variance_scaling_check(statistic: Statistic | Callable[[PointPattern], float], height: float,
                           x_lengths: Sequence[float], n_reps: int, intensity: float = 1.0,
                           seed: int = 0, workers: int | None = None) -> list[VarianceRow]:
    """Empirical ``Var / n`` of a statistic on windows ``[-n/2, n/2] x [0, height]``."""
    if len(x_lengths) < 2:
        raise ParameterError("need at least two window lengths")
    if n_reps < 2:
        raise ParameterError("need at least two replications")
    rows = []
    for k, n in enumerate(x_lengths):
        window = Window.centered(n, height)
        tasks = [(window, intensity, derive_seed(seed, k, i), statistic) for i in range(n_reps)]
        vals = np.array(parallel_map(_scaling_task, tasks, workers))
        mean, sd = _mean_sd(vals)
        rows.append(VarianceRow(float(n), mean, sd * sd))
    return rows
