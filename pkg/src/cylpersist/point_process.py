"""Point patterns in rectangular windows.

Samplers for the homogeneous Poisson process (the null model), the Matérn
cluster process and the Strauss process.  Every sampler is a pure function
of ``(window, params, seed)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numba
import numpy as np

from .errors import ParameterError, PatternFormatError
from .seeding import make_rng


@dataclass(frozen=True)
class Window:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ParameterError(f"degenerate window {self}")

    @classmethod
    def centered(cls, length: float, height: float) -> "Window":
        """``[-length/2, length/2] x [0, height]``."""
        return cls(-length / 2.0, length / 2.0, 0.0, float(height))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def cross_section_diameter(self) -> float:
        return self.height

    def dilate(self, margin: float) -> "Window":
        return Window(self.x_min - margin, self.x_max + margin,
                      self.y_min - margin, self.y_max + margin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return ((p[:, 0] >= self.x_min) & (p[:, 0] <= self.x_max)
                & (p[:, 1] >= self.y_min) & (p[:, 1] <= self.y_max))


@dataclass(frozen=True)
class MaternParams:
    kappa: float
    disk_radius: float
    mu: float

    def __post_init__(self):
        if not (self.kappa > 0 and self.disk_radius > 0 and self.mu > 0):
            raise ParameterError(f"invalid Matérn parameters {self}")

    @property
    def intensity(self) -> float:
        return self.kappa * self.mu


def default_strauss_steps(beta: float, area: float) -> int:
    # roughly 200 sweeps per expected reference point; see tests for the
    # chain-length convergence check
    return max(2000, int(math.ceil(200.0 * beta * area)))


@dataclass(frozen=True)
class StraussParams:
    """Strauss process ``beta^n(x) * gamma^t_r(x)``.

    ``steps=None`` selects :func:`default_strauss_steps` for the window the
    params are used with; ``burn_in=None`` means half of the steps.
    """

    beta: float
    gamma: float
    r: float
    steps: int | None = None
    burn_in: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError("gamma must lie in [0, 1]")
        if not self.r > 0:
            raise ParameterError("interaction radius must be positive")
        if self.steps is not None and self.steps < 0:
            raise ParameterError("steps must be non-negative")
        if self.steps is not None and self.burn_in is not None:
            if not self.steps >= self.burn_in >= 0:
                raise ParameterError("need steps >= burn_in >= 0")

    def resolved(self, window: Window) -> "StraussParams":
        steps = self.steps if self.steps is not None else default_strauss_steps(
            self.beta, window.area())
        burn_in = self.burn_in if self.burn_in is not None else steps // 2
        return StraussParams(self.beta, self.gamma, self.r, steps, min(burn_in, steps))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Finite point set in a window together with its provenance."""

    points: np.ndarray
    window: Window
    seed: int | None = None
    model: str = "unknown"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointPattern):
            return NotImplemented
        return (self.window == other.window and self.seed == other.seed
                and np.array_equal(self.points, other.points))

    def validate(self) -> None:
        if not self.window.contains(self.points).all():
            raise ParameterError("pattern has points outside its window")
        if len(np.unique(self.points, axis=0)) != len(self):
            raise ParameterError("pattern has duplicate points")

    def translated(self, dx: float) -> "PointPattern":
        w = self.window
        return PointPattern(self.points + np.array([dx, 0.0]),
                            Window(w.x_min + dx, w.x_max + dx, w.y_min, w.y_max),
                            self.seed, self.model, dict(self.params))


def _has_duplicates(points: np.ndarray) -> bool:
    return len(points) > 1 and len(np.unique(points, axis=0)) != len(points)


def _uniform(rng: np.random.Generator, window: Window, n: int) -> np.ndarray:
    lo = np.array([window.x_min, window.y_min])
    hi = np.array([window.x_max, window.y_max])
    return rng.uniform(lo, hi, size=(n, 2))


def _poisson_points(rng: np.random.Generator, window: Window, intensity: float) -> np.ndarray:
    while True:
        pts = _uniform(rng, window, rng.poisson(intensity * window.area()))
        if not _has_duplicates(pts):
            return pts


def sample_poisson(window: Window, intensity: float, seed: int) -> PointPattern:
    if not intensity > 0:
        raise ParameterError("intensity must be positive")
    rng = make_rng(seed)
    return PointPattern(_poisson_points(rng, window, intensity), window, seed,
                        "poisson", {"intensity": float(intensity)})


def sample_matern(window: Window, params: MaternParams, seed: int) -> PointPattern:
    """Matérn cluster process.

    Parents live on the window dilated by the disk radius so that the
    retained offspring are stationary with intensity ``kappa * mu``.
    """
    rng = make_rng(seed)
    outer = window.dilate(params.disk_radius)
    while True:
        parents = _poisson_points(rng, outer, params.kappa)
        counts = rng.poisson(params.mu, size=len(parents))
        total = int(counts.sum())
        centres = np.repeat(parents, counts, axis=0)
        rad = params.disk_radius * np.sqrt(rng.random(total))
        ang = 2.0 * np.pi * rng.random(total)
        pts = centres + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        pts = pts[window.contains(pts)]
        if not _has_duplicates(pts):
            break
    return PointPattern(pts, window, seed, "matern", asdict(params))


@numba.njit(cache=True)
def _interactions(xs, ys, n, px, py, skip, r2):
    t = 0
    for k in range(n):
        if k == skip:
            continue
        dx = xs[k] - px
        dy = ys[k] - py
        if dx * dx + dy * dy < r2:
            t += 1
    return t


@numba.njit(cache=True)
def _gamma_pow(gamma, t):
    if t == 0:
        return 1.0
    return gamma ** t


@numba.njit(cache=True)
def _strauss_chain(x0, y0, beta, gamma, r, x_min, y_min, width, height,
                   kinds, ux, uy, upick, uacc):
    area = width * height
    r2 = r * r
    n = x0.shape[0]
    cap = 2 * n + 64
    xs = np.empty(cap)
    ys = np.empty(cap)
    xs[:n] = x0
    ys[:n] = y0
    for step in range(kinds.shape[0]):
        kind = kinds[step]
        if kind == 0:
            px = x_min + width * ux[step]
            py = y_min + height * uy[step]
            t = _interactions(xs, ys, n, px, py, -1, r2)
            ratio = beta * _gamma_pow(gamma, t) * area / (n + 1)
            if uacc[step] < ratio:
                if n == cap:
                    cap *= 2
                    nx = np.empty(cap)
                    ny = np.empty(cap)
                    nx[:n] = xs[:n]
                    ny[:n] = ys[:n]
                    xs = nx
                    ys = ny
                xs[n] = px
                ys[n] = py
                n += 1
        elif n > 0:
            i = min(int(upick[step] * n), n - 1)
            t_old = _interactions(xs, ys, n, xs[i], ys[i], i, r2)
            if kind == 1:
                w = beta * _gamma_pow(gamma, t_old) * area
                if w == 0.0 or uacc[step] * w < n:
                    xs[i] = xs[n - 1]
                    ys[i] = ys[n - 1]
                    n -= 1
            else:
                px = x_min + width * ux[step]
                py = y_min + height * uy[step]
                t_new = _interactions(xs, ys, n, px, py, i, r2)
                old = _gamma_pow(gamma, t_old)
                new = _gamma_pow(gamma, t_new)
                if old == 0.0 or uacc[step] * old < new:
                    xs[i] = px
                    ys[i] = py
    return xs[:n].copy(), ys[:n].copy()


def _hard_core_thin(pts: np.ndarray, r: float) -> np.ndarray:
    keep: list[int] = []
    for i, p in enumerate(pts):
        if all((p[0] - pts[j, 0]) ** 2 + (p[1] - pts[j, 1]) ** 2 >= r * r for j in keep):
            keep.append(i)
    return pts[keep]


def sample_strauss(window: Window, params: StraussParams, seed: int) -> PointPattern:
    """Strauss process by birth-death-move Metropolis-Hastings.

    The chain starts from a Poisson(beta) pattern (thinned to the hard-core
    support when ``gamma == 0``) and proposes births, deaths and uniform
    relocations with probability 1/3 each.  The state after ``steps``
    iterations is returned; with ``steps == 0`` that is the initial state.
    """
    p = params.resolved(window)
    rng = make_rng(seed)
    init = _poisson_points(rng, window, p.beta)
    if p.gamma == 0.0:
        init = _hard_core_thin(init, p.r)
    while True:
        kinds = rng.integers(0, 3, size=p.steps).astype(np.int8)
        ux, uy, upick, uacc = rng.random((4, p.steps))
        xs, ys = _strauss_chain(init[:, 0].copy(), init[:, 1].copy(), p.beta, p.gamma, p.r,
                                window.x_min, window.y_min, window.width, window.height,
                                kinds, ux, uy, upick, uacc)
        pts = np.column_stack([xs, ys])
        if not _has_duplicates(pts):
            break
    return PointPattern(pts, window, seed, "strauss", asdict(p))


def estimate_intensity(pattern: PointPattern) -> float:
    return len(pattern) / pattern.window.area()


def sample_model(window: Window, model: str, params: Any, seed: int) -> PointPattern:
    """Dispatch on the model name used in configs and sidecars."""
    if model == "poisson":
        intensity = params["intensity"] if isinstance(params, dict) else float(params)
        return sample_poisson(window, intensity, seed)
    if model == "matern":
        return sample_matern(window, params if isinstance(params, MaternParams)
                             else MaternParams(**params), seed)
    if model == "strauss":
        return sample_strauss(window, params if isinstance(params, StraussParams)
                              else StraussParams(**params), seed)
    raise ParameterError(f"unknown model {model!r}")


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_pattern(pattern: PointPattern, path: str | Path) -> None:
    """Write ``x,y`` CSV plus a JSON sidecar next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("x,y\n")
        for x, y in pattern.points.tolist():
            fh.write(f"{x!r},{y!r}\n")
    meta = {
        "window": asdict(pattern.window),
        "seed": pattern.seed,
        "model": pattern.model,
        "params": pattern.params,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_pattern(path: str | Path) -> PointPattern:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise PatternFormatError(f"cannot read {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise PatternFormatError(f"{path}: expected header 'x,y'")
    try:
        pts = np.array([[float(a), float(b)] for a, b in (r for r in rows[1:] if r)],
                       dtype=float).reshape(-1, 2)
    except ValueError as exc:
        raise PatternFormatError(f"{path}: malformed row ({exc})") from exc
    if not np.isfinite(pts).all():
        raise PatternFormatError(f"{path}: non-finite coordinate")
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
            window = Window(**meta["window"])
        except (ValueError, KeyError, TypeError) as exc:
            raise PatternFormatError(f"{side}: malformed sidecar ({exc})") from exc
        pattern = PointPattern(pts, window, meta.get("seed"), meta.get("model", "unknown"),
                               meta.get("params") or {})
    else:
        if len(pts) == 0:
            raise PatternFormatError(f"{path}: empty pattern needs a sidecar window")
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        pattern = PointPattern(pts, Window(lo[0], hi[0], lo[1], hi[1]))
    try:
        pattern.validate()
    except ParameterError as exc:
        raise PatternFormatError(f"{path}: {exc}") from exc
    return pattern
