"""Time-dependent systems Y(t,x) = sum b_a(t) X_a(x) and their integration.

The integrator is an embedded Dormand-Prince 5(4) pair with adaptive steps
(error per unit step, so halving the tolerance halves the global error) and
cubic-Hermite dense output (4th-order interpolation).  Blow-up past a bound
truncates the trajectory and flags it instead of raising: escaping solutions
are expected behaviour for Riccati-type systems.

Each integration is pure given its inputs; trajectories are plain data and
safe to share across threads.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .algebra import evaluation_matrix, matrix_rank, span_coefficients
from .errors import EvaluationError, FundamentalSetError
from .expr import Expr
from .geometry import VectorField

__all__ = [
    "CoefficientCurve",
    "LieSystem",
    "Trajectory",
    "evaluate_field",
    "integrate",
    "fundamental_set",
    "align_trajectories",
]

DEFAULT_TOL = 1e-9
BLOWUP_BOUND = 1e8


class CoefficientCurve:
    """Scalar function of t: an expression in the single variable t, or a
    tabulated curve with linear interpolation."""

    def __init__(self, expression: Expr | None = None,
                 table: tuple[Sequence[float], Sequence[float]] | None = None):
        if (expression is None) == (table is None):
            raise ValueError("provide exactly one of expression / table")
        self.expression = expression
        self._fn = None
        if expression is not None:
            extra = ex.free_variables(expression) - {"t"}
            if extra:
                raise ValueError(f"coefficient curve may only use t, got {sorted(extra)}")
            self._fn = ex.compile_expr(expression, ("t",))
            self.table = None
        else:
            ts, vals = table
            ts = np.asarray(ts, dtype=float)
            vals = np.asarray(vals, dtype=float)
            if ts.ndim != 1 or ts.shape != vals.shape or len(ts) < 2:
                raise ValueError("table needs matching 1-d arrays of length >= 2")
            if not np.all(np.diff(ts) > 0):
                raise ValueError("table times must be strictly increasing")
            self.table = (ts, vals)

    @staticmethod
    def from_string(text: str) -> "CoefficientCurve":
        return CoefficientCurve(expression=ex.parse(text, ("t",)))

    @staticmethod
    def constant(value: float | Fraction) -> "CoefficientCurve":
        return CoefficientCurve(expression=ex.Const(Fraction(value)))

    def __call__(self, t: float) -> float:
        if self._fn is not None:
            v = float(self._fn(float(t)))
        else:
            ts, vals = self.table
            v = float(np.interp(t, ts, vals))
        if not np.isfinite(v):
            raise EvaluationError(f"coefficient curve not finite at t={t}")
        return v


class LieSystem:
    """Basis fields with coefficient curves; the chart comes from the fields."""

    def __init__(self, fields: Sequence[VectorField], coefficients: Sequence[CoefficientCurve]):
        fields = list(fields)
        if not fields:
            raise ValueError("LieSystem needs at least one field")
        if len(fields) != len(coefficients):
            raise ValueError(
                f"{len(fields)} fields but {len(coefficients)} coefficient curves"
            )
        chart = fields[0].chart
        for f in fields:
            if f.chart.names != chart.names:
                raise ValueError("all fields must share one chart")
        for i, f in enumerate(fields):
            others = fields[:i] + fields[i + 1 :]
            if others and span_coefficients(f, others).in_span:
                raise ValueError("basis fields must be linearly independent over R")
        self.fields = fields
        self.coefficients = list(coefficients)
        self.chart = chart
        self._compiled = [
            [ex.compile_expr(c, chart.names) for c in f.components] for f in fields
        ]

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def r(self) -> int:
        return len(self.fields)

    def velocity(self, t: float, x: np.ndarray) -> np.ndarray:
        b = [curve(t) for curve in self.coefficients]
        out = np.zeros(self.dim)
        args = [float(v) for v in x]
        for weight, comp_fns in zip(b, self._compiled):
            if weight == 0.0:
                continue
            for i, fn in enumerate(comp_fns):
                out[i] += weight * fn(*args)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"field value not finite at t={t}, x={x}")
        return out


def evaluate_field(sys: LieSystem, t: float, x: Sequence[float]) -> np.ndarray:
    """Value of sum b_a(t) X_a at (t, x), in floating point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.dim,):
        raise ValueError(f"state has shape {x.shape}, chart dimension is {sys.dim}")
    return sys.velocity(t, x)


@dataclass
class Trajectory:
    """Integration output: strictly increasing grid, states, and the node
    derivatives backing cubic-Hermite dense output."""

    t: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    blew_up: bool = False
    truncated_at: float | None = None
    events: tuple = ()

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def endpoint(self) -> np.ndarray:
        return self.states[-1].copy()

    def _hermite(self, tq_arr: np.ndarray):
        if np.any(tq_arr < self.t[0] - 1e-12) or np.any(tq_arr > self.t[-1] + 1e-12):
            raise ValueError(f"sample times outside [{self.t[0]}, {self.t[-1]}]")
        idx = np.clip(np.searchsorted(self.t, tq_arr, side="right") - 1, 0, len(self.t) - 2)
        t0 = self.t[idx]
        h = self.t[idx + 1] - t0
        theta = np.clip((tq_arr - t0) / h, 0.0, 1.0)[:, None]
        y0, y1 = self.states[idx], self.states[idx + 1]
        d0, d1 = self.derivatives[idx], self.derivatives[idx + 1]
        h = h[:, None]
        value = (
            (2 * theta**3 - 3 * theta**2 + 1) * y0
            + (theta**3 - 2 * theta**2 + theta) * h * d0
            + (-2 * theta**3 + 3 * theta**2) * y1
            + (theta**3 - theta**2) * h * d1
        )
        slope = (
            (6 * theta**2 - 6 * theta) * y0
            + (3 * theta**2 - 4 * theta + 1) * h * d0
            + (-6 * theta**2 + 6 * theta) * y1
            + (3 * theta**2 - 2 * theta) * h * d1
        ) / h
        return value, slope

    def sample(self, tq) -> np.ndarray:
        """Cubic-Hermite interpolation at times tq (scalar or array)."""
        scalar = np.asarray(tq).ndim == 0
        value, _ = self._hermite(np.atleast_1d(np.asarray(tq, dtype=float)))
        return value[0] if scalar else value

    def sample_derivative(self, tq) -> np.ndarray:
        scalar = np.asarray(tq).ndim == 0
        _, slope = self._hermite(np.atleast_1d(np.asarray(tq, dtype=float)))
        return slope[0] if scalar else slope

    def resampled(self, grid: np.ndarray) -> "Trajectory":
        grid = np.asarray(grid, dtype=float)
        states, derivs = self._hermite(grid)
        return Trajectory(grid, states, derivs, self.blew_up, self.truncated_at, self.events)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "states": self.states.tolist(),
            "blew_up": self.blew_up,
            "truncated_at": self.truncated_at,
        }

    def to_csv(self, path, names: Sequence[str] | None = None):
        n = self.states.shape[1]
        names = list(names) if names else [f"x{i+1}" for i in range(n)]
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t"] + names)
            for t, row in zip(self.t, self.states):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def _dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    y0: np.ndarray,
    tol: float,
    max_norm: float = BLOWUP_BOUND,
):
    """Adaptive DOPRI5(4).  Error accepted per unit step (err <= tol*min(1,h)).

    Returns (ts, ys, dys, blew_up, truncated_at); stops early with a flag on
    blow-up (sup-norm past max_norm) or step underflow.
    """
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    if not tol > 0:
        raise ValueError("tol must be positive")
    y = np.array(y0, dtype=float)
    t = float(t0)
    k1 = f(t, y)
    ts, ys, dys = [t], [y.copy()], [k1.copy()]
    h = min(0.01 * (t1 - t0), 0.1)
    blew_up = False
    truncated_at = None
    min_h = 1e-13 * max(1.0, abs(t1 - t0))
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        try:
            k = [k1]
            for stage in range(1, 7):
                yi = y + h * sum(a * ki for a, ki in zip(_A[stage], k))
                k.append(f(t + _C[stage] * h, yi))
            y5 = y + h * sum(b * ki for b, ki in zip(_B5, k))
            y4 = y + h * sum(b * ki for b, ki in zip(_B4, k))
            err = float(np.max(np.abs(y5 - y4)))
            scale = max(1.0, float(np.max(np.abs(y))), float(np.max(np.abs(y5))))
            failed = not np.isfinite(err)
        except (EvaluationError, ZeroDivisionError, ValueError, OverflowError):
            failed = True
            err = np.inf
        allowed = tol * min(1.0, h) * scale if np.isfinite(err) else 0.0
        if not failed and err <= allowed:
            t += h
            y = y5
            k1 = k[6]  # FSAL
            ts.append(t)
            ys.append(y.copy())
            dys.append(k1.copy())
            if float(np.max(np.abs(y))) > max_norm:
                blew_up = True
                truncated_at = t
                break
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * (allowed / err) ** 0.2))
            h *= factor
        else:
            h *= 0.25 if not np.isfinite(err) else max(0.1, 0.9 * (allowed / err) ** 0.2)
        if h < min_h:
            blew_up = True
            truncated_at = t
            break
    return np.array(ts), np.array(ys), np.array(dys), blew_up, truncated_at


def integrate(
    sys: LieSystem,
    x0: Sequence[float],
    t_span: tuple[float, float] = (0.0, 1.0),
    tol: float = DEFAULT_TOL,
    max_norm: float = BLOWUP_BOUND,
) -> Trajectory:
    """Integrate the system from x0 over t_span with local error <= tol."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, chart dimension is {sys.dim}")
    ts, ys, dys, blew_up, truncated_at = _dopri5(
        sys.velocity, float(t_span[0]), float(t_span[1]), x0, tol, max_norm
    )
    return Trajectory(ts, ys, dys, blew_up, truncated_at)


def align_trajectories(trajectories: Sequence[Trajectory]) -> list[Trajectory]:
    """Resample onto the coarsest common refinement (union of the node sets,
    clipped to the overlapping time range)."""
    t0 = max(tr.t0 for tr in trajectories)
    t1 = min(tr.t_end for tr in trajectories)
    if not t1 > t0:
        raise ValueError("trajectories do not overlap in time")
    nodes = np.unique(np.concatenate([tr.t for tr in trajectories]))
    nodes = nodes[(nodes >= t0) & (nodes <= t1)]
    grid = np.concatenate(([t0], nodes, [t1]))
    keep = np.concatenate(([True], np.diff(grid) > 1e-12))
    grid = grid[keep]
    grid[-1] = t1
    return [tr.resampled(grid) for tr in trajectories]


def fundamental_set(
    sys: LieSystem,
    m: int,
    t_span: tuple[float, float] = (0.0, 1.0),
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    initial_points: Sequence[Sequence[float]] | None = None,
    max_resamples: int = 100,
) -> list[Trajectory]:
    """Integrate m particular solutions whose initial tuple passes the rank
    test (stacked field evaluations of rank r), sharing one grid.

    Supplied initial points failing the test are rejected outright; random
    points are redrawn up to max_resamples times.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    r = sys.r
    if initial_points is not None:
        points = [list(map(float, p)) for p in initial_points]
        if len(points) != m:
            raise ValueError(f"expected {m} initial points, got {len(points)}")
        if matrix_rank(evaluation_matrix(sys.fields, points)) < r:
            raise FundamentalSetError(
                "supplied initial tuple is not fundamental (rank-deficient at t=0)"
            )
    else:
        rng = random.Random(seed)
        points = None
        for _ in range(max_resamples):
            cand = [[float(ex.random_rational(rng)) for _ in range(sys.dim)] for _ in range(m)]
            if matrix_rank(evaluation_matrix(sys.fields, cand)) == r:
                points = cand
                break
        if points is None:
            raise FundamentalSetError(
                f"no fundamental initial tuple found in {max_resamples} resamples"
            )
    trajectories = [integrate(sys, p, t_span, tol) for p in points]
    return align_trajectories(trajectories)
