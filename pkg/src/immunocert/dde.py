"""Constant-delay DDE integration by the method of steps.

Classical RK4 on a fixed grid. Delayed arguments are read from the solution's
own cubic Hermite dense output; requiring ``step <= min(delays)/4`` makes every
lookup land in an already completed step (or in the initial history).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigurationError, DomainError, IntegrationError

RhsFunction = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
EventFunction = Callable[[float, np.ndarray], float]

BISECTION_ITERATIONS = 60


# ---------------------------------------------------------------------------
# initial histories on [-tau, 0]


class History:
    """Continuous vector function on ``[-tau, 0]``."""

    tau: float
    dim: int

    def values(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t: float) -> np.ndarray:
        return self.values(np.array([t], dtype=float))[0]

    def _check_domain(self, ts: np.ndarray) -> None:
        if ts.size and (ts.min() < -self.tau * (1 + 1e-12) - 1e-14 or ts.max() > 0.0):
            raise DomainError(f"history is defined on [{-self.tau}, 0]")

    def sample(self, n: int = 512) -> tuple[np.ndarray, np.ndarray]:
        """Uniform grid of ``n`` intervals (n + 1 points incl. both endpoints)."""
        ts = np.linspace(-self.tau, 0.0, n + 1)
        return ts, self.values(ts)

    def scaled(self, c: float) -> "History":
        return _ScaledHistory(self, c)


class ConstantHistory(History):
    kind = "constant-vector"

    def __init__(self, value: Sequence[float], tau: float):
        self.value = np.array(value, dtype=float)
        self.tau = float(tau)
        self.dim = self.value.size

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        self._check_domain(ts)
        return np.tile(self.value, (ts.size, 1))


class TableHistory(History):
    """Piecewise-linear interpolation through breakpoints ``(t_i, v_i)``."""

    kind = "breakpoint-table"

    def __init__(self, times: Sequence[float], values):
        self.times = np.array(times, dtype=float)
        self.table = np.atleast_2d(np.array(values, dtype=float))
        if self.table.shape[0] != self.times.size:
            raise ConfigurationError("history table: one row of values per breakpoint")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("history table: breakpoints must be strictly increasing")
        if self.times[-1] != 0.0:
            raise ConfigurationError("history table: last breakpoint must be t=0")
        self.tau = -float(self.times[0])
        self.dim = self.table.shape[1]

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        self._check_domain(ts)
        return np.column_stack([np.interp(ts, self.times, self.table[:, j]) for j in range(self.dim)])


class DenseHistory(History):
    """Piecewise cubic Hermite segments given knot values and derivatives."""

    kind = "dense-segments"

    def __init__(self, times: Sequence[float], values, derivatives):
        self.times = np.array(times, dtype=float)
        if self.times[-1] != 0.0:
            raise ConfigurationError("dense history: last knot must be t=0")
        self._spline = CubicHermiteSpline(self.times, np.asarray(values, float), np.asarray(derivatives, float))
        self.tau = -float(self.times[0])
        self.dim = np.asarray(values).shape[1]

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        self._check_domain(ts)
        return self._spline(ts)


class FunctionHistory(History):
    """Adapter around a vectorised callable ``fn(ts) -> (len(ts), dim)``."""

    kind = "function"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], tau: float, dim: int):
        self.fn = fn
        self.tau = float(tau)
        self.dim = dim

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        self._check_domain(ts)
        return np.asarray(self.fn(ts), dtype=float).reshape(ts.size, self.dim)


class _ScaledHistory(History):
    def __init__(self, base: History, c: float):
        self.base, self.c = base, float(c)
        self.tau, self.dim = base.tau, base.dim
        self.kind = base.kind

    def values(self, ts):
        return self.c * self.base.values(ts)


# ---------------------------------------------------------------------------
# dense solution


def _hermite(t0, t1, y0, y1, f0, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _hermite_derivative(t0, t1, y0, y1, f0, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    d00 = (6 * s2 - 6 * s) / h
    d10 = 3 * s2 - 4 * s + 1
    d01 = (-6 * s2 + 6 * s) / h
    d11 = 3 * s2 - 2 * s
    return d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1


def _dense_eval(history: History, ts_knots, ys, fs, n_done: int, times: np.ndarray) -> np.ndarray:
    """Evaluate the solution known on knots ``0..n_done`` at ``times`` (1-D array)."""
    out = np.empty((times.size, ys.shape[1]))
    past = times <= 0.0
    if past.any():
        out[past] = history.values(times[past])
    fut = ~past
    if fut.any():
        tf = times[fut]
        knots = ts_knots[: n_done + 1]
        if n_done == 0 or tf.max() > knots[-1] * (1 + 1e-14) + 1e-300:
            raise IntegrationError("dense output requested beyond computed solution", float(tf.max()))
        idx = np.searchsorted(knots, tf, side="right") - 1
        idx = np.clip(idx, 0, n_done - 1)
        t0 = knots[idx][:, None]
        t1 = knots[idx + 1][:, None]
        vals = _hermite(t0, t1, ys[idx], ys[idx + 1], fs[idx], fs[idx + 1], tf[:, None])
        at_knot = tf == knots[idx]
        vals[at_knot] = ys[idx[at_knot]]
        at_end = tf == knots[np.minimum(idx + 1, n_done)]
        vals[at_end] = ys[idx[at_end] + 1]
        out[fut] = vals
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense DDE solution on ``[-tau, t_end]``.

    Knots ``t[0] = 0 < ... < t[-1]`` carry states ``y`` and right-hand-side
    values ``f``; each step is a cubic Hermite segment. Times ``<= 0`` are
    answered by the history. ``status`` is ``"completed"`` or ``"event"``
    (stopped at ``t_event``).
    """

    history: History
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    step: float
    status: str = "completed"
    t_event: float | None = None

    @property
    def t_start(self) -> float:
        return -self.history.tau

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    def __call__(self, t):
        return eval_trajectory(self, t)

    def grid(self, spacing: float | None = None) -> np.ndarray:
        """Uniform output grid on [0, t_end] (always includes t_end)."""
        spacing = self.step if spacing is None else spacing
        n = int(math.floor(self.t_end / spacing + 1e-9))
        ts = np.arange(n + 1) * spacing
        if self.t_end - ts[-1] > 1e-12 * max(1.0, self.t_end):
            ts = np.append(ts, self.t_end)
        else:
            ts[-1] = self.t_end
        return ts


def eval_trajectory(traj: Trajectory, t):
    """State at time(s) ``t``; scalar input gives shape ``(dim,)``, array gives ``(len, dim)``."""
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    lo = traj.t_start
    if ts.size and (ts.min() < lo * (1 + 1e-12) - 1e-14 or ts.max() > traj.t_end):
        raise DomainError(f"trajectory is defined on [{lo}, {traj.t_end}]; got t outside")
    ts = np.maximum(ts, lo)
    out = _dense_eval(traj.history, traj.t, traj.y, traj.f, traj.t.size - 1, ts)
    return out[0] if scalar else out


def trajectory_to_csv(traj: Trajectory, path, spacing: float | None = None, transform=None) -> Path:
    """Write columns ``t, v1..vN`` on a uniform grid over ``[0, t_end]``."""
    path = Path(path)
    ts = traj.grid(spacing)
    vals = traj(ts)
    if transform is not None:
        vals = transform(vals)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"v{j + 1}" for j in range(vals.shape[1])])
        for t, row in zip(ts, vals):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path


# ---------------------------------------------------------------------------
# integrator


def _validate(delays, history: History, t_end: float, step: float) -> np.ndarray:
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 1 or delays.size == 0 or np.any(delays <= 0):
        raise ConfigurationError("delays must be a non-empty list of positive reals", "delays")
    if not step > 0:
        raise ConfigurationError(f"step must be positive, got {step!r}", "numerics.step")
    if step > delays.min() / 4 * (1 + 1e-12):
        raise ConfigurationError(
            f"step {step!r} exceeds min(delays)/4 = {delays.min() / 4!r}", "numerics.step"
        )
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end!r}", "numerics.t_end")
    if history.tau < delays.max() * (1 - 1e-12):
        raise ConfigurationError("history must cover [-max(delays), 0]", "initial")
    for d in delays:
        ratio = d / step
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            warnings.warn(
                f"delay {d!r} is not an integer multiple of step {step!r}; "
                "derivative breakpoints will fall inside steps",
                stacklevel=3,
            )
    return delays


def integrate(
    rhs: RhsFunction,
    delays: Sequence[float],
    history: History,
    t_end: float,
    step: float,
    event: EventFunction | None = None,
) -> Trajectory:
    """Solve ``y'(t) = rhs(t, y(t), [y(t - d) for d in delays])`` on ``[0, t_end]``.

    ``rhs`` receives the delayed states stacked as an array of shape
    ``(len(delays), dim)``. If ``event(t, y)`` is given, integration stops at
    the first time it reaches zero from below (bisection on the dense output).
    """
    delays = _validate(delays, history, t_end, step)
    n_steps = int(math.ceil(t_end / step - 1e-9))
    knots = np.minimum(np.arange(n_steps + 1) * step, t_end)
    knots[-1] = t_end

    y0 = history(0.0)
    dim = y0.size
    ys = np.empty((n_steps + 1, dim))
    fs = np.empty((n_steps + 1, dim))
    ys[0] = y0

    def call(t, y, n_done):
        lag = _dense_eval(history, knots, ys, fs, n_done, t - delays)
        try:
            return np.asarray(rhs(t, y, lag), dtype=float)
        except DomainError as exc:
            raise IntegrationError(f"right-hand side undefined: {exc}", t) from exc

    if event is not None:
        if float(event(0.0, y0)) >= 0:
            raise ConfigurationError("event condition already met at t=0", "event")

    fs[0] = call(0.0, y0, 0)
    for n in range(n_steps):
        t0, t1 = knots[n], knots[n + 1]
        h = t1 - t0
        yn = ys[n]
        # fs[n] holds k1; lookups below need only knots 0..n
        k1 = fs[n]
        k2 = call(t0 + h / 2, yn + h / 2 * k1, n)
        k3 = call(t0 + h / 2, yn + h / 2 * k2, n)
        k4 = call(t1, yn + h * k3, n)
        ys[n + 1] = yn + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(ys[n + 1])):
            raise IntegrationError("non-finite state", float(t1))
        fs[n + 1] = call(t1, ys[n + 1], n + 1) if h > 0 else k1

        if event is not None:
            g1 = float(event(t1, ys[n + 1]))
            if g1 >= 0:
                t_ev = _locate_event(event, t0, t1, ys[n], ys[n + 1], fs[n], fs[n + 1], g1)
                if t_ev < t1:
                    y_ev = _hermite(t0, t1, ys[n], ys[n + 1], fs[n], fs[n + 1], t_ev)
                    f_ev = _hermite_derivative(t0, t1, ys[n], ys[n + 1], fs[n], fs[n + 1], t_ev)
                    ys[n + 1], fs[n + 1] = y_ev, f_ev
                    knots[n + 1] = t_ev
                m = n + 2
                return Trajectory(history, knots[:m].copy(), ys[:m].copy(), fs[:m].copy(),
                                  step, "event", float(knots[n + 1]))

    return Trajectory(history, knots, ys, fs, step)


def _locate_event(event, t0, t1, y0, y1, f0, f1, g1) -> float:
    if g1 == 0.0:
        return t1
    lo, hi = t0, t1
    for _ in range(BISECTION_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if event(mid, _hermite(t0, t1, y0, y1, f0, f1, mid)) >= 0:
            hi = mid
        else:
            lo = mid
    g_lo = event(lo, _hermite(t0, t1, y0, y1, f0, f1, lo))
    if g_lo >= 0 and lo > t0:
        raise IntegrationError("event bracketing failed", float(lo))
    return hi


def default_step(delays: Sequence[float]) -> float:
    return min(delays) / 20.0


def convergence_order(
    rhs: RhsFunction,
    delays: Sequence[float],
    history: History,
    t_probe: float,
    step: float | None = None,
    exact: Callable[[float], np.ndarray] | None = None,
    refinement: int = 16,
) -> float:
    """Observed order ``log2(e_h / e_{h/2})`` at ``t_probe``.

    Errors are measured against ``exact`` when given, else against a run with
    ``step / refinement``. Returns ``nan`` when either error is at rounding
    level, since no order is observable then.
    """
    step = default_step(delays) if step is None else step
    t_end = t_probe

    def run(h):
        return eval_trajectory(integrate(rhs, delays, history, t_end, h), t_probe)

    ref = np.asarray(exact(t_probe), float) if exact is not None else run(step / refinement)
    e1 = float(np.max(np.abs(run(step) - ref)))
    e2 = float(np.max(np.abs(run(step / 2) - ref)))
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(ref))))
    if e1 <= floor or e2 <= floor:
        return float("nan")
    return math.log2(e1 / e2)
