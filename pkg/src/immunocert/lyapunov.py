"""Lyapunov-Krasovskii functional, basin hypotheses and decay envelopes.

    V(t, y) = sum_j h_j y_j(t)^2
              + sum_{k=3..7} int_{t-tau_k}^{t} h_k beta_k exp(-kappa_k (t - s)) y_2(s)^2 ds

All functions work in the shifted frame y = x - X*.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .certificate import Certificate
from .dde import History, Trajectory, eval_trajectory
from .errors import BasinError, ConfigurationError, DomainError
from .model import stationary_point

DEFAULT_QUAD_POINTS = 64
HISTORY_SAMPLES = 512


@dataclass(frozen=True)
class FunctionalValue:
    total: float
    quadratic_part: float
    integral_parts: tuple[float, ...]
    quadrature_error_estimate: float

    def __float__(self) -> float:
        return self.total


def _check_quad_points(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
        raise ConfigurationError(f"quad_points must be an even integer >= 8, got {n!r}", "numerics.quad_points")


def _functional(cert: Certificate, states: Callable[[np.ndarray], np.ndarray], t: float, quad_points: int) -> FunctionalValue:
    _check_quad_points(quad_points)
    h = np.array(cert.h)
    taus = np.array(cert.delays)
    kappas = np.array(cert.kappa)
    weights = np.array(cert.h[2:7]) * np.array(cert.beta)

    # one evaluation for all five windows plus the current state
    u = np.linspace(0.0, 1.0, quad_points + 1)
    nodes = t - taus[:, None] * (1.0 - u)[None, :]
    vals = states(np.concatenate([nodes.ravel(), [t]]))
    y_now = vals[-1]
    y2 = vals[:-1, 1].reshape(nodes.shape)

    quadratic = float(np.dot(h, y_now * y_now))
    parts, err = [], 0.0
    for k in range(5):
        f = weights[k] * np.exp(-kappas[k] * (t - nodes[k])) * y2[k] ** 2
        fine = float(simpson(f, x=nodes[k]))
        coarse = float(simpson(f[::2], x=nodes[k][::2]))
        parts.append(fine)
        err += abs(fine - coarse)
    return FunctionalValue(quadratic + math.fsum(parts), quadratic, tuple(parts), err)


def eval_functional_initial(cert: Certificate, psi: History, quad_points: int = DEFAULT_QUAD_POINTS) -> FunctionalValue:
    """V(0, psi) for an initial history given in the shifted frame."""
    if psi.tau < max(cert.delays) * (1 - 1e-12):
        raise DomainError("history does not cover [-tau, 0]")
    return _functional(cert, psi.values, 0.0, quad_points)


def eval_functional_along(cert: Certificate, traj: Trajectory, t: float, quad_points: int = DEFAULT_QUAD_POINTS) -> FunctionalValue:
    """V(t, y) along a shifted-frame trajectory."""
    if t < 0 or t > traj.t_end:
        raise DomainError(f"t={t!r} outside [0, {traj.t_end!r}]")
    if t - max(cert.delays) < traj.t_start * (1 + 1e-12) - 1e-14:
        raise DomainError("trajectory does not cover [t - tau, t]")
    return _functional(cert, lambda ts: eval_trajectory(traj, ts), float(t), quad_points)


# ---------------------------------------------------------------------------
# basin hypotheses


@dataclass(frozen=True)
class BasinItem:
    item: str
    description: str
    passed: bool
    value: float
    threshold: float


@dataclass(frozen=True)
class BasinResult:
    passed: bool
    v0: FunctionalValue
    items: tuple[BasinItem, ...]

    def failed_items(self) -> list[str]:
        return [it.item for it in self.items if not it.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "v0": asdict(self.v0),
            "items": [asdict(it) for it in self.items],
        }


def amplitude_factor(cert: Certificate, v0: float) -> float:
    """sqrt(V0) / (1 - (q / 2 omega) sqrt(V0)); ``inf`` outside the basin."""
    s = math.sqrt(v0)
    contraction = 1.0 - cert.q / (2.0 * cert.omega) * s
    if not s < 2.0 * cert.omega / cert.q or contraction <= 0:
        return math.inf
    return s / contraction


def check_basin(
    cert: Certificate,
    psi: History,
    v0: FunctionalValue | None = None,
    quad_points: int = DEFAULT_QUAD_POINTS,
    samples: int = HISTORY_SAMPLES,
) -> BasinResult:
    """Check the attraction-set conditions for shifted-frame initial data ``psi``.

    Continuous max/min conditions on [-tau, 0] are checked on ``samples + 1``
    uniform points including both endpoints.
    """
    if v0 is None:
        v0 = eval_functional_initial(cert, psi, quad_points)
    xstar = stationary_point(cert.params)
    _, vals = psi.sample(samples)
    items = []

    floor = float(np.min(vals + xstar))
    items.append(BasinItem("a", "psi_j(t) >= -X_j* on [-tau, 0]", floor >= 0.0, floor, 0.0))

    s = math.sqrt(v0.total)
    radius = 2.0 * cert.omega / cert.q
    items.append(BasinItem("b", "sqrt(V0) < 2 omega / q", s < radius, s, radius))

    amp = amplitude_factor(cert, v0.total)
    for idx, k in enumerate((3, 4, 5, 6)):
        theta = cert.theta[idx]
        top = float(np.max(vals[:, k - 1]))
        items.append(BasinItem(f"c{k}", f"max psi_{k} <= theta_{k}", top <= theta, top, theta))
    for idx, k in enumerate((3, 4, 5, 6)):
        theta = cert.theta[idx]
        bound = amp / math.sqrt(cert.h[k - 1])
        items.append(BasinItem(f"d{k}", f"envelope amplitude C_{k} <= theta_{k}", bound <= theta, bound, theta))

    top10 = float(np.max(vals[:, 9]))
    items.append(BasinItem("e", "max psi_10 < 1", top10 < 1.0, top10, 1.0))
    bound10 = amp / math.sqrt(cert.h[9])
    items.append(BasinItem("f", "envelope amplitude C_10 < 1", bound10 < 1.0, bound10, 1.0))

    return BasinResult(all(it.passed for it in items), v0, tuple(items))


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class EnvelopeBound:
    v0: float
    contraction_factor: float
    amplitudes: tuple[float, ...]
    omega: float

    def bound(self, t) -> np.ndarray:
        """B_j(t) = C_j exp(-omega t); shape ``(10,)`` or ``(len(t), 10)``."""
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(np.exp(-self.omega * t), np.array(self.amplitudes))


def _v0_value(v0) -> float:
    return v0.total if isinstance(v0, FunctionalValue) else float(v0)


def envelope(cert: Certificate, v0) -> EnvelopeBound:
    v = _v0_value(v0)
    s = math.sqrt(v)
    if not s < 2.0 * cert.omega / cert.q:
        raise BasinError(f"sqrt(V0) = {s!r} is not below 2 omega / q = {2 * cert.omega / cert.q!r}")
    contraction = 1.0 - cert.q / (2.0 * cert.omega) * s
    amps = tuple(s / contraction / math.sqrt(hj) for hj in cert.h)
    return EnvelopeBound(v, contraction, amps, cert.omega)


def gronwall_v_bound(cert: Certificate, v0, t):
    """V(t) <= V0 exp(-2 omega t) / (1 - (q / 2 omega) sqrt(V0))^2."""
    v = _v0_value(v0)
    s = math.sqrt(v)
    if not s < 2.0 * cert.omega / cert.q:
        raise BasinError(f"sqrt(V0) = {s!r} is not below 2 omega / q = {2 * cert.omega / cert.q!r}")
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be non-negative")
    contraction = 1.0 - cert.q / (2.0 * cert.omega) * s
    return v * np.exp(-2.0 * cert.omega * np.asarray(t, dtype=float)) / contraction ** 2


def envelope_to_csv(cert: Certificate, env: EnvelopeBound, ts: Sequence[float], path) -> Path:
    path = Path(path)
    ts = np.asarray(ts, dtype=float)
    b = env.bound(ts)
    vb = np.sqrt(gronwall_v_bound(cert, env.v0, ts))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"B_{j}" for j in range(1, 11)] + ["sqrt_V_bound"])
        for t, row, v in zip(ts, b, vb):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row] + [repr(float(v))])
    return path


# ---------------------------------------------------------------------------
# differential inequality dV/dt <= -2 omega V + q V^(3/2) (+ R_tau <= 0)


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    v: float
    lhs: float
    rhs: float
    tol: float
    slack: float
    violated: bool
    r_tau: float | None = None


def eval_r_tau(cert: Certificate, traj: Trajectory, t: float) -> float:
    """Remainder term R_tau at time ``t``; non-positive while delayed
    components stay in [-X_k*, theta_k]."""
    p = cert.params
    c = cert.choices
    y = eval_trajectory(traj, t)
    lag = eval_trajectory(traj, t - np.array(p.delays))
    X3, X4, X5, X6 = p.xstar3, p.xstar4, p.xstar5, p.xstar6
    h, beta = cert.h, cert.beta
    e = math.exp

    terms = [
        h[2] * e(c.kappa3 * p.tau3) / beta[0] * (p.b32 * p.rho32) ** 2
        * ((X3 + lag[0, 2]) ** 2 - (X3 + c.theta3) ** 2) * y[2] ** 2,
        h[3] * e(c.kappa4 * p.tau4) / beta[1] * (p.b42 * p.rho42) ** 2
        * ((X4 + lag[1, 3]) ** 2 - (X4 + c.theta4) ** 2) * y[3] ** 2,
        h[4] * e(c.kappa5 * p.tau5) / beta[2] * (p.b5 * p.rho5) ** 2
        * ((X3 + lag[2, 2]) ** 2 * (X5 + lag[2, 4]) ** 2 - (X3 + c.theta3) ** 2 * (X5 + c.theta5) ** 2)
        * y[4] ** 2,
        h[5] * e(c.kappa6 * p.tau6) / beta[3] * (p.b6 * p.rho6) ** 2
        * ((X4 + lag[3, 3]) ** 2 * (X6 + lag[3, 5]) ** 2 - (X4 + c.theta4) ** 2 * (X6 + c.theta6) ** 2)
        * y[5] ** 2,
        h[6] * e(c.kappa7 * p.tau7) / beta[4] * (p.b7 * p.rho7) ** 2
        * ((X4 + lag[4, 3]) ** 2 * (X6 + lag[4, 5]) ** 2 - (X4 + c.theta4) ** 2 * (X6 + c.theta6) ** 2)
        * y[6] ** 2,
    ]
    return math.fsum(terms)


def default_monitor_grid(traj: Trajectory, n: int = 100) -> np.ndarray:
    """``n`` interior points of (0, t_end), away from both ends."""
    return traj.t_end * np.arange(1, n + 1) / (n + 1)


def monitor_differential_inequality(
    cert: Certificate,
    traj: Trajectory,
    grid: Sequence[float] | None = None,
    quad_points: int = DEFAULT_QUAD_POINTS,
    h_fd: float | None = None,
    with_r_tau: bool = False,
) -> list[MonitorRecord]:
    """Compare a centred difference of V with -2 omega V + q V^(3/2) on ``grid``.

    The tolerance ``max(1e-8, 10 |V| h_fd^2)`` absorbs differencing and
    quadrature error; ``slack = rhs - lhs + tol`` is negative on violation.
    """
    h_fd = traj.step / 4 if h_fd is None else h_fd
    grid = default_monitor_grid(traj) if grid is None else np.asarray(grid, dtype=float)
    out = []
    for t in grid:
        t = float(t)
        if t - h_fd < 0 or t + h_fd > traj.t_end:
            raise DomainError(f"monitor point t={t!r} too close to the ends of the trajectory")
        v = eval_functional_along(cert, traj, t, quad_points).total
        vp = eval_functional_along(cert, traj, t + h_fd, quad_points).total
        vm = eval_functional_along(cert, traj, t - h_fd, quad_points).total
        lhs = (vp - vm) / (2.0 * h_fd)
        rhs = -2.0 * cert.omega * v + cert.q * v ** 1.5
        tol = max(1e-8, 10.0 * abs(v) * h_fd ** 2)
        slack = rhs - lhs + tol
        rt = eval_r_tau(cert, traj, t) if with_r_tau else None
        out.append(MonitorRecord(t, v, lhs, rhs, tol, slack, slack < 0, rt))
    return out
