"""Marchuk's antiviral immune-response model with delays.

State layout (index 0..9 <-> x1..x10):

    x1  free virions             x6  B-lymphocytes
    x2  stimulated macrophages   x7  plasma cells
    x3  T-helpers (cellular)     x8  antibodies
    x4  T-helpers (humoral)      x9  infected fraction of the target organ
    x5  T-effectors              x10 destroyed fraction of the target organ

Delayed arguments are passed explicitly as a ``(5, 10)`` array whose rows are
the full state at ``t - tau3, ..., t - tau7``; the integrator owns the history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

N_STATE = 10
DELAY_NAMES = ("tau3", "tau4", "tau5", "tau6", "tau7")


@dataclass(frozen=True)
class ModelParameters:
    """Rate coefficients, delays and healthy levels.

    Defaults are a desk-scale set chosen so that the stability condition holds
    (a11=3, a99=0.5, a19=0.3, a91=0.1); they carry no biological meaning.
    """

    nu: float = 0.1
    n: float = 2.0
    b95: float = 0.1
    gamma18: float = 1.0
    gamma12: float = 1.0
    bigM: float = 1.0
    gamma19: float = 1.0
    bigC: float = 1.0
    gamma21: float = 1.0
    alpha2: float = 1.0
    b32: float = 0.5
    rho32: float = 1.0
    b3: float = 0.5
    alpha3: float = 1.0
    b42: float = 0.5
    rho42: float = 1.0
    b4: float = 0.5
    alpha4: float = 1.0
    b5: float = 0.5
    rho5: float = 1.0
    b59: float = 0.5
    alpha5: float = 1.0
    b6: float = 0.5
    rho6: float = 1.0
    alpha6: float = 1.0
    b7: float = 0.5
    rho7: float = 1.0
    alpha7: float = 1.0
    rho8: float = 1.0
    gamma81: float = 1.0
    alpha8: float = 1.0
    sigma: float = 0.1
    b10: float = 0.4
    alpha10: float = 1.0
    tau3: float = 1.0
    tau4: float = 1.0
    tau5: float = 1.0
    tau6: float = 1.0
    tau7: float = 1.0
    xstar3: float = 1.0
    xstar4: float = 1.0
    xstar5: float = 1.0
    xstar6: float = 1.0
    xstar7: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigurationError(f"expected a real number, got {v!r}", f.name)
            if not math.isfinite(v) or v <= 0:
                raise ConfigurationError(f"must be finite and strictly positive, got {v!r}", f.name)

    @property
    def delays(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in DELAY_NAMES)

    @property
    def tau(self) -> float:
        """Length of the initial interval, max of the five delays."""
        return max(self.delays)

    @property
    def tau_min(self) -> float:
        return min(self.delays)

    @property
    def x8star(self) -> float:
        return self.rho8 / self.alpha8 * self.xstar7

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class XiFunction:
    """Damage factor xi(u): non-increasing on [0, 1], xi(0) = 1, xi(1) = 0.

    ``kind`` is ``"linear"`` (1 - u), ``"smooth-cubic"`` (1 - 3u^2 + 2u^3) or
    ``"user-table"`` (piecewise linear through ``table`` breakpoints).
    """

    kind: str = "linear"
    table: tuple[tuple[float, float], ...] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("linear", "smooth-cubic", "user-table"):
            raise ConfigurationError(f"unknown xi kind {self.kind!r}", "xi.kind")
        if self.kind != "user-table":
            if self.table is not None:
                raise ConfigurationError("table only allowed for kind 'user-table'", "xi.table")
            return
        if self.table is None or len(self.table) < 2:
            raise ConfigurationError("user-table needs at least two breakpoints", "xi.table")
        table = tuple((float(u), float(v)) for u, v in self.table)
        object.__setattr__(self, "table", table)
        us = [u for u, _ in table]
        vs = [v for _, v in table]
        if us[0] != 0.0 or us[-1] != 1.0:
            raise ConfigurationError("breakpoints must start at u=0 and end at u=1", "xi.table")
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ConfigurationError("breakpoints must be strictly increasing in u", "xi.table")
        if vs[0] != 1.0 or vs[-1] != 0.0:
            raise ConfigurationError("xi(0) must be 1 and xi(1) must be 0", "xi.table")
        if any(b > a for a, b in zip(vs, vs[1:])):
            raise ConfigurationError("xi values must be non-increasing", "xi.table")
        if any(not 0.0 <= v <= 1.0 for v in vs):
            raise ConfigurationError("xi values must lie in [0, 1]", "xi.table")

    def __call__(self, u: float) -> float:
        return xi_eval(self, u)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.table is not None:
            d["table"] = [list(row) for row in self.table]
        return d


def xi_eval(f: XiFunction, u: float, clamp_tol: float = 0.0) -> float:
    """Evaluate xi at ``u``; excursions beyond [0, 1] up to ``clamp_tol`` are clamped."""
    if not (0.0 <= u <= 1.0):
        if -clamp_tol <= u < 0.0:
            u = 0.0
        elif 1.0 < u <= 1.0 + clamp_tol:
            u = 1.0
        else:
            raise DomainError(f"xi is defined on [0, 1]; got u={u!r}")
    if f.kind == "linear":
        return 1.0 - u
    if f.kind == "smooth-cubic":
        return 1.0 - 3.0 * u * u + 2.0 * u * u * u
    us, vs = zip(*f.table)
    return float(np.interp(u, us, vs))


def stationary_point(p: ModelParameters) -> np.ndarray:
    """Healthy equilibrium (0, 0, X3*, ..., X7*, rho8*X7*/alpha8, 0, 0)."""
    return np.array(
        [0.0, 0.0, p.xstar3, p.xstar4, p.xstar5, p.xstar6, p.xstar7, p.x8star, 0.0, 0.0]
    )


def _check_delayed(x_delayed) -> np.ndarray:
    d = np.asarray(x_delayed, dtype=float)
    if d.shape != (5, N_STATE):
        raise ValueError(f"delayed states must have shape (5, 10), got {d.shape}")
    return d


def rhs_original(p: ModelParameters, xi: XiFunction, x_now, x_delayed, xi_tol: float = 0.0) -> np.ndarray:
    """Right-hand side of the model in the original variables x."""
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = (float(v) for v in x_now)
    d = _check_delayed(x_delayed)
    xi10 = xi_eval(xi, x10, xi_tol)
    d3, d4, d5, d6, d7 = d

    return np.array([
        p.nu * x9 + p.n * p.b95 * x5 * x9 - p.gamma18 * x1 * x8
        - p.gamma12 * p.bigM * x1 - p.gamma19 * p.bigC * (1.0 - x9 - x10) * x1,
        p.gamma21 * p.bigM * x1 - p.alpha2 * x2,
        p.b32 * (p.rho32 * xi10 * d3[1] * d3[2] - x2 * x3)
        - p.b3 * x2 * x3 * x5 + p.alpha3 * (p.xstar3 - x3),
        p.b42 * (p.rho42 * xi10 * d4[1] * d4[3] - x2 * x4)
        - p.b4 * x2 * x4 * x6 + p.alpha4 * (p.xstar4 - x4),
        p.b5 * (p.rho5 * xi10 * d5[1] * d5[2] * d5[4] - x2 * x3 * x5)
        - p.b59 * x5 * x9 + p.alpha5 * (p.xstar5 - x5),
        p.b6 * (p.rho6 * xi10 * d6[1] * d6[3] * d6[5] - x2 * x4 * x6)
        + p.alpha6 * (p.xstar6 - x6),
        p.b7 * p.rho7 * xi10 * d7[1] * d7[3] * d7[5] + p.alpha7 * (p.xstar7 - x7),
        p.rho8 * x7 - p.gamma81 * x1 * x8 - p.alpha8 * x8,
        p.sigma * p.bigC * x1 * (1.0 - x9 - x10) - p.b95 * x5 * x9 - p.b10 * x9,
        p.b95 * x5 * x9 + p.b10 * x9 - p.alpha10 * x10,
    ])


def rhs_shifted(p: ModelParameters, xi: XiFunction, y_now, y_delayed, xi_tol: float = 0.0) -> np.ndarray:
    """Right-hand side for the deviation y = x - X* from the healthy state."""
    y1, y2, y3, y4, y5, y6, y7, y8, y9, y10 = (float(v) for v in y_now)
    d = _check_delayed(y_delayed)
    xi10 = xi_eval(xi, y10, xi_tol)
    d3, d4, d5, d6, d7 = d
    X3, X4, X5, X6, X7 = p.xstar3, p.xstar4, p.xstar5, p.xstar6, p.xstar7
    X8 = p.x8star

    return np.array([
        p.nu * y9 + p.n * p.b95 * (X5 + y5) * y9 - p.gamma18 * y1 * (X8 + y8)
        - p.gamma12 * p.bigM * y1 - p.gamma19 * p.bigC * (1.0 - y9 - y10) * y1,
        p.gamma21 * p.bigM * y1 - p.alpha2 * y2,
        p.b32 * (p.rho32 * xi10 * d3[1] * (X3 + d3[2]) - y2 * (X3 + y3))
        - p.b3 * y2 * (X3 + y3) * (X5 + y5) - p.alpha3 * y3,
        p.b42 * (p.rho42 * xi10 * d4[1] * (X4 + d4[3]) - y2 * (X4 + y4))
        - p.b4 * y2 * (X4 + y4) * (X6 + y6) - p.alpha4 * y4,
        p.b5 * (p.rho5 * xi10 * d5[1] * (X3 + d5[2]) * (X5 + d5[4]) - y2 * (X3 + y3) * (X5 + y5))
        - p.b59 * (X5 + y5) * y9 - p.alpha5 * y5,
        p.b6 * (p.rho6 * xi10 * d6[1] * (X4 + d6[3]) * (X6 + d6[5]) - y2 * (X4 + y4) * (X6 + y6))
        - p.alpha6 * y6,
        p.b7 * p.rho7 * xi10 * d7[1] * (X4 + d7[3]) * (X6 + d7[5]) - p.alpha7 * y7,
        p.rho8 * y7 - p.gamma81 * y1 * (X8 + y8) - p.alpha8 * y8,
        p.sigma * p.bigC * y1 * (1.0 - y9 - y10) - p.b95 * (X5 + y5) * y9 - p.b10 * y9,
        p.b95 * (X5 + y5) * y9 + p.b10 * y9 - p.alpha10 * y10,
    ])


def check_stability_condition(p: ModelParameters) -> tuple[bool, float]:
    """Sufficient condition for asymptotic stability of the healthy state.

    Returns ``(holds, margin)`` with ``margin = lhs - rhs`` of the strict
    inequality (gamma12 M + gamma18 rho8 X7*/alpha8 + gamma19 C*)(b95 X5* + b10)
    > sigma C* (nu + n b95 X5*).
    """
    lhs = (p.gamma12 * p.bigM + p.gamma18 * p.rho8 / p.alpha8 * p.xstar7 + p.gamma19 * p.bigC) * (
        p.b95 * p.xstar5 + p.b10
    )
    rhs = p.sigma * p.bigC * (p.nu + p.n * p.b95 * p.xstar5)
    margin = lhs - rhs
    return margin > 0.0, margin


def make_rhs(p: ModelParameters, xi: XiFunction, frame: str = "shifted", xi_tol: float = 0.0):
    """Bind parameters into an ``f(t, y, y_delayed)`` callable for :func:`dde.integrate`."""
    if frame == "shifted":
        base = rhs_shifted
    elif frame == "original":
        base = rhs_original
    else:
        raise ConfigurationError(f"unknown frame {frame!r}", "initial.frame")

    def f(t: float, y: np.ndarray, y_delayed: np.ndarray) -> np.ndarray:
        return base(p, xi, y, y_delayed, xi_tol)

    return f


def to_shifted(p: ModelParameters, x: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float) - stationary_point(p)


def to_original(p: ModelParameters, y: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float) + stationary_point(p)
