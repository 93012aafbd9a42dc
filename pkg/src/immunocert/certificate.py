"""Constants of the Lyapunov-Krasovskii stability certificate.

Pipeline: a-constants -> epsilon -> delta -> eps_k -> beta_k -> h_j -> omega
-> q -> auxiliary eps -> r diagnostics. The r_j are evaluated from their
unsimplified forms so they cross-check every formula upstream: r2..r8, r10
must vanish and r1, r9 must be non-negative.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import CertificateInfeasible, ConfigurationError, InternalConsistencyError
from .model import ModelParameters, check_stability_condition

IDENTITY_RTOL = 1e-8
SIGN_ATOL = 1e-10
ZERO_R = (2, 3, 4, 5, 6, 7, 8, 10)
NONNEG_R = (1, 9)

THETA_NAMES = ("theta3", "theta4", "theta5", "theta6")
KAPPA_NAMES = ("kappa3", "kappa4", "kappa5", "kappa6", "kappa7")


@dataclass(frozen=True)
class CertificateChoices:
    """Free quantities of the construction.

    ``None`` means "use the default": theta_k = X_k* and kappa_k = 2*delta.
    """

    theta3: float | None = None
    theta4: float | None = None
    theta5: float | None = None
    theta6: float | None = None
    kappa3: float | None = None
    kappa4: float | None = None
    kappa5: float | None = None
    kappa6: float | None = None
    kappa7: float | None = None
    delta_fraction: float = 0.5

    def __post_init__(self):
        for name in THETA_NAMES + KAPPA_NAMES:
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"must be a positive real, got {v!r}", f"choices.{name}")
        f = self.delta_fraction
        if not (isinstance(f, (int, float)) and 0.0 < f < 1.0):
            raise ConfigurationError(f"must lie in (0, 1), got {f!r}", "choices.delta_fraction")

    @property
    def is_resolved(self) -> bool:
        return all(getattr(self, n) is not None for n in THETA_NAMES + KAPPA_NAMES)

    def resolve(self, p: ModelParameters, delta: float) -> "CertificateChoices":
        theta_default = (p.xstar3, p.xstar4, p.xstar5, p.xstar6)
        updates = {}
        for name, default in zip(THETA_NAMES, theta_default):
            if getattr(self, name) is None:
                updates[name] = default
        for name in KAPPA_NAMES:
            if getattr(self, name) is None:
                updates[name] = 2.0 * delta
        return replace(self, **updates)

    @property
    def theta(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in THETA_NAMES)

    @property
    def kappa(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in KAPPA_NAMES)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Certificate:
    params: ModelParameters = field(repr=False)
    choices: CertificateChoices = field(repr=False)
    a11: float
    a99: float
    a19: float
    a91: float
    epsilon: float
    delta: float
    eps3: float
    eps4: float
    eps5: float
    eps6: float
    eps7: float
    beta3: float
    beta4: float
    beta5: float
    beta6: float
    beta7: float
    h1: float
    h2: float
    h3: float
    h4: float
    h5: float
    h6: float
    h7: float
    h8: float
    h9: float
    h10: float
    omega: float
    q: float
    eps1: float
    eps2: float
    eps9: float
    eps59: float
    eps87: float
    eps81: float
    eps10: float
    r1: float = math.nan
    r2: float = math.nan
    r3: float = math.nan
    r4: float = math.nan
    r5: float = math.nan
    r6: float = math.nan
    r7: float = math.nan
    r8: float = math.nan
    r9: float = math.nan
    r10: float = math.nan

    @property
    def h(self) -> tuple[float, ...]:
        """h1..h10 as a tuple (index 0 <-> h1)."""
        return tuple(getattr(self, f"h{j}") for j in range(1, 11))

    @property
    def beta(self) -> tuple[float, ...]:
        return (self.beta3, self.beta4, self.beta5, self.beta6, self.beta7)

    @property
    def kappa(self) -> tuple[float, ...]:
        return self.choices.kappa

    @property
    def theta(self) -> tuple[float, ...]:
        return self.choices.theta

    @property
    def delays(self) -> tuple[float, ...]:
        return self.params.delays

    @property
    def r(self) -> tuple[float, ...]:
        return tuple(getattr(self, f"r{j}") for j in range(1, 11))

    @property
    def basin_radius(self) -> float:
        """Threshold 2*omega/q on sqrt(V0)."""
        return 2.0 * self.omega / self.q

    def to_dict(self) -> dict:
        """Flat document of every constant plus the resolved choices and delays."""
        out = {}
        for f in fields(self):
            if f.name in ("params", "choices"):
                continue
            out[f.name] = getattr(self, f.name)
        for name in THETA_NAMES + KAPPA_NAMES + ("delta_fraction",):
            out[name] = getattr(self.choices, name)
        for name, tau in zip(("tau3", "tau4", "tau5", "tau6", "tau7"), self.params.delays):
            out[name] = tau
        return out


# ---------------------------------------------------------------------------
# individual constants


def compute_a_constants(p: ModelParameters) -> tuple[float, float, float, float]:
    a11 = p.gamma12 * p.bigM + p.gamma18 * (p.rho8 / p.alpha8) * p.xstar7 + p.gamma19 * p.bigC
    a99 = p.b95 * p.xstar5 + p.b10
    a19 = p.nu + p.n * p.b95 * p.xstar5
    a91 = p.sigma * p.bigC
    return a11, a99, a19, a91


def compute_epsilon(a11: float, a99: float, a19: float, a91: float) -> float:
    """Smaller eigenvalue of [[a11, -a19], [-a91, a99]]; positive iff a11*a99 > a19*a91."""
    return 0.5 * (a11 + a99 - math.sqrt((a11 - a99) ** 2 + 4.0 * a19 * a91))


def compute_delta(epsilon: float, p: ModelParameters, delta_fraction: float) -> float:
    if epsilon <= 0:
        raise CertificateInfeasible(
            f"epsilon = {epsilon!r} <= 0: stability condition a11*a99 > a19*a91 fails",
            check_stability_condition(p)[1],
        )
    if not 0.0 < delta_fraction < 1.0:
        raise ConfigurationError(f"must lie in (0, 1), got {delta_fraction!r}", "choices.delta_fraction")
    upper = min(epsilon, p.alpha2, p.alpha3, p.alpha4, p.alpha5, p.alpha6, p.alpha7, p.alpha8, p.alpha10)
    return delta_fraction * upper


def _require_resolved(choices: CertificateChoices) -> None:
    if not choices.is_resolved:
        raise ValueError("choices must be resolved (call CertificateChoices.resolve first)")


def compute_eps_k(p: ModelParameters, choices: CertificateChoices, delta: float) -> tuple[float, ...]:
    _require_resolved(choices)
    c = choices
    X3, X4, X5, X6 = p.xstar3, p.xstar4, p.xstar5, p.xstar6
    eps3 = 2 * (p.alpha3 - delta) / (
        p.b32 * p.rho32 * (X3 + c.theta3) * math.exp(c.kappa3 * p.tau3 / 2) + (p.b32 + p.b3 * X5) * X3
    )
    eps4 = 2 * (p.alpha4 - delta) / (
        p.b42 * p.rho42 * (X4 + c.theta4) * math.exp(c.kappa4 * p.tau4 / 2) + (p.b42 + p.b4 * X6) * X4
    )
    eps5 = (p.alpha5 - delta) / (
        p.b5 * p.rho5 * (X3 + c.theta3) * (X5 + c.theta5) * math.exp(c.kappa5 * p.tau5 / 2)
        + p.b5 * X3 * X5
    )
    eps6 = 2 * (p.alpha6 - delta) / (
        p.b6 * p.rho6 * (X4 + c.theta4) * (X6 + c.theta6) * math.exp(c.kappa6 * p.tau6 / 2)
        + p.b6 * X4 * X6
    )
    denom7 = p.b7 * p.rho7 * (X4 + c.theta4) * (X6 + c.theta6) * math.exp(c.kappa7 * p.tau7 / 2)
    if denom7 == 0:
        raise ConfigurationError("b7*rho7 vanishes: eps7 and beta7 undefined", "parameters.b7")
    eps7 = (p.alpha7 - delta) / denom7
    return eps3, eps4, eps5, eps6, eps7


def compute_beta_k(p: ModelParameters, choices: CertificateChoices, eps) -> tuple[float, ...]:
    _require_resolved(choices)
    c = choices
    eps3, eps4, eps5, eps6, eps7 = eps
    if min(eps) <= 0:
        raise ConfigurationError("eps_k must be positive; beta_k undefined")
    X3, X4, X5, X6 = p.xstar3, p.xstar4, p.xstar5, p.xstar6
    beta3 = p.b32 * p.rho32 * (X3 + c.theta3) * math.exp(c.kappa3 * p.tau3 / 2) / eps3
    beta4 = p.b42 * p.rho42 * (X4 + c.theta4) * math.exp(c.kappa4 * p.tau4 / 2) / eps4
    beta5 = p.b5 * p.rho5 * (X3 + c.theta3) * (X5 + c.theta5) * math.exp(c.kappa5 * p.tau5 / 2) / eps5
    beta6 = p.b6 * p.rho6 * (X4 + c.theta4) * (X6 + c.theta6) * math.exp(c.kappa6 * p.tau6 / 2) / eps6
    beta7 = p.b7 * p.rho7 * (X4 + c.theta4) * (X6 + c.theta6) * math.exp(c.kappa7 * p.tau7 / 2) / eps7
    return beta3, beta4, beta5, beta6, beta7


def compute_h(p: ModelParameters, choices: CertificateChoices, delta: float, epsilon: float, a) -> tuple[float, ...]:
    """Weights h1..h10 of the quadratic part of the functional."""
    _require_resolved(choices)
    c = choices
    a11, a99, a19, a91 = a
    X3, X4, X5, X6, X7 = p.xstar3, p.xstar4, p.xstar5, p.xstar6, p.xstar7
    grow5 = math.exp(c.kappa5 * p.tau5 / 2)
    grow7 = math.exp(c.kappa7 * p.tau7)
    base5 = p.b5 * p.rho5 * (X3 + c.theta3) * (X5 + c.theta5) * grow5 + p.b5 * X3 * X5
    blk7 = (X4 + c.theta4) ** 2 * (X6 + c.theta6) ** 2 * grow7

    left = a91 / a19 * ((p.b59 * X5) ** 2 / base5 ** 2 + 1.0)
    right = (
        5.0 * (p.gamma21 * p.bigM) ** 2 / (p.alpha2 - delta) ** 2
        + (p.gamma81 * p.rho8 / p.alpha8 * X7) ** 2
        * (p.alpha7 - delta) ** 2 / ((p.b7 * p.rho7 * p.rho8) ** 2 * blk7)
    )
    h1 = max(left, right) / (2.0 * (epsilon - delta))
    h2 = 5.0 / (p.alpha2 - delta)
    h3 = 2 * (p.alpha3 - delta) / (
        p.b32 * p.rho32 * (X3 + c.theta3) * math.exp(c.kappa3 * p.tau3 / 2) + (p.b32 + p.b3 * X5) * X3
    ) ** 2
    h4 = 2 * (p.alpha4 - delta) / (
        p.b42 * p.rho42 * (X4 + c.theta4) * math.exp(c.kappa4 * p.tau4 / 2) + (p.b42 + p.b4 * X6) * X4
    ) ** 2
    h5 = (p.alpha5 - delta) / base5 ** 2
    h6 = 2 * (p.alpha6 - delta) / (
        p.b6 * p.rho6 * (X4 + c.theta4) * (X6 + c.theta6) * math.exp(c.kappa6 * p.tau6 / 2)
        + p.b6 * X4 * X6
    ) ** 2
    h7 = (p.alpha7 - delta) / ((p.b7 * p.rho7) ** 2 * blk7)
    h8 = (p.alpha7 - delta) ** 2 * (p.alpha8 - delta) / ((p.b7 * p.rho7 * p.rho8) ** 2 * blk7)
    h9 = h1 * a19 / a91
    h10 = 2 * (p.alpha10 - delta) / (p.b95 * X5 + p.b10) ** 2
    return h1, h2, h3, h4, h5, h6, h7, h8, h9, h10


def compute_omega(delta: float, choices: CertificateChoices) -> float:
    """Guaranteed exponential decay rate."""
    _require_resolved(choices)
    return 0.5 * min(2.0 * delta, *choices.kappa)


def compute_q(p: ModelParameters, h) -> float:
    """Coefficient of V^(3/2) bounding the cubic terms of dV/dt."""
    h1, h2, h3, h4, h5, h6, h7, h8, h9, h10 = h
    s = math.sqrt
    gC = p.gamma19 * p.bigC
    return 2.0 * (
        p.n * p.b95 * s(h1) / s(h5 * h9)
        + p.gamma18 / s(h8)
        + gC / s(h9)
        + gC / s(h10)
        + p.b3 * p.xstar3 * s(h3) / s(h2 * h5)
        + p.b4 * p.xstar4 * s(h4) / s(h2 * h6)
        + p.b5 * p.xstar5 * s(h5) / s(h2 * h3)
        + p.b6 * p.xstar6 * s(h6) / s(h2 * h4)
        + p.b95 / s(h5)
        + p.b95 * s(h10) / s(h5 * h9)
    )


def compute_aux_eps(p: ModelParameters, a, delta: float) -> tuple[float, ...]:
    """Young-inequality weights (eps1, eps2, eps9, eps59, eps87, eps81, eps10)."""
    a11, a99, a19, a91 = a
    eps1 = ((a11 - a99) + math.sqrt((a11 - a99) ** 2 + 4.0 * a19 * a91)) / (2.0 * a19)
    eps9 = 1.0 / eps1
    eps2 = (p.alpha2 - delta) / (p.gamma21 * p.bigM)
    eps59 = (p.alpha5 - delta) / (p.b59 * p.xstar5)
    eps87 = (p.alpha8 - delta) / p.rho8
    eps81 = (p.alpha8 - delta) * p.alpha8 / (p.gamma81 * p.rho8 * p.xstar7)
    eps10 = 2.0 * (p.alpha10 - delta) / (p.b95 * p.xstar5 + p.b10)
    return eps1, eps2, eps9, eps59, eps87, eps81, eps10


# ---------------------------------------------------------------------------
# r diagnostics


def r_terms(p: ModelParameters, c: CertificateChoices, k) -> dict[int, list[float]]:
    """Additive terms of each r_j = p_j - 2*delta, before any simplification.

    ``k`` is any object with the certificate's constant attributes (a
    :class:`Certificate`, possibly with perturbed fields).
    """
    _require_resolved(c)
    d = k.delta
    X3, X4, X5, X6, X7 = p.xstar3, p.xstar4, p.xstar5, p.xstar6, p.xstar7
    g21 = p.gamma21 * p.bigM
    g81 = p.gamma81 * p.rho8 / p.alpha8 * X7
    e = math.exp
    return {
        1: [2 * k.a11, -k.eps1 * k.a19, -k.a91 * (k.h9 / k.h1) / k.eps9,
            -g21 * (k.h2 / k.h1) / k.eps2, -g81 * (k.h8 / k.h1) / k.eps81, -2 * d],
        2: [2 * (p.alpha2 - d), -k.eps2 * g21,
            -k.beta3 * k.h3 / k.h2, -k.beta4 * k.h4 / k.h2, -k.beta5 * k.h5 / k.h2,
            -k.beta6 * k.h6 / k.h2, -k.beta7 * k.h7 / k.h2,
            -(p.b32 + p.b3 * X5) * X3 * (k.h3 / k.h2) / k.eps3,
            -(p.b42 + p.b4 * X6) * X4 * (k.h4 / k.h2) / k.eps4,
            -p.b5 * X3 * X5 * (k.h5 / k.h2) / k.eps5,
            -p.b6 * X4 * X6 * (k.h6 / k.h2) / k.eps6],
        3: [2 * (p.alpha3 - d),
            -e(c.kappa3 * p.tau3) / k.beta3 * (p.b32 * p.rho32) ** 2 * (X3 + c.theta3) ** 2,
            -k.eps3 * (p.b32 + p.b3 * X5) * X3],
        4: [2 * (p.alpha4 - d),
            -e(c.kappa4 * p.tau4) / k.beta4 * (p.b42 * p.rho42) ** 2 * (X4 + c.theta4) ** 2,
            -k.eps4 * (p.b42 + p.b4 * X6) * X4],
        5: [2 * (p.alpha5 - d),
            -e(c.kappa5 * p.tau5) / k.beta5 * (p.b5 * p.rho5) ** 2 * (X3 + c.theta3) ** 2 * (X5 + c.theta5) ** 2,
            -k.eps5 * p.b5 * X3 * X5, -k.eps59 * p.b59 * X5],
        6: [2 * (p.alpha6 - d),
            -e(c.kappa6 * p.tau6) / k.beta6 * (p.b6 * p.rho6) ** 2 * (X4 + c.theta4) ** 2 * (X6 + c.theta6) ** 2,
            -k.eps6 * p.b6 * X4 * X6],
        7: [2 * (p.alpha7 - d),
            -e(c.kappa7 * p.tau7) / k.beta7 * (p.b7 * p.rho7) ** 2 * (X4 + c.theta4) ** 2 * (X6 + c.theta6) ** 2,
            -p.rho8 * (k.h8 / k.h7) / k.eps87],
        8: [2 * (p.alpha8 - d), -k.eps87 * p.rho8, -k.eps81 * g81],
        9: [2 * k.a99, -k.eps9 * k.a91, -k.a19 * (k.h1 / k.h9) / k.eps1,
            -p.b59 * X5 * (k.h5 / k.h9) / k.eps59,
            -(p.b95 * X5 + p.b10) * (k.h10 / k.h9) / k.eps10, -2 * d],
        10: [2 * (p.alpha10 - d), -k.eps10 * (p.b95 * X5 + p.b10)],
    }


def compute_r_diagnostics(p: ModelParameters, choices: CertificateChoices, cert) -> tuple[float, ...]:
    terms = r_terms(p, choices, cert)
    return tuple(math.fsum(terms[j]) for j in range(1, 11))


def r_violations(p: ModelParameters, choices: CertificateChoices, cert) -> list[str]:
    """Human-readable list of failed r identities (empty when consistent)."""
    out = []
    terms = r_terms(p, choices, cert)
    for j in ZERO_R:
        r = math.fsum(terms[j])
        scale = max(abs(t) for t in terms[j])
        if abs(r) > IDENTITY_RTOL * scale:
            out.append(f"r{j} = {r!r} (scale {scale!r}) should vanish")
    for j in NONNEG_R:
        r = math.fsum(terms[j])
        if r < -SIGN_ATOL:
            out.append(f"r{j} = {r!r} should be non-negative")
    return out


# ---------------------------------------------------------------------------
# assembly


def build_certificate(p: ModelParameters, choices: CertificateChoices | None = None) -> Certificate:
    """Run the full constant pipeline and validate the result."""
    choices = CertificateChoices() if choices is None else choices
    ok, margin = check_stability_condition(p)
    a = compute_a_constants(p)
    epsilon = compute_epsilon(*a)
    if not ok or epsilon <= 0:
        raise CertificateInfeasible(
            f"stability condition a11*a99 > a19*a91 fails (margin {margin!r})", margin
        )
    delta = compute_delta(epsilon, p, choices.delta_fraction)
    c = choices.resolve(p, delta)
    eps_k = compute_eps_k(p, c, delta)
    beta = compute_beta_k(p, c, eps_k)
    h = compute_h(p, c, delta, epsilon, a)
    omega = compute_omega(delta, c)
    q = compute_q(p, h)
    aux = compute_aux_eps(p, a, delta)

    values = dict(zip(("a11", "a99", "a19", "a91"), a))
    values.update(epsilon=epsilon, delta=delta, omega=omega, q=q)
    values.update(zip(("eps3", "eps4", "eps5", "eps6", "eps7"), eps_k))
    values.update(zip(("beta3", "beta4", "beta5", "beta6", "beta7"), beta))
    values.update({f"h{j}": v for j, v in enumerate(h, start=1)})
    values.update(zip(("eps1", "eps2", "eps9", "eps59", "eps87", "eps81", "eps10"), aux))
    cert = Certificate(params=p, choices=c, **values)

    r = compute_r_diagnostics(p, c, cert)
    cert = replace(cert, **{f"r{j}": v for j, v in enumerate(r, start=1)})

    problems = r_violations(p, c, cert)
    for name, v in values.items():
        if not (v > 0 and math.isfinite(v)):
            problems.append(f"{name} = {v!r} should be finite and positive")
    upper = min(epsilon, p.alpha2, p.alpha3, p.alpha4, p.alpha5, p.alpha6, p.alpha7, p.alpha8, p.alpha10)
    if not 0 < delta < upper:
        problems.append(f"delta = {delta!r} outside (0, {upper!r})")
    if problems:
        raise InternalConsistencyError("; ".join(problems))
    return cert
