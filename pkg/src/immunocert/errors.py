"""Exception hierarchy shared by the simulation and certification modules."""


class DomainError(ValueError):
    """An argument lies outside the set on which a function is defined."""


class ConfigurationError(ValueError):
    """Invalid numerical settings or configuration document."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class CertificateInfeasible(ValueError):
    """The stability condition a11*a99 > a19*a91 fails, so no certificate exists."""

    def __init__(self, message: str, margin: float):
        self.margin = margin
        super().__init__(message)


class BasinError(ValueError):
    """Initial data violate sqrt(V0) < 2*omega/q."""


class IntegrationError(RuntimeError):
    """Failure inside the DDE integrator, tagged with the time it occurred."""

    def __init__(self, message: str, t: float | None = None):
        self.t = t
        super().__init__(message if t is None else f"{message} (t={t!r})")


class InternalConsistencyError(RuntimeError):
    """A certificate identity that must hold by construction did not."""
