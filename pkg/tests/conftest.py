import math

import numpy as np
import pytest

from immunocert.certificate import CertificateChoices, build_certificate
from immunocert.model import ModelParameters, check_stability_condition

DELAY_FIELDS = ("tau3", "tau4", "tau5", "tau6", "tau7")


def random_parameter_dict(rng, lo=0.3, hi=3.0, tau_lo=0.5, tau_hi=2.0):
    out = {}
    for name in ModelParameters.field_names():
        if name in DELAY_FIELDS:
            out[name] = float(rng.uniform(tau_lo, tau_hi))
        else:
            out[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    return out


def random_stable_parameters(rng, **kw):
    """Rejection-sample parameters satisfying the stability condition."""
    while True:
        p = ModelParameters(**random_parameter_dict(rng, **kw))
        if check_stability_condition(p)[0]:
            return p


def random_choices(rng, p):
    xs = (p.xstar3, p.xstar4, p.xstar5, p.xstar6)
    return CertificateChoices(
        **{f"theta{k}": float(x * rng.uniform(0.1, 2.0)) for k, x in zip((3, 4, 5, 6), xs)},
        **{f"kappa{k}": float(rng.uniform(0.05, 2.0)) for k in (3, 4, 5, 6, 7)},
        delta_fraction=float(rng.uniform(0.1, 0.9)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def default_params():
    return ModelParameters()


@pytest.fixture(scope="session")
def default_cert():
    return build_certificate(ModelParameters())
