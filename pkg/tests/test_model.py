import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_parameter_dict
from immunocert.certificate import compute_a_constants
from immunocert.errors import ConfigurationError, DomainError
from immunocert.model import (
    ModelParameters,
    XiFunction,
    check_stability_condition,
    make_rhs,
    rhs_original,
    rhs_shifted,
    stationary_point,
    to_original,
    to_shifted,
    xi_eval,
)

ZERO_DELAYED = np.zeros((5, 10))


def jacobian(f, y0, h=1e-6):
    # forward difference in y10, which may not go below 0
    cols = []
    for j in range(y0.size):
        e = np.zeros_like(y0)
        e[j] = h
        if j == 9:
            cols.append((f(y0 + e) - f(y0)) / h)
        else:
            cols.append((f(y0 + e) - f(y0 - e)) / (2 * h))
    return np.array(cols).T


def test_default_parameters_satisfy_stability_condition():
    ok, margin = check_stability_condition(ModelParameters())
    assert ok
    # (1 + 1 + 1) * (0.1 + 0.4) - 0.1 * (0.1 + 0.2)
    assert margin == pytest.approx(1.47, rel=1e-14)


def test_inflated_sigma_breaks_stability_condition():
    ok, margin = check_stability_condition(replace(ModelParameters(), sigma=50.0))
    assert not ok and margin < 0


def test_stationary_point_layout(default_params):
    p = replace(default_params, xstar7=2.0, rho8=3.0, alpha8=1.5)
    xs = stationary_point(p)
    assert xs[[0, 1, 8, 9]].tolist() == [0.0, 0.0, 0.0, 0.0]
    assert xs[7] == pytest.approx(3.0 * 2.0 / 1.5)


@pytest.mark.parametrize("name", ["alpha2", "tau5", "xstar3", "sigma"])
@pytest.mark.parametrize("value", [0.0, -1.0, math.nan, math.inf])
def test_parameters_reject_non_positive(name, value):
    with pytest.raises(ConfigurationError, match=name):
        ModelParameters(**{name: value})


def test_a_constants_are_linearisation_entries(default_params):
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = ModelParameters(**random_parameter_dict(rng))
        xi = XiFunction()
        J = jacobian(lambda y: rhs_shifted(p, xi, y, ZERO_DELAYED), np.zeros(10))
        a11, a99, a19, a91 = compute_a_constants(p)
        assert -J[0, 0] == pytest.approx(a11, rel=1e-8)
        assert J[0, 8] == pytest.approx(a19, rel=1e-8)
        assert J[8, 0] == pytest.approx(a91, rel=1e-8)
        assert -J[8, 8] == pytest.approx(a99, rel=1e-8)


def test_delayed_rows_feed_the_expected_equations(default_params):
    p, xi = default_params, XiFunction()
    base = rhs_shifted(p, xi, np.zeros(10), ZERO_DELAYED)
    for row, comp in enumerate((2, 3, 4, 5, 6)):
        d = ZERO_DELAYED.copy()
        d[row, 1] = 1e-3  # delayed stimulated macrophages
        diff = rhs_shifted(p, xi, np.zeros(10), d) - base
        assert np.flatnonzero(diff).tolist() == [comp]


def test_xi_damage_factor_scales_production(default_params):
    p = default_params
    d = ZERO_DELAYED.copy()
    d[:, 1] = 0.01
    y = np.zeros(10)
    healthy = rhs_shifted(p, XiFunction(), y, d)
    y[9] = 0.25
    damaged = rhs_shifted(p, XiFunction(), y, d)
    assert damaged[2] == pytest.approx(0.75 * healthy[2])


@pytest.mark.parametrize("kind", ["linear", "smooth-cubic"])
def test_xi_endpoints_and_monotone(kind):
    f = XiFunction(kind)
    u = np.linspace(0, 1, 101)
    vals = np.array([f(x) for x in u])
    assert vals[0] == 1.0 and vals[-1] == 0.0
    assert np.all(np.diff(vals) <= 0)


def test_xi_user_table():
    f = XiFunction("user-table", ((0.0, 1.0), (0.5, 0.2), (1.0, 0.0)))
    assert f(0.25) == pytest.approx(0.6)


@pytest.mark.parametrize("table", [
    ((0.0, 1.0), (1.0, 0.5)),
    ((0.0, 1.0), (0.5, 0.2), (0.4, 0.1), (1.0, 0.0)),
    ((0.0, 1.0), (0.5, 0.0), (0.7, 0.3), (1.0, 0.0)),
    ((0.0, 1.0),),
])
def test_xi_user_table_validation(table):
    with pytest.raises(ConfigurationError):
        XiFunction("user-table", table)


def test_xi_outside_domain():
    with pytest.raises(DomainError):
        xi_eval(XiFunction(), 1.0 + 1e-6)
    assert xi_eval(XiFunction(), 1.0 + 1e-13, clamp_tol=1e-12) == 0.0
    assert xi_eval(XiFunction(), -1e-13, clamp_tol=1e-12) == 1.0


def test_rhs_original_outside_xi_domain(default_params):
    x = stationary_point(default_params)
    x[9] = 1.5
    with pytest.raises(DomainError):
        rhs_original(default_params, XiFunction(), x, np.tile(x, (5, 1)))


def test_delayed_shape_checked(default_params):
    with pytest.raises(ValueError):
        rhs_shifted(default_params, XiFunction(), np.zeros(10), np.zeros((4, 10)))


def test_frame_round_trip(default_params):
    x = np.arange(10.0)
    assert np.array_equal(to_original(default_params, to_shifted(default_params, x)), x)


def test_make_rhs_frames(default_params):
    xs = stationary_point(default_params)
    lag = np.tile(xs, (5, 1))
    assert np.allclose(make_rhs(default_params, XiFunction(), "original")(0.0, xs, lag), 0.0, atol=1e-14)
    assert np.allclose(make_rhs(default_params, XiFunction())(0.0, np.zeros(10), ZERO_DELAYED), 0.0)
    with pytest.raises(ConfigurationError):
        make_rhs(default_params, XiFunction(), "polar")


@settings(max_examples=200, deadline=None)
@given(
    y=st.lists(st.floats(0.0, 1.0), min_size=10, max_size=10),
    lag=st.lists(st.floats(0.0, 1.0), min_size=50, max_size=50),
    sigma=st.floats(0.01, 5.0),
)
def test_frames_agree_property(y, lag, sigma):
    p = replace(ModelParameters(), sigma=sigma, xstar5=2.0)
    xs = stationary_point(p)
    x = np.array(y) * 2 * np.maximum(xs, 0.5)
    x[9] = y[9]
    xd = (np.array(lag).reshape(5, 10) * 2 * np.maximum(xs, 0.5))
    fo = rhs_original(p, XiFunction(), x, xd)
    fs = rhs_shifted(p, XiFunction(), x - xs, xd - xs)
    assert np.max(np.abs(fo - fs)) <= 1e-12 * max(1.0, np.max(np.abs(fo)))


def test_smooth_cubic_midpoint():
    assert xi_eval(XiFunction("smooth-cubic"), 0.5) == pytest.approx(0.5)


def test_all_zero_state_only_restoring_terms_survive(default_params):
    p = replace(default_params, alpha3=1.5, alpha5=0.7, xstar6=2.0)
    f = rhs_original(p, XiFunction(), np.zeros(10), ZERO_DELAYED)
    expected = np.zeros(10)
    expected[2:7] = [p.alpha3 * p.xstar3, p.alpha4 * p.xstar4, p.alpha5 * p.xstar5,
                     p.alpha6 * p.xstar6, p.alpha7 * p.xstar7]
    assert np.allclose(f, expected, rtol=0, atol=1e-15)


def test_infected_fraction_alone(default_params):
    p, c = default_params, 0.02
    y = np.zeros(10)
    y[8] = c
    f = rhs_shifted(p, XiFunction(), y, ZERO_DELAYED)
    assert f[0] == pytest.approx((p.nu + p.n * p.b95 * p.xstar5) * c)
    assert f[8] == pytest.approx(-(p.b95 * p.xstar5 + p.b10) * c)
    assert f[9] == pytest.approx((p.b95 * p.xstar5 + p.b10) * c)


def test_stability_margin_hand_value():
    # gamma12 M = gamma18 rho8 X7*/alpha8 = gamma19 C* = 1, b95 X5* = b10 = 1, sigma C* = 1, nu + n b95 X5* = 2
    p = ModelParameters(b95=1.0, b10=1.0, sigma=1.0, nu=1.0, n=1.0)
    ok, margin = check_stability_condition(p)
    assert ok and margin == pytest.approx(4.0)


def test_stability_boundary_is_not_stable():
    # binary-exact values: a11 = 3, a99 = 0.25 + 0.25, a19 = 0.5 + 2 * 0.25, a91 = 1.5
    p = ModelParameters(nu=0.5, b95=0.25, b10=0.25, sigma=1.5)
    ok, margin = check_stability_condition(p)
    assert margin == 0.0 and not ok


def test_margin_agrees_with_a_constants():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = ModelParameters(**random_parameter_dict(rng))
        a11, a99, a19, a91 = compute_a_constants(p)
        assert check_stability_condition(p)[1] == pytest.approx(a11 * a99 - a19 * a91, rel=1e-12, abs=1e-12)
