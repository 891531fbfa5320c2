import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from edgeworth_dp.errors import OrderTooLarge
from edgeworth_dp.rdp import (DEFAULT_ORDERS, RdpCurve, rdp_curve, rdp_delta, rdp_epsilon,
                              rdp_sampled_gaussian)

from oracles import RDP_EPS_ORDER2, RDP_VALUES


def _rdp_by_quadrature(q, sigma, alpha):
    # E_P[(dQ/dP)^alpha] integrated directly over the Gaussian output.
    def integrand(t):
        log_ratio = np.logaddexp(math.log1p(-q), math.log(q) + (2.0 * t - 1.0) / (2.0 * sigma ** 2))
        log_density = -0.5 * (t / sigma) ** 2 - math.log(sigma * math.sqrt(2 * math.pi))
        return math.exp(log_density + alpha * log_ratio)

    width = 40.0 * sigma + alpha
    val, _ = integrate.quad(integrand, -width, width, points=[0.0, 1.0], epsabs=0,
                            epsrel=1e-13, limit=400)
    return math.log(val) / (alpha - 1)


def test_full_batch_closed_form():
    assert rdp_sampled_gaussian(1.0, 1.0, 2) == 1.0
    assert rdp_sampled_gaussian(1.0, 2.0, 10) == pytest.approx(10 / 8)


def test_vanishing_rate():
    assert rdp_sampled_gaussian(1e-8, 1.0, 8) < 1e-6


def test_matches_quadrature():
    assert rdp_sampled_gaussian(0.01, 1.0, 8) == pytest.approx(
        _rdp_by_quadrature(0.01, 1.0, 8), rel=1e-8)


@pytest.mark.parametrize("key", sorted(RDP_VALUES))
def test_matches_high_precision_values(key):
    assert rdp_sampled_gaussian(*key) == pytest.approx(RDP_VALUES[key], rel=1e-12)


def test_argument_checks():
    with pytest.raises(ValueError):
        rdp_sampled_gaussian(0.1, 1.0, 1)
    with pytest.raises(ValueError):
        rdp_sampled_gaussian(0.1, 1.0, 2.5)
    with pytest.raises(ValueError):
        rdp_sampled_gaussian(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        rdp_sampled_gaussian(0.1, 0.0, 2)


def test_overflow_is_signalled():
    with pytest.raises(OrderTooLarge):
        rdp_sampled_gaussian(0.1, 1e-160, 8)


def test_single_order_conversion():
    res = rdp_epsilon(1.0, 1.0, 1, 1e-5, orders=[2])
    assert res.epsilon == pytest.approx(RDP_EPS_ORDER2, rel=1e-14)
    assert res.epsilon == pytest.approx(1 + math.log(1e5), rel=1e-14)
    assert res.details["order"] == 2


def test_default_orders():
    assert DEFAULT_ORDERS == tuple(range(2, 65)) + (128, 256)


def test_records_argmin_order():
    res = rdp_epsilon(0.01, 1.0, 1000, 1e-5)
    alpha = res.details["order"]
    expected = 1000 * rdp_sampled_gaussian(0.01, 1.0, alpha) + math.log(1e5) / (alpha - 1)
    assert res.epsilon == pytest.approx(expected, rel=1e-14)
    assert all(res.epsilon <= 1000 * rdp_sampled_gaussian(0.01, 1.0, a) + math.log(1e5) / (a - 1)
               for a in DEFAULT_ORDERS)


def test_epsilon_grows_with_steps():
    assert rdp_epsilon(0.01, 1.0, 200, 1e-5).epsilon >= rdp_epsilon(0.01, 1.0, 100, 1e-5).epsilon


def test_zero_rate():
    assert rdp_epsilon(0.0, 1.0, 100, 1e-5).epsilon == 0.0
    assert rdp_delta(0.0, 1.0, 100, 1.0).delta == 0.0


def test_delta_inverts_epsilon():
    res = rdp_epsilon(0.02, 0.9, 500, 1e-6)
    back = rdp_delta(0.02, 0.9, 500, res.epsilon)
    assert back.delta == pytest.approx(1e-6, rel=1e-9)
    assert rdp_delta(0.02, 0.9, 500, res.epsilon * 1.01).delta < 1e-6


def test_delta_capped_at_one():
    assert rdp_delta(0.5, 0.5, 100, 0.0).delta == 1.0


def test_curve_validation():
    with pytest.raises(ValueError):
        RdpCurve((1, 2), (0.0, 0.1))
    with pytest.raises(ValueError):
        RdpCurve((2,), (0.1, 0.2))
    with pytest.raises(ValueError):
        RdpCurve((2,), (-0.1,))


@given(q=st.floats(1e-4, 1.0), sigma=st.floats(0.4, 5.0))
def test_curve_nondecreasing_in_order(q, sigma):
    values = np.array(rdp_curve(q, sigma, range(2, 40)).values)
    assert np.all(values >= 0)
    assert np.all(np.diff(values) >= -1e-12 * np.maximum(values[1:], 1e-300))


@given(q=st.floats(1e-3, 0.1), sigma=st.floats(0.5, 3.0), m=st.integers(1, 3000))
def test_epsilon_nondecreasing_in_steps(q, sigma, m):
    assert rdp_epsilon(q, sigma, m + 1, 1e-5).epsilon >= rdp_epsilon(q, sigma, m, 1e-5).epsilon
