import numpy as np
import pytest
from hypothesis import given, strategies as st

from lago.links import (Link, expit, inverse, inverse_deriv, inverse_deriv2,
                        link_apply, valid_mean)

ALL_LINKS = list(Link)


@pytest.mark.parametrize("link", ALL_LINKS)
def test_roundtrip_identity_on_linear_scale(link):
    etas = np.linspace(-30, 30, 121)
    back = link_apply(link, inverse(link, etas))
    if link is Link.LOGIT:
        # beyond |eta| ~ 16.7 the roundtrip error is representational: the
        # float64 mean only carries ~ulp/(mu(1-mu)) of eta information
        inner = np.abs(etas) <= 16
        assert np.max(np.abs(back[inner] - etas[inner])) < 1e-9
        assert np.max(np.abs(back - etas)) < 5e-3
    else:
        assert np.max(np.abs(back - etas)) < 1e-9


@pytest.mark.parametrize("link", ALL_LINKS)
def test_inverse_roundtrip_tolerance(link):
    # mutual inverses on the valid range, tolerance 1e-12
    etas = np.linspace(-20, 20, 81)
    mus = inverse(link, etas)
    assert np.max(np.abs(inverse(link, link_apply(link, mus)) - mus)) < 1e-12


@pytest.mark.parametrize("link", ALL_LINKS)
def test_first_derivative_matches_central_difference(link):
    rng = np.random.default_rng(1)
    etas = rng.uniform(-8, 8, 100)
    h = 1e-5
    fd = (inverse(link, etas + h) - inverse(link, etas - h)) / (2 * h)
    an = inverse_deriv(link, etas)
    denom = np.maximum(np.abs(fd), 1e-12)
    assert np.max(np.abs(an - fd) / denom) < 1e-5


@pytest.mark.parametrize("link", ALL_LINKS)
def test_second_derivative_matches_central_difference(link):
    rng = np.random.default_rng(2)
    etas = rng.uniform(-6, 6, 100)
    h = 1e-4
    fd = (inverse(link, etas + h) - 2 * inverse(link, etas)
          + inverse(link, etas - h)) / h ** 2
    an = inverse_deriv2(link, etas)
    assert np.max(np.abs(an - fd) / np.maximum(np.abs(fd), 1e-6)) < 1e-4


def test_logit_mean_strictly_inside_unit_interval():
    etas = np.array([-700.0, -35.0, 0.0, 35.0, 700.0])
    mus = expit(etas)
    assert np.all(mus >= 0.0) and np.all(mus <= 1.0)
    assert 0.0 < expit(-30.0) and expit(30.0) < 1.0


def test_log_mean_strictly_positive():
    assert np.all(inverse(Link.LOG, np.linspace(-30, 5, 50)) > 0)


@given(st.floats(min_value=-30, max_value=30))
def test_expit_monotone(eta):
    assert expit(eta + 1e-3) >= expit(eta)


def test_valid_mean_per_link():
    assert valid_mean(Link.LOGIT, 0.5) and not valid_mean(Link.LOGIT, 1.2)
    assert valid_mean(Link.LOG, 2.0) and not valid_mean(Link.LOG, -0.1)
    assert valid_mean(Link.IDENTITY, -5.0)


def test_parse_rejects_unknown():
    with pytest.raises(ValueError, match="unknown link"):
        Link.parse("probit")
