import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from frackin import constants
from frackin.errors import DomainError, NonConvergenceError
from frackin.fraccore import FractionalOrder, gamma
from frackin.levy import (
    LevyProfile,
    cauchy_density,
    free_streaming_profile,
    gauss_density,
    levy_density_integral,
    levy_density_series,
    levy_density_values,
    levy_tail_asymptotic,
    standard_tail_leading_term,
    tail_report,
)


def test_cauchy_closed_form():
    xs = np.round(np.arange(-100, 101) * 0.1, 10)
    assert_allclose(levy_density_values(1.0, xs), cauchy_density(xs), atol=1e-8)


def test_gauss_closed_form():
    xs = np.linspace(-5.0, 5.0, 41)
    assert_allclose(levy_density_values(2.0, xs), gauss_density(xs), atol=1e-8)


@pytest.mark.parametrize("alpha", [1.5, 1.75, 2.0])
def test_series_matches_quadrature(alpha):
    xs = np.linspace(0.0, 2.0, 9)
    series = [levy_density_series(alpha, x) for x in xs]
    assert_allclose(series, levy_density_values(alpha, xs), atol=1e-10)


@pytest.mark.parametrize("alpha", [1.2, 1.8])
def test_series_matches_quadrature_out_to_three(alpha):
    xs = [0.0, 0.75, 1.5, 2.25, 3.0, -3.0]
    series = [levy_density_series(alpha, x) for x in xs]
    assert_allclose(series, levy_density_values(alpha, xs), atol=1e-6)


@pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
def test_density_at_origin(alpha):
    expected = gamma(1.0 + 1.0 / alpha) / math.pi
    assert levy_density_integral(alpha, 0.0) == pytest.approx(expected, rel=1e-8)
    assert levy_density_series(alpha, 0.0) == pytest.approx(expected, rel=1e-12)


def test_series_gives_the_gaussian_at_order_two():
    for x in (0.0, 0.5, 1.0, 3.0):
        assert levy_density_series(2.0, x) == pytest.approx(
            gauss_density(x), rel=1e-12
        )


def test_series_domain():
    with pytest.raises(DomainError):
        levy_density_series(1.0, 0.5)
    with pytest.raises(DomainError):
        levy_density_series(2.5, 0.5)


def test_series_reports_non_convergence(monkeypatch):
    monkeypatch.setitem(constants._CONFIG_JSON["numerics"], "series_max_terms", 5)
    with pytest.raises(NonConvergenceError):
        levy_density_series(1.5, 1.0)


@pytest.mark.parametrize("alpha", [1.0, 1.3, 1.5, 2.0])
def test_density_is_symmetric(alpha):
    for x in (0.3, 1.7, 6.0):
        assert levy_density_integral(alpha, -x) == levy_density_integral(alpha, x)


@pytest.mark.parametrize(
    "alpha, limit", [(1.0, 50), (1.5, 50), (1.9, 50), (2.0, 10)]
)
def test_density_is_positive(alpha, limit):
    xs = np.linspace(0.0, limit, 51)
    assert np.all(levy_density_values(alpha, xs) > 0.0)


@pytest.mark.parametrize("alpha", [1.0, 1.2, 1.5, 2.0])
def test_density_is_normalized(alpha):
    edge = 50.0
    half = levy_density_values(alpha, np.arange(501) * 0.1)
    mass = trapezoid(np.concatenate((half[:0:-1], half)), dx=0.1)

    # mass outside [-edge, edge] from the leading tail term
    if alpha < 2.0:
        coefficient = gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0) / math.pi
        outside = 2.0 * coefficient * edge**-alpha / alpha
    else:
        outside = 0.0
    assert mass + outside == pytest.approx(1.0, abs=2e-3)


def test_tail_expansion_domain():
    with pytest.raises(DomainError):
        levy_tail_asymptotic(2.0, 10.0, 1)
    with pytest.raises(DomainError):
        levy_tail_asymptotic(1.5, 0.0, 1)
    with pytest.raises(DomainError):
        levy_tail_asymptotic(1.5, 10.0, 0)


def test_printed_and_standard_tail_constants_differ_by_the_sine():
    for x in (5.0, 10.0, 40.0):
        ratio = levy_tail_asymptotic(1.5, x, 1) / standard_tail_leading_term(1.5, x)
        assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_tail_report(caplog):
    with caplog.at_level(logging.WARNING, logger="frackin.levy"):
        report = tail_report(1.5, [10.0, 20.0, 40.0])

    assert "closer to the standard constant" in caplog.text
    assert report.exponent_error < 0.1
    for x, quad, printed, standard, *_ in report.rows():
        assert abs(quad / standard - 1.0) < abs(quad / printed - 1.0)
    assert report.quadrature[-1] == pytest.approx(report.standard[-1], rel=0.05)
    assert len(report.rows()[0]) == 6


def test_tail_report_needs_two_points():
    with pytest.raises(DomainError):
        tail_report(1.5, [10.0])


def test_profile_validation():
    with pytest.raises(DomainError):
        LevyProfile(FractionalOrder(1.5), 0.0, 1.0)
    with pytest.raises(DomainError):
        LevyProfile(FractionalOrder(1.5), 1.0, -1.0)


@pytest.mark.parametrize("q", [0.0, 0.7, -2.5])
def test_free_streaming_profiles(q):
    gauss = LevyProfile(FractionalOrder(2.0), 1.0, 1.0)
    assert free_streaming_profile(gauss, q) == pytest.approx(
        gauss_density(q), abs=1e-10
    )

    # Cauchy of width g t = 2
    cauchy = LevyProfile(FractionalOrder(1.0), 1.0, 2.0)
    assert cauchy.scale == pytest.approx(0.5)
    assert free_streaming_profile(cauchy, q) == pytest.approx(
        2.0 / (math.pi * (4.0 + q**2)), abs=1e-10
    )
