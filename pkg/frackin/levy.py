import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import mpmath
import numpy as np
from scipy import integrate

from frackin.checks import check_alpha, check_positive
from frackin.constants import Numerics
from frackin.errors import DomainError, NonConvergenceError
from frackin.fraccore import FractionalOrder, gamma, log_gamma

log = logging.getLogger(__name__)

_LN_10 = math.log(10.0)


@dataclass(frozen=True)
class LevyProfile:
    """Parameters of the self-similar free-streaming solution."""

    order: FractionalOrder
    g: float
    t: float

    def __post_init__(self):
        check_positive("transport coefficient g", self.g)
        check_positive("time t", self.t)

    @property
    def scale(self) -> float:
        """Similarity factor (g t)^(-1/α)."""
        return (self.g * self.t) ** (-1.0 / self.order.alpha)


def _sin_half_pi(n: int) -> int:
    """Exact sin(nπ/2) for integer n."""
    return (0, 1, 0, -1)[n % 4]


def _quadrature_cutoff(alpha: float) -> float:
    """Wavenumber beyond which exp(-k^α) drops below the configured cutoff."""
    return math.log(1.0 / Numerics.quadrature_cutoff) ** (1.0 / alpha)


def levy_density_integral(alpha: float, x: float) -> float:
    """
    Symmetric α-stable density (1/π) ∫₀^∞ cos(kx) exp(-k^α) dk.

    The oscillatory factor is handled by QUADPACK's cosine-weighted rule, so
    accuracy does not depend on resolving cos(kx) by hand.
    """
    check_alpha(alpha)
    x = abs(float(x))
    cutoff = _quadrature_cutoff(alpha)

    def envelope(k: float) -> float:
        return math.exp(-(k**alpha))

    options = dict(
        epsabs=Numerics.quadrature_epsabs,
        epsrel=Numerics.quadrature_epsrel,
        limit=Numerics.quadrature_limit,
    )
    if x == 0.0:
        value, _ = integrate.quad(envelope, 0.0, cutoff, **options)
    else:
        value, _ = integrate.quad(
            envelope, 0.0, cutoff, weight="cos", wvar=x, **options
        )
    return value / math.pi


def levy_density_values(alpha: float, xs: Iterable[float]) -> np.ndarray:
    """Evaluate `levy_density_integral` at every point of `xs`."""
    return np.array([levy_density_integral(alpha, x) for x in xs])


def _series_log10_peak(alpha: float, x: float) -> float:
    """Largest log10 magnitude among the series terms, used to size the precision."""
    if x == 0.0:
        return 0.0
    log_x = math.log10(x)
    peak = -math.inf
    for n in range(1, Numerics.series_max_terms + 1, 2):
        magnitude = (n - 1) * log_x + (
            log_gamma(1.0 + n / alpha) - log_gamma(n + 1.0)
        ) / _LN_10
        if magnitude < peak:
            break
        peak = magnitude
    return max(peak, 0.0)


def levy_density_series(alpha: float, x: float) -> float:
    """
    Stable density from its convergent power series, for 1 < α <= 2.

    Only odd indices n = 2j + 1 contribute, which leaves
    (1/π) Σ_j (-1)^j x^(2j) Γ(1 + n/α) / n!.
    The alternating terms grow to large magnitudes before they decay when |x|
    is a few units, so the sum is carried in extended precision.
    """
    if not (math.isfinite(alpha) and 1.0 < alpha <= 2.0):
        raise DomainError(f"the power series needs 1 < alpha <= 2, got {alpha}")
    x = abs(float(x))
    digits = Numerics.series_guard_digits + 17 + math.ceil(_series_log10_peak(alpha, x))

    with mpmath.workdps(digits):
        order = mpmath.mpf(alpha)
        x_squared = mpmath.mpf(x) ** 2
        power = mpmath.mpf(1)
        total = mpmath.mpf(0)
        for n in range(1, Numerics.series_max_terms + 1, 2):
            term = power * mpmath.gamma(1 + n / order) / mpmath.factorial(n)
            total += term * _sin_half_pi(n)
            if abs(term) < Numerics.series_term_tolerance:
                log.trace(f"Series for alpha={alpha}, x={x} converged at n={n}")
                return float(total / mpmath.pi)
            power *= x_squared

    raise NonConvergenceError(
        f"stable-density series for alpha={alpha}, x={x} did not converge "
        + f"within {Numerics.series_max_terms} terms"
    )


def levy_tail_asymptotic(alpha: float, x: float, n_terms: int) -> float:
    """Large-x expansion -(1/(πx)) Σ (-1)^n x^(-nα) Γ(1+nα) sin(nπ/2) / n!."""
    if not (math.isfinite(alpha) and 1.0 < alpha < 2.0):
        raise DomainError(f"the tail expansion needs 1 < alpha < 2, got {alpha}")
    if not x > 0:
        raise DomainError(f"the tail expansion needs x > 0, got {x}")
    if n_terms < 1:
        raise DomainError(f"n_terms must be at least 1, got {n_terms}")

    total = 0.0
    for n in range(1, n_terms + 1):
        sine = _sin_half_pi(n)
        if sine == 0:
            continue
        total += (
            (-1) ** n * x ** (-n * alpha) * gamma(1.0 + n * alpha) * sine
            / math.factorial(n)
        )
    return -total / (math.pi * x)


def standard_tail_leading_term(alpha: float, x: float) -> float:
    """Leading term Γ(1+α) sin(πα/2) / (π x^(1+α)) of the stable-law tail."""
    if not x > 0:
        raise DomainError(f"the tail needs x > 0, got {x}")
    coefficient = gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0) / math.pi
    return coefficient * x ** (-1.0 - alpha)


@dataclass
class TailReport:
    """Quadrature values next to both leading-term constants."""

    alpha: float
    xs: list = field(default_factory=list)
    quadrature: list = field(default_factory=list)
    printed: list = field(default_factory=list)
    standard: list = field(default_factory=list)
    fitted_exponent: float = math.nan

    @property
    def exponent_error(self) -> float:
        """Distance of the fitted decay exponent from 1 + α."""
        return abs(self.fitted_exponent - (1.0 + self.alpha))

    def rows(self) -> list:
        return [
            (x, quad, printed, standard, quad / printed, quad / standard)
            for x, quad, printed, standard in zip(
                self.xs, self.quadrature, self.printed, self.standard
            )
        ]


def tail_report(alpha: float, xs: Iterable[float]) -> TailReport:
    """Compare quadrature against the printed and standard tail leading terms."""
    report = TailReport(alpha=alpha, xs=[float(x) for x in xs])
    if len(report.xs) < 2:
        raise DomainError("a tail report needs at least two abscissae")

    for x in report.xs:
        report.quadrature.append(levy_density_integral(alpha, x))
        report.printed.append(levy_tail_asymptotic(alpha, x, 1))
        report.standard.append(standard_tail_leading_term(alpha, x))

    slope, _ = np.polyfit(np.log(report.xs), np.log(report.quadrature), 1)
    report.fitted_exponent = float(-slope)

    for x, quad, printed, standard, *_ in report.rows():
        if abs(quad / printed - 1.0) > abs(quad / standard - 1.0):
            log.warning(
                f"Tail at x={x}: quadrature {quad:.6g} is closer to the standard "
                + f"constant ({standard:.6g}) than to the printed one ({printed:.6g})"
            )
    return report


def free_streaming_profile(profile: LevyProfile, q: float) -> float:
    """Free-streaming solution s L_α(s q) with s = (g t)^(-1/α)."""
    scale = profile.scale
    return scale * levy_density_integral(profile.order.alpha, scale * q)


def cauchy_density(x: "float | np.ndarray") -> "float | np.ndarray":
    """Closed form of the α = 1 density."""
    return 1.0 / (np.pi * (1.0 + np.square(x)))


def gauss_density(x: "float | np.ndarray") -> "float | np.ndarray":
    """Closed form of the α = 2 density."""
    return np.exp(-np.square(x) / 4.0) / (2.0 * np.sqrt(np.pi))
