"""
Shot-noise-unit arithmetic and statistics of hard-clipped Gaussian variables.

All amplitudes are in √N0 and all variances in N0 (N0 = 1). Volts appear only
at the I/O boundary through ShotNoiseCalibration.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.special import ndtr, roots_hermite

from .utils import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
DEFAULT_QUADRATURE_ORDER = 128
MAX_QUADRATURE_ORDER = 4096
QUADRATURE_RTOL = 1e-9


class QuadratureError(RuntimeError):
    """Gauss-Hermite quadrature did not converge."""

    def __init__(self, message: str, order: int):
        super().__init__(f"{message} (order {order})")
        self.order = order


@dataclass(frozen=True)
class ShotNoiseCalibration:
    """Voltage of one √N0 at the detector output."""
    volts_per_sqrt_n0: float
    n0: float = 1.0

    def __post_init__(self):
        if not self.volts_per_sqrt_n0 > 0:
            raise ValueError(f"volts_per_sqrt_n0 must be positive, got {self.volts_per_sqrt_n0}")
        if self.n0 != 1.0:
            raise ValueError("n0 is fixed at 1 in shot-noise units")

    @classmethod
    def from_anchor(cls, volts: float, snu: float) -> "ShotNoiseCalibration":
        """Calibration from one measured correspondence, e.g. -2.5 V at -106 √N0."""
        if snu == 0:
            raise ValueError("anchor quadrature value must be non-zero")
        return cls(volts_per_sqrt_n0=volts / snu)


@dataclass(frozen=True)
class DetectorLimits:
    """Linear range [alpha1, alpha2] of the homodyne output, in √N0."""
    alpha1: float
    alpha2: float

    def __post_init__(self):
        if not self.alpha1 < 0 < self.alpha2:
            raise ValueError(
                f"detector limits must satisfy alpha1 < 0 < alpha2, got ({self.alpha1}, {self.alpha2})"
            )

    @classmethod
    def from_volts(cls, v1: float, v2: float, cal: ShotNoiseCalibration) -> "DetectorLimits":
        return cls(alpha1=volts_to_snu(v1, cal), alpha2=volts_to_snu(v2, cal))

    @classmethod
    def wide(cls, bound: float = 1e9) -> "DetectorLimits":
        """Limits far enough out that the detector behaves linearly."""
        return cls(alpha1=-bound, alpha2=bound)


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"variance must be non-negative, got {self.variance}")


def volts_to_snu(v: ArrayLike, cal: ShotNoiseCalibration) -> ArrayLike:
    return v / cal.volts_per_sqrt_n0


def snu_to_volts(x: ArrayLike, cal: ShotNoiseCalibration) -> ArrayLike:
    return x * cal.volts_per_sqrt_n0


def clamp(x: ArrayLike, limits: DetectorLimits) -> ArrayLike:
    """Saturating detector response: identity on [alpha1, alpha2], constant outside."""
    clipped = np.clip(x, limits.alpha1, limits.alpha2)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


def _clipped_stats(mu: np.ndarray, sigma: float, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and variance of clamp(Y) for Y ~ N(mu, sigma^2), vectorized over mu.

    Moments are taken about r = clamp(mu) so that a mean far outside the
    range does not cancel catastrophically against the limit it sits on.
    """
    mu = np.asarray(mu, dtype=float)
    r = np.clip(mu, lo, hi)
    if sigma == 0:
        return r, np.zeros_like(r)

    m = mu - r
    low = lo - r
    high = hi - r
    with np.errstate(invalid="ignore", over="ignore"):
        return _shifted_moments(r, m, low, high, (lo - mu) / sigma, (hi - mu) / sigma, sigma)


def _shifted_moments(r, m, low, high, a, b, sigma):
    below = ndtr(a)
    above = ndtr(-b)
    inside = ndtr(b) - below
    pdf_a = np.exp(-0.5 * a * a) * _INV_SQRT_2PI
    pdf_b = np.exp(-0.5 * b * b) * _INV_SQRT_2PI

    finite_low = np.isfinite(low)
    finite_high = np.isfinite(high)
    low_term = np.where(finite_low, low * below, 0.0)
    high_term = np.where(finite_high, high * above, 0.0)
    low_sq = np.where(finite_low, low * low * below, 0.0)
    high_sq = np.where(finite_high, high * high * above, 0.0)
    a_pdf = np.where(np.isfinite(a), a * pdf_a, 0.0)
    b_pdf = np.where(np.isfinite(b), b * pdf_b, 0.0)

    first = low_term + high_term + m * inside + sigma * (pdf_a - pdf_b)
    second = (
        low_sq
        + high_sq
        + (m * m + sigma * sigma) * inside
        + 2.0 * m * sigma * (pdf_a - pdf_b)
        + sigma * sigma * (a_pdf - b_pdf)
    )
    variance = np.maximum(second - first * first, 0.0)
    return r + first, variance


def clipped_moments(g: GaussianSpec, limits: DetectorLimits) -> Tuple[float, float]:
    """
    Exact mean and variance of clamp(X) for X ~ g.

    Args:
        g: Pre-clamp Gaussian
        limits: Detector limits

    Returns:
        (mean, variance) of the clamped variable; a zero-variance input is
        treated as the deterministic clamp of its mean
    """
    mean, variance = _clipped_stats(np.array(g.mean), float(np.sqrt(g.variance)), limits.alpha1, limits.alpha2)
    return float(mean), float(variance)


def clipped_mean(mu: np.ndarray, sigma: float, limits: DetectorLimits) -> np.ndarray:
    """E[clamp(Y)] for Y ~ N(mu, sigma^2), elementwise over ``mu``."""
    return _clipped_stats(mu, sigma, limits.alpha1, limits.alpha2)[0]


@lru_cache(maxsize=16)
def _hermite_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_hermite(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _covariance_at_order(a: float, c: float, x_var: float, noise_std: float,
                         limits: DetectorLimits, order: int) -> Tuple[float, float]:
    nodes, weights = _hermite_rule(order)
    x = np.sqrt(2.0 * x_var) * nodes
    inner = clipped_mean(a * x + c, noise_std, limits)
    centre = float(clipped_mean(np.array([c]), noise_std, limits)[0])
    # sum(w * x) = 0, so subtracting the centre leaves the integral unchanged
    value = float(np.dot(weights, x * (inner - centre)) / np.sqrt(np.pi))
    return value, centre


def clipped_covariance(
    a: float,
    c: float,
    x_var: float,
    n_var: float,
    limits: DetectorLimits,
    order: int = DEFAULT_QUADRATURE_ORDER,
    max_order: int = MAX_QUADRATURE_ORDER,
    rtol: float = QUADRATURE_RTOL,
) -> float:
    """
    Cov(X, clamp(a*X + c + N)) with X ~ N(0, x_var) and N ~ N(0, n_var).

    The outer expectation over X uses Gauss-Hermite quadrature; the inner
    conditional clipped mean is closed form. Each estimate at order n is
    checked against order 2n, doubling until agreement or ``max_order``.

    Args:
        a: Scale applied to X
        c: Offset (√N0)
        x_var: Variance of X (N0)
        n_var: Variance of the independent noise N (N0)
        limits: Detector limits
        order: Starting quadrature order
        max_order: Largest order tried before giving up
        rtol: Relative agreement required between successive orders

    Returns:
        The covariance (N0)

    Raises:
        QuadratureError: if successive orders never agree
    """
    if not x_var > 0:
        raise ValueError(f"x_var must be positive, got {x_var}")
    if not n_var >= 0:
        raise ValueError(f"n_var must be non-negative, got {n_var}")
    if order < 2:
        raise ValueError(f"quadrature order must be at least 2, got {order}")

    noise_std = float(np.sqrt(n_var))
    previous, centre = _covariance_at_order(a, c, x_var, noise_std, limits, order)
    scale = max(abs(centre), abs(a) * np.sqrt(x_var), 1.0)
    atol = 1e3 * np.finfo(float).eps * scale * np.sqrt(x_var)

    n = order
    while 2 * n <= max_order:
        n *= 2
        current, _ = _covariance_at_order(a, c, x_var, noise_std, limits, n)
        if abs(current - previous) <= rtol * abs(current) + atol:
            return current
        logger.debug(f"Quadrature order {n // 2} vs {n} disagree by {abs(current - previous):.3e}")
        previous = current

    raise QuadratureError(
        f"clipped covariance did not converge for a={a}, c={c}, x_var={x_var}, n_var={n_var}", order=n
    )


def montecarlo_clipped_moments(
    g: GaussianSpec, limits: DetectorLimits, n: int, seed: int = 0
) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """
    Sampling oracle for clipped_moments.

    Returns:
        ((mean, variance), (standard error of mean, standard error of variance))
    """
    rng = np.random.default_rng(seed)
    w = np.clip(rng.normal(g.mean, np.sqrt(g.variance), n), limits.alpha1, limits.alpha2)
    mean = float(w.mean())
    dev2 = (w - mean) ** 2
    variance = float(dev2.mean())
    se_mean = float(w.std() / np.sqrt(n))
    se_var = float(dev2.std() / np.sqrt(n))
    return (mean, variance), (se_mean, se_var)


def montecarlo_clipped_covariance(
    a: float, c: float, x_var: float, n_var: float, limits: DetectorLimits, n: int, seed: int = 0
) -> Tuple[float, float]:
    """Sampling oracle for clipped_covariance: (covariance, standard error)."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, np.sqrt(x_var), n)
    w = np.clip(a * x + c + rng.normal(0.0, np.sqrt(n_var), n), limits.alpha1, limits.alpha2)
    terms = x * (w - w.mean())
    return float(terms.mean()), float(terms.std() / np.sqrt(n))
