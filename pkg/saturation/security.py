"""
Asymptotic secret key rate of GMCS with homodyne detection and reverse
reconciliation, under collective attacks with a trusted detector.

    V = V_A + 1
    chi_line = 1/T - 1 + xi
    chi_hom = (1 - eta + v_ele) / eta
    chi_tot = chi_line + chi_hom / T
    I_AB = 1/2 log2((V + chi_tot) / (1 + chi_tot))
    A = V^2 (1 - 2T) + 2T + T^2 (V + chi_line)^2
    B = T^2 (V chi_line + 1)^2
    lambda_{1,2}^2 = 1/2 [A +- sqrt(A^2 - 4B)]
    C = [V sqrt(B) + T (V + chi_line) + A chi_hom] / [T (V + chi_tot)]
    D = sqrt(B) (V + sqrt(B) chi_hom) / [T (V + chi_tot)]
    lambda_{3,4}^2 = 1/2 [C +- sqrt(C^2 - 4D)]
    chi_BE = sum g((lambda_i - 1)/2) over i = 1, 2 minus the same over i = 3, 4
    K = beta I_AB - chi_BE

The code multiplies T through chi_line and chi_tot, so A, B, C and D stay
finite for any T in (0, 1].
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .utils import get_logger

logger = get_logger(__name__)

XI_TOLERANCE = 1e-6
EIGENVALUE_TOLERANCE = 1e-9
THRESHOLD_XTOL = 1e-7
THRESHOLD_BRACKET = 1e-6
V_A_BOUNDS = (0.1, 100.0)
V_A_XATOL = 1e-3
DEFAULT_BETA = 0.95
DEFAULT_XI_NOMINAL = 0.01


class NoKeyError(ValueError):
    """No positive key exists for the requested parameters."""


class InvalidCovarianceError(ValueError):
    """Symplectic eigenvalues fell below 1: the implied state is unphysical."""


@dataclass(frozen=True)
class SecurityParams:
    v_a: float
    t: float
    xi: float
    eta: float = 0.55
    v_ele: float = 0.01
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.v_a >= 0:
            raise ValueError(f"v_a must be non-negative, got {self.v_a}")
        if not 0 < self.t <= 1:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.v_ele >= 0:
            raise ValueError(f"v_ele must be non-negative, got {self.v_ele}")
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.xi >= -XI_TOLERANCE:
            raise ValueError(f"xi must be non-negative, got {self.xi}")
        if self.xi < 0:
            object.__setattr__(self, "xi", 0.0)

    @classmethod
    def from_estimate(cls, v_a: float, t_sat: float, xi_sat: float, eta: float, v_ele: float,
                      beta: float = DEFAULT_BETA) -> "SecurityParams":
        """Parameters as Alice and Bob would plug in their estimates: xi floored at 0, T capped at 1."""
        return cls(v_a=v_a, t=min(t_sat, 1.0), xi=max(xi_sat, 0.0), eta=eta, v_ele=v_ele, beta=beta)


@dataclass(frozen=True)
class ThresholdResult:
    """Null-key excess noise with a bracket showing the sign change of K."""
    xi_null: float
    lower: float
    upper: float
    k_lower: float
    k_upper: float


def entropy_g(x: float) -> float:
    """g(x) = (x+1) log2(x+1) - x log2(x), with g(0) = 0."""
    if x < 0:
        raise ValueError(f"g is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return float((x + 1.0) * np.log2(x + 1.0) - x * np.log2(x))


def _noises(s: SecurityParams) -> Tuple[float, float, float, float]:
    """V, T*chi_line, chi_hom and T*chi_tot; the T-scaled forms stay finite as T goes to 0."""
    v = s.v_a + 1.0
    t_chi_line = 1.0 - s.t + s.t * s.xi
    chi_hom = (1.0 - s.eta + s.v_ele) / s.eta
    t_chi_tot = t_chi_line + chi_hom
    return v, t_chi_line, chi_hom, t_chi_tot


def mutual_information(s: SecurityParams) -> float:
    """Alice-Bob mutual information (bits/pulse)."""
    v, _, _, t_chi_tot = _noises(s)
    return float(0.5 * np.log2((s.t * v + t_chi_tot) / (s.t + t_chi_tot)))


def _eigen_pair(trace_like: float, det_like: float) -> Tuple[float, float]:
    disc = max(trace_like ** 2 - 4.0 * det_like, 0.0)
    root = np.sqrt(disc)
    return float(np.sqrt(max(0.5 * (trace_like + root), 0.0))), float(np.sqrt(max(0.5 * (trace_like - root), 0.0)))


def symplectic_eigenvalues(s: SecurityParams) -> Tuple[float, float, float, float]:
    """(lambda1, lambda2) of Alice-Bob's state and (lambda3, lambda4) after Bob's homodyne."""
    v, t_chi_line, chi_hom, t_chi_tot = _noises(s)
    t = s.t
    t_v_chi = t * v + t_chi_line
    a = v ** 2 * (1.0 - 2.0 * t) + 2.0 * t + t_v_chi ** 2
    b = (v * t_chi_line + t) ** 2
    lam1, lam2 = _eigen_pair(a, b)
    sqrt_b = np.sqrt(b)
    denom = t * v + t_chi_tot
    c = (v * sqrt_b + t_v_chi + a * chi_hom) / denom
    d = sqrt_b * (v + sqrt_b * chi_hom) / denom
    lam3, lam4 = _eigen_pair(c, d)
    return lam1, lam2, lam3, lam4


def _g_of_eigenvalue(lam: float) -> float:
    x = (lam - 1.0) / 2.0
    if x < -EIGENVALUE_TOLERANCE:
        raise InvalidCovarianceError(f"symplectic eigenvalue {lam} is below 1")
    return entropy_g(max(x, 0.0))


def holevo_bound(s: SecurityParams) -> float:
    """Eve's Holevo information on Bob's data, chi_BE (bits/pulse)."""
    lam1, lam2, lam3, lam4 = symplectic_eigenvalues(s)
    chi = _g_of_eigenvalue(lam1) + _g_of_eigenvalue(lam2) - _g_of_eigenvalue(lam3) - _g_of_eigenvalue(lam4)
    if chi < -EIGENVALUE_TOLERANCE:
        raise InvalidCovarianceError(f"negative Holevo information {chi:.3e}")
    return max(chi, 0.0)


def key_rate(s: SecurityParams) -> float:
    """K = beta*I_AB - chi_BE; negative values are returned as they are."""
    return s.beta * mutual_information(s) - holevo_bound(s)


def _key_at(xi: float, t: float, v_a: float, eta: float, v_ele: float, beta: float) -> float:
    return key_rate(SecurityParams(v_a=v_a, t=t, xi=xi, eta=eta, v_ele=v_ele, beta=beta))


def null_key_threshold(t: float, v_a: float, eta: float, v_ele: float, beta: float = DEFAULT_BETA) -> ThresholdResult:
    """
    Excess noise at which the key rate crosses zero.

    Args:
        t: Channel transmittance
        v_a: Modulation variance
        eta: Detection efficiency
        v_ele: Electronic noise
        beta: Reconciliation efficiency

    Returns:
        ThresholdResult with K evaluated on both sides of xi_null

    Raises:
        NoKeyError: if K(xi = 0) is not positive or no sign change is found
    """
    k0 = _key_at(0.0, t, v_a, eta, v_ele, beta)
    if not k0 > 0:
        raise NoKeyError(f"no positive-key regime at T={t:.6g} (K(0)={k0:.3e})")

    upper = 0.5
    while _key_at(upper, t, v_a, eta, v_ele, beta) >= 0:
        upper *= 2.0
        if upper > 1e3:
            raise NoKeyError(f"key rate stays positive up to xi={upper:g}; no threshold in range")

    xi_null = bisect(_key_at, 0.0, upper, args=(t, v_a, eta, v_ele, beta), xtol=THRESHOLD_XTOL)
    lower = max(xi_null - THRESHOLD_BRACKET, 0.0)
    higher = xi_null + THRESHOLD_BRACKET
    k_lower = _key_at(lower, t, v_a, eta, v_ele, beta)
    k_upper = _key_at(higher, t, v_a, eta, v_ele, beta)
    if not (k_lower > 0 > k_upper):
        raise NoKeyError(f"bisection bracket failed around xi={xi_null:.6g}")
    logger.debug(f"xi_null={xi_null:.6g} at T={t:.6g}, V_A={v_a:.4g}")
    return ThresholdResult(xi_null=float(xi_null), lower=lower, upper=higher, k_lower=k_lower, k_upper=k_upper)


def optimal_v_a(
    t: float,
    eta: float,
    v_ele: float,
    beta: float = DEFAULT_BETA,
    xi: float = DEFAULT_XI_NOMINAL,
    bounds: Tuple[float, float] = V_A_BOUNDS,
) -> float:
    """
    Modulation variance maximizing K at excess noise ``xi``.

    The search is scipy's bounded Brent method: golden-section steps on the
    closed interval ``bounds``, accelerated by parabolic interpolation when
    that stays inside the bracket, stopping at ``V_A_XATOL``.

    Raises:
        NoKeyError: if the best K on the interval is not positive
    """
    result = minimize_scalar(
        lambda v: -_key_at(xi, t, v, eta, v_ele, beta),
        bounds=bounds,
        method="bounded",
        options={"xatol": V_A_XATOL},
    )
    v_best = float(result.x)
    if not -result.fun > 0:
        raise NoKeyError(f"no positive key for any V_A in {bounds} at T={t:.6g}, xi={xi}")
    return v_best
