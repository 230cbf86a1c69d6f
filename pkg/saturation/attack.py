"""
Eve's intercept-resend chain and the two saturation strategies.

Eve heterodynes Alice's states, resends them amplified by sqrt(G/2) and
displaced by Δ, and pushes Bob's homodyne output against one of its clipping
limits. The coherent strategy displaces interferometrically and pays for
residual phase drift; the incoherent strategy injects an external laser and
pays its shot noise. Each strategy is reduced to an excess-noise-vs-Δ curve
added at Bob's input before the clamp.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .protocol import BlockStream, ProtocolParams, SampleBlock, alice_modulate, bob_homodyne
from .snu import GaussianSpec, clipped_moments
from .utils import get_logger

logger = get_logger(__name__)

# 0.23 √N0 of homodyne fluctuation was observed together with about 5 N0 of excess noise
OBSERVED_PHASE_FLUCTUATION = 0.23
OBSERVED_COHERENT_EXCESS = 5.0
DEFAULT_PHASE_NOISE_GAIN = OBSERVED_COHERENT_EXCESS / OBSERVED_PHASE_FLUCTUATION ** 2

# Fitted so the feasibility boundaries sit at 50 km (coherent, ideal lock) and 35 km (incoherent)
DEFAULT_QUAD_COEFF = 1.13e-4
DEFAULT_LIN_COEFF = 0.0123

ANCHOR_POWER_UW = 5.55
ANCHOR_DISPLACEMENT = 106.0


class Strategy(str, Enum):
    COHERENT = "coherent"
    INCOHERENT = "incoherent"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy '{name}' (valid: {valid})") from None


def _anchored_i_lo(power: float, delta: float, eta_b: float, t_bs: float) -> float:
    return eta_b * ((1.0 - 2.0 * t_bs) * power / delta) ** 2


@dataclass(frozen=True)
class CoherentNoiseModel:
    """
    Residual noise of an interferometric displacement.

    Phase drift over the feedback latency leaves a fluctuation Δ·sin(δφ);
    ``phase_noise_gain`` converts its square into excess noise at Bob and
    ``quad_coeff`` adds the quadratic floor of the displacement itself.
    """
    drift_rate: float = 2.0 * np.pi
    latency: float = 500e-6
    quad_coeff: float = DEFAULT_QUAD_COEFF
    phase_noise_gain: float = DEFAULT_PHASE_NOISE_GAIN

    def __post_init__(self):
        for name in ("drift_rate", "latency", "quad_coeff", "phase_noise_gain"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    def ideal_lock(self) -> "CoherentNoiseModel":
        """Same model with a perfectly locked phase (no drift)."""
        return replace(self, drift_rate=0.0)


@dataclass(frozen=True)
class IncoherentModel:
    """
    External-laser injection. Intensities are in µW; ``i_lo`` uses the same units.
    """
    lin_coeff: float = DEFAULT_LIN_COEFF
    eta_b: float = 0.55
    i_lo: float = _anchored_i_lo(ANCHOR_POWER_UW, ANCHOR_DISPLACEMENT, 0.55, 0.49)
    t_bs: float = 0.49

    def __post_init__(self):
        if not self.lin_coeff >= 0:
            raise ValueError(f"lin_coeff must be non-negative, got {self.lin_coeff}")
        if not 0 < self.eta_b <= 1:
            raise ValueError(f"eta_b must lie in (0, 1], got {self.eta_b}")
        if not self.i_lo > 0:
            raise ValueError(f"i_lo must be positive, got {self.i_lo}")
        if not 0 <= self.t_bs <= 1:
            raise ValueError(f"t_bs must lie in [0, 1], got {self.t_bs}")

    @classmethod
    def anchored(
        cls,
        power: float = ANCHOR_POWER_UW,
        delta: float = ANCHOR_DISPLACEMENT,
        eta_b: float = 0.55,
        t_bs: float = 0.49,
        lin_coeff: float = DEFAULT_LIN_COEFF,
    ) -> "IncoherentModel":
        """Model whose i_lo makes ``power`` drive the displacement to ``delta``."""
        if t_bs == 0.5:
            raise ValueError("a balanced splitter (t_bs = 0.5) cannot be anchored")
        return cls(lin_coeff=lin_coeff, eta_b=eta_b, i_lo=_anchored_i_lo(power, delta, eta_b, t_bs), t_bs=t_bs)


@dataclass(frozen=True)
class AttackParams:
    """
    One attack configuration.

    ``delta`` is the total displacement, split equally over X and P. It is
    applied toward alpha1 unless ``toward_alpha2`` is set.
    ``heterodyne_amplitude_loss`` puts a 1/sqrt(2) factor on X_A inside X_M.
    """
    strategy: Strategy
    delta: float
    gain: float
    tech_noise: float = 0.0
    toward_alpha2: bool = False
    heterodyne_amplitude_loss: bool = False
    strategy_noise: bool = True
    coherent: CoherentNoiseModel = field(default_factory=CoherentNoiseModel)
    incoherent: IncoherentModel = field(default_factory=IncoherentModel)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not self.gain >= 0:
            raise ValueError(f"gain must be non-negative, got {self.gain}")
        if not np.isfinite(self.delta):
            raise ValueError(f"delta must be finite, got {self.delta}")
        if not self.tech_noise >= 0:
            raise ValueError(f"tech_noise must be non-negative, got {self.tech_noise}")

    @property
    def delta_x(self) -> float:
        return self.delta / np.sqrt(2.0)

    @property
    def delta_p(self) -> float:
        return self.delta / np.sqrt(2.0)

    @property
    def direction(self) -> float:
        return 1.0 if self.toward_alpha2 else -1.0

    @property
    def amplitude_factor(self) -> float:
        return 1.0 / np.sqrt(2.0) if self.heterodyne_amplitude_loss else 1.0

    def with_point(self, delta: float, gain: float) -> "AttackParams":
        return replace(self, delta=delta, gain=gain)

    def strategy_noise_var(self) -> float:
        """Excess noise (N0) this strategy adds at Bob for the current Δ."""
        if not self.strategy_noise:
            return 0.0
        delta = abs(self.delta)
        if self.strategy is Strategy.COHERENT:
            return coherent_residual_noise(delta, self.coherent)[1]
        return incoherent_excess_noise(delta, self.incoherent)


@dataclass(frozen=True)
class LinearGaussianModel:
    """Pre-clamp description of Bob's output: Y = scale*X_A + offset + N, N ~ N(0, noise_var)."""
    scale: float
    offset: float
    noise_var: float


@dataclass(frozen=True)
class SaturationPoint:
    delta: float
    mean: float
    variance: float
    strategy_noise: float


def eve_heterodyne(x_a: SampleBlock, stream: BlockStream, amplitude_loss: bool = False) -> SampleBlock:
    """X_M = X_A + X_0 + X_0' with two unit vacuum terms (X_A scaled by 1/sqrt(2) under ``amplitude_loss``)."""
    n = len(x_a)
    factor = 1.0 / np.sqrt(2.0) if amplitude_loss else 1.0
    values = factor * x_a.values + stream.normal(1.0, n) + stream.normal(1.0, n)
    return stream.block(values)


def eve_resend(x_m: SampleBlock, a: AttackParams, stream: BlockStream, quadrature: str = "x") -> SampleBlock:
    """
    Resend amplified and displaced states.

    X_E = sqrt(G/2)*(X_M + X_N) + Δ_X + X_0'' with X_N ~ N(0, tech_noise),
    so Var(X_E) = (G/2)(Var(X_M) + tech_noise) + 1.
    """
    if quadrature not in ("x", "p"):
        raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")
    n = len(x_m)
    shift = a.direction * (a.delta_x if quadrature == "x" else a.delta_p)
    tech = stream.normal(a.tech_noise, n)
    prep = stream.normal(1.0, n)
    values = np.sqrt(a.gain / 2.0) * (x_m.values + tech) + shift + prep
    return stream.block(values)


def displacement_from_intensity(i: float, m: IncoherentModel) -> float:
    """Effective displacement Δ = sqrt(eta_b/I_lo)*(1 - 2*T_bs)*I of an injected laser."""
    if i < 0:
        raise ValueError(f"intensity must be non-negative, got {i}")
    return float(np.sqrt(m.eta_b / m.i_lo) * (1.0 - 2.0 * m.t_bs) * i)


def intensity_for_displacement(delta: float, m: IncoherentModel) -> float:
    """Injected intensity that produces ``delta``."""
    slope = np.sqrt(m.eta_b / m.i_lo) * (1.0 - 2.0 * m.t_bs)
    if slope == 0:
        raise ValueError("a balanced splitter (t_bs = 0.5) produces no displacement")
    intensity = float(delta / slope)
    if intensity < 0:
        raise ValueError(f"displacement {delta} has the wrong sign for t_bs = {m.t_bs}")
    return intensity


def coherent_phase_error(m: CoherentNoiseModel) -> float:
    """Phase error (rad) accumulated during one feedback latency."""
    return m.drift_rate * m.latency


def coherent_residual_noise(delta: float, m: CoherentNoiseModel) -> Tuple[float, float]:
    """
    Residual noise of a coherent displacement.

    Args:
        delta: Displacement (√N0), non-negative
        m: Coherent noise model

    Returns:
        (fluctuation std in √N0, added variance at Bob in N0)
    """
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    fluctuation = delta * np.sin(coherent_phase_error(m))
    added = m.phase_noise_gain * fluctuation ** 2 + m.quad_coeff * delta ** 2
    return float(fluctuation), float(added)


def incoherent_excess_noise(delta: float, m: IncoherentModel) -> float:
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    return float(m.lin_coeff * delta)


def bob_input_model(p: ProtocolParams, a: AttackParams) -> LinearGaussianModel:
    """Exact Gaussian law of Bob's pre-clamp output given X_A, for the attack pipeline."""
    eta = p.eta_b
    scale = np.sqrt(eta * a.gain / 2.0) * a.amplitude_factor
    offset = np.sqrt(eta) * a.direction * a.delta_x
    noise_var = eta * (a.gain / 2.0) * (2.0 + a.tech_noise) + 1.0 + p.v_ele + a.strategy_noise_var()
    return LinearGaussianModel(scale=float(scale), offset=float(offset), noise_var=float(noise_var))


def attack_run(
    p: ProtocolParams,
    a: AttackParams,
    n: int,
    stream: BlockStream,
    quadrature: str = "x",
) -> Tuple[SampleBlock, SampleBlock]:
    """
    Full saturation-attack pipeline for one block.

    alice_modulate -> eve_heterodyne -> eve_resend -> bob_homodyne, with the
    strategy noise injected before the clamp. Eve sits next to Bob, so no
    channel loss follows the resend.

    Returns:
        (x_a, x_b_sat)
    """
    x_a = alice_modulate(n, p.v_a, stream)
    x_m = eve_heterodyne(x_a, stream, amplitude_loss=a.heterodyne_amplitude_loss)
    x_e = eve_resend(x_m, a, stream, quadrature=quadrature)
    del x_m
    x_b = bob_homodyne(x_e, p, stream, extra_noise_var=a.strategy_noise_var())
    return x_a, x_b


def saturation_profile(p: ProtocolParams, a: AttackParams, deltas: Sequence[float]) -> List[SaturationPoint]:
    """Mean and variance of X_B_sat as Δ sweeps through the clipping limit."""
    points = []
    for delta in deltas:
        point = a.with_point(delta=float(delta), gain=a.gain)
        model = bob_input_model(p, point)
        spec = GaussianSpec(mean=model.offset, variance=model.scale ** 2 * p.v_a + model.noise_var)
        mean, variance = clipped_moments(spec, p.limits)
        points.append(SaturationPoint(float(delta), mean, variance, point.strategy_noise_var()))
    logger.debug(f"Saturation profile over {len(points)} displacements")
    return points
