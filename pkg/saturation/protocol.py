"""
GMCS signal path: Alice's modulation, the fiber channel and Bob's saturating
balanced homodyne detector.

Only the X quadrature is simulated. Displacements are split equally between
X and P, so the P statistics are identical and Bob's basis choice adds nothing.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .snu import DetectorLimits, clamp
from .utils import get_logger

logger = get_logger(__name__)

DEFAULT_FIBER_LOSS_DB_PER_KM = 0.2
DEFAULT_ALPHA1 = -106.0
DEFAULT_ALPHA2 = 3.3 * 106.0 / 2.5


def default_limits() -> DetectorLimits:
    return DetectorLimits(alpha1=DEFAULT_ALPHA1, alpha2=DEFAULT_ALPHA2)


@dataclass(frozen=True)
class ProtocolParams:
    """Alice/Bob parameters of one link."""
    v_a: float
    t: float
    eta_b: float = 0.55
    v_ele: float = 0.01
    xi_channel: float = 0.0
    limits: DetectorLimits = field(default_factory=default_limits)

    def __post_init__(self):
        if not self.v_a > 0:
            raise ValueError(f"v_a must be positive, got {self.v_a}")
        if not 0 < self.eta_b <= 1:
            raise ValueError(f"eta_b must lie in (0, 1], got {self.eta_b}")
        if not self.v_ele >= 0:
            raise ValueError(f"v_ele must be non-negative, got {self.v_ele}")
        if not 0 < self.t <= 1:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if not self.xi_channel >= 0:
            raise ValueError(f"xi_channel must be non-negative, got {self.xi_channel}")


class BlockStream:
    """
    Random stream for one block.

    The generator is keyed by (seed, block_index) through a SeedSequence
    spawn key, so any block can be regenerated on its own and blocks may be
    produced in any order.
    """

    def __init__(self, seed: int, block_index: int = 0):
        if seed < 0 or block_index < 0:
            raise ValueError("seed and block_index must be non-negative")
        self.seed = int(seed)
        self.block_index = int(block_index)
        self.generator = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.block_index,))
        )

    def normal(self, variance: float, n: int) -> np.ndarray:
        return self.generator.normal(0.0, np.sqrt(variance), n) if variance > 0 else np.zeros(n)

    def block(self, values: np.ndarray) -> "SampleBlock":
        return SampleBlock(values=values, seed=self.seed, block_index=self.block_index)


@dataclass(frozen=True, eq=False)
class SampleBlock:
    """Quadrature samples (√N0) tagged with the stream that produced them."""
    values: np.ndarray
    seed: int
    block_index: int

    def __post_init__(self):
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValueError("a sample block must be a non-empty 1-D array")

    def __len__(self) -> int:
        return len(self.values)

    def mean(self) -> float:
        return float(self.values.mean())

    def variance(self) -> float:
        return float(self.values.var())


def distance_to_transmittance(d: float, loss: float = DEFAULT_FIBER_LOSS_DB_PER_KM) -> float:
    """
    Fiber transmittance after ``d`` km.

    Args:
        d: Distance in km
        loss: Attenuation in dB/km

    Returns:
        T = 10^(-loss * d / 10)
    """
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if not loss > 0:
        raise ValueError(f"fiber loss must be positive, got {loss}")
    return float(10.0 ** (-loss * d / 10.0))


def alice_modulate(n: int, v_a: float, stream: BlockStream) -> SampleBlock:
    """Zero-mean Gaussian modulation of variance ``v_a``; ``v_a = 0`` gives an all-zero block."""
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    if v_a < 0:
        raise ValueError(f"v_a must be non-negative, got {v_a}")
    return stream.block(stream.normal(v_a, n))


def fiber_channel(x_a: SampleBlock, t: float, xi: float, stream: BlockStream) -> SampleBlock:
    """
    Quadrature of the state reaching Bob: the coherent state (modulation plus
    Alice's vacuum) attenuated by ``t``, the loss vacuum, and channel excess noise.
    """
    n = len(x_a)
    vacuum_alice = stream.normal(1.0, n)
    vacuum_loss = stream.normal(1.0, n)
    excess = stream.normal(t * xi, n)
    values = np.sqrt(t) * (x_a.values + vacuum_alice) + np.sqrt(1.0 - t) * vacuum_loss + excess
    return stream.block(values)


def bob_homodyne(
    x_in: SampleBlock,
    p: ProtocolParams,
    stream: BlockStream,
    extra_noise_var: float = 0.0,
    saturate: bool = True,
) -> SampleBlock:
    """
    Balanced homodyne measurement with detector inefficiency, electronic noise
    and saturation.

    Args:
        x_in: Quadrature arriving at the detector
        p: Protocol parameters (eta_b, v_ele, limits)
        stream: Random stream of the block
        extra_noise_var: Additional Gaussian variance injected before the clamp
        saturate: Apply the clamp; off only to compare against the linear response

    Returns:
        Bob's recorded quadrature X_B
    """
    n = len(x_in)
    vacuum = stream.normal(1.0, n)
    electronic = stream.normal(p.v_ele, n)
    injected = stream.normal(extra_noise_var, n)
    values = np.sqrt(p.eta_b) * x_in.values + np.sqrt(1.0 - p.eta_b) * vacuum + electronic + injected
    if saturate:
        values = clamp(values, p.limits)
    return stream.block(values)


def baseline_run(p: ProtocolParams, n: int, stream: BlockStream) -> Tuple[SampleBlock, SampleBlock]:
    """
    Honest link without an eavesdropper.

    With wide limits Var(X_B) = eta_b*T*V_A + 1 + eta_b*T*xi + v_ele and
    <X_A X_B> = sqrt(eta_b*T)*V_A.
    """
    x_a = alice_modulate(n, p.v_a, stream)
    x_b = bob_homodyne(fiber_channel(x_a, p.t, p.xi_channel, stream), p, stream)
    return x_a, x_b
