"""
Alice-Bob parameter estimation under attack.

T_sat = 2<X_A X_B_sat>^2 / (G eta_B V_A^2)
xi_sat = 2/(G eta_B T_sat) * (V_B_sat - G (eta_B T_sat / 2) V_A - 1 - v_ele)

Shot-noise calibration is assumed honest: N0 = 1 is never touched by Eve.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .attack import AttackParams, attack_run, bob_input_model
from .protocol import BlockStream, ProtocolParams, SampleBlock
from .snu import DEFAULT_QUADRATURE_ORDER, GaussianSpec, clipped_covariance, clipped_moments
from .utils import get_logger

logger = get_logger(__name__)


class EstimationError(ValueError):
    """An estimator is undefined for the given data."""


@dataclass
class ChannelEstimate:
    """Block-averaged estimates with their spread across blocks."""
    t_sat: float
    xi_sat: float
    per_block: List[Tuple[float, float]] = field(default_factory=list)
    std_t: float = 0.0
    std_xi: float = 0.0

    @property
    def blocks(self) -> int:
        return len(self.per_block)

    @property
    def se_t(self) -> float:
        """Standard error of the mean T_sat."""
        return float(self.std_t / np.sqrt(self.blocks)) if self.blocks else 0.0

    @property
    def se_xi(self) -> float:
        return float(self.std_xi / np.sqrt(self.blocks)) if self.blocks else 0.0


def estimate_t_sat(x_a: SampleBlock, x_b: SampleBlock, g: float, eta_b: float, v_a: float) -> float:
    """
    Transmittance estimate from the correlation of Alice's and Bob's data.

    The covariance uses the known zero mean of X_A, so only Bob's data is centred.

    Args:
        x_a: Alice's modulation block
        x_b: Bob's recorded block
        g: Eve's gain G as seen by the estimator
        eta_b: Bob's detection efficiency
        v_a: Alice's modulation variance

    Returns:
        T_sat (non-negative)
    """
    if len(x_a) == 0 or len(x_b) == 0:
        raise EstimationError("blocks must be non-empty")
    if len(x_a) != len(x_b):
        raise EstimationError(f"block lengths differ: {len(x_a)} vs {len(x_b)}")
    denominator = g * eta_b * v_a ** 2
    if not denominator > 0:
        raise EstimationError(f"T_sat undefined for G={g}, eta_b={eta_b}, V_A={v_a}")
    cov = float(np.mean(x_a.values * (x_b.values - x_b.values.mean())))
    return 2.0 * cov ** 2 / denominator


def estimate_xi_sat(v_b_sat: float, t_sat: float, g: float, eta_b: float, v_a: float, v_ele: float) -> float:
    """Excess-noise estimate; negative values are returned as they are."""
    if not t_sat > 0:
        raise EstimationError(f"xi_sat undefined for T_sat={t_sat} (detector fully saturated)")
    if not g * eta_b > 0:
        raise EstimationError(f"xi_sat undefined for G={g}, eta_b={eta_b}")
    return 2.0 / (g * eta_b * t_sat) * (v_b_sat - g * (eta_b * t_sat / 2.0) * v_a - 1.0 - v_ele)


def aggregate_blocks(per_block: Sequence[Tuple[float, float]]) -> ChannelEstimate:
    """Mean and sample standard deviation of per-block (T_sat, xi_sat), in block order."""
    if len(per_block) == 0:
        raise EstimationError("no blocks to aggregate")
    data = np.asarray(per_block, dtype=float)
    ddof = 1 if len(per_block) > 1 else 0
    return ChannelEstimate(
        t_sat=float(data[:, 0].mean()),
        xi_sat=float(data[:, 1].mean()),
        per_block=[(float(t), float(x)) for t, x in data],
        std_t=float(data[:, 0].std(ddof=ddof)),
        std_xi=float(data[:, 1].std(ddof=ddof)),
    )


def _estimate_block(p: ProtocolParams, a: AttackParams, block_size: int, seed: int, index: int) -> Tuple[float, float]:
    stream = BlockStream(seed, index)
    x_a, x_b = attack_run(p, a, block_size, stream)
    t_sat = estimate_t_sat(x_a, x_b, a.gain, p.eta_b, p.v_a)
    xi_sat = estimate_xi_sat(x_b.variance(), t_sat, a.gain, p.eta_b, p.v_a, p.v_ele)
    logger.debug(f"Block {index}: T_sat={t_sat:.6f}, xi_sat={xi_sat:.6f}")
    return t_sat, xi_sat


def block_estimates(
    p: ProtocolParams,
    a: AttackParams,
    blocks: int = 10,
    block_size: int = 10 ** 7,
    master_seed: int = 0,
    workers: Optional[int] = 1,
) -> ChannelEstimate:
    """
    Monte Carlo estimates over independent blocks.

    Block ``i`` draws from BlockStream(master_seed, i); results are reduced in
    block order, so the output does not depend on ``workers``.

    Args:
        p: Protocol parameters
        a: Attack parameters
        blocks: Number of blocks (at least 2)
        block_size: Samples per block
        master_seed: Seed shared by all blocks
        workers: Thread count for block evaluation

    Returns:
        ChannelEstimate with per-block values and standard deviations
    """
    if blocks < 2:
        raise ValueError(f"at least 2 blocks are required, got {blocks}")
    if block_size <= 0:
        raise ValueError(f"block_size must be positive, got {block_size}")

    logger.info(f"Monte Carlo: {blocks} blocks x {block_size} samples, seed {master_seed}")
    indices = range(blocks)
    if workers is not None and workers <= 1:
        per_block = [_estimate_block(p, a, block_size, master_seed, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_block = list(pool.map(lambda i: _estimate_block(p, a, block_size, master_seed, i), indices))
    return aggregate_blocks(per_block)


def _analytic_covariance(p: ProtocolParams, a: AttackParams, order: int) -> Tuple[float, GaussianSpec]:
    model = bob_input_model(p, a)
    cov = clipped_covariance(model.scale, model.offset, p.v_a, model.noise_var, p.limits, order=order)
    spec = GaussianSpec(mean=model.offset, variance=model.scale ** 2 * p.v_a + model.noise_var)
    return cov, spec


def analytic_t_sat(p: ProtocolParams, a: AttackParams, order: int = DEFAULT_QUADRATURE_ORDER) -> float:
    """Large-sample limit of T_sat."""
    if not a.gain > 0:
        raise EstimationError("T_sat undefined for G = 0")
    cov, _ = _analytic_covariance(p, a, order)
    return 2.0 * cov ** 2 / (a.gain * p.eta_b * p.v_a ** 2)


def analytic_estimates(
    p: ProtocolParams, a: AttackParams, order: int = DEFAULT_QUADRATURE_ORDER
) -> Tuple[float, float]:
    """
    Large-sample limits of (T_sat, xi_sat) without sampling.

    <X_A X_B_sat> comes from clipped_covariance and V_B_sat from the clipped
    moments of Bob's pre-clamp Gaussian.
    """
    if not a.gain > 0:
        raise EstimationError("T_sat undefined for G = 0")
    cov, spec = _analytic_covariance(p, a, order)
    t_sat = 2.0 * cov ** 2 / (a.gain * p.eta_b * p.v_a ** 2)
    _, v_b_sat = clipped_moments(spec, p.limits)
    return t_sat, estimate_xi_sat(v_b_sat, t_sat, a.gain, p.eta_b, p.v_a, p.v_ele)


def linear_estimates(p: ProtocolParams, a: AttackParams) -> Tuple[float, float]:
    """(T_sat, xi_sat) of the pipeline with the clamp removed."""
    if not a.gain > 0:
        raise EstimationError("T_sat undefined for G = 0")
    model = bob_input_model(p, a)
    t_lin = 2.0 * model.scale ** 2 / (a.gain * p.eta_b)
    v_b = model.scale ** 2 * p.v_a + model.noise_var
    return t_lin, estimate_xi_sat(v_b, t_lin, a.gain, p.eta_b, p.v_a, p.v_ele)
