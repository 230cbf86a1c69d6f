"""
Unit tests for the GMCS signal path.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from saturation.protocol import (
    BlockStream,
    ProtocolParams,
    alice_modulate,
    baseline_run,
    bob_homodyne,
    distance_to_transmittance,
    fiber_channel,
)
from saturation.snu import DetectorLimits, GaussianSpec, clipped_moments

WIDE = DetectorLimits.wide()
N = 400_000


def test_distance_to_transmittance():
    """0.2 dB/km fiber."""
    assert distance_to_transmittance(0.0) == 1.0
    assert distance_to_transmittance(50.0) == pytest.approx(0.1, rel=1e-12)
    assert distance_to_transmittance(35.0) == pytest.approx(0.1995, abs=1e-4)
    assert distance_to_transmittance(10.0, loss=0.3) == pytest.approx(10 ** -0.3, rel=1e-12)
    with pytest.raises(ValueError):
        distance_to_transmittance(-1.0)
    with pytest.raises(ValueError):
        distance_to_transmittance(10.0, loss=0.0)

    print("✓ test_distance_to_transmittance passed")


def test_protocol_params_validation():
    """Physical ranges are enforced on construction."""
    with pytest.raises(ValueError):
        ProtocolParams(v_a=0.0, t=0.5)
    with pytest.raises(ValueError):
        ProtocolParams(v_a=4.0, t=1.5)
    with pytest.raises(ValueError):
        ProtocolParams(v_a=4.0, t=0.5, eta_b=0.0)
    with pytest.raises(ValueError):
        ProtocolParams(v_a=4.0, t=0.5, v_ele=-0.1)

    print("✓ test_protocol_params_validation passed")


def test_alice_modulate():
    """Zero-mean Gaussian of variance V_A; V_A = 0 gives zeros."""
    block = alice_modulate(N, 19.0, BlockStream(3))
    assert len(block) == N
    assert abs(block.mean()) <= 4 * np.sqrt(19.0 / N)
    assert abs(block.variance() - 19.0) <= 4 * np.sqrt(2.0 / N) * 19.0

    zeros = alice_modulate(10, 0.0, BlockStream(3))
    np.testing.assert_array_equal(zeros.values, np.zeros(10))

    with pytest.raises(ValueError):
        alice_modulate(0, 1.0, BlockStream(3))

    print("✓ test_alice_modulate passed")


def test_block_stream_determinism():
    """Same (seed, block_index) reproduces a block; other indices differ."""
    first = alice_modulate(1000, 4.0, BlockStream(42, 5))
    again = alice_modulate(1000, 4.0, BlockStream(42, 5))
    other = alice_modulate(1000, 4.0, BlockStream(42, 6))
    np.testing.assert_array_equal(first.values, again.values)
    assert not np.array_equal(first.values, other.values)
    assert (first.seed, first.block_index) == (42, 5)

    with pytest.raises(ValueError):
        BlockStream(-1)

    print("✓ test_block_stream_determinism passed")


def test_ideal_detector_is_identity():
    """η_B = 1, v_ele = 0 and wide limits pass the input through."""
    p = ProtocolParams(v_a=4.0, t=1.0, eta_b=1.0, v_ele=0.0, limits=WIDE)
    stream = BlockStream(0)
    x_in = stream.block(np.linspace(-50.0, 50.0, 101))
    np.testing.assert_array_equal(bob_homodyne(x_in, p, stream).values, x_in.values)

    print("✓ test_ideal_detector_is_identity passed")


def test_fully_saturated_detector():
    """Inputs far below α1 read as α1."""
    p = ProtocolParams(v_a=4.0, t=1.0, limits=DetectorLimits(-106.0, 140.0))
    stream = BlockStream(1)
    x_b = bob_homodyne(stream.block(np.full(10_000, -300.0)), p, stream)
    assert x_b.mean() == -106.0
    assert x_b.variance() == 0.0

    print("✓ test_fully_saturated_detector passed")


def test_bob_homodyne_matches_clipped_moments():
    """N(-90, 22) input: sample statistics follow the clipped pre-clamp Gaussian."""
    limits = DetectorLimits(-106.0, 140.0)
    p = ProtocolParams(v_a=4.0, t=1.0, eta_b=0.55, v_ele=0.01, limits=limits)
    stream = BlockStream(9)
    x_in = stream.block(-90.0 + stream.normal(22.0, N))
    x_b = bob_homodyne(x_in, p, stream)

    pre = GaussianSpec(mean=np.sqrt(0.55) * -90.0, variance=0.55 * 22.0 + 0.45 + 0.01)
    mean, variance = clipped_moments(pre, limits)
    assert abs(x_b.mean() - mean) <= 4 * np.sqrt(variance / N)
    assert abs(x_b.variance() - variance) <= 4 * np.sqrt(2.0 / N) * variance

    print("✓ test_bob_homodyne_matches_clipped_moments passed")


def test_saturation_reduces_variance():
    """Clamped output never has more variance than the unclamped one on identical draws."""
    p = ProtocolParams(v_a=4.0, t=1.0, limits=DetectorLimits(-106.0, 140.0))
    x_in = BlockStream(2).block(-150.0 + BlockStream(2).normal(30.0, N))
    clamped = bob_homodyne(x_in, p, BlockStream(5))
    linear = bob_homodyne(x_in, p, BlockStream(5), saturate=False)
    assert clamped.variance() < linear.variance()
    assert np.all(clamped.values >= -106.0)

    print("✓ test_saturation_reduces_variance passed")


def test_baseline_variance_and_covariance():
    """T = 0.1, η_B = 0.55, V_A = 19, ξ = 0.05, v_ele = 0.01: Var(X_B) ≈ 2.058 N0."""
    p = ProtocolParams(v_a=19.0, t=0.1, eta_b=0.55, v_ele=0.01, xi_channel=0.05, limits=WIDE)
    x_a, x_b = baseline_run(p, N, BlockStream(4))
    expected = 0.55 * 0.1 * 19.0 + 1.0 + 0.55 * 0.1 * 0.05 + 0.01
    assert expected == pytest.approx(2.058, abs=1e-3)
    assert abs(x_b.variance() - expected) <= 4 * np.sqrt(2.0 / N) * expected

    cov = float(np.mean(x_a.values * x_b.values))
    se = np.sqrt((19.0 * expected + (np.sqrt(0.055) * 19.0) ** 2) / N)
    assert abs(cov - np.sqrt(0.055) * 19.0) <= 4 * se

    print("✓ test_baseline_variance_and_covariance passed")


def test_lossless_channel():
    """T = 1, η_B = 1, ξ = 0, v_ele = 0: Var(X_B) = V_A + 1."""
    stream = BlockStream(8)
    x_a = alice_modulate(N, 5.0, stream)
    x_in = fiber_channel(x_a, 1.0, 0.0, stream)
    assert abs(x_in.variance() - 6.0) <= 4 * np.sqrt(2.0 / N) * 6.0

    print("✓ test_lossless_channel passed")


def run_all_tests():
    """Run all tests."""
    print("Running protocol tests...\n")

    test_distance_to_transmittance()
    test_protocol_params_validation()
    test_alice_modulate()
    test_block_stream_determinism()
    test_ideal_detector_is_identity()
    test_fully_saturated_detector()
    test_bob_homodyne_matches_clipped_moments()
    test_saturation_reduces_variance()
    test_baseline_variance_and_covariance()
    test_lossless_channel()

    print("\n✅ All protocol tests passed!")


if __name__ == "__main__":
    run_all_tests()
