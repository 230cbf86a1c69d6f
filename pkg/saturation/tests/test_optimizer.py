"""
Unit tests for the attack-parameter search.
"""
import sys
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from saturation.attack import Strategy
from saturation.config import paper_defaults
from saturation.estimation import ChannelEstimate
from saturation.optimizer import (
    BoundaryNotFoundError,
    SuccessConditions,
    _coarse_grid,
    _Problem,
    _refine,
    calibrate_noise_coefficient,
    check_estimate,
    coordinate_descent,
    distance_sweep,
    feasibility_boundary,
    optimize_attack,
    success_check,
    verify_solution,
)
from saturation.security import null_key_threshold


def _config(**attack_changes):
    config = paper_defaults()
    return replace(config, attack=replace(config.attack, **attack_changes))


def test_success_conditions():
    """Tolerance must be positive; the relaxed set drops the transmittance match."""
    with pytest.raises(ValueError):
        SuccessConditions(t_tolerance=0.0)
    relaxed = SuccessConditions.relaxed()
    assert not relaxed.require_t_match
    assert relaxed.require_xi_below_null and relaxed.require_positive_key

    print("✓ test_success_conditions passed")


def test_success_check():
    """Each enabled condition is judged and reported."""
    cond = SuccessConditions()
    report = success_check(SimpleNamespace(t_sat=0.1, xi_sat=-0.1), 0.1, 0.1, 0.01, cond)
    assert report.feasible
    assert report.checks == {"t_match": True, "xi_below_null": True, "positive_key": True}
    assert report.violation == 0.0

    noisy = success_check(SimpleNamespace(t_sat=0.1, xi_sat=0.3), 0.1, 0.1, 0.01, cond)
    assert not noisy.feasible
    assert any("noise detected" in reason for reason in noisy.reasons)
    assert noisy.violation > 0

    shifted = SimpleNamespace(t_sat=0.09, xi_sat=0.0)
    assert not success_check(shifted, 0.1, 0.1, 0.01, cond).feasible
    assert success_check(shifted, 0.1, 0.1, 0.01, SuccessConditions.relaxed()).feasible

    no_key = success_check(SimpleNamespace(t_sat=0.1, xi_sat=0.0), 0.1, 0.1, -0.02, cond)
    assert no_key.checks["positive_key"] is False

    undefined = success_check(SimpleNamespace(t_sat=1e-259, xi_sat=float("inf")), 0.1, 0.1, float("nan"), cond)
    assert not undefined.feasible
    assert undefined.checks == {"t_match": False, "xi_below_null": False, "positive_key": False}
    assert np.isfinite(undefined.violation) and undefined.violation > 0
    assert all(type(flag) is bool for flag in undefined.checks.values())

    print("✓ test_success_check passed")


def test_coordinate_descent():
    """Finds the minimum of a separable bowl inside the bounds."""
    def bowl(x):
        return (x[0] - 1.0) ** 2 + 2.0 * (x[1] + 0.5) ** 2

    x = coordinate_descent(bowl, [-2.0, 2.0], [-3.0, -3.0], [3.0, 3.0], [6.0, 6.0], 1e-6, 30)
    assert x == pytest.approx([1.0, -0.5], abs=1e-4)

    clipped = coordinate_descent(bowl, [2.0, 0.0], [1.5, 0.0], [3.0, 3.0], [6.0, 6.0], 1e-6, 30)
    assert clipped == pytest.approx([1.5, 0.0], abs=1e-4)

    print("✓ test_coordinate_descent passed")


def test_incoherent_feasible_at_50km():
    """The calibrated incoherent attack passes every check at 50 km."""
    config = _config()
    solution = optimize_attack(50.0, "incoherent", config.success, config)
    assert solution.feasible, solution.reasons
    assert solution.reasons == []
    assert abs(solution.t_sat / solution.t - 1.0) <= config.success.t_tolerance
    assert solution.xi_sat < solution.xi_null
    assert solution.key_rate > 0
    assert solution.t == pytest.approx(0.1, rel=1e-12)
    assert 0 < solution.delta <= 3 * 106.0
    assert 0 < solution.gain <= 8.0
    expected_null = null_key_threshold(solution.t, solution.v_a, 0.55, 0.01, 0.95).xi_null
    assert solution.xi_null == pytest.approx(expected_null, rel=1e-12)

    print("✓ test_incoherent_feasible_at_50km passed")


def test_incoherent_infeasible_at_20km():
    """Below the boundary no (Δ, G) keeps T_sat = T with low noise."""
    config = _config()
    solution = optimize_attack(20.0, "incoherent", config.success, config)
    assert not solution.feasible
    assert solution.reasons

    print("✓ test_incoherent_infeasible_at_20km passed")


def test_noiseless_attacker_feasible_at_60km():
    """Without strategy noise both strategies succeed at 60 km."""
    config = _config(strategy_noise=False)
    for strategy in ("incoherent", "coherent"):
        solution = optimize_attack(60.0, strategy, config.success, config)
        assert solution.feasible, (strategy, solution.reasons)

    print("✓ test_noiseless_attacker_feasible_at_60km passed")


def test_coherent_phase_noise_blocks_attack():
    """Residual phase noise defeats the coherent attack; a perfect lock restores it."""
    config = _config()
    assert not optimize_attack(60.0, "coherent", config.success, config).feasible

    locked = _config(ideal_phase_lock=True)
    assert optimize_attack(70.0, "coherent", locked.success, locked).feasible

    print("✓ test_coherent_phase_noise_blocks_attack passed")


def test_optimize_attack_is_deterministic():
    """Two searches give identical solutions."""
    config = _config()
    first = optimize_attack(60.0, "incoherent", config.success, config)
    second = optimize_attack(60.0, "incoherent", config.success, replace(config, optimizer=replace(config.optimizer, workers=2)))
    assert first == second

    print("✓ test_optimize_attack_is_deterministic passed")


def test_no_honest_key_is_a_result():
    """A link without key gives an infeasible verdict instead of an exception."""
    config = paper_defaults()
    config = replace(config, security=replace(config.security, beta=0.01))
    solution = optimize_attack(50.0, "incoherent", config.success, config)
    assert not solution.feasible
    assert np.isnan(solution.delta)
    assert "no positive key" in solution.reasons[0]

    print("✓ test_no_honest_key_is_a_result passed")


def test_check_estimate():
    """Monte Carlo estimates are judged with a few standard errors of slack."""
    config = _config()
    solution = optimize_attack(50.0, "incoherent", config.success, config)
    good = ChannelEstimate(t_sat=solution.t, xi_sat=solution.xi_sat, per_block=[(solution.t, solution.xi_sat)] * 10)
    assert check_estimate(solution, good, config).feasible

    noisy = ChannelEstimate(t_sat=solution.t, xi_sat=solution.xi_null + 0.5,
                            per_block=[(solution.t, solution.xi_null + 0.5)] * 10)
    report = check_estimate(solution, noisy, config)
    assert not report.feasible
    assert report.checks["xi_below_null"] is False

    print("✓ test_check_estimate passed")


def test_verify_solution_reports_every_condition():
    """Monte Carlo re-verification runs all enabled checks."""
    config = _config()
    solution = optimize_attack(50.0, "incoherent", config.success, config)
    report = verify_solution(solution, config, blocks=4, block_size=20_000, seed=3)
    assert set(report.checks) == {"t_match", "xi_below_null", "positive_key"}

    print("✓ test_verify_solution_reports_every_condition passed")


def test_feasible_optimum_verifies_by_monte_carlo():
    """The analytic optimum at 50 km also passes on 10 blocks of 10^6 samples."""
    config = _config()
    solution = optimize_attack(50.0, "incoherent", config.success, config)
    assert solution.feasible
    report = verify_solution(solution, config, blocks=10, block_size=10 ** 6)
    assert report.feasible, report.reasons

    print("✓ test_feasible_optimum_verifies_by_monte_carlo passed")


def test_refinement_never_worse_than_grid():
    """Local refinement keeps or improves the best coarse-grid merit."""
    config = _config()
    for cond in (config.success, SuccessConditions.relaxed()):
        problem = _Problem(50.0, Strategy.INCOHERENT, cond, config)
        start = min(_coarse_grid(problem), key=lambda c: c.merit)
        refined = _refine(problem, start, start.report.feasible)
        assert refined.merit <= start.merit

    print("✓ test_refinement_never_worse_than_grid passed")


def test_grid_merits_are_finite():
    """Grid points with a vanishing T_sat still get a comparable merit."""
    config = _config(strategy_noise=False)
    for strategy in (Strategy.INCOHERENT, Strategy.COHERENT):
        grid = _coarse_grid(_Problem(60.0, strategy, config.success, config))
        assert all(np.isfinite(c.merit) for c in grid)
        assert all(np.isfinite(c.report.violation) for c in grid)

    print("✓ test_grid_merits_are_finite passed")


def test_distance_sweep():
    """One solution per distance, in order; an empty list gives an empty table."""
    config = _config()
    assert distance_sweep("incoherent", [], config.success, config) == []
    solutions = distance_sweep("incoherent", [60.0, 50.0], config.success, config)
    assert [s.distance_km for s in solutions] == [60.0, 50.0]

    print("✓ test_distance_sweep passed")


@pytest.mark.slow
def test_feasible_sweep_shape():
    """Along the feasible range ξ_sat stays below ξ_null and both key rates fall with distance."""
    config = _config()
    solutions = distance_sweep("incoherent", [40.0, 50.0, 60.0, 70.0, 80.0], config.success, config)
    assert all(s.feasible for s in solutions)
    assert all(s.xi_sat < s.xi_null for s in solutions)
    rates = [s.key_rate_honest for s in solutions]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    attacked = [s.key_rate for s in solutions]
    assert all(a > b for a, b in zip(attacked, attacked[1:]))


@pytest.mark.slow
def test_feasible_optima_verify_at_full_size():
    """10 blocks of 10^7 samples confirm the analytic optimum across the feasible range."""
    config = _config()
    for distance in (40.0, 60.0, 80.0, 100.0):
        solution = optimize_attack(distance, "incoherent", config.success, config)
        assert solution.feasible, (distance, solution.reasons)
        report = verify_solution(solution, config, blocks=10, block_size=10 ** 7)
        assert report.feasible, (distance, report.reasons)


def _feasible_distances(config, strategy, distances):
    return {d for d in distances if optimize_attack(d, strategy, config.success, config).feasible}


@pytest.mark.slow
def test_incoherent_feasibility_grows_as_noise_falls():
    """Lowering lin_coeff never removes a feasible distance."""
    base = _config()
    distances = [25.0, 30.0, 35.0, 40.0, 50.0, 70.0]
    previous = set()
    for scale in (2.0, 1.0, 0.5, 0.0):
        model = replace(base.attack.incoherent, lin_coeff=base.attack.incoherent.lin_coeff * scale)
        config = replace(base, attack=replace(base.attack, incoherent=model))
        feasible = _feasible_distances(config, "incoherent", distances)
        assert previous <= feasible, (scale, previous, feasible)
        previous = feasible
    assert previous


@pytest.mark.slow
def test_coherent_feasibility_grows_as_noise_falls():
    """With a perfect lock, lowering quad_coeff never removes a feasible distance."""
    base = _config(ideal_phase_lock=True)
    distances = [40.0, 45.0, 50.0, 55.0, 60.0, 80.0]
    previous = set()
    for scale in (2.0, 1.0, 0.5, 0.0):
        model = replace(base.attack.coherent, quad_coeff=base.attack.coherent.quad_coeff * scale)
        config = replace(base, attack=replace(base.attack, coherent=model))
        feasible = _feasible_distances(config, "coherent", distances)
        assert previous <= feasible, (scale, previous, feasible)
        previous = feasible
    assert previous


@pytest.mark.slow
def test_incoherent_boundary():
    """Shortest feasible incoherent distance lies at 35 ± 5 km."""
    config = _config()
    assert 30.0 <= feasibility_boundary("incoherent", config.success, config) <= 40.0


@pytest.mark.slow
def test_coherent_ideal_lock_boundary():
    """A perfect phase lock puts the coherent boundary near 50 km."""
    config = _config(ideal_phase_lock=True)
    assert 45.0 <= feasibility_boundary("coherent", config.success, config) <= 55.0


@pytest.mark.slow
def test_coherent_default_has_no_boundary():
    """With residual phase noise the coherent attack never succeeds within 100 km."""
    config = _config()
    with pytest.raises(BoundaryNotFoundError):
        feasibility_boundary("coherent", config.success, config)


@pytest.mark.slow
def test_calibrate_incoherent_coefficient():
    """Fitting lin_coeff to a 35 km boundary lands near the shipped value."""
    config = _config()
    coefficient = calibrate_noise_coefficient("incoherent", 35.0, config)
    assert coefficient == pytest.approx(config.attack.incoherent.lin_coeff, rel=0.3)


def run_all_tests():
    """Run all tests."""
    print("Running optimizer tests...\n")

    test_success_conditions()
    test_success_check()
    test_coordinate_descent()
    test_incoherent_feasible_at_50km()
    test_incoherent_infeasible_at_20km()
    test_noiseless_attacker_feasible_at_60km()
    test_coherent_phase_noise_blocks_attack()
    test_optimize_attack_is_deterministic()
    test_no_honest_key_is_a_result()
    test_check_estimate()
    test_verify_solution_reports_every_condition()
    test_feasible_optimum_verifies_by_monte_carlo()
    test_refinement_never_worse_than_grid()
    test_grid_merits_are_finite()
    test_distance_sweep()

    print("\n✅ All optimizer tests passed!")


if __name__ == "__main__":
    run_all_tests()
