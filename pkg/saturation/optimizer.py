"""
Search for attack parameters (Δ, G) that pass Alice and Bob's checks.

Success means: the transmittance estimate is unchanged (T_sat = T within a
relative tolerance), the excess-noise estimate stays under the null-key
threshold, and the key rate computed from the estimates is positive. V_A is
Alice's optimum for the distance and is not under Eve's control.

The search runs on analytic_estimates: a coarse (Δ, G) grid, then coordinate
descent with bounded Brent line searches. In T-match mode Δ is eliminated by
solving T_sat(Δ; G) = T, leaving a 1-D search over log G.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .attack import AttackParams, Strategy
from .estimation import ChannelEstimate, EstimationError, analytic_estimates, analytic_t_sat, block_estimates
from .security import NoKeyError, SecurityParams, key_rate, null_key_threshold, optimal_v_a
from .snu import QuadratureError
from .utils import get_logger

if TYPE_CHECKING:
    from .config import ExperimentConfig

logger = get_logger(__name__)

INFEASIBLE_OFFSET = 10.0
XI_TIEBREAK = 1e-4
XI_TIEBREAK_CAP = 1e3
PROJECTION_XTOL = 1e-6
UNDEFINED_VIOLATION = 1.0


class BoundaryNotFoundError(RuntimeError):
    """No feasible distance inside the scan range."""


@dataclass(frozen=True)
class SuccessConditions:
    require_t_match: bool = True
    t_tolerance: float = 0.01
    require_xi_below_null: bool = True
    require_positive_key: bool = True

    def __post_init__(self):
        if not self.t_tolerance > 0:
            raise ValueError(f"t_tolerance must be positive, got {self.t_tolerance}")

    @classmethod
    def relaxed(cls) -> "SuccessConditions":
        """Conditions without the transmittance match."""
        return cls(require_t_match=False)


@dataclass(frozen=True)
class OptimizerSettings:
    delta_points: int = 25
    gain_points: int = 17
    delta_span: float = 3.0
    gain_max: float = 8.0
    gain_floor: float = 1e-3
    tolerance: float = 1e-3
    max_sweeps: int = 30
    quadrature_order: int = 128
    workers: Optional[int] = None
    scan_min_km: float = 0.0
    scan_max_km: float = 100.0
    boundary_resolution_km: float = 0.5

    def __post_init__(self):
        if self.delta_points < 2 or self.gain_points < 2:
            raise ValueError("delta_points and gain_points must be at least 2")
        if not self.delta_span > 0:
            raise ValueError(f"delta_span must be positive, got {self.delta_span}")
        if not 0 < self.gain_floor < self.gain_max:
            raise ValueError(f"gain_floor must lie in (0, gain_max), got {self.gain_floor}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if not 0 <= self.scan_min_km < self.scan_max_km:
            raise ValueError("scan range must satisfy 0 <= scan_min_km < scan_max_km")
        if not self.boundary_resolution_km > 0:
            raise ValueError(f"boundary_resolution_km must be positive, got {self.boundary_resolution_km}")


@dataclass
class ConditionReport:
    feasible: bool
    checks: Dict[str, bool] = field(default_factory=dict)
    reasons: List[str] = field(default_factory=list)
    violation: float = 0.0


@dataclass
class AttackSolution:
    """Best attack found at one distance."""
    strategy: str
    distance_km: float
    t: float
    v_a: float
    delta: float
    gain: float
    t_sat: float
    xi_sat: float
    xi_null: float
    key_rate: float
    key_rate_honest: float
    feasible: bool
    reasons: List[str] = field(default_factory=list)
    merit: float = float("inf")


@dataclass
class _Candidate:
    delta: float
    gain: float
    t_sat: float = float("nan")
    xi_sat: float = float("nan")
    k: float = float("nan")
    report: ConditionReport = field(default_factory=lambda: ConditionReport(feasible=False))
    merit: float = float("inf")


def _finite_violation(amount: float) -> float:
    # NaN or infinite estimates count as a fixed violation so merits stay comparable
    return float(amount) if np.isfinite(amount) else UNDEFINED_VIOLATION


def success_check(est, t_true: float, xi_null: float, k: float, cond: SuccessConditions) -> ConditionReport:
    """
    Evaluate the enabled success conditions.

    Args:
        est: Anything with ``t_sat`` and ``xi_sat`` (e.g. a ChannelEstimate)
        t_true: Actual channel transmittance
        xi_null: Null-key threshold at the honest parameters
        k: Key rate computed from the estimates
        cond: Which conditions apply

    Returns:
        ConditionReport with per-condition results, reasons for failures and
        a non-negative violation measure (zero when feasible)
    """
    checks: Dict[str, bool] = {}
    reasons: List[str] = []
    violation = 0.0

    if cond.require_t_match:
        mismatch = abs(est.t_sat - t_true) / t_true
        checks["t_match"] = bool(mismatch <= cond.t_tolerance)
        if not checks["t_match"]:
            reasons.append(f"transmittance changed (T_sat/T - 1 = {est.t_sat / t_true - 1:+.3%})")
            violation += _finite_violation(mismatch - cond.t_tolerance)
    if cond.require_xi_below_null:
        checks["xi_below_null"] = bool(est.xi_sat < xi_null)
        if not checks["xi_below_null"]:
            reasons.append(f"noise detected (xi_sat = {est.xi_sat:.4g} >= xi_null = {xi_null:.4g})")
            violation += _finite_violation((est.xi_sat - xi_null) / max(abs(xi_null), 1e-6)) + 1e-9
    if cond.require_positive_key:
        checks["positive_key"] = bool(k > 0)
        if not checks["positive_key"]:
            reasons.append(f"no key (K = {k:.4g})")
            violation += _finite_violation(-k) + 1e-9

    return ConditionReport(feasible=all(checks.values()), checks=checks, reasons=reasons, violation=violation)


class _Problem:
    """Evaluation context for one (distance, strategy) search."""

    def __init__(self, distance_km: float, strategy: Strategy, cond: SuccessConditions, config: "ExperimentConfig"):
        self.distance_km = distance_km
        self.strategy = strategy
        self.cond = cond
        self.config = config
        self.settings: OptimizerSettings = config.optimizer
        self.t = config.transmittance(distance_km)
        self.eta = config.protocol.eta_b
        self.v_ele = config.protocol.v_ele
        self.beta = config.security.beta
        self.v_a = config.protocol.v_a or optimal_v_a(
            self.t, self.eta, self.v_ele, self.beta, xi=config.security.xi_nominal,
            bounds=(config.security.v_a_min, config.security.v_a_max),
        )
        self.xi_null = null_key_threshold(self.t, self.v_a, self.eta, self.v_ele, self.beta).xi_null
        self.k_honest = key_rate(SecurityParams(self.v_a, self.t, config.security.xi_nominal, self.eta, self.v_ele, self.beta))
        self.protocol = config.protocol_params(t=self.t, v_a=self.v_a)
        self.attack = config.attack_params(strategy=strategy)
        limit = self.protocol.limits.alpha2 if self.attack.toward_alpha2 else self.protocol.limits.alpha1
        self.delta_max = self.settings.delta_span * abs(limit)

    def _point(self, delta: float, gain: float) -> AttackParams:
        return self.attack.with_point(delta=delta, gain=gain)

    def evaluate(self, delta: float, gain: float) -> _Candidate:
        cand = _Candidate(delta=float(delta), gain=float(gain))
        try:
            cand.t_sat, cand.xi_sat = analytic_estimates(self.protocol, self._point(delta, gain), self.settings.quadrature_order)
            cand.k = key_rate(SecurityParams.from_estimate(self.v_a, cand.t_sat, cand.xi_sat, self.eta, self.v_ele, self.beta))
        except (EstimationError, QuadratureError, ValueError, OverflowError) as e:
            logger.debug(f"Point (delta={delta:.4g}, G={gain:.4g}) not estimable: {e}")
            cand.report = ConditionReport(feasible=False, reasons=[f"estimator undefined: {e}"], violation=1.0)
            cand.merit = 2.0 * INFEASIBLE_OFFSET
            return cand
        cand.report = success_check(cand, self.t, self.xi_null, cand.k, self.cond)
        if cand.report.feasible:
            cand.merit = -cand.k + XI_TIEBREAK * min(abs(cand.xi_sat), XI_TIEBREAK_CAP)
        else:
            cand.merit = INFEASIBLE_OFFSET + cand.report.violation
        return cand

    def project_delta(self, gain: float) -> Optional[float]:
        """Δ with T_sat(Δ; G) = T, or None when saturation cannot pull T_sat down far enough."""
        def excess(delta: float) -> float:
            return analytic_t_sat(self.protocol, self._point(delta, gain), self.settings.quadrature_order) - self.t

        try:
            if excess(0.0) <= 0:
                return 0.0
            if excess(self.delta_max) > 0:
                return None
            return float(brentq(excess, 0.0, self.delta_max, xtol=PROJECTION_XTOL))
        except (EstimationError, QuadratureError) as e:
            logger.debug(f"Projection failed at G={gain:.4g}: {e}")
            return None

    def evaluate_projected(self, log_gain: float) -> _Candidate:
        gain = float(np.exp(log_gain))
        delta = self.project_delta(gain)
        if delta is None:
            cand = self.evaluate(self.delta_max, gain)
            cand.merit = max(cand.merit, INFEASIBLE_OFFSET + 1.0 + cand.report.violation)
            return cand
        return self.evaluate(delta, gain)


def coordinate_descent(
    func: Callable[[np.ndarray], float],
    x0: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    steps: Sequence[float],
    tol: float,
    max_sweeps: int,
) -> np.ndarray:
    """
    Cyclic coordinate descent with bounded Brent line searches.

    Each sweep minimizes along every coordinate inside a window of half-width
    ``steps[i]`` around the current point (clipped to the bounds). Stops when
    a sweep moves no coordinate by more than ``tol``.
    """
    x = np.array(x0, dtype=float)
    best = func(x)
    for sweep in range(max_sweeps):
        moved = 0.0
        for i in range(len(x)):
            lo = max(lower[i], x[i] - steps[i])
            hi = min(upper[i], x[i] + steps[i])
            if hi - lo <= tol:
                continue

            def along(value: float, i: int = i) -> float:
                trial = x.copy()
                trial[i] = value
                return func(trial)

            res = minimize_scalar(along, bounds=(lo, hi), method="bounded", options={"xatol": tol})
            if res.fun < best:
                moved = max(moved, abs(res.x - x[i]))
                x[i] = res.x
                best = res.fun
        logger.debug(f"Sweep {sweep + 1}: merit={best:.6g}, moved={moved:.3g}")
        if moved <= tol:
            break
    return x


def _coarse_grid(problem: _Problem) -> List[_Candidate]:
    s = problem.settings
    deltas = np.linspace(0.0, problem.delta_max, s.delta_points)
    gains = np.linspace(0.0, s.gain_max, s.gain_points)
    points = [(d, g) for d in deltas for g in gains]
    with ThreadPoolExecutor(max_workers=s.workers) as pool:
        return list(pool.map(lambda dg: problem.evaluate(*dg), points))


def _refine(problem: _Problem, start: _Candidate, start_feasible: bool) -> _Candidate:
    """Local search from a coarse-grid point; never returns a worse merit than ``start``."""
    s = problem.settings
    log_lo, log_hi = np.log(s.gain_floor), np.log(s.gain_max)
    log_start = float(np.clip(np.log(max(start.gain, s.gain_floor)), log_lo, log_hi))
    gain_step = s.gain_max / (s.gain_points - 1)
    # a feasible coarse point only needs a local search; otherwise search the whole gain range
    log_window = np.log1p(gain_step / max(start.gain, s.gain_floor)) if start_feasible else log_hi - log_lo

    if problem.cond.require_t_match:
        x = coordinate_descent(
            lambda v: problem.evaluate_projected(v[0]).merit,
            [log_start], [log_lo], [log_hi], [log_window], s.tolerance, s.max_sweeps,
        )
        return _better(problem.evaluate_projected(x[0]), start)

    delta_step = problem.delta_max / (s.delta_points - 1)
    delta_window = delta_step if start_feasible else problem.delta_max
    x = coordinate_descent(
        lambda v: problem.evaluate(v[0], float(np.exp(v[1]))).merit,
        [start.delta, log_start], [0.0, log_lo], [problem.delta_max, log_hi],
        [delta_window, log_window], s.tolerance, s.max_sweeps,
    )
    return _better(problem.evaluate(x[0], float(np.exp(x[1]))), start)


def _better(refined: _Candidate, start: _Candidate) -> _Candidate:
    return refined if refined.merit <= start.merit else start


def _solution(problem: _Problem, cand: _Candidate) -> AttackSolution:
    return AttackSolution(
        strategy=problem.strategy.value,
        distance_km=float(problem.distance_km),
        t=problem.t,
        v_a=problem.v_a,
        delta=cand.delta,
        gain=cand.gain,
        t_sat=cand.t_sat,
        xi_sat=cand.xi_sat,
        xi_null=problem.xi_null,
        key_rate=cand.k,
        key_rate_honest=problem.k_honest,
        feasible=cand.report.feasible,
        reasons=list(cand.report.reasons),
        merit=cand.merit,
    )


def _no_key_solution(distance_km: float, strategy: Strategy, config: "ExperimentConfig", reason: str) -> AttackSolution:
    nan = float("nan")
    return AttackSolution(
        strategy=strategy.value, distance_km=float(distance_km), t=config.transmittance(distance_km),
        v_a=nan, delta=nan, gain=nan, t_sat=nan, xi_sat=nan, xi_null=nan, key_rate=nan,
        key_rate_honest=nan, feasible=False, reasons=[reason],
    )


def optimize_attack(
    d: float,
    strategy,
    cond: SuccessConditions,
    config: "ExperimentConfig",
) -> AttackSolution:
    """
    Best (Δ, G) for one distance.

    Args:
        d: Distance (km)
        strategy: Strategy or its name
        cond: Success conditions
        config: Experiment configuration (protocol, noise models, optimizer settings)

    Returns:
        The best feasible solution, or the infeasible candidate with the
        smallest violation together with the failed conditions
    """
    strategy = Strategy.parse(strategy)
    try:
        problem = _Problem(d, strategy, cond, config)
    except NoKeyError as e:
        logger.warning(f"{strategy.value} @ {d} km: {e}")
        return _no_key_solution(d, strategy, config, str(e))

    logger.info(f"Step 1: coarse grid for {strategy.value} @ {d} km (T={problem.t:.4g}, V_A={problem.v_a:.4g})")
    grid = _coarse_grid(problem)
    coarse_best = min(grid, key=lambda c: c.merit)

    logger.info(f"Step 2: refining from delta={coarse_best.delta:.4g}, G={coarse_best.gain:.4g}")
    best = _refine(problem, coarse_best, coarse_best.report.feasible)

    solution = _solution(problem, best)
    status = "feasible" if solution.feasible else f"infeasible ({'; '.join(solution.reasons)})"
    logger.info(
        f"{strategy.value} @ {d} km: {status}, delta={solution.delta:.4g}, G={solution.gain:.4g}, "
        f"xi_sat={solution.xi_sat:.4g}, xi_null={solution.xi_null:.4g}, K={solution.key_rate:.4g}"
    )
    return solution


def verify_solution(
    solution: AttackSolution,
    config: "ExperimentConfig",
    blocks: int = 10,
    block_size: int = 10 ** 7,
    seed: int = 0,
    sigmas: float = 3.0,
    cond: Optional[SuccessConditions] = None,
) -> ConditionReport:
    """
    Re-check a solution against Monte Carlo block estimates.

    A condition passes when it holds within ``sigmas`` standard errors of the
    block mean.
    """
    p = config.protocol_params(t=solution.t, v_a=solution.v_a)
    a = config.attack_params(strategy=solution.strategy).with_point(delta=solution.delta, gain=solution.gain)
    est = block_estimates(p, a, blocks=blocks, block_size=block_size, master_seed=seed,
                          workers=config.simulation.workers)
    return check_estimate(solution, est, config, sigmas=sigmas, cond=cond)


def check_estimate(
    solution: AttackSolution,
    est: ChannelEstimate,
    config: "ExperimentConfig",
    sigmas: float = 3.0,
    cond: Optional[SuccessConditions] = None,
) -> ConditionReport:
    """Success conditions for a solution judged on Monte Carlo estimates, with ``sigmas`` standard errors of slack."""
    cond = cond or config.success
    checks: Dict[str, bool] = {}
    reasons: List[str] = []
    if cond.require_t_match:
        checks["t_match"] = bool(abs(est.t_sat - solution.t) <= cond.t_tolerance * solution.t + sigmas * est.se_t)
        if not checks["t_match"]:
            reasons.append(f"Monte Carlo T_sat={est.t_sat:.6g} +- {est.se_t:.2g} misses T={solution.t:.6g}")
    if cond.require_xi_below_null:
        checks["xi_below_null"] = bool(est.xi_sat - sigmas * est.se_xi < solution.xi_null)
        if not checks["xi_below_null"]:
            reasons.append(f"Monte Carlo xi_sat={est.xi_sat:.4g} +- {est.se_xi:.2g} above xi_null")
    if cond.require_positive_key:
        k = monte_carlo_key_rate(solution, est, config)
        checks["positive_key"] = bool(k > 0)
        if not checks["positive_key"]:
            reasons.append(f"Monte Carlo key rate {k:.4g} not positive")
    return ConditionReport(feasible=all(checks.values()), checks=checks, reasons=reasons)


def monte_carlo_key_rate(solution: AttackSolution, est: ChannelEstimate, config: "ExperimentConfig") -> float:
    """Key rate Alice and Bob would compute from Monte Carlo estimates (-inf when T_sat is 0)."""
    if not est.t_sat > 0:
        return float("-inf")
    return key_rate(SecurityParams.from_estimate(solution.v_a, est.t_sat, est.xi_sat, config.protocol.eta_b,
                                                 config.protocol.v_ele, config.security.beta))


def feasibility_boundary(strategy, cond: SuccessConditions, config: "ExperimentConfig") -> float:
    """
    Shortest feasible distance (km), by bisection over the scan range.

    Raises:
        BoundaryNotFoundError: if the far end of the range is infeasible
    """
    s = config.optimizer
    near, far = s.scan_min_km, s.scan_max_km
    if not optimize_attack(far, strategy, cond, config).feasible:
        raise BoundaryNotFoundError(
            f"no feasible distance for {Strategy.parse(strategy).value} in [{near}, {far}] km"
        )
    if optimize_attack(near, strategy, cond, config).feasible:
        return near
    while far - near > s.boundary_resolution_km:
        mid = 0.5 * (near + far)
        if optimize_attack(mid, strategy, cond, config).feasible:
            far = mid
        else:
            near = mid
    logger.info(f"Feasibility boundary for {Strategy.parse(strategy).value}: {far:.2f} km")
    return far


def distance_sweep(strategy, d_list: Sequence[float], cond: SuccessConditions,
                   config: "ExperimentConfig") -> List[AttackSolution]:
    """optimize_attack at each distance, in the given order."""
    return [optimize_attack(float(d), strategy, cond, config) for d in d_list]


def calibrate_noise_coefficient(
    strategy,
    target_km: float,
    config: "ExperimentConfig",
    bracket: Optional[Sequence[float]] = None,
    rel_tol: float = 1e-3,
) -> float:
    """
    Noise coefficient at which the attack turns feasible exactly at ``target_km``.

    Bisects lin_coeff (incoherent) or quad_coeff under an ideal phase lock
    (coherent): the result is the largest coefficient still feasible at the target.
    """
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.INCOHERENT:
        default_bracket = (0.0, 0.1)

        def configured(coeff: float) -> "ExperimentConfig":
            model = replace(config.attack.incoherent, lin_coeff=coeff)
            return replace(config, attack=replace(config.attack, incoherent=model))
    else:
        default_bracket = (0.0, 1e-3)

        def configured(coeff: float) -> "ExperimentConfig":
            model = replace(config.attack.coherent, quad_coeff=coeff)
            return replace(config, attack=replace(config.attack, coherent=model, ideal_phase_lock=True))

    lo, hi = bracket or default_bracket
    if not optimize_attack(target_km, strategy, config.success, configured(lo)).feasible:
        raise BoundaryNotFoundError(f"{strategy.value} infeasible at {target_km} km even with coefficient {lo}")
    if optimize_attack(target_km, strategy, config.success, configured(hi)).feasible:
        raise BoundaryNotFoundError(f"{strategy.value} still feasible at {target_km} km with coefficient {hi}")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if optimize_attack(target_km, strategy, config.success, configured(mid)).feasible:
            lo = mid
        else:
            hi = mid
        logger.info(f"Calibration bracket: [{lo:.6g}, {hi:.6g}]")
    return lo
