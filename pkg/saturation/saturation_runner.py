"""
Command-line runner for saturation-attack experiments.

Subcommands: simulate, optimize, sweep, threshold, rate, profile, calibrate.
Each run writes <out>/<command>.csv and/or <out>/<command>.json carrying the
tool version, config hash, seed and command. Outputs are written only after
the whole computation succeeded.
"""
import argparse
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .attack import Strategy, saturation_profile
from .config import OUTPUT_FORMATS, ExperimentConfig, load_config, paper_defaults
from .estimation import EstimationError, block_estimates
from .optimizer import (
    SuccessConditions,
    calibrate_noise_coefficient,
    check_estimate,
    distance_sweep,
    monte_carlo_key_rate,
    optimize_attack,
    verify_solution,
)
from .rating import Equipment, Expertise, FactorLevels, Knowledge, Window, load_catalog, rate_catalog
from .schema import ResultRecord, ResultRow, RunMetadata
from .security import null_key_threshold, optimal_v_a
from .utils import configure_logging, get_logger, save_csv, save_json

logger = get_logger(__name__)

THRESHOLD_COLUMNS = ["d_km", "t", "v_a", "xi_null", "lower", "upper", "k_lower", "k_upper"]
RATING_COLUMNS = ["attack_name", "expertise", "knowledge", "window", "equipment",
                  "attack_potential", "severity", "notes"]
PROFILE_COLUMNS = ["delta", "mean", "variance", "strategy_noise"]
CALIBRATION_COLUMNS = ["strategy", "target_km", "coefficient", "parameter"]


def _metadata(config: ExperimentConfig, command: str) -> RunMetadata:
    return RunMetadata(
        tool_version=__version__,
        config_sha256=config.digest(),
        seed=config.simulation.seed,
        command=command,
    )


def write_outputs(record: ResultRecord, config: ExperimentConfig) -> List[str]:
    """
    Write a record in the configured formats.

    Args:
        record: Rows and metadata of a finished run
        config: Supplies output directory and format

    Returns:
        Paths written
    """
    out_dir = Path(config.output.out_dir)
    name = record.meta.command
    written = []
    if config.output.format in ("csv", "both"):
        path = str(out_dir / f"{name}.csv")
        save_csv(record.rows, record.columns, path, header_lines=record.meta.header_lines())
        written.append(path)
    if config.output.format in ("json", "both"):
        path = str(out_dir / f"{name}.json")
        save_json(record.to_dict(), path)
        written.append(path)
    return written


def _strategy(config: ExperimentConfig, strategy: Optional[str]) -> Strategy:
    return Strategy.parse(strategy or config.attack.strategy)


def run_simulate(config: ExperimentConfig, strategy: Optional[str] = None) -> ResultRecord:
    """
    Optimize each configured distance, then run block Monte Carlo at the optimum.

    Steps:
    1. optimize_attack per distance (analytic)
    2. block_estimates at the optimum (blocks x block_size samples)
    3. rows with Monte Carlo means and spreads; feasibility re-judged at 3 sigma
    4. write outputs
    """
    strategy = _strategy(config, strategy)
    sim = config.simulation
    rows = []
    for d in sim.distances_km:
        logger.info(f"Step 1: optimizing {strategy.value} attack at {d} km...")
        solution = optimize_attack(d, strategy, config.success, config)
        if not np.isfinite(solution.delta):
            rows.append(ResultRow.from_solution(solution))
            continue

        logger.info("Step 2: Monte Carlo block estimates...")
        p = config.protocol_params(t=solution.t, v_a=solution.v_a)
        a = config.attack_params(strategy=strategy).with_point(delta=solution.delta, gain=solution.gain)
        try:
            est = block_estimates(p, a, blocks=sim.blocks, block_size=sim.block_size,
                                  master_seed=sim.seed, workers=sim.workers)
        except EstimationError as e:
            logger.warning(f"Monte Carlo estimates undefined at {d} km: {e}")
            solution = replace(solution, feasible=False, reasons=solution.reasons + [str(e)])
            rows.append(ResultRow.from_solution(solution))
            continue

        logger.info("Step 3: re-checking success conditions on Monte Carlo data...")
        report = check_estimate(solution, est, config)
        solution = replace(
            solution,
            key_rate=monte_carlo_key_rate(solution, est, config),
            feasible=solution.feasible and report.feasible,
            reasons=solution.reasons + report.reasons,
        )
        rows.append(ResultRow.from_solution(solution, est))

    record = ResultRecord.from_rows(_metadata(config, "simulate"), rows)
    logger.info("Step 4: writing outputs...")
    write_outputs(record, config)
    return record


def run_optimize(config: ExperimentConfig, distance_km: float, strategy: Optional[str] = None,
                 verify: bool = False) -> ResultRecord:
    """Single-distance optimization, optionally re-verified by Monte Carlo."""
    solution = optimize_attack(distance_km, _strategy(config, strategy), config.success, config)
    if verify and solution.feasible:
        sim = config.simulation
        report = verify_solution(solution, config, blocks=sim.blocks, block_size=sim.block_size, seed=sim.seed)
        solution = replace(solution, feasible=report.feasible, reasons=solution.reasons + report.reasons)
    record = ResultRecord.from_rows(_metadata(config, "optimize"), [ResultRow.from_solution(solution)])
    write_outputs(record, config)
    return record


def sweep_distances(from_km: float, to_km: float, step_km: float) -> List[float]:
    """Inclusive distance grid, e.g. 35..100 step 5 gives 14 points."""
    if step_km <= 0:
        raise ValueError(f"step must be positive, got {step_km}")
    if to_km < from_km:
        raise ValueError(f"empty range: {from_km} > {to_km}")
    count = int(np.floor((to_km - from_km) / step_km + 1e-9)) + 1
    return [round(from_km + i * step_km, 10) for i in range(count)]


def run_sweep(config: ExperimentConfig, distances: Sequence[float], strategy: Optional[str] = None) -> ResultRecord:
    """Analytic optimum at each distance, with threshold and honest key rate."""
    solutions = distance_sweep(_strategy(config, strategy), distances, config.success, config)
    record = ResultRecord.from_rows(_metadata(config, "sweep"), [ResultRow.from_solution(s) for s in solutions])
    write_outputs(record, config)
    return record


def run_threshold(config: ExperimentConfig, distance_km: float) -> ResultRecord:
    """Null-key threshold at one distance with its bisection bracket."""
    t = config.transmittance(distance_km)
    p, s = config.protocol, config.security
    v_a = p.v_a or optimal_v_a(t, p.eta_b, p.v_ele, s.beta, xi=s.xi_nominal, bounds=(s.v_a_min, s.v_a_max))
    result = null_key_threshold(t, v_a, p.eta_b, p.v_ele, s.beta)
    row = {"d_km": float(distance_km), "t": t, "v_a": v_a, **asdict(result)}
    record = ResultRecord(meta=_metadata(config, "threshold"), rows=[row], columns=THRESHOLD_COLUMNS)
    write_outputs(record, config)
    return record


def run_rate(config: ExperimentConfig, entries: List) -> ResultRecord:
    """Attack Potential and severity for (name, FactorLevels) entries."""
    sheets = rate_catalog(entries)
    rows = []
    for sheet in sheets:
        rows.append({
            "attack_name": sheet.attack_name,
            **sheet.factors.to_dict(),
            "attack_potential": sheet.attack_potential,
            "severity": sheet.severity.value,
            "notes": sheet.notes,
        })
    record = ResultRecord(meta=_metadata(config, "rate"), rows=rows, columns=RATING_COLUMNS)
    write_outputs(record, config)
    return record


def run_profile(config: ExperimentConfig, distance_km: float, gain: float, deltas: Sequence[float],
                strategy: Optional[str] = None) -> ResultRecord:
    """Mean and variance of Bob's clipped output as Δ sweeps at fixed G."""
    t = config.transmittance(distance_km)
    p, s = config.protocol, config.security
    v_a = p.v_a or optimal_v_a(t, p.eta_b, p.v_ele, s.beta, xi=s.xi_nominal, bounds=(s.v_a_min, s.v_a_max))
    attack = config.attack_params(strategy=_strategy(config, strategy), gain=gain)
    points = saturation_profile(config.protocol_params(t=t, v_a=v_a), attack, deltas)
    record = ResultRecord(meta=_metadata(config, "profile"), rows=[asdict(pt) for pt in points],
                          columns=PROFILE_COLUMNS)
    write_outputs(record, config)
    return record


def run_calibrate(config: ExperimentConfig, strategy: str, target_km: float) -> ResultRecord:
    """Fit the strategy's noise coefficient to a feasibility boundary."""
    strategy = Strategy.parse(strategy)
    coefficient = calibrate_noise_coefficient(strategy, target_km, config)
    parameter = "attack.incoherent.lin_coeff" if strategy is Strategy.INCOHERENT else "attack.coherent.quad_coeff"
    row = {"strategy": strategy.value, "target_km": float(target_km), "coefficient": coefficient, "parameter": parameter}
    record = ResultRecord(meta=_metadata(config, "calibrate"), rows=[row], columns=CALIBRATION_COLUMNS)
    write_outputs(record, config)
    return record


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, help="Experiment configuration (.json or .toml)")
    source.add_argument("--paper-defaults", action="store_true", help="Use the calibrated preset (default)")
    common.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    common.add_argument("--out", type=str, help="Output directory (default: output)")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="Output format (default: both)")
    common.add_argument("--workers", type=int, help="Thread count for blocks and grid points")
    common.add_argument("--log-level", default="INFO", help="Logging level (default: INFO)")
    return common


def _attack_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=[s.value for s in Strategy], help="Attack strategy")
    parser.add_argument("--relaxed", action="store_true", help="Drop the T_sat = T condition")
    parser.add_argument("--ideal-lock", action="store_true", help="Coherent strategy with perfect phase lock")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="saturation",
        description="Saturation attacks on GMCS CV-QKD: simulation, optimization and attack rating.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Optimize and Monte Carlo the configured distances")
    _attack_flags(p)
    p.add_argument("--distance-km", type=float, action="append", help="Distance (repeatable); overrides config")
    p.add_argument("--blocks", type=int, help="Blocks per point")
    p.add_argument("--block-size", type=int, help="Samples per block")

    p = sub.add_parser("optimize", parents=[common], help="Best attack at one distance")
    _attack_flags(p)
    p.add_argument("--distance-km", type=float, required=True)
    p.add_argument("--verify", action="store_true", help="Re-verify a feasible optimum by Monte Carlo")

    p = sub.add_parser("sweep", parents=[common], help="Best attack over a distance range")
    _attack_flags(p)
    p.add_argument("--from-km", type=float, required=True)
    p.add_argument("--to-km", type=float, required=True)
    p.add_argument("--step-km", type=float, required=True)

    p = sub.add_parser("threshold", parents=[common], help="Null-key excess noise at one distance")
    p.add_argument("--distance-km", type=float, required=True)

    p = sub.add_parser("rate", parents=[common], help="Attack Potential and severity")
    p.add_argument("--name", default="attack", help="Attack name for a single rating")
    p.add_argument("--expertise", help=f"One of: {', '.join(Expertise.vocabulary())}")
    p.add_argument("--knowledge", help=f"One of: {', '.join(Knowledge.vocabulary())}")
    p.add_argument("--window", help=f"One of: {', '.join(Window.vocabulary())}")
    p.add_argument("--equipment", help=f"One of: {', '.join(Equipment.vocabulary())}")
    p.add_argument("--catalog", help="Catalog file (.json or .toml) with an 'attacks' list")

    p = sub.add_parser("profile", parents=[common], help="Clipped output statistics versus displacement")
    _attack_flags(p)
    p.add_argument("--distance-km", type=float, required=True)
    p.add_argument("--gain", type=float, default=2.0)
    p.add_argument("--delta-max", type=float, default=318.0)
    p.add_argument("--points", type=int, default=61)

    p = sub.add_parser("calibrate", parents=[common], help="Fit a noise coefficient to a feasibility boundary")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], required=True)
    p.add_argument("--target-km", type=float, required=True)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Configuration from file or preset with command-line overrides applied."""
    config = load_config(args.config) if args.config else paper_defaults()
    config = config.with_overrides(seed=args.seed, out_dir=args.out, fmt=args.format, workers=args.workers)
    attack = config.attack
    if getattr(args, "strategy", None):
        attack = replace(attack, strategy=args.strategy)
    if getattr(args, "ideal_lock", False):
        attack = replace(attack, ideal_phase_lock=True)
    success = replace(config.success, require_t_match=False) if getattr(args, "relaxed", False) else config.success
    simulation = config.simulation
    if getattr(args, "distance_km", None) and args.command == "simulate":
        simulation = replace(simulation, distances_km=tuple(args.distance_km))
    if getattr(args, "blocks", None):
        simulation = replace(simulation, blocks=args.blocks)
    if getattr(args, "block_size", None):
        simulation = replace(simulation, block_size=args.block_size)
    return replace(config, attack=attack, success=success, simulation=simulation)


def _rating_entries(args: argparse.Namespace, parser: argparse.ArgumentParser) -> List:
    if args.catalog:
        return load_catalog(args.catalog)
    missing = [flag for flag in ("expertise", "knowledge", "window", "equipment") if getattr(args, flag) is None]
    if missing:
        parser.error(f"rate needs --catalog or all of --{', --'.join(missing)}")
    try:
        return [(args.name, FactorLevels(args.expertise, args.knowledge, args.window, args.equipment))]
    except ValueError as e:
        parser.error(str(e))


def _print_rows(record: ResultRecord) -> None:
    for row in record.rows:
        if "feasible" in row:
            verdict = "feasible" if row["feasible"] else "infeasible"
            print(f"   {row['d_km']:7.2f} km  {verdict:10s}  delta={row['delta']}  G={row['gain']}  "
                  f"xi_sat={row['xi_sat']}  xi_null={row['xi_null']}  K={row['k_attack']}")
        elif "attack_potential" in row:
            print(f"   {row['attack_name']}: AP {row['attack_potential']}, {row['severity']}")
        elif "xi_null" in row:
            print(f"   xi_null = {row['xi_null']:.6g} N0 at {row['d_km']} km "
                  f"(K({row['lower']:.6g}) = {row['k_lower']:.3e} > 0 > K({row['upper']:.6g}) = {row['k_upper']:.3e})")
        elif "coefficient" in row:
            print(f"   {row['parameter']} = {row['coefficient']:.6g}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        config = resolve_config(args)
        if args.command == "simulate":
            record = run_simulate(config)
        elif args.command == "optimize":
            record = run_optimize(config, args.distance_km, verify=args.verify)
        elif args.command == "sweep":
            record = run_sweep(config, sweep_distances(args.from_km, args.to_km, args.step_km))
        elif args.command == "threshold":
            record = run_threshold(config, args.distance_km)
        elif args.command == "rate":
            record = run_rate(config, _rating_entries(args, parser))
        elif args.command == "profile":
            deltas = np.linspace(0.0, args.delta_max, args.points)
            record = run_profile(config, args.distance_km, args.gain, deltas)
        else:
            record = run_calibrate(config, args.strategy, args.target_km)
        print(f"\n✅ {args.command} complete. Outputs in {config.output.out_dir}/")
        _print_rows(record)
        return 0
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"\n❌ Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
