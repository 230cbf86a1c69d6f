"""
Experiment configuration.

A tree of frozen dataclasses loaded from JSON or TOML. Unknown keys and
invalid values are rejected at load time with the dotted path of the field.
The defaults are the calibrated preset used by ``--paper-defaults``.
"""
import dataclasses
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, Optional, Tuple

from .attack import AttackParams, CoherentNoiseModel, IncoherentModel, Strategy
from .optimizer import OptimizerSettings, SuccessConditions
from .protocol import DEFAULT_FIBER_LOSS_DB_PER_KM, ProtocolParams, distance_to_transmittance
from .security import DEFAULT_BETA, DEFAULT_XI_NOMINAL
from .snu import DetectorLimits, ShotNoiseCalibration
from .utils import config_digest, get_logger, load_structured

logger = get_logger(__name__)

OUTPUT_FORMATS = ("csv", "json", "both")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class DetectorConfig:
    """Clipping limits in volts plus calibration, or directly in √N0."""
    alpha1_volts: float = -2.5
    alpha2_volts: float = 3.3
    volts_per_sqrt_n0: float = 2.5 / 106.0
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None

    def __post_init__(self):
        self.limits()

    def calibration(self) -> ShotNoiseCalibration:
        return ShotNoiseCalibration(volts_per_sqrt_n0=self.volts_per_sqrt_n0)

    def limits(self) -> DetectorLimits:
        cal = self.calibration()
        alpha1 = self.alpha1 if self.alpha1 is not None else self.alpha1_volts / cal.volts_per_sqrt_n0
        alpha2 = self.alpha2 if self.alpha2 is not None else self.alpha2_volts / cal.volts_per_sqrt_n0
        return DetectorLimits(alpha1=alpha1, alpha2=alpha2)


@dataclass(frozen=True)
class ProtocolConfig:
    # receiver values are configuration choices, not published constants
    eta_b: float = 0.55
    v_ele: float = 0.01
    xi_channel: float = 0.0
    fiber_loss_db_per_km: float = DEFAULT_FIBER_LOSS_DB_PER_KM
    v_a: Optional[float] = None  # None: Alice's optimum per distance

    def __post_init__(self):
        if not 0 < self.eta_b <= 1:
            raise ValueError(f"eta_b must lie in (0, 1], got {self.eta_b}")
        if not self.v_ele >= 0:
            raise ValueError(f"v_ele must be non-negative, got {self.v_ele}")
        if not self.xi_channel >= 0:
            raise ValueError(f"xi_channel must be non-negative, got {self.xi_channel}")
        if not self.fiber_loss_db_per_km > 0:
            raise ValueError(f"fiber_loss_db_per_km must be positive, got {self.fiber_loss_db_per_km}")
        if self.v_a is not None and not self.v_a > 0:
            raise ValueError(f"v_a must be positive, got {self.v_a}")


@dataclass(frozen=True)
class SecurityConfig:
    beta: float = DEFAULT_BETA
    xi_nominal: float = DEFAULT_XI_NOMINAL
    v_a_min: float = 0.1
    v_a_max: float = 100.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.xi_nominal >= 0:
            raise ValueError(f"xi_nominal must be non-negative, got {self.xi_nominal}")
        if not 0 < self.v_a_min < self.v_a_max:
            raise ValueError("v_a_min must satisfy 0 < v_a_min < v_a_max")


@dataclass(frozen=True)
class AttackConfig:
    strategy: str = Strategy.INCOHERENT.value
    tech_noise: float = 0.0
    toward_alpha2: bool = False
    heterodyne_amplitude_loss: bool = False
    ideal_phase_lock: bool = False
    strategy_noise: bool = True
    coherent: CoherentNoiseModel = field(default_factory=CoherentNoiseModel)
    incoherent: IncoherentModel = field(default_factory=IncoherentModel)

    def __post_init__(self):
        if not isinstance(self.strategy, Strategy) and self.strategy not in {s.value for s in Strategy}:
            valid = ", ".join(s.value for s in Strategy)
            raise ValueError(f"strategy must be one of {valid}, got {self.strategy!r}")
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy).value)
        if not self.tech_noise >= 0:
            raise ValueError(f"tech_noise must be non-negative, got {self.tech_noise}")


@dataclass(frozen=True)
class SimulationConfig:
    distances_km: Tuple[float, ...] = (50.0,)
    blocks: int = 10
    block_size: int = 10 ** 7
    seed: int = 0
    workers: Optional[int] = 1

    def __post_init__(self):
        object.__setattr__(self, "distances_km", tuple(float(d) for d in self.distances_km))
        if any(d < 0 for d in self.distances_km):
            raise ValueError("distances_km must be non-negative")
        if self.blocks < 2:
            raise ValueError(f"blocks must be at least 2, got {self.blocks}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be positive, got {self.block_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "output"
    format: str = "both"

    def __post_init__(self):
        if self.format not in OUTPUT_FORMATS:
            raise ValueError(f"format must be one of {', '.join(OUTPUT_FORMATS)}, got {self.format!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    security: SecurityConfig = field(default_factory=SecurityConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    success: SuccessConditions = field(default_factory=SuccessConditions)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build and validate a configuration; missing sections take their defaults."""
        return _build(cls, data, "")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["simulation"]["distances_km"] = list(self.simulation.distances_km)
        return data

    def digest(self) -> str:
        """Hash of the effective configuration; thread counts and output location do not change results and are left out."""
        data = self.to_dict()
        del data["simulation"]["workers"]
        del data["optimizer"]["workers"]
        del data["output"]
        return config_digest(data)

    def transmittance(self, d: float) -> float:
        return distance_to_transmittance(d, self.protocol.fiber_loss_db_per_km)

    def protocol_params(self, t: float, v_a: float) -> ProtocolParams:
        return ProtocolParams(
            v_a=v_a,
            t=t,
            eta_b=self.protocol.eta_b,
            v_ele=self.protocol.v_ele,
            xi_channel=self.protocol.xi_channel,
            limits=self.detector.limits(),
        )

    def attack_params(self, strategy=None, delta: float = 0.0, gain: float = 0.0) -> AttackParams:
        a = self.attack
        coherent = a.coherent.ideal_lock() if a.ideal_phase_lock else a.coherent
        return AttackParams(
            strategy=Strategy.parse(strategy or a.strategy),
            delta=delta,
            gain=gain,
            tech_noise=a.tech_noise,
            toward_alpha2=a.toward_alpha2,
            heterodyne_amplitude_loss=a.heterodyne_amplitude_loss,
            strategy_noise=a.strategy_noise,
            coherent=coherent,
            incoherent=a.incoherent,
        )

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None,
                       fmt: Optional[str] = None, workers: Optional[int] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied (validated again)."""
        simulation = self.simulation
        if seed is not None:
            simulation = _revalidate(replace, simulation, "simulation", seed=seed)
        if workers is not None:
            simulation = _revalidate(replace, simulation, "simulation", workers=workers)
        output = self.output
        if out_dir is not None:
            output = _revalidate(replace, output, "output", out_dir=out_dir)
        if fmt is not None:
            output = _revalidate(replace, output, "output", format=fmt)
        optimizer = self.optimizer
        if workers is not None:
            optimizer = replace(optimizer, workers=workers)
        return replace(self, simulation=simulation, output=output, optimizer=optimizer)


def paper_defaults() -> ExperimentConfig:
    """The calibrated preset: -106/+139.92 √N0 limits, eta_b 0.55, v_ele 0.01, beta 0.95, fitted noise."""
    return ExperimentConfig()


def load_config(filepath: str) -> ExperimentConfig:
    """Load a JSON or TOML configuration file."""
    logger.info(f"Loading configuration from {filepath}")
    return ExperimentConfig.from_dict(load_structured(filepath))


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _revalidate(fn, obj, path: str, **changes):
    try:
        return fn(obj, **changes)
    except ValueError as e:
        raise _field_error(path, type(obj), e) from e


def _field_error(path: str, cls, error: Exception) -> ConfigError:
    message = str(error)
    first, _, rest = message.partition(" ")
    names = {f.name for f in fields(cls)}
    if first in names:
        return ConfigError(f"{_join(path, first)}: {rest}")
    return ConfigError(f"{path or '<root>'}: {message}")


def _coerce(value: Any, hint: Any, path: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a section, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    for key in sorted(data):
        if key not in names:
            raise ConfigError(f"{_join(path, key)}: unknown field")

    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if is_dataclass(hint):
            kwargs[name] = _build(hint, value, _join(path, name))
        else:
            kwargs[name] = _coerce(value, hint, _join(path, name))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise _field_error(path, cls, e) from e
