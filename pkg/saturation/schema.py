"""
Dataclass definitions for result records written by the runner.
"""
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from .estimation import ChannelEstimate
from .optimizer import AttackSolution


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class RunMetadata:
    """Reproducibility header embedded in every output."""
    tool_version: str
    config_sha256: str
    seed: int
    command: str

    def header_lines(self) -> List[str]:
        return [f"{key}={value}" for key, value in asdict(self).items()]


@dataclass
class ResultRow:
    """One distance of a simulate/optimize/sweep run."""
    strategy: str
    d_km: float
    t: float
    v_a: Optional[float]
    delta: Optional[float]
    gain: Optional[float]
    t_sat: Optional[float]
    t_sat_std: Optional[float]
    xi_sat: Optional[float]
    xi_sat_std: Optional[float]
    xi_null: Optional[float]
    k_attack: Optional[float]
    k_honest: Optional[float]
    feasible: bool
    reasons: str = ""

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_solution(cls, s: AttackSolution, mc: Optional[ChannelEstimate] = None) -> "ResultRow":
        """
        Row for an optimizer result; Monte Carlo means and spreads replace the
        analytic estimates when ``mc`` is given.
        """
        return cls(
            strategy=s.strategy,
            d_km=float(s.distance_km),
            t=float(s.t),
            v_a=_finite(s.v_a),
            delta=_finite(s.delta),
            gain=_finite(s.gain),
            t_sat=_finite(mc.t_sat if mc else s.t_sat),
            t_sat_std=_finite(mc.std_t) if mc else None,
            xi_sat=_finite(mc.xi_sat if mc else s.xi_sat),
            xi_sat_std=_finite(mc.std_xi) if mc else None,
            xi_null=_finite(s.xi_null),
            k_attack=_finite(s.key_rate),
            k_honest=_finite(s.key_rate_honest),
            feasible=bool(s.feasible),
            reasons="; ".join(s.reasons),
        )


@dataclass
class ResultRecord:
    """Rows of one run plus its metadata."""
    meta: RunMetadata
    rows: List[Dict[str, Any]] = field(default_factory=list)
    columns: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        """Convert to dictionary (for JSON serialization)."""
        return {"meta": asdict(self.meta), "columns": list(self.columns), "rows": list(self.rows)}

    @classmethod
    def from_dict(cls, data: Dict) -> "ResultRecord":
        """Create from dictionary (JSON deserialization)."""
        return cls(meta=RunMetadata(**data["meta"]), rows=list(data["rows"]), columns=list(data.get("columns", [])))

    @classmethod
    def from_rows(cls, meta: RunMetadata, rows: List[ResultRow]) -> "ResultRecord":
        return cls(meta=meta, rows=[asdict(r) for r in rows], columns=ResultRow.columns())
