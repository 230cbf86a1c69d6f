"""
Rating: Common Criteria Attack Potential and severity class of attack paths.

Attack Potential is the plain sum of four factor levels (expertise, knowledge
of the target, window of opportunity, equipment). Elapsed time and the
identification/exploitation split are not rated.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from .utils import get_logger, load_structured

logger = get_logger(__name__)


class CatalogError(ValueError):
    """Malformed or inconsistent attack catalog."""


class FactorLevel(Enum):
    """Base for factor scales; member value is (label, points)."""

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def points(self) -> Optional[int]:
        return self.value[1]

    @classmethod
    def parse(cls, name) -> "FactorLevel":
        """Look up a level by name, ignoring case, spaces, hyphens and underscores."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for member in cls:
            if member.label.replace("_", "") == key:
                return member
        raise ValueError(f"unknown {cls.factor_name()} level '{name}' (valid: {', '.join(cls.vocabulary())})")

    @classmethod
    def vocabulary(cls) -> List[str]:
        return [member.label for member in cls]

    @classmethod
    def factor_name(cls) -> str:
        return cls.__name__.lower()


class Expertise(FactorLevel):
    LAYMEN = ("laymen", 0)
    PROFICIENT = ("proficient", 3)
    EXPERT = ("expert", 6)
    MULTIPLE_EXPERTS = ("multiple_experts", 8)


class Knowledge(FactorLevel):
    PUBLIC = ("public", 0)
    RESTRICTED = ("restricted", 3)
    SENSITIVE = ("sensitive", 7)
    CRITICAL = ("critical", 11)


class Window(FactorLevel):
    UNNECESSARY = ("unnecessary", 0)
    EASY = ("easy", 1)
    MODERATE = ("moderate", 4)
    DIFFICULT = ("difficult", 10)


class Equipment(FactorLevel):
    STANDARD = ("standard", 0)
    SPECIALIZED = ("specialized", 4)
    BESPOKE = ("bespoke", 7)
    MULTIPLE_BESPOKE = ("multiple_bespoke", 9)
    # quantum memories or computers: unbounded, never summed
    QUANTUM = ("quantum", None)


class Severity(Enum):
    BASIC = "Basic"
    MODERATE = "Moderate"
    HIGH = "High"
    BEYOND_HIGH = "Beyond High"


@dataclass(frozen=True)
class FactorLevels:
    expertise: Expertise
    knowledge: Knowledge
    window: Window
    equipment: Equipment
    elapsed_time: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "expertise", Expertise.parse(self.expertise))
        object.__setattr__(self, "knowledge", Knowledge.parse(self.knowledge))
        object.__setattr__(self, "window", Window.parse(self.window))
        object.__setattr__(self, "equipment", Equipment.parse(self.equipment))

    @property
    def unbounded(self) -> bool:
        return self.equipment.points is None

    def to_dict(self) -> Dict:
        data = {
            "expertise": self.expertise.label,
            "knowledge": self.knowledge.label,
            "window": self.window.label,
            "equipment": self.equipment.label,
        }
        if self.elapsed_time is not None:
            data["elapsed_time"] = self.elapsed_time
        return data


@dataclass
class RatingSheet:
    attack_name: str
    factors: FactorLevels
    attack_potential: int
    severity: Severity
    notes: str = ""
    unbounded: bool = False

    def to_dict(self) -> Dict:
        """Convert to dictionary (for JSON serialization)."""
        return {
            "attack_name": self.attack_name,
            "factors": self.factors.to_dict(),
            "attack_potential": self.attack_potential,
            "severity": self.severity.value,
            "notes": self.notes,
            "unbounded": self.unbounded,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RatingSheet":
        """Create from dictionary (JSON deserialization)."""
        return cls(
            attack_name=data["attack_name"],
            factors=FactorLevels(**data["factors"]),
            attack_potential=int(data["attack_potential"]),
            severity=Severity(data["severity"]),
            notes=data.get("notes", ""),
            unbounded=bool(data.get("unbounded", False)),
        )


def attack_potential(f: FactorLevels) -> int:
    """
    Sum of the finite factor values.

    Args:
        f: Factor levels

    Returns:
        Attack Potential; a quantum equipment level contributes nothing here
        and is reported through ``FactorLevels.unbounded``
    """
    levels = (f.expertise, f.knowledge, f.window, f.equipment)
    return sum(level.points for level in levels if level.points is not None)


def severity(ap: int) -> Severity:
    """
    Map Attack Potential to its severity band.

    Args:
        ap: Attack Potential (non-negative)

    Returns:
        Basic (0-10), Moderate (11-15), High (16-19) or Beyond High (20+)
    """
    if ap < 0:
        raise ValueError(f"attack potential must be non-negative, got {ap}")
    if ap <= 10:
        return Severity.BASIC
    elif ap <= 15:
        return Severity.MODERATE
    elif ap <= 19:
        return Severity.HIGH
    else:
        return Severity.BEYOND_HIGH


def rate(name: str, factors: FactorLevels) -> RatingSheet:
    """Rating sheet for one attack path."""
    ap = attack_potential(factors)
    notes = []
    if factors.unbounded:
        notes.append("requires quantum equipment: rating unbounded, excluded from the sum")
    if factors.elapsed_time is not None:
        notes.append(f"elapsed time '{factors.elapsed_time}' recorded, not rated")
    return RatingSheet(
        attack_name=name,
        factors=factors,
        attack_potential=ap,
        severity=Severity.BEYOND_HIGH if factors.unbounded else severity(ap),
        notes="; ".join(notes),
        unbounded=factors.unbounded,
    )


def rate_catalog(entries: Iterable[Tuple[str, FactorLevels]]) -> List[RatingSheet]:
    """
    Rate every entry and order them by priority.

    Lowest Attack Potential first (the easiest attack is the most urgent);
    ties by name; unbounded sheets last.
    """
    sheets = []
    seen = set()
    for name, factors in entries:
        if name in seen:
            raise CatalogError(f"duplicate attack name '{name}'")
        seen.add(name)
        sheets.append(rate(name, factors))
    sheets.sort(key=lambda s: (s.unbounded, s.attack_potential, s.attack_name))
    logger.info(f"Rated {len(sheets)} attacks")
    return sheets


def load_catalog(filepath: str) -> List[Tuple[str, FactorLevels]]:
    """
    Read ``{"attacks": [{"name": ..., "expertise": ..., ...}]}`` from JSON or TOML.

    Returns:
        (name, FactorLevels) pairs in file order
    """
    data = load_structured(filepath)
    attacks = data.get("attacks")
    if not isinstance(attacks, list):
        raise CatalogError(f"{filepath}: expected a list under 'attacks'")

    entries = []
    for i, item in enumerate(attacks):
        if not isinstance(item, dict) or "name" not in item:
            raise CatalogError(f"{filepath}: attacks[{i}] needs a 'name'")
        fields_ = {k: v for k, v in item.items() if k != "name"}
        try:
            entries.append((str(item["name"]), FactorLevels(**fields_)))
        except (TypeError, ValueError) as e:
            raise CatalogError(f"{filepath}: attacks[{i}] ({item['name']}): {e}") from e
    return entries
