"""
Unit tests for configuration loading and validation.
"""
import json
import sys
import tempfile
from pathlib import Path

import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from saturation.config import ConfigError, ExperimentConfig, load_config, paper_defaults
from saturation.attack import Strategy

PRESET = Path(__file__).parent.parent.parent / "configs" / "paper_defaults.json"


def _error(data):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(data)
    return str(info.value)


def test_preset_file_matches_defaults():
    """The shipped preset file and the built-in defaults are the same experiment."""
    loaded = load_config(str(PRESET))
    assert loaded == paper_defaults()
    assert loaded.digest() == paper_defaults().digest()

    print("✓ test_preset_file_matches_defaults passed")


def test_defaults():
    """Calibrated limits, detector and reconciliation values."""
    config = paper_defaults()
    limits = config.detector.limits()
    assert limits.alpha1 == pytest.approx(-106.0, rel=1e-12)
    assert limits.alpha2 == pytest.approx(3.3 * 106.0 / 2.5, rel=1e-12)
    assert (config.protocol.eta_b, config.protocol.v_ele, config.security.beta) == (0.55, 0.01, 0.95)
    assert config.transmittance(50.0) == pytest.approx(0.1, rel=1e-12)
    assert config.attack_params().strategy is Strategy.INCOHERENT

    print("✓ test_defaults passed")


def test_toml_config():
    """TOML and JSON load the same way; missing sections keep their defaults."""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "run.toml"
        path.write_text('[protocol]\neta_b = 0.6\n\n[simulation]\ndistances_km = [40, 60]\nseed = 7\n',
                        encoding="utf-8")
        config = load_config(str(path))
    assert config.protocol.eta_b == 0.6
    assert config.simulation.distances_km == (40.0, 60.0)
    assert config.simulation.seed == 7
    assert config.security == paper_defaults().security

    print("✓ test_toml_config passed")


def test_unknown_field():
    """Unknown keys are rejected with their dotted path."""
    assert _error({"attack": {"strenght": 1.0}}).startswith("attack.strenght: unknown field")
    assert _error({"extra": {}}).startswith("extra: unknown field")
    assert _error({"attack": {"incoherent": {"i_lo_uw": 1.0}}}).startswith("attack.incoherent.i_lo_uw:")

    print("✓ test_unknown_field passed")


def test_invalid_values():
    """Range violations name the offending field."""
    assert _error({"attack": {"incoherent": {"t_bs": 2.0}}}).startswith("attack.incoherent.t_bs:")
    assert _error({"protocol": {"eta_b": 1.5}}).startswith("protocol.eta_b:")
    assert _error({"security": {"beta": 0.0}}).startswith("security.beta:")
    assert _error({"simulation": {"blocks": 1}}).startswith("simulation.blocks:")
    assert _error({"output": {"format": "xml"}}).startswith("output.format:")
    assert _error({"attack": {"strategy": "optical"}}).startswith("attack.strategy:")

    print("✓ test_invalid_values passed")


def test_wrong_types():
    """Strings for numbers, numbers for flags and scalars for sections are refused."""
    assert "expected a number" in _error({"protocol": {"eta_b": "high"}})
    assert "expected true/false" in _error({"attack": {"strategy_noise": 1}})
    assert "expected an integer" in _error({"simulation": {"blocks": 2.5}})
    assert _error({"protocol": 3}).startswith("protocol: expected a section")
    assert "expected a list" in _error({"simulation": {"distances_km": 50}})

    print("✓ test_wrong_types passed")


def test_to_dict_round_trip():
    """Dictionary form rebuilds the same configuration."""
    config = paper_defaults()
    rebuilt = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert rebuilt == config

    print("✓ test_to_dict_round_trip passed")


def test_overrides():
    """Command-line overrides are validated; thread counts leave the digest alone."""
    config = paper_defaults()
    changed = config.with_overrides(seed=42, out_dir="results", fmt="csv", workers=4)
    assert changed.simulation.seed == 42
    assert changed.output.out_dir == "results"
    assert changed.output.format == "csv"
    assert changed.simulation.workers == changed.optimizer.workers == 4

    assert config.with_overrides(workers=8).digest() == config.digest()
    assert config.with_overrides(seed=1).digest() != config.digest()

    with pytest.raises(ConfigError, match="simulation.seed:"):
        config.with_overrides(seed=-1)
    with pytest.raises(ConfigError, match="output.format:"):
        config.with_overrides(fmt="xml")

    print("✓ test_overrides passed")


def run_all_tests():
    """Run all tests."""
    print("Running config tests...\n")

    test_preset_file_matches_defaults()
    test_defaults()
    test_toml_config()
    test_unknown_field()
    test_invalid_values()
    test_wrong_types()
    test_to_dict_round_trip()
    test_overrides()

    print("\n✅ All config tests passed!")


if __name__ == "__main__":
    run_all_tests()
