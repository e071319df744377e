from pathlib import Path

import pytest

from src.engine.config import (
    build_band_range,
    build_grid,
    build_options,
    build_phi,
    build_plan,
    build_settings,
    config_digest,
    config_from_dict,
    get_config_summary,
    load_config,
    save_config,
    with_seed,
)
from src.engine.errors import ConfigError
from src.engine.kernel import BandRange, effective_lo

DEFAULT_YAML = Path(__file__).resolve().parent.parent / "config" / "default.yaml"


def test_default_yaml_matches_builtin_defaults():
    assert config_digest(load_config(DEFAULT_YAML)) == config_digest(config_from_dict({}))


def test_defaults_build_example_one():
    config = config_from_dict({})
    assert config.p == 2.0
    assert build_grid(config).cells_per_axis == 1024
    assert build_settings(config).far_field_radius == 4.0
    assert build_settings(config).lo_min == -20
    assert str(build_band_range(config)) == "(-inf,12]"
    assert build_phi(config).phi_id == "signed_power-p2"
    assert build_options(config).band_hi == 12
    summary = get_config_summary(config)
    assert summary["kernel"] == "sign-d1-a0.5"
    assert summary["family"] == 10


def test_planar_defaults():
    config = config_from_dict({
        "kernel": {"d": 2, "ell": 2, "alpha": 1.0, "tilde_k": "identity"},
        "phi": {"family": "quadratic_form", "params": {"a11": 1.0, "a22": -1.0}},
    })
    assert build_grid(config).cells_per_axis == 256
    assert build_settings(config).far_field_radius == 2.0


@pytest.mark.parametrize("raw, key", [
    ({"grid": {"cels": 4}}, "grid.cels"),
    ({"gird": {}}, "gird"),
    ({"phi": {"p": 3.0}}, "phi.p"),
    ({"grid": {"cells_per_axis": 100}}, "grid.cells_per_axis"),
    ({"suite": {"statements": ["main", "nonsense"]}}, "suite.statements"),
    ({"output": {"formats": ["xlsx"]}}, "output.formats"),
    ({"tolerances": {"growth": 0.5}}, "tolerances.growth"),
    ({"bands": {"lo": -30}}, "bands.lo"),
    ({"bands": {"lo_min": 2}}, "bands.lo_min"),
])
def test_invalid_configs_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key):
        config_from_dict(raw)


def test_inconsistent_phi_is_rejected():
    with pytest.raises(ConfigError, match="invalid configuration"):
        config_from_dict({"phi": {"family": "quadratic_form"}})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="parse"):
        load_config(bad)


def test_digest_ignores_output_and_threads():
    base = config_digest(config_from_dict({}))
    assert config_digest(config_from_dict({"output": {"directory": "elsewhere"}, "suite": {"threads": 8}})) == base
    assert config_digest(config_from_dict({"grid": {"cells_per_axis": 512}})) != base


def test_with_seed():
    config = config_from_dict({})
    assert with_seed(config, None) is config
    seeded = with_seed(config, 7)
    assert seeded.family.seed == 7
    assert seeded.quadrature.seed == 7
    assert config_digest(seeded) != config_digest(config)
    assert build_plan(seeded).seed == 7


def test_save_and_reload(tmp_path, write_config, tiny_config):
    config = load_config(write_config(tiny_config))
    assert build_plan(config).statements == ["main", "pair_moment"]
    path = save_config(config, tmp_path / "saved.yaml")
    assert config_digest(load_config(path)) == config_digest(config)


def test_far_field_floor_reaches_the_convolution():
    settings = build_settings(config_from_dict({"bands": {"lo_min": -1}}))
    assert settings.lo_min == -1
    assert effective_lo(BandRange.upto(12), settings) == -1
    assert effective_lo(BandRange.upto(12), build_settings(config_from_dict({}))) == -2


def test_configured_band_range():
    config = config_from_dict({"bands": {"lo": -2, "hi": 6}})
    assert build_band_range(config) == BandRange(-2, 6)
    assert build_band_range(config, lo=0) == BandRange(0, 6)
    assert get_config_summary(config)["bands"] == "[-2,6]"
