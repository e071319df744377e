"""
Configuration Management
Loads, merges and validates run configuration from YAML files and builds
the engine objects it describes.
"""

import hashlib
import json
import logging
from copy import deepcopy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from src.engine.errors import ConfigError, MazyaLabError
from src.engine.gridfn import GridParams, is_power_of_two
from src.engine.kernel import BandRange, ConvolutionSettings, KernelSpec, Profile
from src.engine.phi import PhiFamily, PhiSpec, QuadratureScheme, SphereQuadrature, default_quadrature
from src.engine.verify.convolver import VerifyOptions
from src.engine.verify.suite import SUITE_STATEMENTS, SuitePlan

logger = logging.getLogger(__name__)

P_TOLERANCE = 1e-12
DEFAULT_CELLS = {1: 2 ** 10, 2: 2 ** 8, 3: 2 ** 6}
DEFAULT_FAR_FIELD_RADIUS = {1: 4.0, 2: 2.0, 3: 2.0}

# Defaults - every key a config file may set
DEFAULT_CONFIG: Dict[str, Any] = {
    "kernel": {
        "d": 1,
        "ell": 1,
        "alpha": 0.5,
        "tilde_k": "sign",
        "lipschitz_bound": None,
        "sup_bound": None,
        "name": "",
    },
    "phi": {
        "family": "signed_power",
        "p": None,
        "params": {},
        "name": "",
    },
    "grid": {
        "half_width": 0.5,
        "cells_per_axis": None,
    },
    "bands": {
        "lo": None,
        "hi": 12,
        "lo_min": -20,
        "far_field_radius": None,
        "subgrid": "absorb",
        "method": "fast",
        "max_cells": 2 ** 25,
        "refinement_depth": 3,
    },
    "quadrature": {
        "scheme": None,
        "nodes": None,
        "counts": None,
        "seed": 0,
    },
    "suite": {
        "statements": list(SUITE_STATEMENTS),
        "n_values": [0, 1, 2, 3, 4],
        "partial_depth": 10,
        "split_depth": 2,
        "dilation_steps": 1,
        "energy_depth": None,
        "threads": 1,
    },
    "family": {
        "widths": [0.125, 0.0625, 0.03125],
        "scales": [1.0, 4.0],
        "random_members": 2,
        "bump_count": 4,
        "seed": 0,
        "probe_widths": [0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
    },
    "extremize": {
        "bump_count": 2,
        "budget": 500,
        "restarts": 8,
        "min_width": None,
        "max_width": None,
        "phi_variants": [],
    },
    "output": {
        "directory": "out",
        "formats": ["csv", "json", "svg"],
        "audit": False,
    },
    "tolerances": {
        "cancellation": 1e-8,
        "zero_mean": 1e-10,
        "growth": 1.25,
        "growth_floor": 1e-6,
    },
}

OUTPUT_FORMATS = ("csv", "json", "svg")


@dataclass
class KernelConfig:
    d: int = 1
    ell: int = 1
    alpha: float = 0.5
    tilde_k: str = "sign"
    lipschitz_bound: Optional[float] = None
    sup_bound: Optional[float] = None
    name: str = ""


@dataclass
class PhiConfig:
    family: str = "signed_power"
    p: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)
    name: str = ""


@dataclass
class GridConfig:
    half_width: float = 0.5
    cells_per_axis: Optional[int] = None


@dataclass
class BandsConfig:
    """
    lo and hi bound the band range convolve works on (lo None is the far field).
    lo_min is the far-field cutoff floor; far_field_radius caps it from below.
    """
    lo: Optional[int] = None
    hi: int = 12
    lo_min: int = -20
    far_field_radius: Optional[float] = None
    subgrid: str = "absorb"
    method: str = "fast"
    max_cells: int = 2 ** 25
    refinement_depth: int = 3


@dataclass
class QuadratureConfig:
    scheme: Optional[str] = None
    nodes: Optional[int] = None
    counts: Optional[List[int]] = None
    seed: int = 0


@dataclass
class SuiteConfig:
    statements: List[str] = field(default_factory=lambda: list(SUITE_STATEMENTS))
    n_values: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    partial_depth: int = 10
    split_depth: int = 2
    dilation_steps: int = 1
    energy_depth: Optional[int] = None
    threads: int = 1


@dataclass
class FamilyConfig:
    widths: List[float] = field(default_factory=lambda: [0.125, 0.0625, 0.03125])
    scales: List[float] = field(default_factory=lambda: [1.0, 4.0])
    random_members: int = 2
    bump_count: int = 4
    seed: int = 0
    probe_widths: List[float] = field(default_factory=lambda: [2.0 ** -k for k in range(3, 8)])


@dataclass
class ExtremizeConfig:
    bump_count: int = 2
    budget: int = 500
    restarts: int = 8
    min_width: Optional[float] = None
    max_width: Optional[float] = None
    phi_variants: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: List[str] = field(default_factory=lambda: list(OUTPUT_FORMATS))
    audit: bool = False


@dataclass
class ToleranceConfig:
    cancellation: float = 1e-8
    zero_mean: float = 1e-10
    growth: float = 1.25
    growth_floor: float = 1e-6


@dataclass
class RunConfig:
    """Complete run configuration."""
    kernel: KernelConfig
    phi: PhiConfig
    grid: GridConfig
    bands: BandsConfig
    quadrature: QuadratureConfig
    suite: SuiteConfig
    family: FamilyConfig
    extremize: ExtremizeConfig
    output: OutputConfig
    tolerances: ToleranceConfig

    @property
    def p(self) -> float:
        return self.kernel.d / (self.kernel.d - self.kernel.alpha)


SECTIONS = {
    "kernel": KernelConfig,
    "phi": PhiConfig,
    "grid": GridConfig,
    "bands": BandsConfig,
    "quadrature": QuadratureConfig,
    "suite": SuiteConfig,
    "family": FamilyConfig,
    "extremize": ExtremizeConfig,
    "output": OutputConfig,
    "tolerances": ToleranceConfig,
}


# ============================================================================
# LOAD / MERGE / VALIDATE
# ============================================================================

def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Deep merge two dictionaries. Override values take precedence."""
    result = deepcopy(base)
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict) and key != "params":
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = deepcopy(value)
    return result


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{key} {message}")


def _check_keys(config: Dict[str, Any]) -> None:
    for section, value in config.items():
        if section not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown section '{section}'")
        _require(isinstance(value, dict), section, "must be a mapping")
        for key in value:
            if key not in DEFAULT_CONFIG[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")


def _validate_config(config: Dict[str, Any]) -> None:
    """
    Validate a merged configuration dictionary.

    Raises:
        ConfigError: naming the offending dotted key
    """
    _check_keys(config)
    kernel = config["kernel"]
    _require(_is_int(kernel["d"]) and kernel["d"] >= 1, "kernel.d", "must be a positive integer")
    _require(_is_int(kernel["ell"]) and kernel["ell"] >= 1, "kernel.ell", "must be a positive integer")
    _require(_is_number(kernel["alpha"]) and 0 < kernel["alpha"] < kernel["d"], "kernel.alpha",
             "must lie in (0, d)")
    valid_profiles = [p.value for p in Profile if p is not Profile.CUSTOM]
    _require(kernel["tilde_k"] in valid_profiles, "kernel.tilde_k", f"must be one of {valid_profiles}")
    for key in ("lipschitz_bound", "sup_bound"):
        value = kernel[key]
        _require(value is None or (_is_number(value) and value >= 0), f"kernel.{key}", "must be a non-negative number")

    phi = config["phi"]
    valid_families = [f.value for f in PhiFamily if f is not PhiFamily.CUSTOM]
    _require(phi["family"] in valid_families, "phi.family", f"must be one of {valid_families}")
    _require(isinstance(phi["params"], dict), "phi.params", "must be a mapping")
    p = kernel["d"] / (kernel["d"] - kernel["alpha"])
    if phi["p"] is not None:
        _require(_is_number(phi["p"]), "phi.p", "must be a number")
        _require(abs(phi["p"] - p) <= P_TOLERANCE, "phi.p", f"must equal d/(d-alpha) = {p:.17g}")

    grid = config["grid"]
    _require(_is_number(grid["half_width"]) and grid["half_width"] > 0 and is_power_of_two(grid["half_width"]),
             "grid.half_width", "must be a positive power of two")
    cells = grid["cells_per_axis"]
    _require(cells is None or (_is_int(cells) and cells >= 2 and is_power_of_two(cells)),
             "grid.cells_per_axis", "must be a power of two >= 2")

    bands = config["bands"]
    for key in ("hi", "lo_min", "max_cells", "refinement_depth"):
        _require(_is_int(bands[key]), f"bands.{key}", "must be an integer")
    _require(bands["lo_min"] <= 0, "bands.lo_min", "must be at most 0")
    _require(bands["hi"] >= 1, "bands.hi", "must be at least 1")
    lo = bands["lo"]
    _require(lo is None or (_is_int(lo) and bands["lo_min"] <= lo <= bands["hi"]), "bands.lo",
             "must be null or an integer in [lo_min, hi]")
    _require(bands["max_cells"] > 0, "bands.max_cells", "must be positive")
    _require(bands["refinement_depth"] >= 0, "bands.refinement_depth", "must be non-negative")
    radius = bands["far_field_radius"]
    _require(radius is None or (_is_number(radius) and radius >= 1), "bands.far_field_radius", "must be at least 1")
    _require(bands["subgrid"] in ("error", "absorb"), "bands.subgrid", "must be 'error' or 'absorb'")
    _require(bands["method"] in ("fast", "direct"), "bands.method", "must be 'fast' or 'direct'")

    quad = config["quadrature"]
    schemes = [s.value for s in QuadratureScheme]
    _require(quad["scheme"] is None or quad["scheme"] in schemes, "quadrature.scheme", f"must be one of {schemes}")
    _require(quad["nodes"] is None or (_is_int(quad["nodes"]) and quad["nodes"] > 0), "quadrature.nodes",
             "must be a positive integer")
    _require(quad["counts"] is None or (isinstance(quad["counts"], list) and all(_is_int(c) and c > 0 for c in quad["counts"])),
             "quadrature.counts", "must be a list of positive integers")
    _require(_is_int(quad["seed"]) and quad["seed"] >= 0, "quadrature.seed", "must be a non-negative integer")

    suite = config["suite"]
    _require(isinstance(suite["statements"], list), "suite.statements", "must be a list")
    for statement in suite["statements"]:
        _require(statement in SUITE_STATEMENTS, "suite.statements",
                 f"has unknown statement '{statement}'; known: {list(SUITE_STATEMENTS)}")
    _require(isinstance(suite["n_values"], list) and all(_is_int(n) and n >= 0 for n in suite["n_values"]),
             "suite.n_values", "must be a list of non-negative integers")
    for key in ("partial_depth", "split_depth", "dilation_steps"):
        _require(_is_int(suite[key]) and suite[key] >= 0, f"suite.{key}", "must be a non-negative integer")
    _require(suite["energy_depth"] is None or (_is_int(suite["energy_depth"]) and suite["energy_depth"] >= 1),
             "suite.energy_depth", "must be a positive integer")
    _require(_is_int(suite["threads"]) and suite["threads"] >= 1, "suite.threads", "must be a positive integer")

    family = config["family"]
    for key in ("widths", "scales", "probe_widths"):
        _require(isinstance(family[key], list) and all(_is_number(w) and w > 0 for w in family[key]),
                 f"family.{key}", "must be a list of positive numbers")
    for key in ("random_members", "seed"):
        _require(_is_int(family[key]) and family[key] >= 0, f"family.{key}", "must be a non-negative integer")
    _require(_is_int(family["bump_count"]) and family["bump_count"] >= 2, "family.bump_count", "must be at least 2")

    ext = config["extremize"]
    _require(_is_int(ext["bump_count"]) and ext["bump_count"] >= 2, "extremize.bump_count", "must be at least 2")
    _require(_is_int(ext["budget"]) and ext["budget"] >= 1, "extremize.budget", "must be a positive integer")
    _require(_is_int(ext["restarts"]) and ext["restarts"] >= 1, "extremize.restarts", "must be a positive integer")
    for key in ("min_width", "max_width"):
        _require(ext[key] is None or (_is_number(ext[key]) and ext[key] > 0), f"extremize.{key}", "must be positive")
    _require(isinstance(ext["phi_variants"], list) and all(isinstance(v, dict) for v in ext["phi_variants"]),
             "extremize.phi_variants", "must be a list of mappings")

    output = config["output"]
    _require(isinstance(output["directory"], str), "output.directory", "must be a string")
    _require(isinstance(output["formats"], list) and all(f in OUTPUT_FORMATS for f in output["formats"]),
             "output.formats", f"must be a subset of {list(OUTPUT_FORMATS)}")
    _require(isinstance(output["audit"], bool), "output.audit", "must be a boolean")

    tol = config["tolerances"]
    for key in ("cancellation", "zero_mean", "growth_floor"):
        _require(_is_number(tol[key]) and tol[key] >= 0, f"tolerances.{key}", "must be a non-negative number")
    _require(_is_number(tol["growth"]) and tol["growth"] >= 1, "tolerances.growth", "must be at least 1")


def config_from_dict(raw: Optional[Dict[str, Any]]) -> RunConfig:
    """Merge a (possibly partial) dictionary over the defaults, validate and build."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of sections")
    _check_keys(raw)
    merged = _deep_merge(DEFAULT_CONFIG, raw)
    _validate_config(merged)
    try:
        # the built objects must construct as well
        config = RunConfig(**{name: cls(**merged[name]) for name, cls in SECTIONS.items()})
        build_kernel(config)
        build_phi(config)
        build_grid(config)
        build_settings(config)
    except MazyaLabError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Load and validate configuration from a YAML file.

    Raises:
        ConfigError: if the file is missing, unreadable or invalid
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Failed to parse YAML file: {e}")
    except OSError as e:
        raise ConfigError(f"Failed to read configuration file: {e}")

    config = config_from_dict(loaded if loaded is not None else {})
    logger.info(f"Loaded configuration from {config_path} (digest {config_digest(config)})")
    return config


def save_config(config: RunConfig, filepath: Union[str, Path]) -> Path:
    """Save configuration to a YAML file."""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(asdict(config), f, default_flow_style=False, sort_keys=True)
    logger.info(f"Configuration saved to {path}")
    return path


def config_digest(config: RunConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON, without output and thread settings."""
    data = asdict(config)
    data.pop("output")
    data["suite"].pop("threads")
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def get_config_summary(config: RunConfig) -> Dict[str, Any]:
    """Short summary for log lines and the console."""
    grid = build_grid(config)
    return {
        "kernel": build_kernel(config).kernel_id,
        "phi": build_phi(config).phi_id,
        "p": config.p,
        "grid": f"{grid.cells_per_axis}^{grid.d} cells, h={grid.h:g}",
        "bands": str(build_band_range(config)),
        "statements": len(config.suite.statements),
        "family": len(config.family.widths) * len(config.family.scales)
                  + config.family.random_members * len(config.family.scales),
        "digest": config_digest(config),
    }


# ============================================================================
# BUILDERS
# ============================================================================

def build_kernel(config: RunConfig) -> KernelSpec:
    k = config.kernel
    return KernelSpec(d=k.d, ell=k.ell, alpha=float(k.alpha), tilde_k=k.tilde_k,
                      lipschitz_bound=k.lipschitz_bound, sup_bound=k.sup_bound, name=k.name)


def build_phi(config: RunConfig, overrides: Optional[Dict[str, Any]] = None) -> PhiSpec:
    """The configured Phi; overrides replace family, params or name (for extremize variants)."""
    section = asdict(config.phi)
    section.update(overrides or {})
    unknown = set(section) - set(DEFAULT_CONFIG["phi"])
    if unknown:
        raise ConfigError(f"unknown key 'phi.{sorted(unknown)[0]}'")
    return PhiSpec.build(ell=config.kernel.ell, p=config.p, family=section["family"],
                         params=section["params"], name=section["name"])


def build_grid(config: RunConfig) -> GridParams:
    d = config.kernel.d
    cells = config.grid.cells_per_axis or DEFAULT_CELLS.get(d, 2 ** 6)
    return GridParams(d=d, half_width=float(config.grid.half_width), cells_per_axis=cells)


def build_settings(config: RunConfig) -> ConvolutionSettings:
    b = config.bands
    radius = b.far_field_radius or DEFAULT_FAR_FIELD_RADIUS.get(config.kernel.d, 2.0)
    return ConvolutionSettings(lo_min=b.lo_min, far_field_radius=float(radius), max_cells=b.max_cells,
                               subgrid_bands=b.subgrid, refinement_depth=b.refinement_depth)


def build_band_range(config: RunConfig, lo: Optional[int] = None, hi: Optional[int] = None) -> BandRange:
    """bands.lo..bands.hi, either end replaced when given."""
    b = config.bands
    return BandRange(b.lo if lo is None else lo, b.hi if hi is None else hi)


def build_options(config: RunConfig) -> VerifyOptions:
    return VerifyOptions(settings=build_settings(config), method=config.bands.method,
                         band_hi=config.bands.hi, zero_mean_tol=config.tolerances.zero_mean)


def build_quadrature(config: RunConfig) -> SphereQuadrature:
    q = config.quadrature
    counts = tuple(q.counts) if q.counts else None
    return default_quadrature(config.kernel.d, q.scheme, q.nodes, counts, q.seed)


def build_plan(config: RunConfig) -> SuitePlan:
    s, f = config.suite, config.family
    return SuitePlan(statements=list(s.statements), n_values=list(s.n_values), partial_depth=s.partial_depth,
                     split_depth=s.split_depth, dilation_steps=s.dilation_steps, widths=list(f.widths),
                     scales=list(f.scales), random_members=f.random_members, bump_count=f.bump_count,
                     seed=f.seed, energy_depth=s.energy_depth)


def with_seed(config: RunConfig, seed: Optional[int]) -> RunConfig:
    """Copy of config with every seed replaced."""
    if seed is None:
        return config
    data = asdict(config)
    data["family"]["seed"] = seed
    data["quadrature"]["seed"] = seed
    return RunConfig(**{name: cls(**data[name]) for name, cls in SECTIONS.items()})

