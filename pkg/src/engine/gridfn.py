"""
Grid Functions
Compactly supported test functions sampled at the cell centers of a uniform
box grid, with norms, moments, zero-mean projection and generator families.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Any, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from src.engine.errors import GeometryError, ZeroFunctionError, DimensionMismatchError

logger = logging.getLogger(__name__)

HEADER_DTYPE_INT = np.dtype("<i8")
HEADER_DTYPE_FLOAT = np.dtype("<f8")
HEADER_BYTES = 32


def is_power_of_two(x: float) -> bool:
    """True for 2^k with integer k (k may be negative)."""
    if not (x > 0 and math.isfinite(x)):
        return False
    return math.frexp(x)[0] == 0.5


# ============================================================================
# GRID TYPES
# ============================================================================

@dataclass(frozen=True)
class GridParams:
    """Cell-centred uniform grid on [-R, R]^d."""
    d: int
    half_width: float
    cells_per_axis: int

    def __post_init__(self):
        if self.d < 1:
            raise GeometryError(f"grid dimension must be positive, got {self.d}")
        if not is_power_of_two(self.half_width):
            raise GeometryError(f"half_width must be a power of two, got {self.half_width}")
        if not (isinstance(self.cells_per_axis, (int, np.integer)) and is_power_of_two(self.cells_per_axis)
                and self.cells_per_axis >= 2):
            raise GeometryError(f"cells_per_axis must be a power of two >= 2, got {self.cells_per_axis}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.cells_per_axis,) * self.d

    @property
    def axis_centers(self) -> np.ndarray:
        return -self.half_width + self.h * (np.arange(self.cells_per_axis) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centres as an array of shape (n, ..., n, d)."""
        axes = [self.axis_centers] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def zeros(self, components: int = 1) -> "GridFunction":
        return GridFunction(self.d, self.half_width, self.cells_per_axis,
                            np.zeros((components,) + self.shape))

    def cell_index(self, x: Sequence[float]) -> Tuple[int, ...]:
        """Index of the cell containing point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.floor((x + self.half_width) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.cells_per_axis):
            raise GeometryError(f"point {x.tolist()} lies outside the grid box")
        return tuple(int(i) for i in idx)


@dataclass
class GridFunction:
    """
    R^components valued function sampled on a GridParams grid.

    values has shape (components, n, ..., n); a d-dimensional array is
    promoted to a single component.
    """
    d: int
    half_width: float
    cells_per_axis: int
    values: np.ndarray
    zero_mean: bool = False
    label: str = ""

    def __post_init__(self):
        GridParams(self.d, self.half_width, self.cells_per_axis)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == self.d:
            values = values[np.newaxis]
        expected = (self.cells_per_axis,) * self.d
        if values.ndim != self.d + 1 or values.shape[1:] != expected:
            raise DimensionMismatchError(
                f"values shape {values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(values)):
            raise GeometryError("grid function values must be finite")
        self.values = values

    @property
    def grid(self) -> GridParams:
        return GridParams(self.d, self.half_width, self.cells_per_axis)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    @property
    def axis_centers(self) -> np.ndarray:
        return self.grid.axis_centers

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm across components."""
        if self.components == 1:
            return np.abs(self.values[0])
        return np.sqrt(np.sum(self.values ** 2, axis=0))

    def scaled(self, factor: float) -> "GridFunction":
        return replace(self, values=self.values * factor,
                       label=f"{self.label}*{factor:g}" if self.label else self.label)

    def is_zero_mean(self, rel_tol: float = 1e-12) -> bool:
        return abs(_total(self)) <= rel_tol * l1_norm(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "components": self.components,
            "cells_per_axis": self.cells_per_axis,
            "half_width": self.half_width,
            "zero_mean": self.zero_mean,
            "label": self.label,
        }


class MomentResult(NamedTuple):
    center: np.ndarray
    value: float
    initial_value: float


@dataclass(frozen=True)
class DipoleSpec:
    """Mollified dipole: unit bumps at origin and origin + z with weights +1 and -1."""
    z: Tuple[float, ...]
    width: float
    origin: Optional[Tuple[float, ...]] = None
    profile: str = "cubic_bspline"

    def __post_init__(self):
        if self.width <= 0:
            raise GeometryError(f"dipole width must be positive, got {self.width}")
        if self.origin is not None and len(self.origin) != len(self.z):
            raise DimensionMismatchError("dipole origin and displacement differ in dimension")
        if self.profile != "cubic_bspline":
            raise GeometryError(f"unknown bump profile '{self.profile}'")

    @classmethod
    def symmetric(cls, z: Sequence[float], width: float) -> "DipoleSpec":
        """Dipole whose poles sit at -z/2 and +z/2."""
        z = tuple(float(v) for v in z)
        return cls(z=z, width=width, origin=tuple(-v / 2.0 for v in z))

    @property
    def poles(self) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(self.z, dtype=float)
        origin = np.zeros_like(z) if self.origin is None else np.asarray(self.origin, dtype=float)
        return origin, origin + z


# ============================================================================
# NORMS AND MOMENTS
# ============================================================================

def _total(f: GridFunction) -> float:
    return float(f.cell_volume * np.sum(f.values))


def l1_norm(f: GridFunction) -> float:
    """h^d times the sum of pointwise magnitudes."""
    return float(f.cell_volume * np.sum(f.magnitude()))


def integral(f: GridFunction) -> Union[float, np.ndarray]:
    """h^d times the sum of values, per component."""
    axes = tuple(range(1, f.d + 1))
    totals = f.cell_volume * np.sum(f.values, axis=axes)
    return float(totals[0]) if f.components == 1 else totals


def _support_points(f: GridFunction, lower: Optional[np.ndarray] = None,
                    upper: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Centres and magnitudes of the nonzero cells, optionally inside a closed box."""
    mag = f.magnitude()
    idx = np.nonzero(mag)
    axis = f.axis_centers
    points = np.stack([axis[i] for i in idx], axis=-1) if idx[0].size else np.zeros((0, f.d))
    weights = mag[idx]
    if lower is not None and weights.size:
        inside = np.all((points >= lower) & (points <= upper), axis=1)
        points, weights = points[inside], weights[inside]
    return points, weights


def first_moment(f: GridFunction, c: Sequence[float]) -> float:
    """h^d * sum |x_i - c| |f(x_i)|."""
    points, weights = _support_points(f)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if not weights.size:
        return 0.0
    return float(f.cell_volume * np.sum(np.linalg.norm(points - c, axis=1) * weights))


def _moment_at(points: np.ndarray, weights: np.ndarray, center: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(points - center, axis=1) * weights))


def _weighted_median_index(coords: np.ndarray, weights: np.ndarray, axis: np.ndarray,
                           h: float, half_width: float) -> int:
    order = np.argsort(coords, kind="stable")
    cumulative = np.cumsum(weights[order])
    pick = int(np.searchsorted(cumulative, 0.5 * cumulative[-1]))
    pick = min(pick, len(order) - 1)
    return int(np.clip(np.floor((coords[order[pick]] + half_width) / h), 0, len(axis) - 1))


def minimize_moment(points: np.ndarray, weights: np.ndarray, grid: GridParams) -> MomentResult:
    """
    Coordinate descent over cell centres for inf_c sum |x - c| w.

    Starts at the coordinate-wise weighted median and walks single-axis
    steps while they strictly improve the objective.
    """
    if not weights.size or not np.any(weights > 0):
        raise ZeroFunctionError("zero function")
    axis = grid.axis_centers
    index = [_weighted_median_index(points[:, a], weights, axis, grid.h, grid.half_width)
             for a in range(grid.d)]
    best = _moment_at(points, weights, axis[index])
    initial = best
    slack = 1e-14 * max(best, np.finfo(float).tiny)

    improved = True
    while improved:
        improved = False
        for a in range(grid.d):
            for step in (-1, 1):
                while 0 <= index[a] + step < len(axis):
                    trial = list(index)
                    trial[a] += step
                    value = _moment_at(points, weights, axis[trial])
                    if value < best - slack:
                        index, best, improved = trial, value, True
                    else:
                        break

    vol = grid.cell_volume
    return MomentResult(center=axis[index].copy(), value=vol * best, initial_value=vol * initial)


def min_first_moment(f: GridFunction) -> MomentResult:
    """Approximate minimiser of first_moment over cell centres."""
    points, weights = _support_points(f)
    if not weights.size:
        raise ZeroFunctionError("zero function")
    return minimize_moment(points, weights, f.grid)


def pair_moment(f: GridFunction, chunk: int = 2048) -> float:
    """h^{2d} * sum_i sum_j |x_i - x_j| |f(x_i)| |f(x_j)|."""
    points, weights = _support_points(f)
    total = 0.0
    for start in range(0, len(weights), chunk):
        block = points[start:start + chunk]
        dist = np.linalg.norm(block[:, None, :] - points[None, :, :], axis=-1)
        total += float(weights[start:start + chunk] @ dist @ weights)
    return f.cell_volume ** 2 * total


def support_radius(f: GridFunction) -> float:
    """Largest distance from the origin to a point of a support cell."""
    points, _ = _support_points(f)
    if not len(points):
        return 0.0
    return float(np.max(np.linalg.norm(np.abs(points) + f.h / 2.0, axis=1)))


# ============================================================================
# TRANSFORMS
# ============================================================================

def project_zero_mean(f: GridFunction) -> GridFunction:
    """Subtract the mean over the support cells so that the integral vanishes."""
    if f.components != 1:
        raise DimensionMismatchError("zero-mean projection needs a scalar function")
    norm = l1_norm(f)
    if norm == 0:
        raise ZeroFunctionError("zero function")
    if f.is_zero_mean():
        return replace(f, zero_mean=True)
    support = f.values[0] != 0
    if np.count_nonzero(support) < 2:
        raise ZeroFunctionError("support too small")
    values = f.values.copy()
    values[0][support] -= values[0][support].mean()
    projected = replace(f, values=values, zero_mean=True)
    if l1_norm(projected) <= 1e-12 * norm:
        raise ZeroFunctionError("projection annihilates f")
    return projected


def restrict(f: GridFunction, lower: Sequence[float], upper: Sequence[float]) -> GridFunction:
    """f times the indicator of the closed box [lower, upper] (by cell centres)."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axis = f.axis_centers
    masks = [(axis >= lower[a]) & (axis <= upper[a]) for a in range(f.d)]
    mask = masks[0]
    for m in masks[1:]:
        mask = np.multiply.outer(mask, m)
    return replace(f, values=f.values * mask, zero_mean=False)


def dilate(f: GridFunction, n: int) -> GridFunction:
    """L1-preserving dilation f_n(x) = 2^{nd} f(2^n x) on the grid of half-width R / 2^n."""
    return replace(f, half_width=math.ldexp(f.half_width, -n),
                   values=f.values * math.ldexp(1.0, n * f.d),
                   label=f"{f.label}@{n}" if f.label else f.label)


def shift_cells(f: GridFunction, offset: Sequence[int]) -> GridFunction:
    """Translate by whole cells; cells shifted out of the box must be empty."""
    values = f.values
    for a, k in enumerate(offset):
        if k == 0:
            continue
        ax = a + 1
        edge = [slice(None)] * values.ndim
        edge[ax] = slice(-k, None) if k > 0 else slice(0, -k)
        if np.any(values[tuple(edge)]):
            raise GeometryError(f"shift by {k} cells along axis {a} leaves the grid box")
        values = np.roll(values, k, axis=ax)
    return replace(f, values=values)


# ============================================================================
# GENERATORS
# ============================================================================

def cubic_bspline(t: np.ndarray) -> np.ndarray:
    """Centred cubic B-spline supported on [-2, 2]."""
    a = np.abs(t)
    inner = 2.0 / 3.0 - a ** 2 + 0.5 * a ** 3
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def bump(grid: GridParams, center: Sequence[float], width: float) -> np.ndarray:
    """Tensor cubic B-spline supported in the cube of half-side width, unit discrete mass."""
    axis = grid.axis_centers
    center = np.atleast_1d(np.asarray(center, dtype=float))
    values = cubic_bspline((axis - center[0]) / (width / 2.0))
    for a in range(1, grid.d):
        values = np.multiply.outer(values, cubic_bspline((axis - center[a]) / (width / 2.0)))
    mass = grid.cell_volume * values.sum()
    if mass <= 0:
        raise GeometryError("width unresolved")
    return values / mass


def _check_bump_fits(grid: GridParams, center: np.ndarray, width: float) -> None:
    if width < 2.0 * grid.h:
        raise GeometryError(f"width unresolved: w={width:g} < 2h={2 * grid.h:g}")
    if np.any(np.abs(center) + width > grid.half_width):
        raise GeometryError(f"bump at {center.tolist()} with width {width:g} leaves the grid box")


def make_dipole(spec: DipoleSpec, grid: GridParams) -> GridFunction:
    """Mollified delta_a - delta_{a+z}; integral 0 and l1 norm 2."""
    first, second = spec.poles
    if len(first) != grid.d:
        raise DimensionMismatchError(f"dipole of dimension {len(first)} on a {grid.d}-d grid")
    for pole in (first, second):
        _check_bump_fits(grid, pole, spec.width)
    if np.max(np.abs(second - first)) < 2.0 * spec.width:
        raise GeometryError("dipole poles overlap: need max|z_i| >= 2w")
    values = bump(grid, first, spec.width) - bump(grid, second, spec.width)
    return GridFunction(grid.d, grid.half_width, grid.cells_per_axis, values,
                        zero_mean=True, label=f"dipole-w{spec.width:g}")


def bump_sum(grid: GridParams, centers: np.ndarray, widths: np.ndarray,
             weights: np.ndarray) -> np.ndarray:
    values = np.zeros(grid.shape)
    for center, width, weight in zip(centers, widths, weights):
        if weight != 0:
            values += weight * bump(grid, center, width)
    return values


def make_random_bumps(count: int, seed: int, grid: GridParams,
                      min_width: Optional[float] = None,
                      max_width: Optional[float] = None) -> GridFunction:
    """Seeded sum of bumps whose weights are projected onto the sum-zero hyperplane."""
    if count < 2:
        raise ZeroFunctionError("support too small: need at least two bumps")
    min_width = 8.0 * grid.h if min_width is None else min_width
    max_width = grid.half_width / 4.0 if max_width is None else max_width
    if min_width > max_width:
        raise GeometryError(f"width range [{min_width:g}, {max_width:g}] is empty")

    rng = np.random.default_rng(seed)
    widths = np.exp(rng.uniform(np.log(min_width), np.log(max_width), size=count))
    centers = np.stack([rng.uniform(-grid.half_width + w, grid.half_width - w, size=grid.d)
                        for w in widths])
    weights = rng.standard_normal(count)
    weights -= weights.mean()
    for center, width in zip(centers, widths):
        _check_bump_fits(grid, center, width)
    values = bump_sum(grid, centers, widths, weights)
    logger.debug(f"Random bumps seed={seed} count={count} widths={np.round(widths, 6).tolist()}")
    return GridFunction(grid.d, grid.half_width, grid.cells_per_axis, values,
                        zero_mean=True, label=f"bumps-s{seed}")


def make_point_mass(grid: GridParams, x0: Sequence[float], mass: float = 1.0) -> GridFunction:
    """Single cell carrying the given mass."""
    values = np.zeros(grid.shape)
    values[grid.cell_index(x0)] = mass / grid.cell_volume
    return GridFunction(grid.d, grid.half_width, grid.cells_per_axis, values, label="point-mass")


def make_indicator(grid: GridParams, lower: Sequence[float], upper: Sequence[float]) -> GridFunction:
    ones = GridFunction(grid.d, grid.half_width, grid.cells_per_axis, np.ones(grid.shape))
    return replace(restrict(ones, lower, upper), label="indicator")


# ============================================================================
# SERIALIZATION
# ============================================================================

def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_grid_function(f: GridFunction, path: Union[str, Path]) -> Path:
    """Write the little-endian binary layout plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (np.array([f.d, f.components, f.cells_per_axis], dtype=HEADER_DTYPE_INT).tobytes()
              + np.array([f.half_width], dtype=HEADER_DTYPE_FLOAT).tobytes())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype=HEADER_DTYPE_FLOAT).tobytes(order="C"))
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(f.to_dict(), fh, indent=2, sort_keys=True)
    logger.info(f"Saved grid function {f.label or '<unnamed>'} to {path}")
    return path


def load_grid_function(path: Union[str, Path]) -> GridFunction:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"grid function file {path} not found")
    raw = path.read_bytes()
    if len(raw) < HEADER_BYTES:
        raise GeometryError(f"{path} is too short for a grid function header")
    d, components, cells = (int(v) for v in np.frombuffer(raw[:24], dtype=HEADER_DTYPE_INT))
    half_width = float(np.frombuffer(raw[24:32], dtype=HEADER_DTYPE_FLOAT)[0])
    shape = (components,) + (cells,) * d
    expected = int(np.prod(shape)) * 8
    if len(raw) - HEADER_BYTES != expected:
        raise GeometryError(f"{path}: expected {expected} value bytes, found {len(raw) - HEADER_BYTES}")
    values = np.frombuffer(raw[HEADER_BYTES:], dtype=HEADER_DTYPE_FLOAT).reshape(shape).copy()

    meta: Dict[str, Any] = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        for key, value in (("d", d), ("components", components), ("cells_per_axis", cells)):
            if meta.get(key, value) != value:
                raise GeometryError(f"sidecar {sidecar} disagrees with header on '{key}'")
    return GridFunction(d, half_width, cells, values,
                        zero_mean=bool(meta.get("zero_mean", False)),
                        label=str(meta.get("label", path.stem)))
