"""
Homogeneous Kernels
Evaluates K(x) = |x|^{alpha-d} K~(x/|x|), its dyadic bands
K_n = K on 2^{-n-1} <= |x| <= 2^{-n}, band sums, and their convolutions with
grid functions.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import signal

from src.engine.errors import (
    BandUnresolvedError,
    DimensionMismatchError,
    KernelDomainError,
    MemoryBoundError,
)
from src.engine.gridfn import GridFunction, is_power_of_two

logger = logging.getLogger(__name__)


class Profile(Enum):
    IDENTITY = "identity"
    SIGN = "sign"
    CONSTANT = "constant"
    CUSTOM = "custom"


class ConvolutionMethod(Enum):
    DIRECT = "direct"
    FAST = "fast"


# ============================================================================
# KERNEL DEFINITION
# ============================================================================

@dataclass(frozen=True)
class KernelSpec:
    """
    Homogeneous kernel of degree alpha - d with sphere profile K~.

    Built-in profiles: identity (zeta -> zeta, ell = d), sign (d = 1),
    constant (K~ = 1, the Riesz potential). A custom profile takes an
    (N, d) array of unit vectors and returns an (N, ell) array.
    """
    d: int
    ell: int
    alpha: float
    tilde_k: str = "identity"
    lipschitz_bound: Optional[float] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    sup_bound: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.d < 1 or self.ell < 1:
            raise KernelDomainError(f"d and ell must be positive, got d={self.d}, ell={self.ell}")
        if not (0 < self.alpha < self.d):
            raise KernelDomainError(f"alpha must lie in (0, d), got alpha={self.alpha}, d={self.d}")
        try:
            profile = Profile(self.tilde_k)
        except ValueError:
            raise KernelDomainError(f"unknown sphere profile '{self.tilde_k}'")
        if profile is Profile.IDENTITY and self.ell != self.d:
            raise DimensionMismatchError("identity profile needs ell = d")
        if profile is Profile.SIGN and (self.d != 1 or self.ell != 1):
            raise DimensionMismatchError("sign profile needs d = 1 and ell = 1")
        if profile is Profile.CONSTANT and self.ell != 1:
            raise DimensionMismatchError("constant profile needs ell = 1")
        if profile is Profile.CUSTOM and self.evaluator is None:
            raise KernelDomainError("custom profile needs an evaluator")

    @property
    def p(self) -> float:
        return self.d / (self.d - self.alpha)

    @property
    def kernel_id(self) -> str:
        return self.name or f"{self.tilde_k}-d{self.d}-a{self.alpha:g}"

    def profile(self, u: np.ndarray) -> np.ndarray:
        """K~ at unit vectors u of shape (N, d); returns (N, ell)."""
        kind = Profile(self.tilde_k)
        if kind in (Profile.IDENTITY, Profile.SIGN):
            return np.array(u, dtype=float)
        if kind is Profile.CONSTANT:
            return np.ones((u.shape[0], 1))
        values = np.asarray(self.evaluator(u), dtype=float).reshape(u.shape[0], self.ell)
        if not np.all(np.isfinite(values)):
            raise KernelDomainError("custom profile returned non-finite values")
        return values

    def sup_norm(self) -> float:
        if self.sup_bound is not None:
            return float(self.sup_bound)
        if Profile(self.tilde_k) is not Profile.CUSTOM:
            return 1.0
        u = _sphere_samples(self.d, 4096)
        return float(np.max(np.linalg.norm(self.profile(u), axis=1)))

    def lipschitz(self) -> float:
        if self.lipschitz_bound is not None:
            return float(self.lipschitz_bound)
        kind = Profile(self.tilde_k)
        if kind is Profile.IDENTITY:
            return 1.0
        if kind in (Profile.SIGN, Profile.CONSTANT):
            return 0.0
        u = _sphere_samples(self.d, 2048)
        v = u + 1e-3 * _sphere_samples(self.d, 2048, seed=1)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        step = np.linalg.norm(u - v, axis=1)
        diff = np.linalg.norm(self.profile(u) - self.profile(v), axis=1)
        keep = step > 0
        return float(np.max(diff[keep] / step[keep])) if np.any(keep) else 0.0


def _sphere_samples(d: int, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def far_field_difference_constant(spec: KernelSpec) -> float:
    """C with |K(x - y) - K(x)| <= C |y| |x|^{alpha-d-1} whenever |y| <= |x|/2."""
    gradient = spec.lipschitz() + (spec.d - spec.alpha) * spec.sup_norm()
    return gradient * 2.0 ** (spec.d - spec.alpha + 1)


@dataclass(frozen=True)
class BandRange:
    """K_{lo <= . <= hi}; lo = None stands for minus infinity."""
    lo: Optional[int]
    hi: int

    def __post_init__(self):
        if self.lo is not None and self.lo > self.hi:
            raise KernelDomainError(f"band range needs lo <= hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def single(cls, n: int) -> "BandRange":
        return cls(n, n)

    @classmethod
    def upto(cls, n: int) -> "BandRange":
        return cls(None, n)

    @property
    def is_far_field(self) -> bool:
        return self.lo is None

    @property
    def outer_radius(self) -> float:
        return math.inf if self.lo is None else math.ldexp(1.0, -self.lo)

    @property
    def inner_radius(self) -> float:
        return math.ldexp(1.0, -self.hi - 1)

    def __str__(self) -> str:
        lo = "(-inf" if self.lo is None else f"[{self.lo}"
        return f"{lo},{self.hi}]"


# ============================================================================
# POINTWISE EVALUATION
# ============================================================================

def _as_points(spec: KernelSpec, x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    if spec.d == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr.reshape(-1, 1) if arr.ndim else arr.reshape(1, 1)
        single = np.asarray(x).ndim == 0
    if arr.shape[-1] != spec.d:
        raise DimensionMismatchError(f"points of dimension {arr.shape[-1]} for a {spec.d}-d kernel")
    return arr.reshape(-1, spec.d), single


def _band_values(spec: KernelSpec, points: np.ndarray, lo: Optional[int],
                 hi: Optional[int]) -> np.ndarray:
    """K on the closed annulus 2^{-hi-1} <= |x| <= 2^{-lo}, zero elsewhere."""
    r = np.linalg.norm(points, axis=-1)
    active = r > 0
    if hi is not None:
        active &= r >= math.ldexp(1.0, -hi - 1)
    if lo is not None:
        active &= r <= math.ldexp(1.0, -lo)
    out = np.zeros(points.shape[:-1] + (spec.ell,))
    if np.any(active):
        ra = r[active]
        out[active] = (ra ** (spec.alpha - spec.d))[:, None] * spec.profile(points[active] / ra[:, None])
    return out


def _finish(values: np.ndarray, single: bool) -> np.ndarray:
    return values[0] if single else values


def eval_kernel(spec: KernelSpec, x) -> np.ndarray:
    """|x|^{alpha-d} K~(x/|x|) for a point or an (N, d) batch."""
    points, single = _as_points(spec, x)
    if np.any(np.linalg.norm(points, axis=-1) == 0):
        raise KernelDomainError("kernel singular at origin")
    return _finish(_band_values(spec, points, None, None), single)


def eval_band(spec: KernelSpec, n: int, x) -> np.ndarray:
    points, single = _as_points(spec, x)
    return _finish(_band_values(spec, points, n, n), single)


def eval_band_sum(spec: KernelSpec, band_range: BandRange, x) -> np.ndarray:
    """Sum of bands in the range; a point on a shared sphere counts once."""
    points, single = _as_points(spec, x)
    return _finish(_band_values(spec, points, band_range.lo, band_range.hi), single)


# ============================================================================
# CONVOLUTION
# ============================================================================

@dataclass(frozen=True)
class ConvolutionSettings:
    """Far-field and resolution controls shared by every convolution of a run."""
    lo_min: int = -20
    far_field_radius: float = 4.0
    max_cells: int = 2 ** 25
    subgrid_bands: str = "error"  # "error" or "absorb"
    refinement_depth: int = 3

    def __post_init__(self):
        if self.subgrid_bands not in ("error", "absorb"):
            raise KernelDomainError(f"subgrid_bands must be 'error' or 'absorb', got '{self.subgrid_bands}'")
        if not self.far_field_radius >= 1.0:
            raise KernelDomainError("far_field_radius must be at least 1")


def resolved_band_limit(h: float) -> int:
    """Largest n with h <= 2^{-n-1}/4."""
    return int(math.floor(-math.log2(h) + 1e-9)) - 3


def effective_lo(band_range: BandRange, settings: ConvolutionSettings) -> int:
    """Outermost band actually convolved; minus infinity is cut at the far-field radius."""
    if band_range.lo is not None:
        return band_range.lo
    cap = -int(math.floor(math.log2(settings.far_field_radius) + 1e-9))
    return min(max(settings.lo_min, cap), band_range.hi)


def next_power_of_two(x: float) -> float:
    return math.ldexp(1.0, int(math.ceil(math.log2(x) - 1e-12)))


def output_half_width(f: GridFunction, band_range: BandRange,
                      settings: ConvolutionSettings) -> float:
    reach = math.ldexp(1.0, -effective_lo(band_range, settings))
    return next_power_of_two(f.half_width + reach)


def _subcell_offsets(d: int) -> np.ndarray:
    ticks = np.array([-0.375, -0.125, 0.125, 0.375])
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, d)


def _straddles(centers: np.ndarray, width: float, radii: Tuple[float, ...]) -> np.ndarray:
    a = np.abs(centers)
    near = np.linalg.norm(np.maximum(a - width / 2.0, 0.0), axis=-1)
    far = np.linalg.norm(a + width / 2.0, axis=-1)
    mask = np.zeros(len(centers), dtype=bool)
    for r in radii:
        mask |= (near < r) & (r < far)
    return mask


def _cell_average(spec: KernelSpec, lo: int, hi: int, centers: np.ndarray,
                  width: float, depth: int) -> np.ndarray:
    """Midpoint values, replaced by 4^d sub-cell averages on cells cut by a band sphere."""
    values = _band_values(spec, centers, lo, hi)
    if depth == 0 or not len(centers):
        return values
    radii = (math.ldexp(1.0, -lo), math.ldexp(1.0, -hi - 1))
    cut = _straddles(centers, width, radii)
    if np.any(cut):
        offsets = _subcell_offsets(spec.d) * width
        sub = (centers[cut][:, None, :] + offsets[None, :, :]).reshape(-1, spec.d)
        sub_values = _cell_average(spec, lo, hi, sub, width / 4.0, depth - 1)
        values[cut] = sub_values.reshape(-1, offsets.shape[0], spec.ell).mean(axis=1)
    return values


@lru_cache(maxsize=64)
def band_stencil(spec: KernelSpec, lo: int, hi: int, h: float, half_cells: int,
                 depth: int) -> np.ndarray:
    """
    Weights h^d * <K_{lo..hi}> on the cells at offsets h*m, |m_i| <= half_cells.

    Returned with shape (ell, 2*half_cells+1, ...); read-only because it is cached.
    """
    side = 2 * half_cells + 1
    ticks = h * np.arange(-half_cells, half_cells + 1)
    centers = np.stack(np.meshgrid(*([ticks] * spec.d), indexing="ij"), axis=-1).reshape(-1, spec.d)
    values = _cell_average(spec, lo, hi, centers, h, depth) * h ** spec.d
    stencil = np.moveaxis(values.reshape((side,) * spec.d + (spec.ell,)), -1, 0).copy()
    stencil.setflags(write=False)
    logger.debug(f"Stencil {spec.kernel_id} [{lo},{hi}] h={h:g}: {side}^{spec.d} cells")
    return stencil


def _check_resolution(band_range: BandRange, h: float, settings: ConvolutionSettings) -> None:
    if h <= band_range.inner_radius / 4.0:
        return
    outer_resolved = band_range.lo is not None and h <= math.ldexp(1.0, -band_range.lo - 1) / 4.0
    multi_band = band_range.lo is None or band_range.lo < band_range.hi
    if settings.subgrid_bands == "absorb" and multi_band and (band_range.lo is None or outer_resolved):
        return
    raise BandUnresolvedError(
        f"band unresolved: h={h:g} > 2^(-{band_range.hi}-1)/4 for range {band_range}")


def convolve(spec: KernelSpec, band_range: BandRange, f: GridFunction,
             method: str = "fast", settings: Optional[ConvolutionSettings] = None,
             out_half_width: Optional[float] = None) -> GridFunction:
    """
    Midpoint discretization of K_range * f on the extended grid.

    out(x_i) = sum_j W[i - j] f(y_j) with W the cell-averaged stencil; the
    output grid keeps the cell size and grows to the smallest power-of-two
    half-width containing the input box dilated by the band's outer radius.
    """
    settings = settings or ConvolutionSettings()
    method = ConvolutionMethod(method)
    if f.components != 1:
        raise DimensionMismatchError("convolve needs a scalar grid function")
    if f.d != spec.d:
        raise DimensionMismatchError(f"{f.d}-d function with a {spec.d}-d kernel")
    h = f.h
    _check_resolution(band_range, h, settings)

    lo = effective_lo(band_range, settings)
    reach = math.ldexp(1.0, -lo)
    needed = next_power_of_two(f.half_width + reach)
    if out_half_width is None:
        out_half_width = needed
    elif out_half_width < needed or not is_power_of_two(out_half_width):
        raise MemoryBoundError(f"output half-width {out_half_width:g} cannot hold reach {reach:g}")
    out_cells = int(round(2 * out_half_width / h))
    if out_cells ** spec.d * spec.ell > settings.max_cells:
        raise MemoryBoundError(
            f"extended grid {out_cells}^{spec.d} x {spec.ell} exceeds max_cells={settings.max_cells}")

    out = np.zeros((spec.ell,) + (out_cells,) * spec.d)
    if not np.any(f.values):
        return GridFunction(spec.d, out_half_width, out_cells, out, label=f"K{band_range}*{f.label}")

    margin = (out_cells - f.cells_per_axis) // 2
    half_cells = min(margin, int(math.ceil(reach / h)) + 1)
    stencil = band_stencil(spec, lo, band_range.hi, h, half_cells, settings.refinement_depth)
    start = margin - half_cells
    window = tuple(slice(start, start + f.cells_per_axis + 2 * half_cells) for _ in range(spec.d))
    for c in range(spec.ell):
        if method is ConvolutionMethod.FAST:
            block = signal.fftconvolve(f.values[0], stencil[c], mode="full")
        else:
            block = signal.convolve(f.values[0], stencil[c], mode="full", method="direct")
        out[(c,) + window] = block
    logger.debug(f"convolve {spec.kernel_id} {band_range} ({method.value}) -> {out_cells}^{spec.d} cells")
    return GridFunction(spec.d, out_half_width, out_cells, out, label=f"K{band_range}*{f.label}")
