"""
Band convolutions of one test function, shared by every statement that
needs them, and the Phi integrals built on top.

The far field K_{<=0} * f lives on the outer grid, wide enough for the
far-field cutoff. Single bands K_n * f with n >= 1 reach at most 1/2 and
live on a smaller inner grid that sits in the middle of the outer one, so
K_{<=n} * f = far + sum of bands is only ever materialized inside the
inner window.
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from src.engine.errors import DimensionMismatchError, ZeroMeanError
from src.engine.gridfn import GridFunction, l1_norm, support_radius
from src.engine.kernel import (
    BandRange,
    ConvolutionSettings,
    KernelSpec,
    convolve,
    effective_lo,
    far_field_difference_constant,
    next_power_of_two,
    output_half_width,
    resolved_band_limit,
)
from src.engine.phi import PhiSpec, check_p_consistency, phi_rows, surface_measure

logger = logging.getLogger(__name__)


class TailPolicy(Enum):
    BOUND = "bound"
    IGNORE = "ignore"


@dataclass(frozen=True)
class VerifyOptions:
    """Discretization controls shared by every statement of a run."""
    settings: ConvolutionSettings = field(default_factory=lambda: ConvolutionSettings(subgrid_bands="absorb"))
    method: str = "fast"
    band_hi: int = 12
    tail_policy: TailPolicy = TailPolicy.BOUND
    zero_mean_tol: float = 1e-10


class PhiIntegral(NamedTuple):
    value: float
    tail_bound: float
    magnitude: float


def integrate_phi(phi: PhiSpec, values: np.ndarray, cell_volume: float,
                  mask: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """h^d sum Phi(u) and h^d sum |Phi(u)| over the (masked) cells of an (ell, n, ..., n) array."""
    rows = values.reshape(values.shape[0], -1).T
    keep = np.any(rows != 0.0, axis=1)
    if mask is not None:
        keep &= mask.reshape(-1)
    if not np.any(keep):
        return 0.0, 0.0
    phis = phi_rows(phi, rows[keep])
    return cell_volume * float(np.sum(phis)), cell_volume * float(np.sum(np.abs(phis)))


def magnitude(values: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean norm over the component axis."""
    if values.shape[0] == 1:
        return np.abs(values[0])
    return np.sqrt(np.sum(values ** 2, axis=0))


class BandConvolver:
    """Memoized K_range * f for one kernel and one scalar test function."""

    def __init__(self, spec: KernelSpec, f: GridFunction, options: Optional[VerifyOptions] = None):
        if f.components != 1:
            raise DimensionMismatchError("band convolutions need a scalar grid function")
        if f.d != spec.d:
            raise DimensionMismatchError(f"{f.d}-d function with a {spec.d}-d kernel")
        self.spec = spec
        self.f = f
        self.options = options or VerifyOptions()
        settings = self.options.settings
        self.cutoff = effective_lo(BandRange.upto(0), settings)
        self.outer_half_width = output_half_width(f, BandRange.upto(0), settings)
        self.inner_half_width = min(self.outer_half_width, next_power_of_two(f.half_width + 0.5))
        self.resolved = resolved_band_limit(f.h)
        self.l1 = l1_norm(f)
        self._cache: Dict[tuple, np.ndarray] = {}
        self._lock = threading.RLock()

    @property
    def h(self) -> float:
        return self.f.h

    @property
    def cell_volume(self) -> float:
        return self.f.cell_volume

    def cells(self, half_width: float) -> int:
        return int(round(2 * half_width / self.f.h))

    @property
    def window(self) -> Tuple[slice, ...]:
        """Slices of the outer grid covered by the inner grid, component axis included."""
        outer, inner = self.cells(self.outer_half_width), self.cells(self.inner_half_width)
        start = (outer - inner) // 2
        return (slice(None),) + (slice(start, start + inner),) * self.f.d

    def grid_for(self, lo: Optional[int]) -> float:
        """Smallest of the two grids that holds a range starting at band lo."""
        if lo is not None and math.ldexp(1.0, -lo) <= self.inner_half_width - self.f.half_width:
            return self.inner_half_width
        return self.outer_half_width

    def _convolve(self, band_range: BandRange, half_width: float) -> np.ndarray:
        key = ("range", band_range.lo, band_range.hi, half_width)
        with self._lock:
            if key not in self._cache:
                result = convolve(self.spec, band_range, self.f, method=self.options.method,
                                  settings=self.options.settings, out_half_width=half_width)
                self._cache[key] = result.values
            return self._cache[key]

    def radii(self, half_width: float) -> np.ndarray:
        """Distance of every cell centre from the origin."""
        key = ("radii", half_width)
        with self._lock:
            if key not in self._cache:
                n = self.cells(half_width)
                axis = -half_width + self.f.h * (np.arange(n) + 0.5)
                squares = axis ** 2
                total = squares
                for _ in range(1, self.f.d):
                    total = np.add.outer(total, squares)
                self._cache[key] = np.sqrt(total)
            return self._cache[key]

    def to_inner(self, values: np.ndarray, half_width: float) -> np.ndarray:
        if half_width == self.inner_half_width:
            return values
        return values[self.window]

    # ------------------------------------------------------------------
    # band algebra
    # ------------------------------------------------------------------

    def far(self) -> np.ndarray:
        """K_{<=0} * f on the outer grid."""
        return self._convolve(BandRange.upto(0), self.outer_half_width)

    def band(self, n: int) -> np.ndarray:
        """K_n * f on grid_for(n)."""
        return self._convolve(BandRange.single(n), self.grid_for(n))

    def local_bands(self, n: int) -> np.ndarray:
        """sum_{k=1..n} K_k * f on the inner grid."""
        key = ("bands", n)
        with self._lock:
            if key not in self._cache:
                if n <= 0:
                    total = np.zeros_like(self.far()[self.window])
                else:
                    total = self.local_bands(n - 1) + self.band(n)
                self._cache[key] = total
            return self._cache[key]

    def local_upto(self, n: int) -> np.ndarray:
        """K_{<=n} * f restricted to the inner grid (n >= 0)."""
        return self.far()[self.window] + self.local_bands(n)

    def upto(self, n: int) -> np.ndarray:
        """K_{<=n} * f on the whole outer grid."""
        if n <= 0:
            return self._convolve(BandRange.upto(n), self.outer_half_width)
        values = self.far().copy()
        values[self.window] += self.local_bands(n)
        return values

    def range_values(self, band_range: BandRange) -> Tuple[np.ndarray, float]:
        """K_range * f together with the half-width of the grid it lives on."""
        hi = band_range.hi
        if band_range.is_far_field:
            if 0 < hi <= self.resolved:
                return self.upto(hi), self.outer_half_width
            return self._convolve(band_range, self.outer_half_width), self.outer_half_width
        if band_range.lo == hi:
            return self.band(hi), self.grid_for(hi)
        if band_range.lo >= 1 and hi <= self.resolved:
            return self.local_bands(hi) - self.local_bands(band_range.lo - 1), self.inner_half_width
        half_width = self.grid_for(band_range.lo)
        return self._convolve(band_range, half_width), half_width

    # ------------------------------------------------------------------
    # far-field integrals
    # ------------------------------------------------------------------

    def far_field_tail(self, phi: PhiSpec, hi: int) -> Tuple[float, float]:
        """
        Integration radius r0 and the bound on int_{|x| > r0} |Phi(K_{<=hi} * f)|.

        r0 = 2^{-cutoff} - rho keeps the missing far bands out of the ball.
        Beyond it |K * f(x)| <= C rho ||f||_1 |x|^{alpha-d-1} for zero-mean f,
        which integrates to Lambda sigma (C rho ||f||_1)^p r0^{-p} / p.
        """
        rho = support_radius(self.f)
        r0 = math.ldexp(1.0, -self.cutoff) - rho
        if rho == 0.0:
            return r0, 0.0
        if r0 < max(2.0 * rho, rho + math.ldexp(1.0, -hi - 1)):
            return r0, math.inf
        p = self.spec.p
        c = far_field_difference_constant(self.spec)
        tail = (phi.sup_on_sphere() * surface_measure(self.spec.d)
                * (c * rho * self.l1) ** p * r0 ** (-p) / p)
        return r0, float(tail)

    def _outside_window(self, phi: PhiSpec, radius: float) -> Tuple[float, float]:
        key = ("outside", phi, radius)
        with self._lock:
            if key not in self._cache:
                mask = self.radii(self.outer_half_width) <= radius
                mask[self.window[1:]] = False
                self._cache[key] = np.array(integrate_phi(phi, self.far(), self.cell_volume, mask))
            value, mag = self._cache[key]
            return float(value), float(mag)

    def integrate_upto(self, phi: PhiSpec, n: int, radius: float) -> Tuple[float, float]:
        """int_{|x| <= radius} Phi(K_{<=n} * f), split into the part outside and inside the window."""
        if n <= 0:
            mask = self.radii(self.outer_half_width) <= radius
            return integrate_phi(phi, self.upto(n), self.cell_volume, mask)
        out_value, out_mag = self._outside_window(phi, radius)
        inner_mask = self.radii(self.outer_half_width)[self.window[1:]] <= radius
        in_value, in_mag = integrate_phi(phi, self.local_upto(n), self.cell_volume, inner_mask)
        return out_value + in_value, out_mag + in_mag


def phi_integral(spec: KernelSpec, phi: PhiSpec, f: GridFunction, band_range: BandRange,
                 tail_policy: Optional[TailPolicy] = None, options: Optional[VerifyOptions] = None,
                 convolver: Optional[BandConvolver] = None) -> PhiIntegral:
    """
    Midpoint integral of Phi(K_range * f).

    Far-field ranges need a zero-mean f; they are integrated over the ball
    where the cut-off far field is exact and carry the analytic tail bound.
    Finite ranges are compactly supported and integrated over their grid.
    """
    check_p_consistency(phi, spec)
    options = options or (convolver.options if convolver else VerifyOptions())
    tail_policy = tail_policy or options.tail_policy
    if l1_norm(f) == 0.0:
        return PhiIntegral(0.0, 0.0, 0.0)
    convolver = convolver or BandConvolver(spec, f, options)

    if band_range.is_far_field:
        if not f.is_zero_mean(rel_tol=options.zero_mean_tol):
            raise ZeroMeanError(f"far-field integral of {f.label or 'f'} needs a zero-mean function")
        radius, tail = convolver.far_field_tail(phi, band_range.hi)
        if tail_policy is TailPolicy.IGNORE:
            tail = 0.0
        if 0 < band_range.hi <= convolver.resolved:
            value, mag = convolver.integrate_upto(phi, band_range.hi, radius)
        else:
            values, half_width = convolver.range_values(band_range)
            mask = convolver.radii(half_width) <= radius
            value, mag = integrate_phi(phi, values, convolver.cell_volume, mask)
        logger.debug(f"phi_integral {band_range} of {f.label}: {value:.6g} (tail {tail:.3g}, r0={radius:g})")
        return PhiIntegral(value, tail, mag)

    values, _ = convolver.range_values(band_range)
    value, mag = integrate_phi(phi, values, convolver.cell_volume)
    return PhiIntegral(value, 0.0, mag)
