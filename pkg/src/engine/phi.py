"""
Homogeneous Functionals
Positively p-homogeneous functionals Phi on R^ell, sphere quadratures and the
cancellation integrals of Phi(+-K~) over the unit sphere.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import special

from src.engine.errors import DimensionMismatchError, ExponentRangeError, PhiHomogeneityError
from src.engine.kernel import KernelSpec

logger = logging.getLogger(__name__)

HOMOGENEITY_TOLERANCE = 1e-9
P_CONSISTENCY_TOLERANCE = 1e-12


class PhiFamily(Enum):
    SIGNED_POWER = "signed_power"
    QUADRATIC_FORM = "quadratic_form"
    NORM_POWER_SIGNED = "norm_power_signed"
    NORM_POWER = "norm_power"
    CUSTOM = "custom"


class QuadratureScheme(Enum):
    TWO_POINT = "two_point"
    UNIFORM_CIRCLE = "uniform_circle"
    PRODUCT_ANGLES = "product_angles"
    MONTE_CARLO = "monte_carlo"


# ============================================================================
# FUNCTIONALS
# ============================================================================

@dataclass(frozen=True)
class PhiSpec:
    """
    Phi: R^ell -> R with Phi(tv) = t^p Phi(v) for t > 0.

    params holds a11/a12/a22 for quadratic_form and the unit vector u for
    norm_power_signed. A custom evaluator maps (N, ell) to (N,) and is checked
    for homogeneity on construction unless validate is False.
    """
    ell: int
    p: float
    family: str = "signed_power"
    params: Tuple[Tuple[str, object], ...] = ()
    lipschitz_bound: Optional[float] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    validate: bool = field(default=True, compare=False)
    name: str = ""

    def __post_init__(self):
        if not self.p > 1:
            raise ExponentRangeError(f"Phi needs p > 1, got {self.p}")
        family = PhiFamily(self.family)
        if family is PhiFamily.SIGNED_POWER and self.ell != 1:
            raise DimensionMismatchError("signed_power acts on R^1")
        if family is PhiFamily.QUADRATIC_FORM:
            if self.ell != 2:
                raise DimensionMismatchError("quadratic_form acts on R^2")
            if abs(self.p - 2.0) > P_CONSISTENCY_TOLERANCE:
                raise ExponentRangeError("quadratic_form is 2-homogeneous")
        if family is PhiFamily.NORM_POWER_SIGNED:
            u = np.asarray(self.param("u", [1.0] + [0.0] * (self.ell - 1)), dtype=float)
            if u.shape != (self.ell,) or abs(np.linalg.norm(u) - 1.0) > 1e-12:
                raise DimensionMismatchError("norm_power_signed needs a unit vector u in R^ell")
        if family is PhiFamily.CUSTOM:
            if self.evaluator is None:
                raise PhiHomogeneityError("custom Phi needs an evaluator")
            if self.validate:
                deviation = check_homogeneity(self, samples=256, seed=0)
                if deviation > HOMOGENEITY_TOLERANCE:
                    raise PhiHomogeneityError(
                        f"custom Phi is not {self.p:g}-homogeneous: deviation {deviation:.3g}")

    @classmethod
    def build(cls, ell: int, p: float, family: str, params: Optional[Dict[str, object]] = None,
              **kwargs) -> "PhiSpec":
        items = tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in (params or {}).items()))
        return cls(ell=ell, p=p, family=family, params=items, **kwargs)

    def param(self, key: str, default=None):
        return dict(self.params).get(key, default)

    @property
    def phi_id(self) -> str:
        if self.name:
            return self.name
        extra = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.family}-p{self.p:g}" + (f"[{extra}]" if extra else "")

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return eval_phi(self, v)

    def sup_on_sphere(self) -> float:
        """max |Phi| over the unit sphere of R^ell."""
        family = PhiFamily(self.family)
        if family in (PhiFamily.SIGNED_POWER, PhiFamily.NORM_POWER, PhiFamily.NORM_POWER_SIGNED):
            return 1.0
        if family is PhiFamily.QUADRATIC_FORM:
            a11, a12, a22 = (float(self.param(k, 0.0)) for k in ("a11", "a12", "a22"))
            matrix = np.array([[a11, a12 / 2.0], [a12 / 2.0, a22]])
            return float(np.max(np.abs(np.linalg.eigvalsh(matrix))))
        rng = np.random.default_rng(0)
        v = rng.standard_normal((4096, self.ell))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return float(np.max(np.abs(eval_phi(self, v))))


def _rows(phi: PhiSpec, v) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=float)
    if phi.ell == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        single = arr.ndim == 0
        return arr.reshape(-1, 1), single
    if arr.shape[-1] != phi.ell:
        raise DimensionMismatchError(f"vector of length {arr.shape[-1]} for Phi on R^{phi.ell}")
    return arr.reshape(-1, phi.ell), arr.ndim == 1


def phi_rows(phi: PhiSpec, v: np.ndarray) -> np.ndarray:
    family = PhiFamily(phi.family)
    if family is PhiFamily.SIGNED_POWER:
        t = v[:, 0]
        return t * np.abs(t) ** (phi.p - 1.0)
    if family is PhiFamily.QUADRATIC_FORM:
        a11, a12, a22 = (float(phi.param(k, 0.0)) for k in ("a11", "a12", "a22"))
        x1, x2 = v[:, 0], v[:, 1]
        return a11 * x1 * x1 + a12 * x1 * x2 + a22 * x2 * x2
    norm = np.linalg.norm(v, axis=1)
    if family is PhiFamily.NORM_POWER:
        return norm ** phi.p
    if family is PhiFamily.NORM_POWER_SIGNED:
        u = np.asarray(phi.param("u", [1.0] + [0.0] * (phi.ell - 1)), dtype=float)
        out = np.zeros(len(v))
        nz = norm > 0
        out[nz] = norm[nz] ** (phi.p - 2.0) * (v[nz] @ u)
        return out
    return np.asarray(phi.evaluator(v), dtype=float).reshape(len(v))


def eval_phi(phi: PhiSpec, v) -> np.ndarray:
    """Phi at a vector (returns a float) or at the rows of an (..., ell) array."""
    arr = np.asarray(v, dtype=float)
    rows, single = _rows(phi, arr)
    values = phi_rows(phi, rows)
    if single:
        return float(values[0])
    if phi.ell == 1 and arr.ndim >= 1 and arr.shape[-1] != 1:
        return values.reshape(arr.shape)
    return values.reshape(arr.shape[:-1])


def check_homogeneity(phi: PhiSpec, samples: int = 1000, seed: int = 0) -> float:
    """Max of |Phi(tv) - t^p Phi(v)| / (t^p (|v|^p + |Phi(v)|)) over t in [1/8, 8]."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, phi.ell))
    t = np.exp(rng.uniform(math.log(0.125), math.log(8.0), size=samples))
    base = phi_rows(phi, v)
    stretched = phi_rows(phi, t[:, None] * v)
    tp = t ** phi.p
    scale = tp * (np.linalg.norm(v, axis=1) ** phi.p + np.abs(base))
    return float(np.max(np.abs(stretched - tp * base) / scale))


def phi_perturbation_ratio(phi: PhiSpec, samples: int = 10_000, seed: int = 0) -> float:
    """Max of |Phi(a+b) - Phi(a)| / (|a|^{p-1} |b|) over random a and |b| <= 2|a|."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((samples, phi.ell))
    direction = rng.standard_normal((samples, phi.ell))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    a_norm = np.linalg.norm(a, axis=1)
    b = direction * (2.0 * a_norm * rng.uniform(0.0, 1.0, size=samples) ** 2)[:, None]
    b_norm = np.linalg.norm(b, axis=1)
    keep = (a_norm > 0) & (b_norm > 0)
    lhs = np.abs(phi_rows(phi, a + b) - phi_rows(phi, a))
    return float(np.max(lhs[keep] / (a_norm[keep] ** (phi.p - 1.0) * b_norm[keep])))


# ============================================================================
# SPHERE QUADRATURE
# ============================================================================

def surface_measure(d: int) -> float:
    """sigma(S^{d-1}) = 2 pi^{d/2} / Gamma(d/2)."""
    return float(2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0))


@dataclass(frozen=True)
class SphereQuadrature:
    d: int
    scheme: QuadratureScheme
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    counts: Tuple[int, ...] = ()
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.weights)


def two_point() -> SphereQuadrature:
    return SphereQuadrature(1, QuadratureScheme.TWO_POINT, np.array([[1.0], [-1.0]]),
                            np.array([1.0, 1.0]), counts=(2,))


def uniform_circle(n: int = 256) -> SphereQuadrature:
    theta = 2.0 * math.pi * np.arange(n) / n
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return SphereQuadrature(2, QuadratureScheme.UNIFORM_CIRCLE, nodes,
                            np.full(n, 2.0 * math.pi / n), counts=(n,))


def _product_nodes(d: int, counts: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
    if d == 2:
        circle = uniform_circle(counts[0])
        return circle.nodes, circle.weights
    inner_nodes, inner_weights = _product_nodes(d - 1, counts[:-1])
    # t = cos(theta) carries the weight (1 - t^2)^{(d-3)/2}
    t, w = special.roots_gegenbauer(counts[-1], (d - 2) / 2.0)
    radial = np.sqrt(np.clip(1.0 - t ** 2, 0.0, None))
    nodes = np.concatenate([
        np.repeat(t, len(inner_weights))[:, None],
        (radial[:, None, None] * inner_nodes[None, :, :]).reshape(-1, d - 1),
    ], axis=1)
    weights = np.outer(w, inner_weights).reshape(-1)
    return nodes, weights


def product_angles(d: int = 3, counts: Optional[Tuple[int, ...]] = None) -> SphereQuadrature:
    """Uniform azimuth times Gauss-Gegenbauer nodes in each polar cosine."""
    if d < 3:
        raise DimensionMismatchError("product_angles needs d >= 3")
    counts = tuple(counts) if counts else (32,) + (16,) * (d - 2)
    if len(counts) != d - 1:
        raise DimensionMismatchError(f"product_angles in d={d} needs {d - 1} node counts")
    nodes, weights = _product_nodes(d, counts)
    return SphereQuadrature(d, QuadratureScheme.PRODUCT_ANGLES, nodes, weights, counts=counts)


def monte_carlo(d: int, samples: int = 100_000, seed: int = 0) -> SphereQuadrature:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, d))
    nodes = x / np.linalg.norm(x, axis=1, keepdims=True)
    return SphereQuadrature(d, QuadratureScheme.MONTE_CARLO, nodes,
                            np.full(samples, surface_measure(d) / samples), counts=(samples,), seed=seed)


def default_quadrature(d: int, scheme: Optional[str] = None, nodes: Optional[int] = None,
                       counts: Optional[Tuple[int, ...]] = None, seed: int = 0) -> SphereQuadrature:
    if scheme is None:
        scheme = {1: "two_point", 2: "uniform_circle", 3: "product_angles"}.get(d, "monte_carlo")
    kind = QuadratureScheme(scheme)
    if kind is QuadratureScheme.TWO_POINT:
        if d != 1:
            raise DimensionMismatchError("two_point quadrature is for d = 1")
        return two_point()
    if kind is QuadratureScheme.UNIFORM_CIRCLE:
        if d != 2:
            raise DimensionMismatchError("uniform_circle quadrature is for d = 2")
        return uniform_circle(nodes or 256)
    if kind is QuadratureScheme.PRODUCT_ANGLES:
        return product_angles(d, counts)
    return monte_carlo(d, nodes or 100_000, seed)


def sphere_integrate(quad: SphereQuadrature, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """sum_i w_i g(zeta_i); g maps (N, d) nodes to (N,) values."""
    values = np.asarray(g(quad.nodes), dtype=float).reshape(quad.size)
    return float(np.dot(quad.weights, values))


def quadrature_error_estimate(quad: SphereQuadrature, values: np.ndarray) -> float:
    """Standard error for Monte Carlo; fine-minus-coarse difference for periodic rules."""
    values = np.asarray(values, dtype=float)
    if quad.scheme is QuadratureScheme.TWO_POINT:
        return 0.0
    if quad.scheme is QuadratureScheme.MONTE_CARLO:
        return float(surface_measure(quad.d) * np.std(values, ddof=1) / math.sqrt(len(values)))
    azimuth = quad.counts[0]
    if azimuth % 2:
        return 0.0
    fine = float(np.dot(quad.weights, values))
    # azimuth varies fastest in the node ordering
    mask = (np.arange(quad.size) % azimuth) % 2 == 0
    coarse = float(np.dot(2.0 * quad.weights[mask], values[mask]))
    return abs(fine - coarse)


# ============================================================================
# CANCELLATION
# ============================================================================

@dataclass(frozen=True)
class CancellationResult:
    residual_plus: float
    residual_minus: float
    normalizer: float
    error_plus: float = 0.0
    error_minus: float = 0.0

    def threshold(self, rel_tol: float = 1e-8) -> Tuple[float, float]:
        scale = rel_tol * self.normalizer
        return max(scale, self.error_plus), max(scale, self.error_minus)

    def cancels_plus(self, rel_tol: float = 1e-8) -> bool:
        return abs(self.residual_plus) <= self.threshold(rel_tol)[0]

    def cancels_minus(self, rel_tol: float = 1e-8) -> bool:
        return abs(self.residual_minus) <= self.threshold(rel_tol)[1]

    def cancels(self, rel_tol: float = 1e-8) -> bool:
        return self.cancels_plus(rel_tol) and self.cancels_minus(rel_tol)

    def __iter__(self):
        return iter((self.residual_plus, self.residual_minus, self.normalizer))


def check_p_consistency(phi: PhiSpec, spec: KernelSpec) -> None:
    if phi.ell != spec.ell:
        raise DimensionMismatchError(f"Phi acts on R^{phi.ell} but the kernel takes values in R^{spec.ell}")
    if abs(phi.p - spec.p) > P_CONSISTENCY_TOLERANCE:
        raise DimensionMismatchError(f"Phi has p={phi.p:g} but d/(d-alpha)={spec.p:g}")


def check_cancellation(phi: PhiSpec, spec: KernelSpec,
                       quad: Optional[SphereQuadrature] = None) -> CancellationResult:
    """Quadratures of Phi(K~) and Phi(-K~) over the sphere, reported separately."""
    check_p_consistency(phi, spec)
    quad = quad or default_quadrature(spec.d)
    if quad.d != spec.d:
        raise DimensionMismatchError(f"quadrature on S^{quad.d - 1} for a {spec.d}-d kernel")
    profile = spec.profile(quad.nodes)
    plus = phi_rows(phi, profile)
    minus = phi_rows(phi, -profile)
    result = CancellationResult(
        residual_plus=float(np.dot(quad.weights, plus)),
        residual_minus=float(np.dot(quad.weights, minus)),
        normalizer=float(np.dot(quad.weights, np.abs(plus) + np.abs(minus))),
        error_plus=quadrature_error_estimate(quad, plus),
        error_minus=quadrature_error_estimate(quad, minus),
    )
    logger.debug(f"Cancellation {phi.phi_id} / {spec.kernel_id}: "
                 f"{result.residual_plus:.3e}, {result.residual_minus:.3e} (norm {result.normalizer:.3e})")
    return result
