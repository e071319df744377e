"""
Inequality statements: each assembles kernel, Phi and test function into
the two sides of one estimate and returns an InequalityReport.
"""

import logging
import math
from typing import List, Optional

import numpy as np

from src.engine.dyadic.cubes import Cube, DyadicCube
from src.engine.dyadic.energy import energy_increment_lemma_check
from src.engine.dyadic.mp import mp_for
from src.engine.errors import ExponentRangeError, GeometryError
from src.engine.gridfn import (
    GridFunction,
    _support_points,
    dilate,
    l1_norm,
    min_first_moment,
    minimize_moment,
    pair_moment,
    support_radius,
)
from src.engine.kernel import BandRange, KernelSpec
from src.engine.phi import PhiSpec, check_p_consistency, surface_measure
from src.engine.verify.convolver import (
    BandConvolver,
    VerifyOptions,
    integrate_phi,
    magnitude,
    phi_integral,
)
from src.engine.verify.report import InequalityReport, StatementId, make_report

logger = logging.getLogger(__name__)


def _convolver(spec: KernelSpec, f: GridFunction, options: Optional[VerifyOptions],
               convolver: Optional[BandConvolver]) -> BandConvolver:
    return convolver or BandConvolver(spec, f, options)


def _label(f: GridFunction) -> str:
    return f.label or "f"


def _mp_id(p: float) -> str:
    return "M_p_highp" if p > 2 else "M_p"


def _mp_integral(p: float, a: np.ndarray, b: np.ndarray, cell_volume: float) -> float:
    """int M_p(|a|, |b|) over the cells where both are nonzero."""
    x, y = magnitude(a), magnitude(b)
    keep = (x > 0) & (y > 0)
    if not np.any(keep):
        return 0.0
    return cell_volume * float(np.sum(mp_for(p)(x[keep], y[keep])))


# ============================================================================
# FULL-KERNEL STATEMENTS
# ============================================================================

def main_ratio(spec: KernelSpec, phi: PhiSpec, f: GridFunction, options: Optional[VerifyOptions] = None,
               convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """|int Phi(K * f)| against ||f||_1^p."""
    check_p_consistency(phi, spec)
    conv = _convolver(spec, f, options, convolver)
    result = phi_integral(spec, phi, f, BandRange.upto(conv.options.band_hi), convolver=conv)
    return make_report(StatementId.MAIN, spec.kernel_id, phi.phi_id, _label(f), None,
                       abs(result.value), conv.l1 ** spec.p, tail=result.tail_bound,
                       scale=result.magnitude)


def first_lemma_check(spec: KernelSpec, f: GridFunction, options: Optional[VerifyOptions] = None,
                      convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """int |K_{<=0} * f|^p against ||f||_1^p for zero-mean f supported in the ball of radius 1/2."""
    rho = support_radius(f)
    if rho > 0.5:
        raise GeometryError(f"support violation: {_label(f)} reaches radius {rho:g} > 1/2")
    norm_power = PhiSpec(ell=spec.ell, p=spec.p, family="norm_power")
    conv = _convolver(spec, f, options, convolver)
    result = phi_integral(spec, norm_power, f, BandRange.upto(0), convolver=conv)
    return make_report(StatementId.FIRST_LEMMA, spec.kernel_id, norm_power.phi_id, _label(f), 0,
                       result.value, conv.l1 ** spec.p, tail=result.tail_bound)


def second_lemma_check(spec: KernelSpec, phi: PhiSpec, f: GridFunction, n: int, highp: bool = False,
                       options: Optional[VerifyOptions] = None,
                       convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """
    lhs = |int Phi(K_{<=n+1} f) - int Phi(K_{<=n} f)|,
    rhs = |int Phi(K_{n+1} f)| + int M_p(|K_{<=n} f|, |K_{n+1} f|).

    The two integrands agree wherever K_{n+1} f vanishes, so the difference
    is taken on the inner grid only.
    """
    check_p_consistency(phi, spec)
    if phi.p > 2 and not highp:
        raise ExponentRangeError(f"second lemma needs p <= 2, got p={phi.p:g}; pass highp to use m_p_highp")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.SECOND_LEMMA, spec.kernel_id, phi.phi_id, _label(f), n, 0.0, 0.0)
    a = conv.local_upto(n)
    b = conv.band(n + 1)
    vol = conv.cell_volume
    with_band, mag = integrate_phi(phi, a + b, vol)
    without, _ = integrate_phi(phi, a, vol)
    band_value, _ = integrate_phi(phi, b, vol)
    rhs = abs(band_value) + _mp_integral(phi.p, a, b, vol)
    return make_report(StatementId.SECOND_LEMMA, spec.kernel_id, phi.phi_id, _label(f), n,
                       abs(with_band - without), rhs, scale=mag)


def telescopic_decomposition_check(spec: KernelSpec, phi: PhiSpec, f: GridFunction, N: int,
                                   options: Optional[VerifyOptions] = None,
                                   convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """|I_{N+1}| against |I_0| + sum_{n<=N} |I_{n+1} - I_n| with I_n = int Phi(K_{<=n} f)."""
    check_p_consistency(phi, spec)
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.TELESCOPIC, spec.kernel_id, phi.phi_id, _label(f), N, 0.0, 0.0)
    top = min(N, conv.resolved - 1)
    notes = [f"truncated at N={top}"] if top < N else []
    first = phi_integral(spec, phi, f, BandRange.upto(0), convolver=conv)
    radius, tail = conv.far_field_tail(phi, top + 1)
    values = [first.value] + [conv.integrate_upto(phi, n, radius)[0] for n in range(1, top + 2)]
    rhs = abs(values[0]) + float(np.sum(np.abs(np.diff(values))))
    return make_report(StatementId.TELESCOPIC, spec.kernel_id, phi.phi_id, _label(f), N,
                       abs(values[-1]), rhs, tail=tail, notes=notes)


def dilation_check(spec: KernelSpec, phi: PhiSpec, f: GridFunction, steps: int = 1,
                   options: Optional[VerifyOptions] = None,
                   convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """Relative change of main_ratio under the L1-preserving dilation f -> 2^{nd} f(2^n x)."""
    base = main_ratio(spec, phi, f, options, convolver)
    dilated = main_ratio(spec, phi, dilate(f, steps), options or (convolver.options if convolver else None))
    rhs = max(base.ratio, dilated.ratio)
    scale = l1_norm(f) ** spec.p
    tail = (base.truncation_error_bound + dilated.truncation_error_bound) / scale if scale else 0.0
    report = make_report(StatementId.DILATION, spec.kernel_id, phi.phi_id, _label(f), steps,
                         abs(base.ratio - dilated.ratio), rhs, tail=tail,
                         notes=[f"ratios {base.ratio:.6g} / {dilated.ratio:.6g}"])
    return report


# ============================================================================
# BAND STATEMENTS
# ============================================================================

def _band_tail(spec: KernelSpec, phi_sup: float, f: GridFunction, last: int) -> float:
    """
    Bound for sum_{n > last} |int Phi(K_n f)|.

    |K_n f| <= ||f||_inf ||K_n||_1 with ||K_n||_1 = 2^{-n alpha} ||K_0||_1, and
    K_n f lives on the support cells dilated by 2^{-n}.
    """
    points, weights = _support_points(f)
    if not len(weights):
        return 0.0
    alpha, p, d = spec.alpha, spec.p, spec.d
    k0 = spec.sup_norm() * surface_measure(d) * (1.0 - 2.0 ** (-alpha)) / alpha
    support = len(weights) * (f.h + math.ldexp(1.0, -last)) ** d
    decay = 2.0 ** (-alpha * p)
    return float(phi_sup * support * float(np.max(weights)) ** p * k0 ** p
                 * decay ** (last + 1) / (1.0 - decay))


def main2_partial(spec: KernelSpec, phi: PhiSpec, f: GridFunction, N: int,
                  options: Optional[VerifyOptions] = None,
                  convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """sum_{n=1..N} |int Phi(K_n f)| against ||f||_1^p; bands past the grid resolution go to the tail."""
    check_p_consistency(phi, spec)
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.MAIN2, spec.kernel_id, phi.phi_id, _label(f), N, 0.0, 0.0)
    top = min(N, conv.resolved)
    terms = [abs(integrate_phi(phi, conv.band(n), conv.cell_volume)[0]) for n in range(1, top + 1)]
    notes = []
    tail = 0.0
    if top < N:
        tail = _band_tail(spec, phi.sup_on_sphere(), f, top)
        notes.append(f"truncated at N={top}")
    return make_report(StatementId.MAIN2, spec.kernel_id, phi.phi_id, _label(f), N,
                       float(np.sum(terms)), conv.l1 ** spec.p, tail=tail, notes=notes)


def _remainder_tail(spec: KernelSpec, f: GridFunction, p: float, last: int) -> float:
    """
    Bound for sum_{n > last} int M_p(|K_{<=n} f|, |K_{n+1} f|).

    M_p(x, y) <= x^{p-1} y (plus x y^{p-1} for p > 2). Where K_{n+1} f is
    nonzero, |K_{<=n} f| <= ||f||_inf ||K~||_inf sigma D^alpha / alpha with
    D = 2 rho + 2^{-last-2}, and ||K_{n+1} f||_q <= ||f||_q ||K_0||_1 2^{-(n+1) alpha}.
    """
    points, weights = _support_points(f)
    if not len(weights):
        return 0.0
    alpha, d = spec.alpha, spec.d
    sup_f = float(np.max(weights))
    sigma = surface_measure(d)
    k0 = spec.sup_norm() * sigma * (1.0 - 2.0 ** (-alpha)) / alpha
    reach = 2.0 * support_radius(f) + math.ldexp(1.0, -last - 2)
    x_max = sup_f * spec.sup_norm() * sigma * reach ** alpha / alpha
    y1 = l1_norm(f) * k0
    decay = 2.0 ** (-alpha)
    tail = x_max ** (p - 1.0) * y1 * decay ** (last + 2) / (1.0 - decay)
    if p > 2:
        high = decay ** (p - 1.0)
        tail += x_max * y1 * (sup_f * k0) ** (p - 2.0) * high ** (last + 2) / (1.0 - high)
    return float(tail)


def remainder_partial(spec: KernelSpec, f: GridFunction, N: int, p: Optional[float] = None,
                      options: Optional[VerifyOptions] = None,
                      convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """
    sum_{n=0..N} int M_p(|K_{<=n} f|, |K_{n+1} f|) against ||f||_1^p.

    Past the grid resolution the remaining terms are bounded analytically.
    """
    p = spec.p if p is None else p
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.REMAINDER, spec.kernel_id, _mp_id(p), _label(f), N, 0.0, 0.0)
    top = min(N, conv.resolved - 1)
    terms = [_mp_integral(p, conv.local_upto(n), conv.band(n + 1), conv.cell_volume)
             for n in range(0, top + 1)]
    notes = []
    tail = 0.0
    if top < N and terms:
        tail = _remainder_tail(spec, f, p, top)
        notes.append(f"truncated at N={top}; tail bounded")
    return make_report(StatementId.REMAINDER, spec.kernel_id, _mp_id(p), _label(f), N,
                       float(np.sum(terms)), conv.l1 ** p, tail=tail, notes=notes)


def remainder_split_check(spec: KernelSpec, f: GridFunction, n: int, N: int, p: Optional[float] = None,
                          options: Optional[VerifyOptions] = None,
                          convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """
    lhs = int M_p(|K_{<=n} f|, |K_{n+1} f|);
    rhs = I_0 + sum_m I_m with I_0 for the bands n-N..n together and I_m for
    each single band m < n-N down to the far-field cutoff.
    """
    p = spec.p if p is None else p
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.REMAINDER_SPLIT, spec.kernel_id, _mp_id(p), _label(f), n, 0.0, 0.0)
    vol = conv.cell_volume
    b = conv.band(n + 1)
    lhs = _mp_integral(p, conv.local_upto(n), b, vol)

    lo = max(n - N, conv.cutoff)
    near, half_width = conv.range_values(BandRange(lo, n))
    pieces = [_mp_integral(p, conv.to_inner(near, half_width), b, vol)]
    for m in range(lo - 1, conv.cutoff - 1, -1):
        pieces.append(_mp_integral(p, conv.to_inner(conv.band(m), conv.grid_for(m)), b, vol))
    return make_report(StatementId.REMAINDER_SPLIT, spec.kernel_id, _mp_id(p), _label(f), n,
                       lhs, float(np.sum(pieces)), notes=[f"split depth {N}, {len(pieces) - 1} far bands"])


def median_bound_check(spec: KernelSpec, phi: PhiSpec, f: GridFunction, n: int,
                       options: Optional[VerifyOptions] = None,
                       convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """|int Phi(K_n f)| against 2^n ||f||_1^{p-1} inf_c int |x - c| |f|."""
    check_p_consistency(phi, spec)
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.MEDIAN_BOUND, spec.kernel_id, phi.phi_id, _label(f), n, 0.0, 0.0)
    value, mag = integrate_phi(phi, conv.band(n), conv.cell_volume)
    moment = min_first_moment(f)
    rhs = 2.0 ** n * conv.l1 ** (spec.p - 1.0) * moment.value
    return make_report(StatementId.MEDIAN_BOUND, spec.kernel_id, phi.phi_id, _label(f), n,
                       abs(value), rhs, scale=mag)


def local_main2_rhs(f: GridFunction, n: int, p: float) -> float:
    """
    2^n sum_j ||f||_{L1(3^d Q)}^{p-1} inf_c int_{3^d Q} |x - c| |f| over the
    cubes Q = Q_{n,j} of the lattice 2^{-n} Z^d that hold a support point.
    """
    points, weights = _support_points(f)
    if not len(weights):
        return 0.0
    side = math.ldexp(1.0, -n)
    dilation = 3 ** f.d
    cubes = np.unique(np.floor(points / side).astype(np.int64), axis=0)
    total = 0.0
    for index in cubes:
        box = Cube(tuple(float(c) for c in index * side), side).dilate(dilation)
        inside = np.all((points >= box.lower) & (points <= box.upper), axis=1)
        mass = f.cell_volume * float(np.sum(weights[inside]))
        moment = minimize_moment(points[inside], weights[inside], f.grid)
        total += mass ** (p - 1.0) * moment.value
    return math.ldexp(total, n)


def local_main2_check(spec: KernelSpec, phi: PhiSpec, f: GridFunction, n: int,
                      options: Optional[VerifyOptions] = None,
                      convolver: Optional[BandConvolver] = None) -> InequalityReport:
    """|int Phi(K_{n+1} f)| against the localized median bound at scale 2^{-n}."""
    check_p_consistency(phi, spec)
    conv = _convolver(spec, f, options, convolver)
    if conv.l1 == 0.0:
        return make_report(StatementId.LOCAL_MAIN2, spec.kernel_id, phi.phi_id, _label(f), n, 0.0, 0.0)
    value, mag = integrate_phi(phi, conv.band(n + 1), conv.cell_volume)
    return make_report(StatementId.LOCAL_MAIN2, spec.kernel_id, phi.phi_id, _label(f), n,
                       abs(value), local_main2_rhs(f, n, spec.p), scale=mag)


# ============================================================================
# MOMENT AND ENERGY STATEMENTS
# ============================================================================

def pair_moment_check(f: GridFunction, kernel_id: str = "", phi_id: str = "") -> InequalityReport:
    """||f||_1 inf_c int |x - c| |f| against the double integral of |x - y| |f(x)| |f(y)|."""
    norm = l1_norm(f)
    if norm == 0.0:
        return make_report(StatementId.PAIR_MOMENT, kernel_id, phi_id, _label(f), None, 0.0, 0.0)
    lhs = norm * min_first_moment(f).value
    return make_report(StatementId.PAIR_MOMENT, kernel_id, phi_id, _label(f), None, lhs, pair_moment(f))


def energy_increment_check(spec: KernelSpec, f: GridFunction, depth: Optional[int] = None,
                           eps: float = 0.49, phi_id: str = "") -> InequalityReport:
    """The energy increment estimate on the grid box as root cube."""
    root = DyadicCube.of(Cube((-f.half_width,) * f.d, 2.0 * f.half_width))
    depth = int(math.log2(f.cells_per_axis)) if depth is None else depth
    if l1_norm(f) == 0.0:
        return make_report(StatementId.ENERGY_INCREMENT, spec.kernel_id, phi_id, _label(f), depth, 0.0, 0.0)
    result = energy_increment_lemma_check(root, f, spec.p, depth, eps)
    return make_report(StatementId.ENERGY_INCREMENT, spec.kernel_id, phi_id, _label(f), depth,
                       result.lhs, result.rhs,
                       notes=[f"lhs at greedy limit point {result.lhs_at_limit_point:.6g} "
                              f"(error {result.limit_error:.3g})"])


def statements_for(ids: List[str]) -> List[StatementId]:
    return [StatementId(s) for s in ids]
