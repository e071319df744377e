"""
Auxiliary Lemma Checks
Kernel difference, kernel overlap and Phi perturbation estimates, and the
M_p property checks, each sampled on a deterministic grid plus seeded
random draws and reported as a measured constant.
"""

import logging
import math
from typing import List, Optional

import numpy as np

from src.engine.dyadic.mp import (
    energy_bound2_infimum,
    energy_bound_infimum,
    mp_concavity_defect,
    mp_lipschitz_ratio,
    mp_subadditivity_constant,
)
from src.engine.errors import ExponentRangeError
from src.engine.kernel import BandRange, KernelSpec, eval_band, eval_band_sum, eval_kernel, far_field_difference_constant
from src.engine.phi import PhiSpec, phi_perturbation_ratio
from src.engine.verify.report import InequalityReport, StatementId, make_report, measured_constant

logger = logging.getLogger(__name__)

P2_TOLERANCE = 1e-12
ENERGY_BOUND_SIZES = (2, 3, 4)
DEFAULT_SAMPLES = 4096
QUADRATURE_CELLS = {1: 256, 2: 64, 3: 16}


def _directions(d: int, extra: int, seed: int) -> np.ndarray:
    """+-e_i followed by seeded random unit vectors."""
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    if d == 1 or extra == 0:
        return axes
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((extra, d))
    return np.concatenate([axes, v / np.linalg.norm(v, axis=1, keepdims=True)])


def _ball_samples(d: int, count: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(lo), math.log(hi), size=count))
    return v * r[:, None]


def _magnitudes(values: np.ndarray) -> np.ndarray:
    return np.linalg.norm(values.reshape(len(values), -1), axis=1)


# ============================================================================
# KERNEL LEMMAS
# ============================================================================

def k1_ratios(spec: KernelSpec, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> np.ndarray:
    """|K(x - y) - K(x)| / (|y| |x|^{alpha-d-1}) for |x| in [2, 16], 0 < |y| <= 1."""
    d = spec.d
    dirs = _directions(d, 8, seed)
    radii = np.geomspace(2.0, 16.0, 9)
    steps = np.geomspace(1.0 / 64.0, 1.0, 7)
    x = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    y = (steps[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    xs = np.repeat(x, len(y), axis=0)
    ys = np.tile(y, (len(x), 1))

    rng = np.random.default_rng(seed)
    xs = np.concatenate([xs, _ball_samples(d, samples, 2.0, 16.0, rng)])
    ys = np.concatenate([ys, _ball_samples(d, samples, 1e-3, 1.0, rng)])

    diff = _magnitudes(eval_kernel(spec, xs - ys) - eval_kernel(spec, xs))
    scale = np.linalg.norm(ys, axis=1) * np.linalg.norm(xs, axis=1) ** (spec.alpha - d - 1.0)
    return diff / scale


def k1_check(spec: KernelSpec, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> InequalityReport:
    ratios = k1_ratios(spec, samples, seed)
    bound = far_field_difference_constant(spec)
    return measured_constant(StatementId.AUX_K1, spec.kernel_id, "", float(np.max(ratios)), bound=bound,
                             notes=[f"{len(ratios)} pairs; analytic constant {bound:.6g}"])


def _require_p2(spec: KernelSpec, what: str) -> None:
    if abs(spec.p - 2.0) > P2_TOLERANCE:
        raise ExponentRangeError(f"{what} is stated for p = 2, got p={spec.p:g}")


def _overlap_nodes(spec: KernelSpec, cells: int):
    """Midpoint nodes of [-1/2, 1/2]^d carrying |K_1|, with the cell volume folded in."""
    h = 1.0 / cells
    axis = -0.5 + h * (np.arange(cells) + 0.5)
    nodes = np.stack(np.meshgrid(*([axis] * spec.d), indexing="ij"), axis=-1).reshape(-1, spec.d)
    weights = _magnitudes(eval_band(spec, 1, nodes)) * h ** spec.d
    keep = weights > 0
    return nodes[keep], weights[keep]


def band_overlap(spec: KernelSpec, x: np.ndarray, cells: Optional[int] = None, chunk: int = 64) -> np.ndarray:
    """
    g(x) = int |K_{<=0}(x - y)| |K_1(y)| dy by midpoint quadrature over the
    support box of K_1. g(0) = 0 exactly: no node reaches the sphere |y| = 1/2.
    """
    cells = cells or QUADRATURE_CELLS.get(spec.d, 16)
    nodes, weights = _overlap_nodes(spec, cells)
    x = np.asarray(x, dtype=float).reshape(-1, spec.d)
    out = np.empty(len(x))
    far = BandRange.upto(0)
    for start in range(0, len(x), chunk):
        block = x[start:start + chunk]
        shifted = (block[:, None, :] - nodes[None, :, :]).reshape(-1, spec.d)
        values = _magnitudes(eval_band_sum(spec, far, shifted)).reshape(len(block), len(nodes))
        out[start:start + chunk] = values @ weights
    return out


def overlap_envelope(d: int, x: np.ndarray) -> np.ndarray:
    """|x| (1 + |x|)^{-d/2-1}."""
    r = np.linalg.norm(np.asarray(x, dtype=float).reshape(-1, d), axis=1)
    return r * (1.0 + r) ** (-d / 2.0 - 1.0)


def k2_check(spec: KernelSpec, cells: Optional[int] = None, seed: int = 0) -> InequalityReport:
    """max g(x) / (|x| (1 + |x|)^{-d/2-1}) over 1/8 <= |x| <= 8."""
    _require_p2(spec, "the band overlap estimate")
    d = spec.d
    radii = np.geomspace(0.125, 8.0, 25)
    x = (radii[:, None, None] * _directions(d, 4, seed)[None, :, :]).reshape(-1, d)
    ratios = band_overlap(spec, x, cells) / overlap_envelope(d, x)
    at_origin = float(band_overlap(spec, np.zeros((1, d)), cells)[0])
    report = measured_constant(StatementId.AUX_K2, spec.kernel_id, "", float(np.max(ratios)),
                               notes=[f"g(0) = {at_origin:g}"])
    if at_origin != 0.0:
        report.fail(f"overlap at the origin is {at_origin:g}, expected 0")
    return report


def k3_ratio(spec: KernelSpec, y: np.ndarray, z: np.ndarray, cells: int) -> float:
    """int |K_0(x - z) - K_0(x - y)| dx / |z - y| over a box holding both supports."""
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    half = 1.0 + max(np.linalg.norm(y), np.linalg.norm(z))
    h = 2.0 * half / cells
    axis = -half + h * (np.arange(cells) + 0.5)
    nodes = np.stack(np.meshgrid(*([axis] * spec.d), indexing="ij"), axis=-1).reshape(-1, spec.d)
    diff = _magnitudes(eval_band(spec, 0, nodes - z) - eval_band(spec, 0, nodes - y))
    integral = float(np.sum(diff)) * h ** spec.d
    gap = float(np.linalg.norm(z - y))
    if gap == 0.0:
        return 0.0 if integral == 0.0 else math.inf
    return integral / gap


def k3_check(spec: KernelSpec, cells: Optional[int] = None) -> InequalityReport:
    d = spec.d
    cells = cells or {1: 2 ** 14, 2: 512}.get(d, 64)
    box_cell = 2.2 / cells
    gaps = [t for t in (2.0 ** -k for k in range(2, 8)) if t >= 4.0 * box_cell] or [0.25]
    dirs = _directions(d, 0, 0)
    ratios = []
    for size in (0.1, 1.0 / 16.0):
        y = size * dirs[0]
        for t in gaps:
            for v in dirs:
                ratios.append(k3_ratio(spec, y, y + t * v, cells))
    same = k3_ratio(spec, 0.1 * dirs[0], 0.1 * dirs[0], cells)
    report = measured_constant(StatementId.AUX_K3, spec.kernel_id, "", max(ratios),
                               notes=[f"{len(ratios)} pairs on {cells}^{d} cells"])
    if same != 0.0:
        report.fail("z = y does not give 0")
    return report


def kernel_sum_bound_check(spec: KernelSpec, N: int, cells: Optional[int] = None,
                           seed: int = 0) -> InequalityReport:
    """
    max_x sum_{n<=N} |K_{<=n}| * |K_{n+1}|(x) against max_x sum_{n<=N} envelope(2^n x).

    For p = 2 the n-th term is g(2^n x) with g the band overlap.
    """
    _require_p2(spec, "the kernel sum bound")
    d = spec.d
    radii = np.geomspace(2.0 ** (-N - 2), 4.0, 64)
    x = (radii[:, None, None] * _directions(d, 2, seed)[None, :, :]).reshape(-1, d)
    scales = 2.0 ** np.arange(N + 1)
    stretched = (scales[:, None, None] * x[None, :, :]).reshape(-1, d)
    sums = band_overlap(spec, stretched, cells).reshape(N + 1, len(x)).sum(axis=0)
    envelope = overlap_envelope(d, stretched).reshape(N + 1, len(x)).sum(axis=0)
    return make_report(StatementId.KERNEL_SUM, spec.kernel_id, "", "", N,
                       float(np.max(sums)), float(np.max(envelope)))


# ============================================================================
# PHI AND M_p LEMMAS
# ============================================================================

def phi1_check(phi: PhiSpec, samples: int = 10_000, seed: int = 0, kernel_id: str = "") -> InequalityReport:
    ratio = phi_perturbation_ratio(phi, samples, seed)
    return measured_constant(StatementId.AUX_PHI1, kernel_id, phi.phi_id, ratio,
                             notes=[f"{samples} samples, |b| <= 2|a|"])


def mp_id(p: float) -> str:
    return ("M_p_highp" if p > 2 else "M_p") + f"-p{p:g}"


def mp_checks(p: float, samples: int = 100_000, seed: int = 0, kernel_id: str = "",
              resolution: int = 64) -> List[InequalityReport]:
    """Lipschitz, subadditivity, concavity and the two simplex energy bounds for exponent p."""
    phi_id = mp_id(p)
    reports = [measured_constant(StatementId.AUX_MP_LIP, kernel_id, phi_id, mp_lipschitz_ratio(p),
                                 bound=10.0 * max(1.0, p - 1.0))]
    if p <= 2:
        sub = mp_subadditivity_constant(p, samples=samples, seed=seed)
        report = measured_constant(StatementId.AUX_SUBADDITIVE, kernel_id, phi_id, sub.constant,
                                   notes=[f"theta constant {sub.theta_constant:.6g}",
                                          f"identity defect {sub.identity_defect:.3g}"])
        if sub.identity_defect > 1e-12:
            report.fail(f"M_p = y^p theta(x/y) off by {sub.identity_defect:.3g}")
        reports.append(report)
        reports.append(measured_constant(StatementId.AUX_CONVEXITY, kernel_id, phi_id,
                                         mp_concavity_defect(p), bound=1e-12))
    else:
        logger.info(f"Subadditivity and concavity checks skipped for p={p:g} > 2")
    for n in ENERGY_BOUND_SIZES:
        reports.append(measured_constant(StatementId.AUX_ENERGY_BOUND, kernel_id, phi_id,
                                         energy_bound_infimum(p, n, resolution), n=n, minimum=0.0))
        reports.append(measured_constant(StatementId.AUX_ENERGY_BOUND2, kernel_id, phi_id,
                                         energy_bound2_infimum(p, n, resolution), n=n, minimum=0.0))
    return reports


AUX_BUILDERS = {
    StatementId.AUX_K1.value: lambda spec, phi, seed: [k1_check(spec, seed=seed)],
    StatementId.AUX_K2.value: lambda spec, phi, seed: [k2_check(spec, seed=seed)],
    StatementId.AUX_K3.value: lambda spec, phi, seed: [k3_check(spec)],
    StatementId.AUX_PHI1.value: lambda spec, phi, seed: [phi1_check(phi, seed=seed, kernel_id=spec.kernel_id)],
}
MP_STATEMENTS = {
    StatementId.AUX_MP_LIP.value,
    StatementId.AUX_SUBADDITIVE.value,
    StatementId.AUX_CONVEXITY.value,
    StatementId.AUX_ENERGY_BOUND.value,
    StatementId.AUX_ENERGY_BOUND2.value,
}


def aux_lemma_suite(spec: KernelSpec, phi: PhiSpec, statements: Optional[List[str]] = None,
                    seed: int = 0) -> List[InequalityReport]:
    """Run the selected auxiliary checks; the band overlap estimate is skipped unless p = 2."""
    selected = set(statements) if statements is not None else set(AUX_BUILDERS) | MP_STATEMENTS
    reports: List[InequalityReport] = []
    for statement, build in AUX_BUILDERS.items():
        if statement not in selected:
            continue
        if statement == StatementId.AUX_K2.value and abs(spec.p - 2.0) > P2_TOLERANCE:
            logger.info(f"aux_k2 skipped: p={spec.p:g} != 2")
            continue
        reports.extend(build(spec, phi, seed))
    if selected & MP_STATEMENTS:
        reports.extend(r for r in mp_checks(spec.p, seed=seed, kernel_id=spec.kernel_id)
                       if r.statement_id in selected)
    return reports
