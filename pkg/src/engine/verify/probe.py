"""
Necessity probe: main ratios of dipoles that shrink toward delta - delta,
expected to grow without bound exactly when Phi does not cancel.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from src.engine.errors import ProbeInconclusiveError, ZeroFunctionError
from src.engine.gridfn import DipoleSpec, GridFunction, GridParams, l1_norm, make_dipole
from src.engine.kernel import KernelSpec
from src.engine.phi import PhiSpec, SphereQuadrature, check_cancellation
from src.engine.verify.convolver import VerifyOptions
from src.engine.verify.report import InequalityReport, StatementId, Verdict
from src.engine.verify.statements import main_ratio

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS = tuple(2.0 ** -k for k in range(3, 8))
DEFAULT_GROWTH = 1.25


@dataclass
class ProbeResult:
    widths: List[float]
    ratios: List[float]
    reports: List[InequalityReport]
    increasing: bool
    cancelling: bool
    growth_factors: List[float] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        if any(r.verdict is Verdict.FAIL for r in self.reports):
            return Verdict.FAIL
        if any(r.verdict is Verdict.WARN for r in self.reports):
            return Verdict.WARN
        return Verdict.PASS


def growth_factors(ratios: Sequence[float]) -> List[float]:
    """Successive quotients r_{k+1} / r_k; 0/0 counts as no growth."""
    factors = []
    for before, after in zip(ratios, ratios[1:]):
        if before > 0:
            factors.append(after / before)
        else:
            factors.append(1.0 if after == 0 else math.inf)
    return factors


def strictly_increasing(ratios: Sequence[float], last: int = 3) -> bool:
    tail = list(ratios)[-last:]
    return len(tail) >= 2 and all(b > a for a, b in zip(tail, tail[1:]))


def probe_dipoles(grid: GridParams, widths: Sequence[float]) -> List[GridFunction]:
    """Dipoles with poles at -R/2 e1 and R/2 e1."""
    z = (grid.half_width,) + (0.0,) * (grid.d - 1)
    return [make_dipole(DipoleSpec.symmetric(z, w), grid) for w in widths]


def cancellation_necessity_probe(spec: KernelSpec, phi: PhiSpec, grid: GridParams,
                                 widths: Sequence[float] = DEFAULT_WIDTHS,
                                 options: Optional[VerifyOptions] = None,
                                 quad: Optional[SphereQuadrature] = None,
                                 force: bool = False, growth: float = DEFAULT_GROWTH,
                                 cancellation_tol: float = 1e-8, threads: int = 1,
                                 functions: Optional[Sequence[GridFunction]] = None) -> ProbeResult:
    """
    Main ratios along a sequence of dipoles of decreasing width.

    A non-cancelling Phi passes when the ratio increases strictly across the
    last three widths. A cancelling Phi makes the probe inconclusive; with
    force it runs anyway and passes when no successive growth exceeds growth.
    """
    cancellation = check_cancellation(phi, spec, quad)
    cancelling = cancellation.cancels(cancellation_tol)
    if cancelling and not force:
        raise ProbeInconclusiveError(f"{phi.phi_id} cancels against {spec.kernel_id}; the probe is inconclusive")

    widths = list(widths)
    if functions is None:
        functions = probe_dipoles(grid, widths)
    else:
        functions = list(functions)
        if len(widths) != len(functions):
            widths = [float("nan")] * len(functions)
    for f in functions:
        if l1_norm(f) == 0.0:
            raise ZeroFunctionError(f"zero function {f.label or 'f'} in the probe sequence")

    options = options or VerifyOptions()
    logger.info(f"Necessity probe {phi.phi_id} / {spec.kernel_id}: {len(functions)} functions, "
                f"{'cancelling' if cancelling else 'non-cancelling'}")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        mains = list(pool.map(lambda f: main_ratio(spec, phi, f, options), functions))

    reports = []
    for k, (w, report) in enumerate(zip(widths, mains)):
        n = int(round(-math.log2(w))) if w > 0 else k
        reports.append(replace(report, statement_id=StatementId.PROBE.value, n=n,
                               notes=list(report.notes)))
    ratios = [r.ratio for r in reports]
    factors = growth_factors(ratios)
    increasing = strictly_increasing(ratios)

    if cancelling:
        largest = max(factors, default=1.0)
        for r in reports:
            r.notes.append("inconclusive: Phi cancels")
        if largest > growth:
            reports[-1].fail(f"growth factor {largest:.4g} exceeds {growth:g}")
    elif not increasing:
        reports[-1].fail("ratio does not increase across the last three widths")
    logger.info(f"Probe ratios {np.round(ratios, 6).tolist()}, growth {np.round(factors, 4).tolist()}")
    return ProbeResult(widths, ratios, reports, increasing, cancelling, factors)
