"""
Suite runner: every selected statement on every member of the test family,
one BandConvolver per member, reports sorted so that thread scheduling never
changes the output.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from src.engine.audit.audit_logger import AuditLogger
from src.engine.errors import GeometryError, ZeroMeanError
from src.engine.gridfn import DipoleSpec, GridFunction, GridParams, make_dipole, make_random_bumps
from src.engine.kernel import KernelSpec, resolved_band_limit
from src.engine.phi import PhiSpec
from src.engine.verify import statements as st
from src.engine.verify.aux_lemmas import AUX_BUILDERS, MP_STATEMENTS, aux_lemma_suite, kernel_sum_bound_check
from src.engine.verify.base_check import StatementCheck
from src.engine.verify.convolver import BandConvolver, VerifyOptions
from src.engine.verify.report import InequalityReport

logger = logging.getLogger(__name__)

PRECONDITION_ERRORS = (GeometryError, ZeroMeanError)

MEMBER_STATEMENTS = (
    "main", "first_lemma", "second_lemma", "main2", "remainder", "remainder_split",
    "median_bound", "local_main2", "telescopic", "pair_moment", "dilation", "energy_increment",
)
# statements evaluated once per n; the value is the finest band they touch
PER_N_OFFSET = {"second_lemma": 1, "remainder_split": 1, "median_bound": 0, "local_main2": 1}
GLOBAL_STATEMENTS = ("kernel_sum",) + tuple(sorted(set(AUX_BUILDERS) | MP_STATEMENTS))
SUITE_STATEMENTS = MEMBER_STATEMENTS + GLOBAL_STATEMENTS


@dataclass(frozen=True)
class FamilyMember:
    f: GridFunction
    kind: str
    width: Optional[float] = None
    scale: float = 1.0

    @property
    def f_id(self) -> str:
        return self.f.label or "f"


def build_family(grid: GridParams, widths: Sequence[float], scales: Sequence[float] = (1.0,),
                 random_members: int = 0, bump_count: int = 4, seed: int = 0) -> List[FamilyMember]:
    """Symmetric dipoles of the given widths, seeded random bump sums, each at every scale."""
    z = (grid.half_width,) + (0.0,) * (grid.d - 1)
    bases: List[Tuple[GridFunction, str, Optional[float]]] = [
        (make_dipole(DipoleSpec.symmetric(z, w), grid), "dipole", w) for w in widths
    ]
    bases += [(make_random_bumps(bump_count, seed + i, grid), "bumps", None) for i in range(random_members)]
    members = []
    for f, kind, width in bases:
        for s in scales:
            members.append(FamilyMember(f if s == 1 else f.scaled(s), kind, width, float(s)))
    return members


@dataclass
class SuitePlan:
    statements: List[str]
    n_values: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    partial_depth: int = 10
    split_depth: int = 2
    dilation_steps: int = 1
    widths: List[float] = field(default_factory=lambda: [2.0 ** -3, 2.0 ** -4, 2.0 ** -5])
    scales: List[float] = field(default_factory=lambda: [1.0, 4.0])
    random_members: int = 2
    bump_count: int = 4
    seed: int = 0
    energy_depth: Optional[int] = None

    def __post_init__(self):
        unknown = [s for s in self.statements if s not in SUITE_STATEMENTS]
        if unknown:
            raise ValueError(f"statements not available in a suite: {unknown}")


Task = Tuple[str, str, Optional[int], Callable[[], object]]


class SuiteRunner:
    """
    Runs a SuitePlan for one (kernel, Phi) pair on one grid.

    Pairs whose preconditions fail (geometry, zero mean) are skipped with a
    warning. Dipole rows at scale 1 are then judged for boundedness: a row
    fails when its ratio grew by more than growth over the next wider dipole.
    """

    def __init__(self, spec: KernelSpec, phi: PhiSpec, grid: GridParams, plan: SuitePlan,
                 options: Optional[VerifyOptions] = None, audit: Optional[AuditLogger] = None,
                 threads: int = 1, growth: float = 1.25, growth_floor: float = 1e-6):
        self.spec = spec
        self.phi = phi
        self.grid = grid
        self.plan = plan
        self.options = options or VerifyOptions()
        self.audit = audit or AuditLogger()
        self.threads = max(1, threads)
        self.growth = growth
        self.growth_floor = growth_floor
        self.resolved = resolved_band_limit(grid.h)

    def _member_call(self, statement: str, member: FamilyMember, conv: BandConvolver,
                     n: Optional[int]) -> Callable[[], object]:
        spec, phi, f, plan = self.spec, self.phi, member.f, self.plan
        calls: Dict[str, Callable[[], object]] = {
            "main": lambda: st.main_ratio(spec, phi, f, convolver=conv),
            "first_lemma": lambda: st.first_lemma_check(spec, f, convolver=conv),
            "second_lemma": lambda: st.second_lemma_check(spec, phi, f, n, highp=spec.p > 2, convolver=conv),
            "main2": lambda: st.main2_partial(spec, phi, f, plan.partial_depth, convolver=conv),
            "remainder": lambda: st.remainder_partial(spec, f, plan.partial_depth, convolver=conv),
            "remainder_split": lambda: st.remainder_split_check(spec, f, n, plan.split_depth, convolver=conv),
            "median_bound": lambda: st.median_bound_check(spec, phi, f, n, convolver=conv),
            "local_main2": lambda: st.local_main2_check(spec, phi, f, n, convolver=conv),
            "telescopic": lambda: st.telescopic_decomposition_check(spec, phi, f, plan.partial_depth,
                                                                    convolver=conv),
            "pair_moment": lambda: st.pair_moment_check(f, spec.kernel_id, phi.phi_id),
            "dilation": lambda: st.dilation_check(spec, phi, f, plan.dilation_steps, convolver=conv),
            "energy_increment": lambda: st.energy_increment_check(spec, f, plan.energy_depth, phi_id=phi.phi_id),
        }
        return calls[statement]

    def tasks(self, members: Sequence[FamilyMember]) -> List[Task]:
        selected = [s for s in MEMBER_STATEMENTS if s in self.plan.statements]
        tasks: List[Task] = []
        for member in members:
            conv = BandConvolver(self.spec, member.f, self.options)
            for statement in selected:
                if statement in PER_N_OFFSET:
                    top = self.resolved - PER_N_OFFSET[statement]
                    for n in (n for n in self.plan.n_values if n <= top):
                        tasks.append((statement, member.f_id, n, self._member_call(statement, member, conv, n)))
                else:
                    tasks.append((statement, member.f_id, None, self._member_call(statement, member, conv, None)))
        return tasks

    def _global_tasks(self) -> List[Task]:
        tasks: List[Task] = []
        selected = set(self.plan.statements)
        if "kernel_sum" in selected:
            if abs(self.spec.p - 2.0) > 1e-12:
                logger.warning(f"kernel_sum skipped: stated for p = 2, got p={self.spec.p:g}")
            else:
                tasks.append(("kernel_sum", self.spec.kernel_id, self.plan.partial_depth,
                              lambda: kernel_sum_bound_check(self.spec, self.plan.partial_depth, seed=self.plan.seed)))
        aux = sorted(selected & (set(AUX_BUILDERS) | MP_STATEMENTS))
        if aux:
            tasks.append(("aux", self.spec.kernel_id, None,
                          lambda: aux_lemma_suite(self.spec, self.phi, aux, seed=self.plan.seed)))
        return tasks

    def _execute(self, task: Task) -> List[InequalityReport]:
        statement, subject, n, compute = task
        label = subject if n is None else f"{subject} n={n}"
        check = StatementCheck(self.audit, statement, label, compute)
        try:
            return check.run()
        except PRECONDITION_ERRORS as e:
            logger.warning(f"Skipping {statement} on {label}: {e}")
            return []

    def judge_growth(self, reports: List[InequalityReport], members: Sequence[FamilyMember]) -> None:
        """Fail dipole rows whose ratio outgrew the previous (wider) dipole's by more than growth."""
        widths = {m.f_id: m.width for m in members if m.kind == "dipole" and m.scale == 1.0}
        rows = [r for r in reports if r.f_id in widths]
        key = lambda r: (r.statement_id, -1 if r.n is None else r.n)
        for _, group in groupby(sorted(rows, key=key), key=key):
            ordered = sorted(group, key=lambda r: -widths[r.f_id])
            for wider, narrower in zip(ordered, ordered[1:]):
                if (wider.ratio > self.growth_floor and math.isfinite(wider.ratio)
                        and narrower.ratio > self.growth * wider.ratio):
                    narrower.fail(f"ratio grew by {narrower.ratio / wider.ratio:.4g} > {self.growth:g} "
                                  f"from {wider.f_id}")

    def run(self) -> List[InequalityReport]:
        plan = self.plan
        members = []
        if any(s in MEMBER_STATEMENTS for s in plan.statements):
            members = build_family(self.grid, plan.widths, plan.scales, plan.random_members,
                                   plan.bump_count, plan.seed)
        tasks = self.tasks(members) + self._global_tasks()
        logger.info(f"Suite {self.spec.kernel_id} / {self.phi.phi_id}: {len(members)} members, "
                    f"{len(tasks)} checks, {self.threads} threads")
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(self._execute, tasks))
        reports = [r for batch in results for r in batch]
        self.judge_growth(reports, members)
        reports.sort(key=lambda r: r.sort_key)
        return reports
