"""
Extremal Ratio Search
Restarted Nelder-Mead over sums of signed bumps, maximizing the main ratio
|int Phi(K * f)| / ||f||_1^p. The best ratio found is an empirical lower
bound for the constant of the inequality.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from src.engine.errors import CancellationFailedError, GeometryError, SearchBudgetError
from src.engine.gridfn import GridFunction, GridParams, bump_sum
from src.engine.kernel import KernelSpec
from src.engine.phi import PhiSpec, SphereQuadrature, check_cancellation
from src.engine.verify.convolver import VerifyOptions
from src.engine.verify.report import InequalityReport, StatementId
from src.engine.verify.statements import main_ratio

logger = logging.getLogger(__name__)

MAX_RESTARTS = 8
TABLE_COLUMNS = ["statement_id", "kernel_id", "phi_id", "best_ratio", "evaluations", "best_restart", "budget"]


@dataclass(frozen=True)
class FamilySpec:
    """
    M signed bumps on a grid. A parameter vector holds the M*d centre
    coordinates, M log2-widths and M weights, in that order.
    """
    bump_count: int
    grid: GridParams
    seed: int = 0
    min_width: Optional[float] = None
    max_width: Optional[float] = None

    def __post_init__(self):
        if self.bump_count < 2:
            raise ValueError("a zero-mean bump family needs at least two bumps")
        if self.width_range[0] > self.width_range[1]:
            raise ValueError(f"empty width range {self.width_range}")
        if self.width_range[0] < 4.0 * self.grid.h:
            raise GeometryError(f"width unresolved: min_width={self.width_range[0]:g} < 4h={4.0 * self.grid.h:g}")

    @property
    def width_range(self) -> Tuple[float, float]:
        lo = 8.0 * self.grid.h if self.min_width is None else self.min_width
        hi = self.grid.half_width / 2.0 if self.max_width is None else self.max_width
        return lo, hi

    @property
    def dim(self) -> int:
        return self.bump_count * (self.grid.d + 2)

    def unpack(self, params: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Centres, widths and weights after clipping and projection."""
        x = np.asarray(params, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} parameters, got {x.shape}")
        m, d = self.bump_count, self.grid.d
        lo, hi = self.width_range
        widths = np.exp2(np.clip(x[m * d:m * d + m], math.log2(lo), math.log2(hi)))
        limit = (self.grid.half_width - widths)[:, None]
        centers = np.clip(x[:m * d].reshape(m, d), -limit, limit)
        weights = x[m * d + m:]
        weights = weights - weights.mean()
        return centers, widths, weights

    def realize(self, params: Sequence[float]) -> GridFunction:
        centers, widths, weights = self.unpack(params)
        g = self.grid
        return GridFunction(g.d, g.half_width, g.cells_per_axis, bump_sum(g, centers, widths, weights),
                            zero_mean=True, label=f"family-M{self.bump_count}-s{self.seed}")

    def baseline(self) -> np.ndarray:
        """The symmetric dipole: bumps of width R/8 at -R/2 e1 (+1) and R/2 e1 (-1), the rest silent."""
        m, d, r = self.bump_count, self.grid.d, self.grid.half_width
        centers = np.zeros((m, d))
        centers[0, 0], centers[1, 0] = -r / 2.0, r / 2.0
        lo, hi = self.width_range
        log_width = float(np.clip(math.log2(r / 8.0), math.log2(lo), math.log2(hi)))
        weights = np.zeros(m)
        weights[:2] = (1.0, -1.0)
        return np.concatenate([centers.reshape(-1), np.full(m, log_width), weights])

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        m, d, r = self.bump_count, self.grid.d, self.grid.half_width
        lo, hi = self.width_range
        centers = rng.uniform(-r / 2.0, r / 2.0, size=m * d)
        log_widths = rng.uniform(math.log2(lo), math.log2(hi), size=m)
        weights = rng.standard_normal(m)
        return np.concatenate([centers, log_widths, weights])

    def simplex(self, x0: np.ndarray) -> np.ndarray:
        """x0 and one step along every coordinate."""
        m, d, r = self.bump_count, self.grid.d, self.grid.half_width
        steps = np.concatenate([np.full(m * d, r / 4.0), np.full(m, 0.5), np.full(m, 0.5)])
        return np.vstack([x0, x0 + np.diag(steps)])


@dataclass
class SearchResult:
    best_params: np.ndarray
    best_ratio: float
    evaluations: int
    trace: List[float]
    restart_best: List[float]
    best_restart: int
    best_report: Optional[InequalityReport] = None
    budget: int = 0

    def to_records(self, config_digest: str = "") -> List[Dict[str, Any]]:
        return [self.best_report.to_record(config_digest)] if self.best_report else []

    def to_trace(self) -> Dict[str, Any]:
        return {
            "best_ratio": self.best_ratio,
            "best_params": [float(v) for v in self.best_params],
            "best_restart": self.best_restart,
            "budget": self.budget,
            "evaluations": self.evaluations,
            "restart_best": list(self.restart_best),
            "trace": list(self.trace),
        }


class _Objective:
    """Negative main ratio with a hard evaluation budget; remembers every value it computed."""

    def __init__(self, spec: KernelSpec, phi: PhiSpec, family: FamilySpec, options: VerifyOptions, budget: int):
        self.spec, self.phi, self.family, self.options = spec, phi, family, options
        self.budget = budget
        self.values: List[float] = []
        self.best = -math.inf
        self.best_params: Optional[np.ndarray] = None

    def ratio(self, params: np.ndarray) -> float:
        return main_ratio(self.spec, self.phi, self.family.realize(params), self.options).ratio

    def __call__(self, params: np.ndarray) -> float:
        if len(self.values) >= self.budget:
            return math.inf
        value = self.ratio(params)
        self.values.append(value)
        if value > self.best:
            self.best, self.best_params = value, np.array(params, dtype=float)
        return -value


def split_budget(budget: int, restarts: int) -> List[int]:
    base, extra = divmod(budget, restarts)
    return [base + (1 if k < extra else 0) for k in range(restarts)]


def search(spec: KernelSpec, phi: PhiSpec, family: FamilySpec, budget: int,
           options: Optional[VerifyOptions] = None, quad: Optional[SphereQuadrature] = None,
           force: bool = False, cancellation_tol: float = 1e-8, threads: int = 1,
           max_restarts: int = MAX_RESTARTS) -> SearchResult:
    """
    Maximize the main ratio over the family within budget evaluations.

    Restart 0 starts at the symmetric dipole; the others at seeded random
    points. Budgets are split evenly, restarts run in parallel and merge by
    the largest ratio with ties to the lowest restart index.
    """
    if not force and not check_cancellation(phi, spec, quad).cancels(cancellation_tol):
        raise CancellationFailedError(
            f"{phi.phi_id} does not cancel against {spec.kernel_id}; the ratio is unbounded (use force)")
    simplex_size = family.dim + 1
    if budget < simplex_size:
        raise SearchBudgetError(f"budget {budget} is smaller than the simplex ({simplex_size} evaluations)")
    options = options or VerifyOptions()
    restarts = max(1, min(max_restarts, budget // simplex_size))
    budgets = split_budget(budget, restarts)
    rng = np.random.default_rng(family.seed)
    starts = [family.baseline()] + [family.random_start(rng) for _ in range(restarts - 1)]
    logger.info(f"Search {phi.phi_id} / {spec.kernel_id}: {restarts} restarts, budget {budget}, dim {family.dim}")

    def run(k: int) -> _Objective:
        objective = _Objective(spec, phi, family, options, budgets[k])
        optimize.minimize(objective, starts[k], method="Nelder-Mead",
                          options={"initial_simplex": family.simplex(starts[k]), "maxfev": budgets[k],
                                   "xatol": 0.0, "fatol": 0.0})
        logger.debug(f"Restart {k}: best {objective.best:.6g} after {len(objective.values)} evaluations")
        return objective

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        objectives = list(pool.map(run, range(restarts)))

    restart_best = [o.best for o in objectives]
    best_restart = int(np.argmax(restart_best))
    winner = objectives[best_restart]
    values = [v for o in objectives for v in o.values]
    trace = np.maximum.accumulate(values).tolist()

    report = main_ratio(spec, phi, family.realize(winner.best_params), options)
    report.statement_id = StatementId.EXTREMIZE.value
    report.notes.append(f"restart {best_restart} of {restarts}, {len(values)} evaluations")
    logger.info(f"Search best ratio {winner.best:.6g} (restart {best_restart})")
    return SearchResult(best_params=winner.best_params, best_ratio=winner.best, evaluations=len(values),
                        trace=trace, restart_best=restart_best, best_restart=best_restart,
                        best_report=report, budget=budget)


def constant_table(entries: Sequence[Tuple[KernelSpec, PhiSpec]], family: FamilySpec, budget: int,
                   options: Optional[VerifyOptions] = None, force: bool = False,
                   threads: int = 1) -> pd.DataFrame:
    """One search per (kernel, Phi) entry; best ratios sorted by statement, kernel and Phi id."""
    rows = []
    for spec, phi in entries:
        result = search(spec, phi, family, budget, options=options, force=force, threads=threads)
        rows.append({
            "statement_id": StatementId.EXTREMIZE.value,
            "kernel_id": spec.kernel_id,
            "phi_id": phi.phi_id,
            "best_ratio": result.best_ratio,
            "evaluations": result.evaluations,
            "best_restart": result.best_restart,
            "budget": budget,
        })
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    return table.sort_values(["statement_id", "kernel_id", "phi_id"], kind="stable").reset_index(drop=True)
