"""
Dyadic energies E_{Q,n}[f] = sum over generation-n subcubes of (mass)^p,
the telescoping identity, greedy mass chains and the energy increment check.

Grid functions are treated as weighted point samples at cell centres: a
subcube's mass is h^d times the sum of |f| over the cells whose centre lies
in the half-open subcube.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

import numpy as np

from src.engine.dyadic.cubes import DyadicCube
from src.engine.errors import MisalignedGridError, ZeroFunctionError
from src.engine.gridfn import GridFunction, _support_points, minimize_moment

logger = logging.getLogger(__name__)

ALIGNMENT_TOLERANCE = 1e-9


def check_alignment(cube: DyadicCube, f: GridFunction) -> None:
    """Cube faces must lie on the grid's cell lattice, refined as far as the cube is small."""
    h = f.h
    ratio = cube.side / h
    if not math.isclose(2.0 ** round(math.log2(ratio)), ratio, rel_tol=ALIGNMENT_TOLERANCE):
        raise MisalignedGridError(f"cube side {cube.side:g} is not a power-of-two multiple of h={h:g}")
    unit = min(cube.side, h)
    offsets = (cube.box.lower + f.half_width) / unit
    if np.any(np.abs(offsets - np.round(offsets)) > ALIGNMENT_TOLERANCE):
        raise MisalignedGridError(f"cube {cube.box} is not aligned with the grid cells")


def _points_in(cube: DyadicCube, f: GridFunction) -> Tuple[np.ndarray, np.ndarray]:
    points, weights = _support_points(f)
    box = cube.box
    inside = np.all((points >= box.lower) & (points < box.upper), axis=1) if len(points) else np.zeros(0, bool)
    return points[inside], weights[inside]


def subcube_masses(cube: DyadicCube, n: int, f: GridFunction) -> Tuple[np.ndarray, np.ndarray]:
    """
    Masses of the nonempty generation-n subcubes.

    Returns (indices, masses) with indices of shape (m, d) relative to the
    cube, sorted lexicographically; empty subcubes are omitted.
    """
    check_alignment(cube, f)
    points, weights = _points_in(cube, f)
    if not len(weights):
        return np.zeros((0, cube.d), dtype=np.int64), np.zeros(0)
    box = cube.box
    sub = math.ldexp(box.side, -n)
    index = np.floor((points - box.lower) / sub).astype(np.int64)
    index = np.clip(index, 0, 2 ** n - 1)
    keys, inverse = np.unique(index, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), weights=weights) * f.cell_volume
    return keys, masses


def child_masses(cube: DyadicCube, f: GridFunction) -> np.ndarray:
    """Dense (2,)*d array of the children's masses."""
    keys, masses = subcube_masses(cube, 1, f)
    dense = np.zeros((2,) * cube.d)
    for key, mass in zip(keys, masses):
        dense[tuple(key)] = mass
    return dense


def cube_mass(cube: DyadicCube, f: GridFunction) -> float:
    return float(np.sum(subcube_masses(cube, 0, f)[1]))


def energy(cube: DyadicCube, n: int, f: GridFunction, p: float) -> float:
    """sum over D_n(Q) of (integral of |f| over the subcube)^p."""
    _, masses = subcube_masses(cube, n, f)
    return float(np.sum(masses ** p))


@dataclass
class EnergyProfile:
    cube: DyadicCube
    p: float
    values: List[float]

    @property
    def increments(self) -> np.ndarray:
        return -np.diff(np.asarray(self.values))

    def is_monotone(self, rel_tol: float = 1e-12) -> bool:
        scale = max(self.values[0], np.finfo(float).tiny) if self.values else 1.0
        return bool(np.all(self.increments >= -rel_tol * scale))


def energy_profile(cube: DyadicCube, f: GridFunction, p: float, depth: int) -> EnergyProfile:
    return EnergyProfile(cube, p, [energy(cube, n, f, p) for n in range(depth + 1)])


class TelescopeResult(NamedTuple):
    partial_sums: np.ndarray
    increments: np.ndarray
    defect: float
    nonnegative: bool


def telescope_check(cube: DyadicCube, f: GridFunction, p: float, depth: int) -> TelescopeResult:
    """||f||_{L1(Q)}^p - E_N against the sum of the increments E_n - E_{n+1}."""
    profile = energy_profile(cube, f, p, depth)
    total = cube_mass(cube, f) ** p
    increments = profile.increments
    partial = np.cumsum(increments)
    telescoped = partial[-1] if len(partial) else 0.0
    scale = max(total, np.finfo(float).tiny)
    defect = abs((total - profile.values[-1]) - telescoped) / scale
    nonnegative = bool(np.all(increments >= -1e-12 * scale))
    if not nonnegative:
        logger.warning(f"Negative energy increment in {cube.box}: min {increments.min():.3e}")
    return TelescopeResult(partial, increments, float(defect), nonnegative)


class GreedyChain(NamedTuple):
    cubes: List[DyadicCube]
    masses: List[float]
    limit_point: np.ndarray
    limit_error: float


def greedy_chain(cube: DyadicCube, f: GridFunction, depth: int) -> GreedyChain:
    """
    R_0 = Q and R_{n+1} the child of R_n with the largest mass; ties go to
    the lexicographically smallest index. The limit point is the centre of
    the deepest cube; limit_error bounds the resulting change of the first
    moment by diam(R_depth) * ||f||_{L1(Q)}.
    """
    total = cube_mass(cube, f)
    if total <= 0:
        raise ZeroFunctionError("zero function on the cube")
    chain, masses = [cube], [total]
    current = cube
    for _ in range(depth):
        weights = child_masses(current, f)
        pick = np.unravel_index(int(np.argmax(weights)), weights.shape)
        current = DyadicCube(current.root, current.k + 1,
                             tuple(2 * ji + int(o) for ji, o in zip(current.j, pick)))
        chain.append(current)
        masses.append(float(weights[pick]))
    deepest = chain[-1].box
    return GreedyChain(chain, masses, deepest.center, deepest.diameter * total)


# ============================================================================
# ENERGY INCREMENT CHECK
# ============================================================================

def default_delta(p: float) -> float:
    """delta solving 2 (1 - delta)^{p-1} = 1.02."""
    return 1.0 - 0.51 ** (1.0 / (p - 1.0))


def proof_epsilon(p: float, delta: float) -> float:
    """epsilon with (1 - epsilon) * 2 (1 - delta)^{p-1} = 1."""
    growth = 2.0 * (1.0 - delta) ** (p - 1.0)
    if growth <= 1.0:
        raise ValueError(f"delta={delta} gives 2(1-delta)^(p-1) <= 1")
    return 1.0 - 1.0 / growth


class IncrementCheck(NamedTuple):
    lhs: float
    rhs: float
    ratio: float
    lhs_at_limit_point: float
    limit_error: float


def safe_ratio(lhs: float, rhs: float, atol: float = 0.0) -> float:
    """lhs / rhs with 0/0 read as 0 and lhs within atol of zero counted as zero."""
    if rhs > 0:
        return lhs / rhs
    if lhs <= atol:
        return 0.0
    return math.inf


def energy_increment_lemma_check(cube: DyadicCube, f: GridFunction, p: float, depth: int,
                                 eps: float = 0.49) -> IncrementCheck:
    """
    lhs = ||f||_{L1(Q)}^{p-1} inf_c int_Q |x - c| |f| / l(Q);
    rhs = sum_{n < depth} (1 - eps)^n (E_n - E_{n+1}).
    """
    points, weights = _points_in(cube, f)
    if not len(weights):
        raise ZeroFunctionError("zero function on the cube")
    check_alignment(cube, f)
    mass = cube_mass(cube, f)
    moment = minimize_moment(points, weights, f.grid)
    side = cube.side
    lhs = mass ** (p - 1) * moment.value / side

    profile = energy_profile(cube, f, p, depth)
    discount = (1.0 - eps) ** np.arange(depth)
    rhs = float(np.sum(discount * profile.increments))

    chain = greedy_chain(cube, f, depth)
    at_limit = f.cell_volume * float(np.sum(np.linalg.norm(points - chain.limit_point, axis=1) * weights))
    lhs_limit = mass ** (p - 1) * at_limit / side
    ratio = safe_ratio(lhs, rhs)
    logger.debug(f"Energy increment check on {cube.box}: lhs={lhs:.6g} rhs={rhs:.6g} ratio={ratio:.6g}")
    return IncrementCheck(lhs, rhs, ratio, lhs_limit, chain.limit_error)
