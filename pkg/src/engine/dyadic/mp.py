"""
The two-argument function M_p and its calculus.

M_p(x, y) = min(x^{p-1} y, x y^{p-1}) for p in (1, 2]; for p > 2 the
replacement x^{p-1} y + x y^{p-1} is used. Property checks return measured
constants so that callers can record them.
"""

import itertools
import logging
from typing import Callable, NamedTuple

import numpy as np

from src.engine.errors import ExponentRangeError, KernelDomainError

logger = logging.getLogger(__name__)

MpFunction = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def _arguments(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise KernelDomainError("M_p needs non-negative arguments")
    return x, y


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def m_p(p: float, x, y):
    """min(x^{p-1} y, x y^{p-1}) for p in (1, 2]."""
    if not (1 < p <= 2):
        raise ExponentRangeError(f"m_p needs p in (1, 2], got {p}; use m_p_highp for p > 2")
    x, y = _arguments(x, y)
    if p == 2:
        return _scalar(x * y)
    return _scalar(np.minimum(x ** (p - 1) * y, x * y ** (p - 1)))


def m_p_highp(p: float, x, y):
    """x^{p-1} y + x y^{p-1} for p > 2."""
    if not p > 2:
        raise ExponentRangeError(f"m_p_highp needs p > 2, got {p}")
    x, y = _arguments(x, y)
    return _scalar(x ** (p - 1) * y + x * y ** (p - 1))


def mp_for(p: float) -> Callable:
    """The M_p variant used for exponent p."""
    if p > 2:
        return lambda x, y: m_p_highp(p, x, y)
    return lambda x, y: m_p(p, x, y)


def theta(p: float, t):
    """min(|t|, |t|^{p-1}); M_p(x, y) = y^p theta(x / y) for y > 0."""
    a = np.abs(np.asarray(t, dtype=float))
    return _scalar(np.minimum(a, a ** (p - 1)))


# ============================================================================
# PROPERTY CHECKS
# ============================================================================

def _samples(seed: int, count: int, scale: float = 10.0):
    rng = np.random.default_rng(seed)
    return rng, rng.uniform(0.0, scale, size=count), rng.uniform(0.0, scale, size=count)


def mp_symmetry_defect(p: float, samples: int = 100_000, seed: int = 0) -> float:
    _, x, y = _samples(seed, samples)
    mp = mp_for(p)
    return float(np.max(np.abs(mp(x, y) - mp(y, x))))


def mp_homogeneity_defect(p: float, samples: int = 100_000, seed: int = 0) -> float:
    """max |M(tx, ty) - t^p M(x, y)| / (t^p M(x, y)) over t in [1/8, 8]."""
    rng, x, y = _samples(seed, samples)
    t = np.exp(rng.uniform(np.log(0.125), np.log(8.0), size=samples))
    mp = mp_for(p)
    base = mp(x, y)
    keep = base > 0
    deviation = np.abs(mp(t * x, t * y) - t ** p * base)
    return float(np.max(deviation[keep] / (t[keep] ** p * base[keep])))


def mp_scaling_defect(p: float, samples: int = 100_000, seed: int = 0) -> float:
    """Largest relative excess of M(x, lam y) over lam^{p-1} M(x, y) for lam < 1."""
    if not (1 < p <= 2):
        raise ExponentRangeError(f"lambda-scaling holds for p in (1, 2], got {p}")
    rng, x, y = _samples(seed, samples)
    lam = rng.uniform(0.0, 1.0, size=samples)
    base = m_p(p, x, y)
    excess = m_p(p, x, lam * y) - lam ** (p - 1) * base
    keep = base > 0
    return float(max(0.0, np.max(excess[keep] / base[keep])))


def mp_lipschitz_ratio(p: float, points: int = 401, bound: float = 10.0) -> float:
    """
    Finite-difference Lipschitz quotient of M_p on [0, bound]^2.

    Normalized by bound^{p-1}, the scaling of the local Lipschitz constant,
    so the value does not depend on the box size.
    """
    mp = mp_for(p)
    grid = np.linspace(0.0, bound, points)
    x, y = np.meshgrid(grid, grid, indexing="ij")
    values = mp(x, y)
    step = grid[1] - grid[0]
    quotient = max(np.max(np.abs(np.diff(values, axis=0))), np.max(np.abs(np.diff(values, axis=1)))) / step
    return float(quotient / bound ** (p - 1))


class SubadditivityResult(NamedTuple):
    constant: float
    theta_constant: float
    identity_defect: float


def mp_subadditivity_constant(p: float, samples: int = 100_000, terms: int = 4,
                              seed: int = 0) -> SubadditivityResult:
    """
    Measured C in M_p(sum a_n, b) <= C sum M_p(a_n, b), with the same
    constant for theta and the defect of M_p(x, y) = y^p theta(x / y).
    """
    if not (1 < p <= 2):
        raise ExponentRangeError(f"subadditivity is checked for p in (1, 2], got {p}")
    rng = np.random.default_rng(seed)
    a = rng.exponential(1.0, size=(samples, terms)) * rng.choice([0.01, 1.0, 100.0], size=(samples, 1))
    b = rng.exponential(1.0, size=samples)
    lhs = m_p(p, a.sum(axis=1), b)
    rhs = np.sum(m_p(p, a, b[:, None]), axis=1)
    keep = rhs > 0
    constant = float(np.max(lhs[keep] / rhs[keep]))

    s = a / b[:, None]
    theta_lhs = theta(p, s.sum(axis=1))
    theta_rhs = np.sum(theta(p, s), axis=1)
    theta_constant = float(np.max(theta_lhs[keep] / theta_rhs[keep]))

    x = a[:, 0]
    via_theta = b ** p * theta(p, x / b)
    direct = m_p(p, x, b)
    defect = float(np.max(np.abs(via_theta - direct) / np.maximum(direct, 1e-300)))
    return SubadditivityResult(constant, theta_constant, defect)


def mp_concavity_defect(p: float, x: float = 1.0, points: int = 2001, bound: float = 10.0) -> float:
    """Largest second difference of y -> M_p(x, y) on [0, bound], relative to max M_p."""
    if not (1 < p <= 2):
        raise ExponentRangeError(f"concavity in the second argument holds for p in (1, 2], got {p}")
    y = np.linspace(0.0, bound, points)
    values = m_p(p, np.full_like(y, x), y)
    second = values[:-2] - 2.0 * values[1:-1] + values[2:]
    return float(np.max(second) / max(np.max(values), 1e-300))


# ============================================================================
# ENERGY BOUNDS ON THE SIMPLEX
# ============================================================================

def simplex_grid(n: int, resolution: int = 64) -> np.ndarray:
    """All points of the standard simplex in R^n with coordinates k / resolution."""
    if n < 2:
        raise ValueError("simplex grid needs n >= 2")
    heads = np.indices((resolution + 1,) * (n - 1)).reshape(n - 1, -1).T
    heads = heads[heads.sum(axis=1) <= resolution]
    last = resolution - heads.sum(axis=1, keepdims=True)
    return np.concatenate([heads, last], axis=1) / resolution


def energy_bound_infimum(p: float, n: int, resolution: int = 64) -> float:
    """
    inf [(sum z)^p - sum z^p] / [(sum z)^{p-1} min_j sum_{i != j} z_i]
    over nondegenerate points of the simplex grid.
    """
    z = simplex_grid(n, resolution)
    total = z.sum(axis=1)
    rest = total[:, None] - z
    denominator = total ** (p - 1) * rest.min(axis=1)
    keep = denominator > 0
    numerator = total ** p - np.sum(z ** p, axis=1)
    return float(np.min(numerator[keep] / denominator[keep]))


def energy_bound2_infimum(p: float, n: int, resolution: int = 64) -> float:
    """inf [(sum z)^p - sum z^p] / M_p(sum_A z, sum_{not A} z) over proper subsets A."""
    z = simplex_grid(n, resolution)
    numerator = z.sum(axis=1) ** p - np.sum(z ** p, axis=1)
    mp = mp_for(p)
    best = np.inf
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            inside = z[:, list(subset)].sum(axis=1)
            outside = z.sum(axis=1) - inside
            denominator = mp(inside, np.maximum(outside, 0.0))
            keep = denominator > 0
            if np.any(keep):
                best = min(best, float(np.min(numerator[keep] / denominator[keep])))
    return best
