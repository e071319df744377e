"""
Three-lattice covers.

For a dyadic cube Q and an odd dilation lam (3, or 3^d for the iterated
cover) the roots Q^r have side 2 lam l(Q) and lower corners shifted by
-(c + r_i) l(Q) per axis, c = (lam - 1) / 2 and r in [0, lam)^d. The dilate
lam R of every R in D(Q) is then a dyadic cube of exactly one root, one
generation below R's own. Membership reduces to integer arithmetic on the
offset of lam R inside the root, measured in units of l(R).

The iterated cover catches 3^d R, so it needs (3^d)^d = 3^{d^2} roots: 3 for
d = 1, 81 for d = 2 and 19683 for d = 3. A count of 9^d, two rounds of the
plain cover, only reaches 9R, which is 3^d R for d = 2 alone.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.engine.dyadic.cubes import Cube, DyadicCube
from src.engine.errors import CoverVerificationError, GeometryError

logger = logging.getLogger(__name__)

DEFAULT_DEPTH = 6


@dataclass
class LatticeCover:
    cube: DyadicCube
    iterated: bool
    dilation: int
    roots: List[Cube]
    shifts: List[Tuple[int, ...]] = field(repr=False)
    depth: int = DEFAULT_DEPTH
    checked: int = 0
    verified: bool = False

    @property
    def size(self) -> int:
        return len(self.roots)

    @property
    def size_ratio(self) -> float:
        """Side of every root over l(Q)."""
        return self.roots[0].side / self.cube.side


def _relative(cover: LatticeCover, other: DyadicCube) -> Tuple[int, np.ndarray]:
    """Generation and index of a descendant of cover.cube, relative to it."""
    q = cover.cube
    if other.root != q.root or other.k < q.k:
        raise GeometryError(f"cube {other.box} is not a dyadic descendant of {q.box}")
    k = other.k - q.k
    j = np.asarray(other.j, dtype=np.int64) - (2 ** k) * np.asarray(q.j, dtype=np.int64)
    if np.any(j < 0) or np.any(j >= 2 ** k):
        raise GeometryError(f"cube {other.box} is not a dyadic descendant of {q.box}")
    return k, j


def _root_shift(j: np.ndarray, k: int, lam: int) -> np.ndarray:
    """The residue r per axis that makes j - c + 2^k (c + r) divisible by lam."""
    c = (lam - 1) // 2
    inverse = pow(2 ** k % lam, -1, lam) if lam > 1 else 0
    return ((c - j) * inverse - c) % lam


def _offsets(j: np.ndarray, k: int, lam: int, r: np.ndarray) -> np.ndarray:
    c = (lam - 1) // 2
    return j - c + (2 ** k) * (c + r)


def _is_member(off: np.ndarray, k: int, lam: int) -> np.ndarray:
    return (off % lam == 0) & (off >= 0) & (off + lam <= 2 * lam * 2 ** k)


def find_root(cover: LatticeCover, other: DyadicCube) -> Tuple[int, DyadicCube]:
    """Index of the root holding lam * other, and lam * other as a dyadic cube of it."""
    lam = cover.dilation
    k, j = _relative(cover, other)
    r = _root_shift(j, k, lam)
    off = _offsets(j, k, lam, r)
    if not np.all(_is_member(off, k, lam)):
        raise CoverVerificationError(f"no root contains {lam}x{other.box}")
    index = int(np.ravel_multi_index(tuple(int(v) for v in r), (lam,) * cover.cube.d))
    return index, DyadicCube(cover.roots[index], k + 1, tuple(int(v) // lam for v in off))


def _verify(cover: LatticeCover) -> int:
    """Exhaustive membership check over D_0(Q) .. D_depth(Q); returns the number of cubes checked."""
    lam, d = cover.dilation, cover.cube.d
    checked = 0
    for k in range(cover.depth + 1):
        j = np.indices((2 ** k,) * d).reshape(d, -1).T
        r = _root_shift(j, k, lam)
        ok = np.all(_is_member(_offsets(j, k, lam, r), k, lam), axis=1)
        if not np.all(ok):
            bad = j[np.argmin(ok)].tolist()
            raise CoverVerificationError(f"generation {k}: {lam}R for index {bad} lies in no root")
        checked += len(j)

    # geometric cross-check on the first generations
    for k in range(min(cover.depth, 2) + 1):
        for sub in (DyadicCube(cover.cube.root, cover.cube.k + k,
                               tuple((2 ** k) * q + m for q, m in zip(cover.cube.j, offset)))
                    for offset in itertools.product(range(2 ** k), repeat=d)):
            _, image = find_root(cover, sub)
            expected = sub.box.dilate(lam)
            if (abs(image.side - expected.side) > 1e-12 * expected.side
                    or np.max(np.abs(image.box.lower - expected.lower)) > 1e-12 * expected.side):
                raise CoverVerificationError(f"{lam}x{sub.box} does not match {image.box}")
    return checked


def three_lattice_cover(cube: DyadicCube, iterated: bool = False,
                        depth: int = DEFAULT_DEPTH) -> LatticeCover:
    """
    lam^d shifted dyadic lattices (lam = 3, or 3^d when iterated) such that
    lam R is dyadic in one of them for every R in D(cube) down to depth.
    The cover is verified on construction.
    """
    d = cube.d
    lam = 3 ** d if iterated else 3
    c = (lam - 1) // 2
    side = 2 * lam * cube.side
    lower = cube.box.lower
    shifts = list(itertools.product(range(lam), repeat=d))
    roots = [Cube(tuple(float(lo - (c + ri) * cube.side) for lo, ri in zip(lower, r)), side)
             for r in shifts]
    cover = LatticeCover(cube=cube, iterated=iterated, dilation=lam, roots=roots,
                         shifts=shifts, depth=depth)
    cover.checked = _verify(cover)
    cover.verified = True
    logger.debug(f"Three-lattice cover of {cube.box}: {cover.size} roots, lam={lam}, "
                 f"{cover.checked} cubes verified to depth {depth}")
    return cover
