"""
Dyadic cube addressing: Q_{k,j} inside a root box, children and generations.
"""

import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.engine.errors import GeometryError


@dataclass(frozen=True)
class Cube:
    """Axis-aligned closed cube given by its lower corner and side length."""
    corner: Tuple[float, ...]
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise GeometryError(f"cube side must be positive, got {self.side}")

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.corner, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.side

    @property
    def center(self) -> np.ndarray:
        return self.lower + self.side / 2.0

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.d)

    def dilate(self, factor: float) -> "Cube":
        """The cube with the same center and side multiplied by factor."""
        side = self.side * factor
        return Cube(tuple(float(c) for c in self.center - side / 2.0), side)

    def contains(self, point: Sequence[float]) -> bool:
        x = np.asarray(point, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def __str__(self) -> str:
        parts = " x ".join(f"[{lo:g},{lo + self.side:g}]" for lo in self.corner)
        return parts


@dataclass(frozen=True)
class DyadicCube:
    """Q_{k,j}: generation k, index j in [0, 2^k)^d, inside a root cube."""
    root: Cube
    k: int
    j: Tuple[int, ...]

    def __post_init__(self):
        if self.k < 0:
            raise GeometryError(f"generation must be >= 0, got {self.k}")
        if len(self.j) != self.root.d:
            raise GeometryError("index length must equal the root dimension")
        if any(not (0 <= ji < 2 ** self.k) for ji in self.j):
            raise GeometryError(f"index {self.j} outside [0, 2^{self.k})")

    @classmethod
    def of(cls, root: Cube) -> "DyadicCube":
        return cls(root, 0, (0,) * root.d)

    @classmethod
    def unit(cls, d: int) -> "DyadicCube":
        return cls.of(Cube((0.0,) * d, 1.0))

    @property
    def d(self) -> int:
        return self.root.d

    @property
    def side(self) -> float:
        return math.ldexp(self.root.side, -self.k)

    @property
    def box(self) -> Cube:
        corner = self.root.lower + self.side * np.asarray(self.j, dtype=float)
        return Cube(tuple(float(c) for c in corner), self.side)

    @property
    def center(self) -> np.ndarray:
        return self.box.center

    def children(self) -> List["DyadicCube"]:
        return children(self)


def children(cube: DyadicCube) -> List[DyadicCube]:
    """The 2^d children in lexicographic order of their index."""
    return cubes_at(cube, 1)


def cubes_at(cube: DyadicCube, n: int) -> List[DyadicCube]:
    """D_n(Q): all descendants n generations below, lexicographic order."""
    if n < 0:
        raise GeometryError(f"generation offset must be >= 0, got {n}")
    base = [ji * 2 ** n for ji in cube.j]
    return [DyadicCube(cube.root, cube.k + n, tuple(b + m for b, m in zip(base, offset)))
            for offset in itertools.product(range(2 ** n), repeat=cube.d)]
