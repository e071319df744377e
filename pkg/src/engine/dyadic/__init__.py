"""Dyadic cubes, energies, three-lattice covers and the auxiliary function M_p."""

from src.engine.dyadic.cubes import Cube, DyadicCube, children, cubes_at
from src.engine.dyadic.energy import (
    energy,
    energy_increment_lemma_check,
    energy_profile,
    greedy_chain,
    telescope_check,
)
from src.engine.dyadic.lattice import LatticeCover, find_root, three_lattice_cover
from src.engine.dyadic.mp import m_p, m_p_highp, mp_for, theta

__all__ = [
    "Cube",
    "DyadicCube",
    "children",
    "cubes_at",
    "energy",
    "energy_increment_lemma_check",
    "energy_profile",
    "greedy_chain",
    "telescope_check",
    "LatticeCover",
    "find_root",
    "three_lattice_cover",
    "m_p",
    "m_p_highp",
    "mp_for",
    "theta",
]
