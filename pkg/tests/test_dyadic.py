import numpy as np
import pytest

from src.engine.dyadic import (
    Cube,
    DyadicCube,
    children,
    cubes_at,
    energy,
    energy_increment_lemma_check,
    energy_profile,
    find_root,
    greedy_chain,
    telescope_check,
    three_lattice_cover,
)
from src.engine.dyadic.energy import check_alignment, cube_mass, default_delta, proof_epsilon
from src.engine.errors import GeometryError, MisalignedGridError
from src.engine.gridfn import GridFunction, GridParams, l1_norm, make_point_mass


def box_cube(d):
    return DyadicCube.of(Cube((-0.5,) * d, 1.0))


def random_function(rng, grid, sparsity=0.5):
    values = rng.standard_normal(grid.shape) * (rng.uniform(size=grid.shape) < sparsity)
    return GridFunction(grid.d, grid.half_width, grid.cells_per_axis, values)


def test_cube_addressing():
    q = DyadicCube.unit(2)
    kids = children(q)
    assert len(kids) == 4
    assert [c.j for c in kids] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert kids[3].box.corner == (0.5, 0.5)
    assert len(cubes_at(q, 3)) == 64
    assert q.box.dilate(3).corner == (-1.0, -1.0)
    with pytest.raises(GeometryError):
        DyadicCube(q.root, 1, (2, 0))


def test_telescoping_identity_on_random_functions(rng):
    grids = {1: GridParams(d=1, half_width=0.5, cells_per_axis=128),
             2: GridParams(d=2, half_width=0.5, cells_per_axis=32)}
    for trial in range(100):
        d = 1 + trial % 2
        grid = grids[d]
        f = random_function(rng, grid)
        depth = 7 if d == 1 else 5
        for p in (1.5, 2.0, 3.0):
            result = telescope_check(box_cube(d), f, p, depth)
            assert result.defect <= 1e-12
            assert result.nonnegative


def test_energy_at_full_depth_is_cellwise(rng, small_grid):
    f = random_function(rng, small_grid)
    cube = box_cube(1)
    assert cube_mass(cube, f) == pytest.approx(l1_norm(f), rel=1e-12)
    cells = np.sum((small_grid.cell_volume * np.abs(f.values)) ** 2.0)
    assert energy(cube, 7, f, 2.0) == pytest.approx(cells, rel=1e-12)
    assert energy_profile(cube, f, 2.0, 7).is_monotone()


def test_misaligned_cubes_are_rejected(small_dipole):
    with pytest.raises(MisalignedGridError):
        check_alignment(DyadicCube.of(Cube((-0.5,), 0.3)), small_dipole)
    with pytest.raises(MisalignedGridError):
        check_alignment(DyadicCube.of(Cube((-0.3,), 0.5)), small_dipole)
    check_alignment(DyadicCube.of(Cube((-0.25,), 0.5)), small_dipole)


def test_greedy_chain_follows_a_point_mass(small_grid):
    f = make_point_mass(small_grid, (0.3,))
    chain = greedy_chain(box_cube(1), f, 7)
    center = small_grid.axis_centers[small_grid.cell_index((0.3,))[0]]
    assert chain.limit_point[0] == pytest.approx(center)
    assert chain.masses == pytest.approx([1.0] * 8)


def test_energy_increment_check(small_dipole):
    check = energy_increment_lemma_check(box_cube(1), small_dipole, 2.0, 7)
    assert check.rhs > 0
    assert np.isfinite(check.ratio)
    assert check.lhs <= check.lhs_at_limit_point + 1e-12
    assert check.limit_error > 0


def test_proof_constants():
    for p in (1.5, 2.0, 3.0):
        assert proof_epsilon(p, default_delta(p)) == pytest.approx(1.0 - 1.0 / 1.02)
    with pytest.raises(ValueError):
        proof_epsilon(2.0, 0.6)


@pytest.mark.parametrize("d", [1, 2])
def test_three_lattice_cover(d):
    cover = three_lattice_cover(DyadicCube.unit(d), depth=5)
    assert cover.verified
    assert cover.size == 3 ** d
    assert cover.size_ratio == 6.0
    assert cover.checked == sum(2 ** (k * d) for k in range(6))


def test_iterated_three_lattice_cover():
    cover = three_lattice_cover(DyadicCube.unit(2), iterated=True, depth=4)
    assert cover.size == 81
    assert cover.size_ratio == 18.0
    line = three_lattice_cover(DyadicCube.unit(1), iterated=True, depth=6)
    assert line.verified
    assert line.dilation == 3
    assert line.size == 3


def test_find_root_returns_the_dilate():
    cover = three_lattice_cover(DyadicCube.unit(2), depth=3)
    for sub in cubes_at(cover.cube, 3):
        index, image = find_root(cover, sub)
        assert 0 <= index < cover.size
        assert image.side == pytest.approx(3.0 * sub.side)
        assert np.allclose(image.box.center, sub.box.center)
    with pytest.raises(GeometryError):
        find_root(cover, DyadicCube.of(Cube((0.0, 0.0), 2.0)))
