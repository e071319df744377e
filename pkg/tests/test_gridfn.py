import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.engine.errors import GeometryError, ZeroFunctionError
from src.engine.gridfn import (
    DipoleSpec,
    GridParams,
    dilate,
    first_moment,
    integral,
    l1_norm,
    load_grid_function,
    make_dipole,
    make_indicator,
    make_point_mass,
    make_random_bumps,
    min_first_moment,
    pair_moment,
    project_zero_mean,
    save_grid_function,
    shift_cells,
)


def test_grid_params_validation():
    with pytest.raises(GeometryError):
        GridParams(d=1, half_width=0.3, cells_per_axis=128)
    with pytest.raises(GeometryError):
        GridParams(d=1, half_width=0.5, cells_per_axis=100)
    grid = GridParams(d=2, half_width=0.5, cells_per_axis=8)
    assert grid.h == 0.125
    assert grid.cell_volume == 0.015625
    assert grid.shape == (8, 8)
    with pytest.raises(GeometryError):
        grid.cell_index((0.6, 0.0))


def test_dipole_is_zero_mean_with_unit_poles(small_dipole):
    assert abs(integral(small_dipole)) <= 1e-12
    assert l1_norm(small_dipole) == pytest.approx(2.0, rel=1e-12)
    assert small_dipole.zero_mean
    assert small_dipole.label == "dipole-w0.0625"
    assert small_dipole.scaled(3.0).label == "dipole-w0.0625*3"


def test_dipole_geometry_errors(small_grid):
    with pytest.raises(GeometryError, match="overlap"):
        make_dipole(DipoleSpec.symmetric((0.1,), 0.0625), small_grid)
    with pytest.raises(GeometryError, match="unresolved"):
        make_dipole(DipoleSpec.symmetric((0.5,), 0.01), small_grid)
    with pytest.raises(GeometryError, match="leaves the grid box"):
        make_dipole(DipoleSpec.symmetric((0.9,), 0.0625), small_grid)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000), count=st.integers(min_value=2, max_value=6))
def test_random_bumps_are_zero_mean(seed, count):
    grid = GridParams(d=1, half_width=0.5, cells_per_axis=128)
    f = make_random_bumps(count, seed, grid)
    assert abs(integral(f)) <= 1e-12 * max(l1_norm(f), 1.0)
    assert f.label == f"bumps-s{seed}"


def test_random_bumps_are_reproducible(small_grid):
    a = make_random_bumps(4, 7, small_grid)
    b = make_random_bumps(4, 7, small_grid)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ZeroFunctionError):
        make_random_bumps(1, 7, small_grid)


def test_dilate_preserves_mass(small_dipole):
    for n in (-1, 1, 2):
        g = dilate(small_dipole, n)
        assert g.half_width == 0.5 * 2.0 ** -n
        assert l1_norm(g) == pytest.approx(l1_norm(small_dipole), rel=1e-14)


def test_moments(small_dipole):
    best = min_first_moment(small_dipole)
    assert best.value <= best.initial_value
    assert best.value <= first_moment(small_dipole, (0.0,)) + 1e-14
    # |x - y| <= |x - c| + |y - c| and the inner integral is at least the minimum
    norm = l1_norm(small_dipole)
    pair = pair_moment(small_dipole)
    assert norm * best.value <= pair * (1 + 1e-12)
    assert pair <= 2.0 * norm * best.value * (1 + 1e-12)


def test_pair_moment_of_two_point_masses(small_grid):
    f = make_point_mass(small_grid, (-0.25,))
    g = make_point_mass(small_grid, (0.25,), mass=-1.0)
    f.values = f.values + g.values
    distance = small_grid.axis_centers[small_grid.cell_index((0.25,))[0]] \
        - small_grid.axis_centers[small_grid.cell_index((-0.25,))[0]]
    assert pair_moment(f) == pytest.approx(2.0 * distance, rel=1e-12)


def test_project_zero_mean(small_grid):
    with pytest.raises(ZeroFunctionError, match="support too small"):
        project_zero_mean(make_point_mass(small_grid, (0.0,)))
    box = make_indicator(small_grid, (-0.25,), (0.25,))
    assert integral(box) == pytest.approx(0.5)
    with pytest.raises(ZeroFunctionError, match="annihilates"):
        project_zero_mean(box)
    ramp = box.scaled(1.0)
    ramp.values = ramp.values * (small_grid.axis_centers + 1.0)
    projected = project_zero_mean(ramp)
    assert projected.zero_mean
    assert abs(integral(projected)) <= 1e-12


def test_shift_cells(small_dipole):
    moved = shift_cells(small_dipole, (3,))
    assert l1_norm(moved) == pytest.approx(l1_norm(small_dipole))
    assert np.array_equal(moved.values[0][3:], small_dipole.values[0][:-3])
    with pytest.raises(GeometryError):
        shift_cells(small_dipole, (60,))


def test_save_and_load(tmp_path, small_dipole):
    path = save_grid_function(small_dipole, tmp_path / "f.grid")
    assert (tmp_path / "f.grid.json").exists()
    loaded = load_grid_function(path)
    assert np.array_equal(loaded.values, small_dipole.values)
    assert loaded.label == small_dipole.label
    assert loaded.zero_mean
    with pytest.raises(FileNotFoundError):
        load_grid_function(tmp_path / "missing.grid")
