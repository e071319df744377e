import numpy as np
import pytest

from src.engine.errors import CancellationFailedError, GeometryError, SearchBudgetError
from src.engine.extremize import TABLE_COLUMNS, FamilySpec, constant_table, search, split_budget
from src.engine.gridfn import DipoleSpec, make_dipole


@pytest.fixture
def family(small_grid):
    return FamilySpec(bump_count=2, grid=small_grid, seed=3)


def test_baseline_is_the_symmetric_dipole(family, small_grid):
    f = family.realize(family.baseline())
    dipole = make_dipole(DipoleSpec.symmetric((0.5,), 0.0625), small_grid)
    assert np.array_equal(f.values, dipole.values)
    assert f.label == "family-M2-s3"


def test_weights_are_projected(family):
    x = family.baseline()
    shifted = x.copy()
    shifted[-2:] += 5.0
    assert np.array_equal(family.unpack(x)[2], family.unpack(shifted)[2])
    with pytest.raises(ValueError):
        family.unpack(x[:-1])


def test_split_budget():
    assert split_budget(15, 2) == [8, 7]
    assert sum(split_budget(100, 8)) == 100


def test_budget_and_cancellation_errors(sign_kernel, signed_square, square, family):
    assert family.dim == 6
    with pytest.raises(SearchBudgetError):
        search(sign_kernel, signed_square, family, budget=6)
    with pytest.raises(CancellationFailedError):
        search(sign_kernel, square, family, budget=7)


def test_minimal_budget_evaluates_the_simplex(sign_kernel, signed_square, family):
    result = search(sign_kernel, signed_square, family, budget=7)
    assert result.evaluations == 7
    assert result.best_restart == 0
    assert result.best_report.statement_id == "extremize"
    assert result.best_report.ratio == pytest.approx(result.best_ratio, rel=1e-12)
    assert result.to_records("abc")[0]["config_digest"] == "abc"


def test_search_is_reproducible_and_monotone(sign_kernel, signed_square, family):
    first = search(sign_kernel, signed_square, family, budget=14, threads=1)
    second = search(sign_kernel, signed_square, family, budget=14, threads=2)
    assert first.to_trace() == second.to_trace()
    assert len(first.restart_best) == 2
    trace = first.trace
    assert all(b >= a for a, b in zip(trace, trace[1:]))
    assert first.best_ratio == trace[-1]
    assert first.best_ratio >= first.restart_best[0]


def test_constant_table(sign_kernel, signed_square, family):
    empty = constant_table([], family, budget=7)
    assert list(empty.columns) == TABLE_COLUMNS
    assert empty.empty
    table = constant_table([(sign_kernel, signed_square)], family, budget=7)
    assert len(table) == 1
    assert table.loc[0, "phi_id"] == "signed_power-p2"
    assert table.loc[0, "evaluations"] == 7


def test_unresolved_widths_are_rejected_up_front(small_grid):
    h = small_grid.h
    with pytest.raises(GeometryError, match="width unresolved"):
        FamilySpec(bump_count=2, grid=small_grid, min_width=h / 8, max_width=h / 8)
    with pytest.raises(GeometryError, match="width unresolved"):
        FamilySpec(bump_count=2, grid=small_grid, min_width=3 * h)
    resolved = FamilySpec(bump_count=2, grid=small_grid, min_width=4 * h)
    assert resolved.width_range[0] == 4 * h
