import numpy as np
import pytest

from src.engine.dyadic.mp import (
    energy_bound2_infimum,
    energy_bound_infimum,
    m_p,
    m_p_highp,
    mp_concavity_defect,
    mp_for,
    mp_homogeneity_defect,
    mp_lipschitz_ratio,
    mp_scaling_defect,
    mp_subadditivity_constant,
    mp_symmetry_defect,
    simplex_grid,
    theta,
)
from src.engine.errors import ExponentRangeError, KernelDomainError


def test_m_p_values():
    assert m_p(2.0, 3.0, 4.0) == 12.0
    assert m_p(1.5, 4.0, 1.0) == pytest.approx(2.0)
    assert m_p_highp(3.0, 1.0, 2.0) == pytest.approx(6.0)
    assert theta(1.5, 4.0) == pytest.approx(2.0)
    assert theta(1.5, -0.25) == pytest.approx(0.25)
    assert mp_for(3.0)(1.0, 2.0) == pytest.approx(6.0)


def test_exponent_and_domain_errors():
    with pytest.raises(ExponentRangeError):
        m_p(3.0, 1.0, 1.0)
    with pytest.raises(ExponentRangeError):
        m_p_highp(2.0, 1.0, 1.0)
    with pytest.raises(KernelDomainError):
        m_p(1.5, -1.0, 1.0)
    with pytest.raises(ExponentRangeError):
        mp_scaling_defect(3.0, samples=10)


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0, 3.0])
def test_symmetry_and_homogeneity(p):
    assert mp_symmetry_defect(p, samples=20_000) <= 1e-12
    assert mp_homogeneity_defect(p, samples=20_000) <= 1e-12


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0])
def test_scaling_subadditivity_and_concavity(p):
    assert mp_scaling_defect(p, samples=20_000) <= 1e-12
    result = mp_subadditivity_constant(p, samples=20_000)
    assert result.constant <= 1.0 + 1e-12
    assert result.theta_constant <= 1.0 + 1e-12
    assert result.identity_defect <= 1e-12
    assert mp_concavity_defect(p) <= 1e-12


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_lipschitz_ratio_is_bounded(p):
    ratio = mp_lipschitz_ratio(p)
    assert 0.0 < ratio < 10.0 * max(1.0, p - 1.0)


def test_simplex_grid():
    z = simplex_grid(3, resolution=8)
    assert z.shape == (45, 3)
    assert np.allclose(z.sum(axis=1), 1.0)
    assert np.all(z >= 0)
    with pytest.raises(ValueError):
        simplex_grid(1)


def test_energy_bound_infima():
    assert energy_bound_infimum(2.0, 2) == pytest.approx(1.0, abs=2e-2)
    assert energy_bound2_infimum(2.0, 2) == pytest.approx(2.0, abs=2e-2)
    for p in (1.5, 2.0, 3.0):
        for n in (2, 3, 4):
            assert energy_bound_infimum(p, n, resolution=16) > 0
            assert energy_bound2_infimum(p, n, resolution=16) > 0
