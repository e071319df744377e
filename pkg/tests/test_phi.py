import math

import numpy as np
import pytest

from src.engine.errors import DimensionMismatchError, ExponentRangeError, PhiHomogeneityError
from src.engine.phi import (
    PhiSpec,
    check_cancellation,
    check_homogeneity,
    eval_phi,
    monte_carlo,
    phi_perturbation_ratio,
    product_angles,
    sphere_integrate,
    surface_measure,
    uniform_circle,
)


def quadratic(a11, a12, a22):
    return PhiSpec.build(ell=2, p=2.0, family="quadratic_form", params={"a11": a11, "a12": a12, "a22": a22})


def test_signed_square_cancels_exactly(sign_kernel, signed_square):
    result = check_cancellation(signed_square, sign_kernel)
    assert result.residual_plus == 0.0
    assert result.residual_minus == 0.0
    assert result.cancels()


def test_square_never_cancels(sign_kernel, square):
    result = check_cancellation(square, sign_kernel)
    assert result.residual_plus == 2.0
    assert not result.cancels()


def test_trace_free_quadratic_form_cancels(identity_kernel_2d):
    result = check_cancellation(quadratic(1.0, 0.5, -1.0), identity_kernel_2d, uniform_circle(256))
    assert abs(result.residual_plus) <= 1e-10
    assert abs(result.residual_minus) <= 1e-10
    assert result.cancels()


def test_quadratic_form_residual_is_pi_times_trace(identity_kernel_2d):
    result = check_cancellation(quadratic(1.0, 0.0, 0.0), identity_kernel_2d, uniform_circle(256))
    assert abs(result.residual_plus - math.pi) <= 1e-10
    assert not result.cancels()
    both = check_cancellation(quadratic(1.0, 0.0, 1.0), identity_kernel_2d)
    assert abs(both.residual_plus - 2.0 * math.pi) <= 1e-10


def test_p_mismatch_is_rejected(sign_kernel):
    phi = PhiSpec(ell=1, p=1.5, family="signed_power")
    with pytest.raises(DimensionMismatchError):
        check_cancellation(phi, sign_kernel)


def test_builtin_families_are_homogeneous():
    assert check_homogeneity(PhiSpec(ell=1, p=1.5, family="signed_power")) < 1e-12
    assert check_homogeneity(PhiSpec(ell=2, p=3.0, family="norm_power")) < 1e-12
    assert check_homogeneity(quadratic(1.0, 2.0, -0.5)) < 1e-12


def test_custom_phi_homogeneity_is_checked():
    PhiSpec(ell=1, p=2.0, family="custom", evaluator=lambda v: v[:, 0] * np.abs(v[:, 0]))
    with pytest.raises(PhiHomogeneityError):
        PhiSpec(ell=1, p=2.0, family="custom", evaluator=lambda v: v[:, 0] ** 2 + v[:, 0])


def test_invalid_functionals():
    with pytest.raises(ExponentRangeError):
        PhiSpec(ell=1, p=1.0, family="signed_power")
    with pytest.raises(DimensionMismatchError):
        PhiSpec(ell=2, p=2.0, family="signed_power")
    with pytest.raises(ExponentRangeError):
        PhiSpec.build(ell=2, p=3.0, family="quadratic_form", params={"a11": 1.0})


def test_eval_phi_shapes(signed_square):
    assert eval_phi(signed_square, -3.0) == -9.0
    values = eval_phi(signed_square, np.array([1.0, -2.0, 0.5]))
    assert values.shape == (3,)
    assert values.tolist() == [1.0, -4.0, 0.25]


def test_phi_id_and_sup():
    phi = quadratic(1.0, 0.0, -1.0)
    assert phi.phi_id == "quadratic_form-p2[a11=1.0,a12=0.0,a22=-1.0]"
    assert phi.sup_on_sphere() == pytest.approx(1.0)


def test_surface_measure():
    assert surface_measure(1) == pytest.approx(2.0)
    assert surface_measure(2) == pytest.approx(2.0 * math.pi)
    assert surface_measure(3) == pytest.approx(4.0 * math.pi)


def test_product_angles_integrates_polynomials():
    quad = product_angles(3)
    assert np.sum(quad.weights) == pytest.approx(4.0 * math.pi, rel=1e-12)
    assert sphere_integrate(quad, lambda x: x[:, 0] ** 2) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)
    assert sphere_integrate(quad, lambda x: x[:, 2] ** 2) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)
    assert np.allclose(np.linalg.norm(quad.nodes, axis=1), 1.0)


def test_monte_carlo_is_seeded():
    a, b = monte_carlo(3, 1000, seed=4), monte_carlo(3, 1000, seed=4)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.sum(a.weights) == pytest.approx(4.0 * math.pi)


def test_perturbation_ratio_is_finite(signed_square):
    ratio = phi_perturbation_ratio(signed_square, samples=2000, seed=1)
    assert 0.0 < ratio < math.inf
