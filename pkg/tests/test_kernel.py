import math

import numpy as np
import pytest

from src.engine.errors import BandUnresolvedError, DimensionMismatchError, KernelDomainError, MemoryBoundError
from src.engine.gridfn import GridFunction, GridParams
from src.engine.kernel import (
    BandRange,
    ConvolutionSettings,
    KernelSpec,
    convolve,
    effective_lo,
    eval_band,
    eval_band_sum,
    eval_kernel,
    far_field_difference_constant,
    resolved_band_limit,
)


def test_kernel_value_and_origin(sign_kernel):
    assert eval_kernel(sign_kernel, 0.5)[0] == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert eval_kernel(sign_kernel, -0.25)[0] == pytest.approx(-2.0, rel=1e-15)
    with pytest.raises(KernelDomainError, match="singular at origin"):
        eval_kernel(sign_kernel, 0.0)


def test_invalid_kernels():
    with pytest.raises(KernelDomainError):
        KernelSpec(d=1, ell=1, alpha=1.0, tilde_k="sign")
    with pytest.raises(DimensionMismatchError):
        KernelSpec(d=2, ell=1, alpha=1.0, tilde_k="sign")
    with pytest.raises(KernelDomainError):
        KernelSpec(d=1, ell=1, alpha=0.5, tilde_k="wavelet")


@pytest.mark.parametrize("spec", [
    KernelSpec(d=1, ell=1, alpha=0.5, tilde_k="sign"),
    KernelSpec(d=2, ell=2, alpha=1.0, tilde_k="identity"),
    KernelSpec(d=3, ell=1, alpha=2.0, tilde_k="constant"),
])
def test_band_homogeneity(spec):
    rng = np.random.default_rng(7)
    for n in range(-6, 7):
        x = rng.uniform(-4.0, 4.0, size=(800, spec.d)) * 2.0 ** -n
        lhs = eval_band(spec, n, x)
        rhs = 2.0 ** ((spec.d - spec.alpha) * n) * eval_band(spec, 0, 2.0 ** n * x)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=0.0)


def test_band_sum_matches_single_bands(identity_kernel_2d):
    rng = np.random.default_rng(3)
    x = rng.uniform(-2.0, 2.0, size=(2000, 2))
    total = sum(eval_band(identity_kernel_2d, n, x) for n in range(-2, 4))
    assert np.allclose(eval_band_sum(identity_kernel_2d, BandRange(-2, 3), x), total, rtol=1e-14, atol=0.0)


def test_shared_sphere_counts_once(sign_kernel):
    assert eval_band_sum(sign_kernel, BandRange(0, 1), 0.5)[0] == eval_kernel(sign_kernel, 0.5)[0]
    assert eval_band(sign_kernel, 0, 0.5)[0] == eval_band(sign_kernel, 1, 0.5)[0]


def test_band_range_validation():
    with pytest.raises(KernelDomainError):
        BandRange(3, 1)
    assert BandRange.upto(4).is_far_field
    assert BandRange.single(2).outer_radius == 0.25
    assert BandRange.single(2).inner_radius == 0.125


def test_far_field_difference_constant(sign_kernel):
    assert far_field_difference_constant(sign_kernel) == pytest.approx(0.5 * 2.0 ** 1.5)


def test_effective_lo_and_resolution():
    settings = ConvolutionSettings(far_field_radius=4.0)
    assert effective_lo(BandRange.upto(0), settings) == -2
    assert effective_lo(BandRange(1, 3), settings) == 1
    assert resolved_band_limit(2.0 ** -10) == 7


@pytest.mark.parametrize("d,cells,band_range", [(1, 64, BandRange(0, 3)), (2, 32, BandRange(0, 2))])
def test_fast_and_direct_convolution_agree(d, cells, band_range):
    spec = (KernelSpec(d=1, ell=1, alpha=0.5, tilde_k="sign") if d == 1
            else KernelSpec(d=2, ell=2, alpha=1.0, tilde_k="identity"))
    grid = GridParams(d=d, half_width=0.5, cells_per_axis=cells)
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = GridFunction(d, 0.5, cells, rng.standard_normal(grid.shape))
        fast = convolve(spec, band_range, f, method="fast").values
        direct = convolve(spec, band_range, f, method="direct").values
        assert np.max(np.abs(fast - direct)) <= 1e-10 * np.max(np.abs(direct))


def test_convolution_of_zero_function(sign_kernel, small_grid):
    out = convolve(sign_kernel, BandRange(0, 2), small_grid.zeros())
    assert not np.any(out.values)
    assert out.half_width == 2.0


def test_unresolved_band_and_memory_bound(sign_kernel):
    f = GridFunction(1, 0.5, 64, np.ones(64))
    with pytest.raises(BandUnresolvedError, match="band unresolved"):
        convolve(sign_kernel, BandRange.single(10), f)
    with pytest.raises(MemoryBoundError):
        convolve(sign_kernel, BandRange(0, 2), f, settings=ConvolutionSettings(max_cells=16))


def test_absorbed_fine_bands_are_allowed(sign_kernel):
    f = GridFunction(1, 0.5, 64, np.ones(64))
    out = convolve(sign_kernel, BandRange(0, 12), f, settings=ConvolutionSettings(subgrid_bands="absorb"))
    assert np.all(np.isfinite(out.values))
    with pytest.raises(BandUnresolvedError):
        convolve(sign_kernel, BandRange(0, 12), f)
