import numpy as np
import pytest

from src.engine.errors import ExponentRangeError, GeometryError, ZeroMeanError
from src.engine.gridfn import DipoleSpec, GridParams, make_dipole, make_point_mass
from src.engine.kernel import KernelSpec
from src.engine.phi import PhiSpec
from src.engine.verify.convolver import BandConvolver, VerifyOptions, integrate_phi
from src.engine.verify.report import StatementId, Verdict, make_report, measured_constant
from src.engine.verify.statements import (
    dilation_check,
    energy_increment_check,
    first_lemma_check,
    local_main2_check,
    main2_partial,
    main_ratio,
    median_bound_check,
    pair_moment_check,
    remainder_partial,
    remainder_split_check,
    second_lemma_check,
    telescopic_decomposition_check,
)


def test_make_report_verdicts():
    vacuous = make_report(StatementId.MAIN, "k", "phi", "f", None, 0.0, 0.0)
    assert vacuous.ratio == 0.0
    assert vacuous.verdict is Verdict.PASS
    assert "vacuous" in vacuous.notes
    unbounded = make_report(StatementId.MAIN, "k", "phi", "f", None, 1.0, 0.0)
    assert unbounded.verdict is Verdict.FAIL
    warned = make_report(StatementId.MAIN, "k", "phi", "f", 2, 1e-3, 1.0, tail=1e-2)
    assert warned.verdict is Verdict.WARN
    assert warned.to_record("abc")["n"] == 2
    assert make_report(StatementId.PAIR_MOMENT, "", "", "f", None, 1.0, 2.0).to_record()["n"] == -1
    assert measured_constant(StatementId.AUX_K1, "k", "", 3.0, bound=2.0).verdict is Verdict.FAIL
    assert measured_constant(StatementId.AUX_K1, "k", "", 0.0, minimum=0.0).verdict is Verdict.FAIL


def test_main_ratio_is_scale_invariant(sign_kernel, signed_square, small_dipole, options):
    base = main_ratio(sign_kernel, signed_square, small_dipole, options)
    tripled = main_ratio(sign_kernel, signed_square, small_dipole.scaled(3.0), options)
    assert np.isfinite(base.ratio)
    assert tripled.ratio == pytest.approx(base.ratio, rel=1e-9)
    assert base.statement_id == "main"
    assert base.f_id == "dipole-w0.0625"


def test_main_ratio_needs_zero_mean(sign_kernel, signed_square, small_grid, options):
    with pytest.raises(ZeroMeanError):
        main_ratio(sign_kernel, signed_square, make_point_mass(small_grid, (0.0,)), options)


def test_zero_function_is_vacuous(sign_kernel, signed_square, small_grid, options):
    report = main_ratio(sign_kernel, signed_square, small_grid.zeros(), options)
    assert report.ratio == 0.0
    assert report.verdict is Verdict.PASS
    assert "vacuous" in report.notes


def test_first_lemma_support_violation(sign_kernel, options):
    grid = GridParams(d=1, half_width=1.0, cells_per_axis=256)
    f = make_dipole(DipoleSpec.symmetric((1.4,), 0.0625), grid)
    with pytest.raises(GeometryError, match="support violation"):
        first_lemma_check(sign_kernel, f, options)


def test_first_lemma_is_finite(sign_kernel, small_dipole, options):
    report = first_lemma_check(sign_kernel, small_dipole, options)
    assert report.n == 0
    assert report.phi_id == "norm_power-p2"
    assert np.isfinite(report.ratio)


def test_second_lemma_ratio_is_at_most_two(sign_kernel, signed_square, small_dipole, options):
    conv = BandConvolver(sign_kernel, small_dipole, options)
    for n in range(4):
        report = second_lemma_check(sign_kernel, signed_square, small_dipole, n, convolver=conv)
        assert report.ratio <= 2.0 + 1e-9


def test_second_lemma_rejects_large_p(small_dipole):
    spec = KernelSpec(d=1, ell=1, alpha=0.75, tilde_k="sign")
    phi = PhiSpec(ell=1, p=4.0, family="signed_power")
    with pytest.raises(ExponentRangeError):
        second_lemma_check(spec, phi, small_dipole, 0)


def test_telescopic_decomposition(sign_kernel, signed_square, small_dipole, options):
    report = telescopic_decomposition_check(sign_kernel, signed_square, small_dipole, 6, options)
    assert report.ratio <= 1.0 + 1e-12
    assert "truncated at N=3" in report.notes


def test_band_statements_record_truncation(sign_kernel, signed_square, small_dipole, options):
    conv = BandConvolver(sign_kernel, small_dipole, options)
    main2 = main2_partial(sign_kernel, signed_square, small_dipole, 8, convolver=conv)
    assert "truncated at N=4" in main2.notes
    assert main2.truncation_error_bound > 0
    remainder = remainder_partial(sign_kernel, small_dipole, 8, convolver=conv)
    assert remainder.phi_id == "M_p"
    assert "truncated at N=3; tail bounded" in remainder.notes
    short = remainder_partial(sign_kernel, small_dipole, 2, convolver=conv)
    assert short.truncation_error_bound == 0.0
    assert short.lhs <= remainder.lhs


def test_main2_tail_covers_the_resolved_sum(sign_kernel, square, small_dipole, default_grid, options):
    fine_f = make_dipole(DipoleSpec.symmetric((0.5,), 0.0625), default_grid)
    coarse = main2_partial(sign_kernel, square, small_dipole, 6, options)
    fine = main2_partial(sign_kernel, square, fine_f, 6, options)
    assert "truncated at N=4" in coarse.notes
    assert fine.truncation_error_bound == 0.0
    assert coarse.lhs + coarse.truncation_error_bound >= fine.lhs


def test_remainder_tail_covers_the_resolved_sum(sign_kernel, small_dipole, default_grid, options):
    fine_f = make_dipole(DipoleSpec.symmetric((0.5,), 0.0625), default_grid)
    coarse = remainder_partial(sign_kernel, small_dipole, 6, options=options)
    fine = remainder_partial(sign_kernel, fine_f, 6, options=options)
    assert "truncated at N=3; tail bounded" in coarse.notes
    assert fine.truncation_error_bound == 0.0
    assert fine.lhs > coarse.lhs
    assert coarse.lhs + coarse.truncation_error_bound >= fine.lhs
    # widening N on the coarse grid moves only the bound
    wider = remainder_partial(sign_kernel, small_dipole, 12, options=options)
    assert wider.lhs == coarse.lhs
    assert coarse.truncation_error_bound == wider.truncation_error_bound


def test_localized_statements_are_finite(sign_kernel, signed_square, small_dipole, options):
    conv = BandConvolver(sign_kernel, small_dipole, options)
    for report in (
        remainder_split_check(sign_kernel, small_dipole, 2, 1, convolver=conv),
        median_bound_check(sign_kernel, signed_square, small_dipole, 2, convolver=conv),
        local_main2_check(sign_kernel, signed_square, small_dipole, 2, convolver=conv),
        energy_increment_check(sign_kernel, small_dipole),
    ):
        assert np.isfinite(report.ratio)
        assert report.rhs > 0


def test_pair_moment_bound(small_dipole):
    report = pair_moment_check(small_dipole, "k", "phi")
    assert report.ratio <= 1.0 + 1e-12
    assert report.n is None


def test_dilation_check_is_finite(sign_kernel, signed_square, small_dipole, options):
    report = dilation_check(sign_kernel, signed_square, small_dipole, 1, options)
    assert report.n == 1
    assert np.isfinite(report.ratio)


def test_point_mass_bands_cancel(sign_kernel, signed_square, small_grid, identity_kernel_2d, coarse_settings):
    options = VerifyOptions(settings=coarse_settings)
    conv = BandConvolver(sign_kernel, make_point_mass(small_grid, (0.0,)), options)
    for n in range(0, 5):
        value, mag = integrate_phi(signed_square, conv.band(n), conv.cell_volume)
        assert mag > 0
        assert abs(value) <= 1e-9 * mag

    grid = GridParams(d=2, half_width=0.5, cells_per_axis=128)
    phi = PhiSpec.build(ell=2, p=2.0, family="quadratic_form", params={"a11": 1.0, "a12": 0.5, "a22": -1.0})
    conv = BandConvolver(identity_kernel_2d, make_point_mass(grid, (0.0, 0.0)), options)
    for n in range(0, 5):
        value, mag = integrate_phi(phi, conv.band(n), conv.cell_volume)
        assert mag > 0
        assert abs(value) <= 1e-9 * mag
