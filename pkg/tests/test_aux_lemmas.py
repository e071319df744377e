import pytest

from src.engine.errors import ExponentRangeError
from src.engine.kernel import KernelSpec
from src.engine.verify.aux_lemmas import (
    aux_lemma_suite,
    k1_check,
    k2_check,
    kernel_sum_bound_check,
    mp_checks,
    phi1_check,
)
from src.engine.verify.report import Verdict


def test_kernel_difference_constant(sign_kernel):
    report = k1_check(sign_kernel, samples=512)
    assert report.verdict is Verdict.PASS
    assert report.statement_id == "aux_k1"
    assert 0 < report.lhs < 0.5 * 2 ** 1.5


def test_band_overlap_vanishes_at_origin(sign_kernel):
    report = k2_check(sign_kernel)
    assert report.verdict is Verdict.PASS
    assert "g(0) = 0" in report.notes


def test_p2_only_checks_reject_other_exponents():
    spec = KernelSpec(d=1, ell=1, alpha=0.75, tilde_k="sign")
    with pytest.raises(ExponentRangeError):
        k2_check(spec)
    with pytest.raises(ExponentRangeError):
        kernel_sum_bound_check(spec, 2)
    assert aux_lemma_suite(spec, None, ["aux_k2"]) == []


def test_phi_perturbation_constant(signed_square):
    report = phi1_check(signed_square, samples=2000, kernel_id="k")
    assert report.verdict is Verdict.PASS
    assert report.kernel_id == "k"


def test_mp_checks_pass():
    reports = mp_checks(2.0, samples=10_000)
    assert len(reports) == 9
    assert all(r.verdict is Verdict.PASS for r in reports)
    assert {r.n for r in reports if r.statement_id == "aux_energy_bound"} == {2, 3, 4}
    high = mp_checks(3.0, samples=10_000)
    assert len(high) == 7
    assert all(r.phi_id == "M_p_highp-p3" for r in high)
