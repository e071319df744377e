"""
Inequality checks: band convolutions of test functions, the statements built
on them, auxiliary lemma checks, the necessity probe and the suite runner.
"""

from src.engine.verify.convolver import BandConvolver, PhiIntegral, TailPolicy, VerifyOptions, phi_integral
from src.engine.verify.report import InequalityReport, StatementId, Verdict, make_report
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
from src.engine.verify.aux_lemmas import aux_lemma_suite, kernel_sum_bound_check
from src.engine.verify.probe import ProbeResult, cancellation_necessity_probe
from src.engine.verify.suite import SuitePlan, SuiteRunner, build_family

__all__ = [
    "BandConvolver",
    "PhiIntegral",
    "TailPolicy",
    "VerifyOptions",
    "phi_integral",
    "InequalityReport",
    "StatementId",
    "Verdict",
    "make_report",
    "main_ratio",
    "first_lemma_check",
    "second_lemma_check",
    "main2_partial",
    "remainder_partial",
    "remainder_split_check",
    "median_bound_check",
    "local_main2_check",
    "telescopic_decomposition_check",
    "pair_moment_check",
    "dilation_check",
    "energy_increment_check",
    "aux_lemma_suite",
    "kernel_sum_bound_check",
    "ProbeResult",
    "cancellation_necessity_probe",
    "SuitePlan",
    "SuiteRunner",
    "build_family",
]
