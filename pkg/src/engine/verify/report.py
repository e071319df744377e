"""
Inequality reports: one row per (statement, kernel, Phi, test function, n).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

VACUOUS_RTOL = 1e-9


class Verdict(Enum):
    PASS = "PASS"
    WARN = "WARN"
    FAIL = "FAIL"


class StatementId(Enum):
    MAIN = "main"
    FIRST_LEMMA = "first_lemma"
    SECOND_LEMMA = "second_lemma"
    MAIN2 = "main2"
    REMAINDER = "remainder"
    REMAINDER_SPLIT = "remainder_split"
    MEDIAN_BOUND = "median_bound"
    LOCAL_MAIN2 = "local_main2"
    TELESCOPIC = "telescopic"
    KERNEL_SUM = "kernel_sum"
    PAIR_MOMENT = "pair_moment"
    DILATION = "dilation"
    AUX_K1 = "aux_k1"
    AUX_K2 = "aux_k2"
    AUX_K3 = "aux_k3"
    AUX_PHI1 = "aux_phi1"
    AUX_MP_LIP = "aux_mp_lip"
    AUX_SUBADDITIVE = "aux_subadditive"
    AUX_CONVEXITY = "aux_convexity"
    AUX_ENERGY_BOUND = "aux_energy_bound"
    AUX_ENERGY_BOUND2 = "aux_energy_bound2"
    ENERGY_INCREMENT = "energy_increment"
    PROBE = "probe"
    CANCELLATION = "cancellation"
    EXTREMIZE = "extremize"


AUX_STATEMENTS = frozenset(s.value for s in StatementId if s.value.startswith("aux_"))

REPORT_COLUMNS = ["statement_id", "kernel_id", "phi_id", "f_id", "n", "lhs", "rhs", "ratio",
                  "tail_bound", "verdict", "config_digest"]


@dataclass
class InequalityReport:
    statement_id: str
    kernel_id: str
    phi_id: str
    f_id: str
    n: Optional[int]
    lhs: float
    rhs: float
    ratio: float
    truncation_error_bound: float = 0.0
    notes: List[str] = field(default_factory=list)
    verdict: Verdict = Verdict.PASS

    def __post_init__(self):
        if not self.truncation_error_bound >= 0:
            raise ValueError(f"truncation bound must be non-negative, got {self.truncation_error_bound}")

    @property
    def sort_key(self):
        return (self.statement_id, self.f_id, -1 if self.n is None else self.n)

    def fail(self, note: str) -> None:
        self.verdict = Verdict.FAIL
        self.notes.append(note)

    def to_record(self, config_digest: str = "") -> Dict[str, Any]:
        return {
            "statement_id": self.statement_id,
            "kernel_id": self.kernel_id,
            "phi_id": self.phi_id,
            "f_id": self.f_id,
            "n": -1 if self.n is None else int(self.n),
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "ratio": float(self.ratio),
            "tail_bound": float(self.truncation_error_bound),
            "verdict": self.verdict.value,
            "config_digest": config_digest,
        }


def make_report(statement: StatementId, kernel_id: str, phi_id: str, f_id: str,
                n: Optional[int], lhs: float, rhs: float, tail: float = 0.0,
                scale: Optional[float] = None, notes: Optional[List[str]] = None) -> InequalityReport:
    """
    Build a report with ratio = lhs / rhs.

    rhs = 0 with lhs below VACUOUS_RTOL * scale is a vacuous pass with ratio 0;
    rhs = 0 with a visible lhs gives an infinite ratio and FAIL. A tail bound
    larger than the computed lhs turns a pass into WARN.
    """
    notes = list(notes or [])
    scale = max(abs(lhs), abs(rhs)) if scale is None else scale
    if rhs > 0:
        ratio = lhs / rhs
    elif abs(lhs) <= VACUOUS_RTOL * scale or lhs == 0:
        ratio = 0.0
        notes.append("vacuous")
    else:
        ratio = math.inf

    if not math.isfinite(ratio) or not math.isfinite(lhs):
        verdict = Verdict.FAIL
        notes.append("unbounded ratio")
    elif tail > abs(lhs) and "vacuous" not in notes:
        verdict = Verdict.WARN
        notes.append("tail bound exceeds computed value")
    else:
        verdict = Verdict.PASS
    return InequalityReport(statement.value, kernel_id, phi_id, f_id, n, float(lhs), float(rhs),
                            float(ratio), float(tail), notes, verdict)


def measured_constant(statement: StatementId, kernel_id: str, phi_id: str, value: float,
                      n: Optional[int] = None, bound: Optional[float] = None,
                      minimum: Optional[float] = None, f_id: str = "",
                      notes: Optional[List[str]] = None) -> InequalityReport:
    """
    Report a measured constant (lhs = value, rhs = 1). It passes when finite,
    below bound and above minimum where those are given.
    """
    report = make_report(statement, kernel_id, phi_id, f_id, n, value, 1.0, notes=notes)
    if bound is not None and not value < bound:
        report.fail(f"measured {value:.6g} >= bound {bound:.6g}")
    if minimum is not None and not value > minimum:
        report.fail(f"measured {value:.6g} <= {minimum:.6g}")
    return report
