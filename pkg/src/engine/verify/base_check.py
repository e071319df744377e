from abc import ABC, abstractmethod
from collections import Counter
from typing import Callable, Dict, List

from src.engine.audit.audit_logger import AuditLogger
from src.engine.verify.report import InequalityReport, Verdict


class BaseCheck(ABC):
    """
    Abstract base class for every check a suite runs.
    Wraps evaluation with audit logging and verdict bookkeeping.
    """
    def __init__(self, audit: AuditLogger):
        self.audit = audit
        self.state = Verdict.PASS

    @property
    @abstractmethod
    def name(self) -> str:
        """Statement id of the check."""
        pass

    @property
    def subject(self) -> str:
        """What the check runs on, for the audit trail."""
        return ""

    @abstractmethod
    def evaluate(self) -> List[InequalityReport]:
        """Compute the reports. Must not swallow errors."""
        pass

    def run(self) -> List[InequalityReport]:
        """Evaluate with audit entries for start, completion, non-passing verdicts and errors."""
        self.audit.log_check_start(self.name, self.subject)
        try:
            reports = self.evaluate()
        except Exception as e:
            self.audit.log_error(self.name, type(e).__name__, f"{self.subject}: {e}")
            self.state = Verdict.FAIL
            raise

        counts: Dict[str, int] = Counter(r.verdict.value for r in reports)
        self.audit.log_check_complete(self.name, self.subject, len(reports), metadata=dict(sorted(counts.items())))
        for report in reports:
            if report.verdict is not Verdict.PASS:
                self.audit.log_verdict(self.name, report.f_id or self.subject, report.verdict.value, report.notes)
        if counts.get(Verdict.FAIL.value):
            self.state = Verdict.FAIL
        elif counts.get(Verdict.WARN.value):
            self.state = Verdict.WARN
        return reports


class StatementCheck(BaseCheck):
    """A check backed by a plain callable returning one report or a list of them."""
    def __init__(self, audit: AuditLogger, statement: str, subject: str,
                 compute: Callable[[], object]):
        super().__init__(audit)
        self._statement = statement
        self._subject = subject
        self._compute = compute

    @property
    def name(self) -> str:
        return self._statement

    @property
    def subject(self) -> str:
        return self._subject

    def evaluate(self) -> List[InequalityReport]:
        result = self._compute()
        if isinstance(result, InequalityReport):
            return [result]
        return list(result)
