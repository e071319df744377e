"""
Audit Logger - Structured record of every check a run executes.
Timestamps live here and never in the report files, so reports stay
byte-identical across runs.
"""
import json
from datetime import datetime
from typing import Dict, Any, List, Optional
from pathlib import Path
import logging

logger = logging.getLogger(__name__)


class AuditLogger:
    """
    Collects run events (run_start, check_start, check_complete, verdict,
    error, run_complete) with timestamps and a session id.
    """

    def __init__(self, log_dir: str = "audit_logs"):
        self.log_dir = Path(log_dir)
        self.entries: List[Dict] = []
        self.session_id = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.run_id: Optional[str] = None

    def _add(self, event: str, **fields: Any) -> Dict[str, Any]:
        entry = {"timestamp": datetime.now().isoformat(), "event": event}
        entry.update(fields)
        self.entries.append(entry)
        return entry

    def log_run_start(self, run_id: str, command: str, config_digest: str) -> None:
        """Log the start of a CLI command."""
        self.run_id = run_id
        self._add("run_start", run_id=run_id, command=command, config_digest=config_digest,
                  session_id=self.session_id)
        logger.info(f"Run {run_id} ({command}) started, config {config_digest}")

    def log_check_start(self, check: str, subject: str) -> None:
        self._add("check_start", check=check, subject=subject)
        logger.debug(f"Check {check} started on {subject}")

    def log_check_complete(self, check: str, subject: str, rows: int,
                           metadata: Dict[str, Any]) -> None:
        self._add("check_complete", check=check, subject=subject, rows=rows, metadata=metadata)
        logger.debug(f"Check {check} on {subject} produced {rows} rows")

    def log_verdict(self, check: str, subject: str, verdict: str, notes: List[str]) -> None:
        """Log a non-passing verdict."""
        self._add("verdict", check=check, subject=subject, verdict=verdict, notes=list(notes))
        logger.warning(f"{check} on {subject}: {verdict} ({'; '.join(notes)})")

    def log_error(self, check: str, error_type: str, message: str) -> None:
        self._add("error", check=check, error_type=error_type, message=message)
        logger.error(f"Error in {check}: {error_type} - {message}")

    def log_run_complete(self, rows: int, status: str, verdicts: Dict[str, int]) -> None:
        self._add("run_complete", rows=rows, status=status, verdicts=dict(verdicts),
                  total_entries=len(self.entries))
        logger.info(f"Run completed with status {status}: {rows} rows {verdicts}")

    def get_audit_trail(self) -> List[Dict]:
        """Get the complete audit trail."""
        return self.entries.copy()

    def save_to_file(self, filename: Optional[str] = None) -> Path:
        """Save the audit trail as JSON under log_dir."""
        if filename is None:
            filename = f"audit_{self.run_id}_{self.session_id}.json" if self.run_id else f"audit_{self.session_id}.json"
        self.log_dir.mkdir(parents=True, exist_ok=True)
        filepath = self.log_dir / filename

        audit_data = {
            "session_id": self.session_id,
            "run_id": self.run_id,
            "created_at": datetime.now().isoformat(),
            "total_entries": len(self.entries),
            "entries": self.entries,
        }
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(audit_data, f, indent=2, default=str)

        logger.info(f"Audit log saved to {filepath}")
        return filepath

    def get_summary(self) -> Dict[str, Any]:
        """Counts per event type, the checks executed and the run time."""
        completed = [e for e in self.entries if e['event'] == 'check_complete']
        verdicts = [e for e in self.entries if e['event'] == 'verdict']
        errors = [e for e in self.entries if e['event'] == 'error']

        start_time = end_time = None
        status = 'unknown'
        for entry in self.entries:
            if entry['event'] == 'run_start':
                start_time = datetime.fromisoformat(entry['timestamp'])
            elif entry['event'] == 'run_complete':
                end_time = datetime.fromisoformat(entry['timestamp'])
                status = entry['status']

        execution_time = None
        if start_time and end_time:
            execution_time = (end_time - start_time).total_seconds()

        return {
            "session_id": self.session_id,
            "run_id": self.run_id,
            "total_entries": len(self.entries),
            "checks_executed": len(completed),
            "verdicts_logged": len(verdicts),
            "errors_logged": len(errors),
            "check_names": sorted({e['check'] for e in completed}),
            "execution_time_seconds": execution_time,
            "status": status,
        }

    def clear(self) -> None:
        """Clear all log entries."""
        self.entries = []
        self.run_id = None
        logger.info("Audit log cleared")

    def __repr__(self) -> str:
        return f"AuditLogger(session={self.session_id}, entries={len(self.entries)})"
