"""
Audit trail of the checks a run executes.
"""

from .audit_logger import AuditLogger

__all__ = [
    'AuditLogger'
]
