import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import pandas as pd

from src.engine.phi import CancellationResult
from src.engine.verify.report import REPORT_COLUMNS, InequalityReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
CANCELLATION_COLUMNS = ["kernel_id", "phi_id", "sign", "residual", "normalizer", "quadrature_error",
                        "threshold", "verdict", "config_digest"]


class ReportExporter:
    """Writes report tables, traces and cancellation tables in their fixed formats."""

    @staticmethod
    def reports_frame(reports: Iterable[InequalityReport], config_digest: str = "") -> pd.DataFrame:
        """Rows sorted by (statement_id, f_id, n) with the exact report columns."""
        ordered = sorted(reports, key=lambda r: r.sort_key)
        return pd.DataFrame([r.to_record(config_digest) for r in ordered], columns=REPORT_COLUMNS)

    @staticmethod
    def to_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
        logger.info(f"Wrote {len(df)} rows to {path}")
        return path

    @staticmethod
    def write_reports(reports: Iterable[InequalityReport], path: Union[str, Path],
                      config_digest: str = "") -> pd.DataFrame:
        df = ReportExporter.reports_frame(reports, config_digest)
        ReportExporter.to_csv(df, path)
        return df

    @staticmethod
    def read_reports(path: Union[str, Path]) -> pd.DataFrame:
        return pd.read_csv(path, dtype={"f_id": str, "phi_id": str, "kernel_id": str}, keep_default_na=False,
                           na_values={"lhs": ["nan"], "rhs": ["nan"], "ratio": ["nan"], "tail_bound": ["nan"]})

    @staticmethod
    def to_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline="\n") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def cancellation_frame(result: CancellationResult, kernel_id: str, phi_id: str, rel_tol: float,
                           config_digest: str = "") -> pd.DataFrame:
        """One row per sign; verdict 'holds' or 'fails'."""
        plus_threshold, minus_threshold = result.threshold(rel_tol)
        rows = [
            (kernel_id, phi_id, "+", result.residual_plus, result.normalizer, result.error_plus,
             plus_threshold, "holds" if result.cancels_plus(rel_tol) else "fails", config_digest),
            (kernel_id, phi_id, "-", result.residual_minus, result.normalizer, result.error_minus,
             minus_threshold, "holds" if result.cancels_minus(rel_tol) else "fails", config_digest),
        ]
        return pd.DataFrame(rows, columns=CANCELLATION_COLUMNS)
