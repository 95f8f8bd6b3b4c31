# utils/report_utils.py
"""Console tables and Word summary reports for sweeps and experiments."""
from __future__ import annotations

import datetime
from typing import Any, Mapping

import pandas as pd
from docx import Document

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from utils.errors import DatasetIOError
from utils.log_utils import get_logger

logger = get_logger(__name__)


def format_table(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "(no rows)"
    return frame.to_string(index=False, float_format=lambda v: f"{v:.2f}")


def records_table(records: list[dict]) -> str:
    return format_table(pd.DataFrame(records))


def generate_docx_report(path: str, title: str, run_settings: Mapping[str, Any], table: pd.DataFrame,
                         summary: Mapping[str, Any] | None = None) -> None:
    """Heading, run settings, the results table and a summary section (trained omega values included)."""
    logger.info(f"--- Generating Word report: {path} ---")
    document = Document()
    document.add_heading(title, level=0)
    document.add_paragraph(f"Report generated: {datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    document.add_heading('Run Settings', level=1)
    for key, value in run_settings.items():
        paragraph = document.add_paragraph(style='List Bullet')
        paragraph.add_run(f"{key}: ").bold = True
        paragraph.add_run(str(value))

    document.add_heading('Results', level=1)
    if table.empty:
        document.add_paragraph("No results were produced.")
    else:
        doc_table = document.add_table(rows=1, cols=len(table.columns))
        doc_table.style = 'Table Grid'
        for cell, column in zip(doc_table.rows[0].cells, table.columns):
            cell.text = str(column)
        for _, row in table.iterrows():
            cells = doc_table.add_row().cells
            for cell, value in zip(cells, row):
                cell.text = f"{value:.2f}" if isinstance(value, float) else str(value)

    if "omega" in table.columns and not table.empty:
        document.add_heading('Trained Ratios', level=1)
        label_columns = [c for c in table.columns if c not in ("anls", "f1", "accuracy", "omega")]
        for _, row in table.iterrows():
            label = ", ".join(f"{c}={row[c]}" for c in label_columns)
            document.add_paragraph(f"{label}: omega = {row['omega']:.4f}", style='List Bullet')

    if summary:
        document.add_heading('Summary', level=1)
        for key, value in summary.items():
            paragraph = document.add_paragraph()
            paragraph.add_run(f"{key}: ").bold = True
            paragraph.add_run(str(value))

    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        document.save(path)
    except OSError as e:
        raise DatasetIOError(f"cannot write report {path}: {e}") from e
    logger.info(f"Report saved to {path}")
