"""
Report tables and their markdown and CSV renderings.

Numbers are written with six significant digits, files are UTF-8 with LF line endings,
and markdown bolds every p-value at or below the decision level.
"""

import hashlib
import math
from pathlib import Path
from typing import List, Optional, Sequence, Union

import logfire
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from econometrics.errors import ReportIoError
from models.config import ReportFormat
from models.schema import DECISION_LEVEL

Cell = Union[None, bool, int, float, str]

BOLD_NOTE = f"Bold p-values denote rejection of the null at the {DECISION_LEVEL:.0%} level or lower."


class Table(BaseModel):
    """One report table: a header row, data rows, and which columns hold p-values."""

    name: str = Field(description="File stem, unique within a run")
    title: str
    columns: List[str]
    rows: List[List[Cell]] = Field(default_factory=list)
    p_value_columns: List[int] = Field(default_factory=list)
    note: Optional[str] = None

    @model_validator(mode="after")
    def _check_widths(self) -> "Table":
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"{self.name}: row {i} has {len(row)} cells, header has {width}")
        if any(not 0 <= c < width for c in self.p_value_columns):
            raise ValueError(f"{self.name}: p-value column out of range")
        return self

    @property
    def is_empty(self) -> bool:
        return not self.rows


def format_value(value: Cell) -> str:
    """Six significant digits for floats; NaN as NA."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        if value == 0.0:
            value = 0.0  # no "-0"
        return f"{value:.6g}"
    return str(value)


def format_estimate(value: float, se: float) -> str:
    """An estimate with its standard error in parentheses."""
    return f"{format_value(value)} ({format_value(se)})"


def is_rejection(value: Cell) -> bool:
    return isinstance(value, float) and not math.isnan(value) and value <= DECISION_LEVEL


def render_markdown(table: Table) -> str:
    bold = set(table.p_value_columns)

    def cell(j: int, value: Cell) -> str:
        text = format_value(value).replace("|", "\\|")
        return f"**{text}**" if j in bold and is_rejection(value) else text

    lines = [f"# {table.title}", ""]
    lines.append("| " + " | ".join(table.columns) + " |")
    lines.append("|" + "|".join("---" for _ in table.columns) + "|")
    for row in table.rows:
        lines.append("| " + " | ".join(cell(j, v) for j, v in enumerate(row)) + " |")
    notes = [n for n in (table.note, BOLD_NOTE if bold else None) if n]
    if notes:
        lines.append("")
        lines.extend(notes)
    return "\n".join(lines) + "\n"


def render_csv(table: Table) -> str:
    frame = pd.DataFrame([[format_value(v) for v in row] for row in table.rows], columns=table.columns)
    return frame.to_csv(index=False, lineterminator="\n")


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ReportIoError(f"cannot write {path}: {e}") from e


def emit_report(
    tables: Sequence[Table],
    directory: Union[str, Path],
    formats: Sequence[ReportFormat] = (ReportFormat.MARKDOWN, ReportFormat.CSV),
) -> List[Path]:
    """
    Write one file per table and format; returns the paths written.

    Tables without rows produce no file and a warning.
    """
    directory = Path(directory)
    if not tables:
        logfire.warn("Empty battery, no report written", directory=str(directory))
        return []
    written: List[Path] = []
    for table in tables:
        if table.is_empty:
            logfire.warn("Empty table skipped", table=table.name)
            continue
        if ReportFormat.MARKDOWN in formats:
            path = directory / f"{table.name}.md"
            _write(path, render_markdown(table))
            written.append(path)
        if ReportFormat.CSV in formats:
            path = directory / f"{table.name}.csv"
            _write(path, render_csv(table))
            written.append(path)
    logfire.info("Report written", files=len(written), directory=str(directory))
    return written


def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
