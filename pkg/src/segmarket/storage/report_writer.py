"""Report emission: JSON documents, CSV tables and rich terminal tables."""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

import pandas as pd
import structlog
import typer
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from ..core.config import get_settings

logger = structlog.get_logger(__name__)


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    TABLE = "table"


def _clean(value: Any) -> Any:
    """Make a value JSON safe; non-finite floats become null."""
    if isinstance(value, BaseModel):
        return _clean(value.model_dump(mode="json"))
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def records_frame(records: Iterable[BaseModel | Mapping[str, Any]]) -> pd.DataFrame:
    """Flatten records into one row each; nested diagnostics become plain columns."""
    rows = [_clean(r) for r in records]
    if not rows:
        return pd.DataFrame()
    frame = pd.json_normalize(rows)
    frame.columns = [c.removeprefix("diagnostics.") for c in frame.columns]
    return frame


def to_json(document: Mapping[str, Any] | BaseModel) -> str:
    return json.dumps(_clean(document), indent=2)


def to_csv(frame: pd.DataFrame) -> str:
    decimals = get_settings().REPORT_DECIMALS
    return frame.to_csv(index=False, float_format=f"%.{decimals}f", lineterminator="\n")


def to_table(frame: pd.DataFrame, title: str = "") -> Table:
    decimals = get_settings().REPORT_DECIMALS
    table = Table(title=title or None, show_header=True, header_style="bold")
    for column in frame.columns:
        table.add_column(str(column), style="cyan" if frame[column].dtype == object else "white")
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.{decimals}f}" if isinstance(v, float) else str(v) for v in row))
    return table


def write_report(
    document: Mapping[str, Any] | BaseModel,
    frame: pd.DataFrame,
    fmt: OutputFormat,
    out: Path | None = None,
    title: str = "",
) -> None:
    """Emit ``document`` as JSON or ``frame`` as CSV or a table, to ``out`` or stdout."""
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
    if fmt is OutputFormat.TABLE:
        console = Console(file=out.open("w", encoding="utf-8") if out else None, width=160)
        console.print(to_table(frame, title))
        if out:
            console.file.close()
    else:
        text = to_json(document) if fmt is OutputFormat.JSON else to_csv(frame)
        if out:
            out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8", newline="\n")
        else:
            typer.echo(text.rstrip("\n"))
    logger.debug("report_written", format=fmt.value, out=str(out) if out else "stdout", rows=len(frame))
