"""
Run artifacts: CSV tables, JSON summaries and SVG plots written into a
content-addressed run directory. An existing file is only ever replaced by
byte-identical content.
"""

import io
import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from ..config import setup_logging  # noqa: E402
from ..utils import ToolkitError  # noqa: E402

logger = setup_logging(__name__)

CSV_FLOAT_FORMAT = "%.10g"

matplotlib.rcParams["svg.hashsalt"] = "pdc-toolkit"


class OutputConflictError(ToolkitError):
    """A run directory already holds a different file of the same name."""


def _write_text(path: Path, text: str) -> Path:
    if path.exists():
        if path.read_text(encoding="utf-8") == text:
            logger.debug(f"{path} unchanged")
            return path
        raise OutputConflictError(f"refusing to overwrite {path} with different content")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info(f"Wrote {path}")
    return path


def csv_text(df: pd.DataFrame) -> str:
    """Stable CSV rendering: header row, '.' decimal, LF line endings."""
    return df.to_csv(index=False, lineterminator="\n", float_format=CSV_FLOAT_FORMAT)


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    return _write_text(path, csv_text(df))


def write_summary(summary: Dict[str, Any], path: Path) -> Path:
    text = json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n"
    return _write_text(path, text)


def _json_default(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def load_config_document(path: Path) -> Dict[str, Any]:
    """Read a RunConfig document, or pull the embedded config out of a run summary."""
    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    if isinstance(document, dict) and "config" in document and "outputs" in document:
        return document["config"]
    return document


def _save_svg(fig, path: Path) -> Path:
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return _write_text(path, buffer.getvalue())


def plot_curve(df: pd.DataFrame, x: str, y: str, path: Path, title: str = "",
               yerr: Optional[str] = None, overlays: Sequence[str] = ()) -> Path:
    """Line plot of one column against another, with optional error bars and extra curves."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if yerr:
        ax.errorbar(df[x], df[y], yerr=df[yerr], fmt="o", markersize=3, label=y)
    else:
        ax.plot(df[x], df[y], label=y)
    for column in overlays:
        ax.plot(df[x], df[column], label=column)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    if overlays or yerr:
        ax.legend()
    fig.tight_layout()
    return _save_svg(fig, path)


def plot_contour(f_grid: Sequence[float], eta_grid: Sequence[float], values, levels: Sequence[float],
                 path: Path, title: str = "") -> Path:
    """Contour lines of a (f, eta) map; levels absent from the data are simply not drawn."""
    fig, ax = plt.subplots(figsize=(6, 5))
    contours = ax.contour(eta_grid, f_grid, values, levels=list(levels))
    ax.clabel(contours, fmt="%.2f")
    ax.set_xlabel("eta")
    ax.set_ylabel("f")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save_svg(fig, path)
