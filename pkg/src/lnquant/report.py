"""Report serialisation: delimited tables (TSV or JSON lines) plus the
matplotlib figures rendered next to them. All writers are deterministic so
re-runs on unchanged inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_TABLE = "table"
FORMAT_JSONL = "json-lines"
REPORT_FORMATS = (FORMAT_TABLE, FORMAT_JSONL)


def fmt_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_rows(base_path, columns: list[str], rows: list[tuple], fmt: str = FORMAT_TABLE) -> Path:
    """Write rows under ``base_path`` with the extension chosen by format.

    Returns the path actually written (.tsv for tables, .jsonl for JSON
    lines). Values are emitted in a fixed column order.
    """
    base = Path(base_path)
    if fmt == FORMAT_TABLE:
        path = base.with_suffix(".tsv")
        lines = ["\t".join(columns)]
        lines += ["\t".join(fmt_value(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == FORMAT_JSONL:
        path = base.with_suffix(".jsonl")
        out = []
        for row in rows:
            record = {}
            for col, v in zip(columns, row):
                if isinstance(v, (np.integer,)):
                    v = int(v)
                elif isinstance(v, (np.floating,)):
                    v = float(v)
                record[col] = v
            out.append(json.dumps(record))
        path.write_text("\n".join(out) + ("\n" if out else ""))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def read_rows(path) -> tuple[list[str], list[dict]]:
    """Read a table written by write_rows back into dict rows (as strings
    for .tsv, typed for .jsonl)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".jsonl":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        columns = list(rows[0].keys()) if rows else []
        return columns, rows
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return [], []
    columns = lines[0].split("\t")
    rows = [dict(zip(columns, ln.split("\t"))) for ln in lines[1:]]
    return columns, rows


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_histogram_figure(hist: list[tuple[float, int]], bin_width_mm: float, path, title: str = "Shortest diameter") -> None:
    """Bar chart of a diameter histogram; one bar per bin."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    if hist:
        los = [lo for lo, _ in hist]
        counts = [c for _, c in hist]
        ax.bar([lo + bin_width_mm / 2 for lo in los], counts, width=bin_width_mm * 0.9, color="#4878b0")
    ax.set_xlabel("shortest diameter [mm]")
    ax.set_ylabel("components")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_overlap_figure(curves, path) -> None:
    """Line plot of the diameter-binned overlap curves (both directions)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = {
        "gt_on_pred": "GT component on prediction (sensitivity proxy)",
        "pred_on_gt": "Predicted component on GT (precision proxy)",
    }
    for curve, marker in zip(curves, ("o", "s")):
        if not curve.bins:
            continue
        x = [b.lo_mm + curve.bin_width_mm / 2 for b in curve.bins]
        y = [b.mean_overlap for b in curve.bins]
        ax.plot(x, y, marker=marker, label=labels.get(curve.direction, curve.direction))
    ax.set_xlabel("shortest diameter [mm]")
    ax.set_ylabel("mean overlap")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
