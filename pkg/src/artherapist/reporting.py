"""Delimited report output and the figures rendered alongside it.

CSV column orders are stable and documented in the README; absent
measures stay empty cells, never zero. Figures are plain matplotlib PNG
files written next to the delimited output so a report or sweep leaves
both a machine-readable table and something a human can look at.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import METRIC_KEYS, SessionMetrics
from .simulator import SweepCell
from .storage import ProgressRecord

#: per-session CSV columns, in order
SESSION_COLUMNS = ("session_id",) + METRIC_KEYS

#: per-cell sweep CSV columns, in order: the behavior knobs, the session
#: count, then mean/sd/n for each measure
SWEEP_PARAM_COLUMNS = (
    "cell",
    "attention",
    "impulsivity",
    "rt_log_mean",
    "rt_log_sd",
    "dropout_hazard",
    "seed",
    "sessions",
)

REPORT_COLUMNS = (
    "ordinal",
    "session_id",
    "wall_time",
    "level",
) + METRIC_KEYS + ("decision", "level_after")


def _cell(value) -> str:
    return "" if value is None else repr(value)


def metrics_csv_row(session_id: str, metrics: SessionMetrics) -> list[str]:
    row = [session_id]
    row.extend(_cell(value) for value in metrics.to_dict().values())
    return row


def write_metrics_csv(path: Path, rows: list[tuple[str, SessionMetrics]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SESSION_COLUMNS)
        for session_id, metrics in rows:
            writer.writerow(metrics_csv_row(session_id, metrics))


def sweep_csv_header() -> list[str]:
    header = list(SWEEP_PARAM_COLUMNS)
    for key in METRIC_KEYS:
        header.extend([f"mean_{key}", f"sd_{key}", f"n_{key}"])
    return header


def sweep_csv_row(cell: SweepCell) -> list[str]:
    p = cell.params
    row = [
        str(cell.index),
        repr(p.attention),
        repr(p.impulsivity),
        repr(p.rt_log_mean),
        repr(p.rt_log_sd),
        repr(p.dropout_hazard),
        str(p.seed),
        str(cell.sessions),
    ]
    for key in METRIC_KEYS:
        aggregate = cell.aggregates[key]
        row.extend([_cell(aggregate.mean), _cell(aggregate.sd), str(aggregate.defined)])
    return row


def write_sweep_csv(path: Path, cells: Sequence[SweepCell]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(sweep_csv_header())
        for cell in cells:
            writer.writerow(sweep_csv_row(cell))


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

_SWEEP_PARAMS = ("attention", "impulsivity", "dropout_hazard", "rt_log_mean", "rt_log_sd")
_CURVE_METRICS = ("GF", "IAF", "IMF", "EF", "CRF", "PI")


def render_sweep_figures(cells: Sequence[SweepCell], out_dir: Path) -> list[Path]:
    """One response-curve figure per behavior knob that varies across the
    grid: mean of each factor against the knob value."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for param in _SWEEP_PARAMS:
        values = [getattr(cell.params, param) for cell in cells]
        if len(set(values)) < 2:
            continue
        order = sorted(range(len(cells)), key=lambda i: values[i])
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for key in _CURVE_METRICS:
            xs = [values[i] for i in order if cells[i].aggregates[key].mean is not None]
            ys = [
                cells[i].aggregates[key].mean
                for i in order
                if cells[i].aggregates[key].mean is not None
            ]
            if xs:
                ax.plot(xs, ys, marker="o", label=key)
        ax.set_xlabel(param.replace("_", " "))
        ax.set_ylabel("mean per cell")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"sweep_{param}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def write_report_csv(
    path: Path,
    rows: list[tuple[ProgressRecord, SessionMetrics]],
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for record, metrics in rows:
            row = [
                str(record.ordinal),
                record.session_id,
                repr(record.wall_time),
                str(record.level_before),
            ]
            row.extend(_cell(v) for v in metrics.to_dict().values())
            row.extend([record.decision, str(record.level_after)])
            writer.writerow(row)


def render_report_figures(
    patient_id: str,
    rows: list[tuple[ProgressRecord, SessionMetrics]],
    out_dir: Path,
) -> list[Path]:
    """Performance-index trend plus the factor series for one patient."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ordinals = [record.ordinal for record, _ in rows]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = [record.ordinal for record, m in rows if m.pi is not None]
    ys = [m.pi for _, m in rows if m.pi is not None]
    ax.plot(xs, ys, marker="o", color="tab:blue")
    ax.set_xlabel("session")
    ax.set_ylabel("performance index")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{patient_id}: performance index trend")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    trend = out_dir / "pi_trend.png"
    fig.savefig(trend, dpi=120)
    plt.close(fig)
    written.append(trend)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in ("GF", "IAF", "IMF", "EF", "CRF"):
        points = [
            (record.ordinal, m.to_dict()[key])
            for record, m in rows
            if m.to_dict()[key] is not None
        ]
        if points:
            ax.plot(*zip(*points), marker=".", label=key)
    ax.set_xlabel("session")
    ax.set_ylabel("factor value")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{patient_id}: session factors")
    if ordinals:
        ax.set_xlim(min(ordinals) - 0.5, max(ordinals) + 0.5)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    factors = out_dir / "factors.png"
    fig.savefig(factors, dpi=120)
    plt.close(fig)
    written.append(factors)
    return written
