"""Serialized outputs: CSV time series, JSON manifests and gate reports, SVG plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import OutputError
from .experiments import FidelityTrace
from .gates import GateReport

TRACE_COLUMNS = ("t", "fidelity", "p0", "p1", "pT")
SE_COLUMNS = ("fidelity", "p0", "p1", "pT")


def fmt(x) -> str:
    """17 significant digits: round-trips every double, fixed across platforms."""
    return format(float(x), ".17g")


def write_text(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def trace_csv_text(trace: FidelityTrace) -> str:
    header = list(TRACE_COLUMNS)
    cols = [trace.times, trace.fidelity, trace.p0, trace.p1, trace.pT]
    for name in SE_COLUMNS:
        if name in trace.stderr:
            header.append(f"{name}_se")
            cols.append(trace.stderr[name])
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_trace_csv(path, trace: FidelityTrace):
    write_text(Path(path), trace_csv_text(trace))


def read_trace_csv(path) -> dict:
    """Columns of a trace file as float arrays."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise OutputError(f"{path}: trace file has no data rows")
    header = rows[0]
    if header[:2] != ["t", "fidelity"]:
        raise OutputError(f"{path}: expected a header starting with t,fidelity")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise OutputError(f"{path}: malformed number ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise OutputError(f"{path}: rows do not match the header width")
    return {name: data[:, i] for i, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    write_text(Path(path), json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise OutputError(f"{path}: invalid JSON ({exc.msg})") from None


def matrix_pairs(m) -> list:
    """Row-major [[re, im], ...] rows."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def pairs_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def gate_report_dict(report: GateReport) -> dict:
    p = report.params
    return {
        "u_analytic": matrix_pairs(report.u_analytic),
        "u_extracted": matrix_pairs(report.u_extracted),
        "u_framed": matrix_pairs(report.u_framed),
        "gate_fidelity": report.gate_fidelity,
        "gate_fidelity_unframed": report.gate_fidelity_unframed,
        "barrier_revival_population": report.barrier_revival_population,
        "flagged": report.flagged,
        "periods": report.periods,
        "t_r": p.t_r,
        "phi": p.phi,
    }


# -- SVG ----------------------------------------------------------------------

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def svg_plot(series: Sequence[tuple], width: int = 640, height: int = 400) -> str:
    """Static line plot of (label, t, F) series on a [0, 1] fidelity axis."""
    if not series:
        raise ValueError("nothing to plot")
    left, right, top, bottom = 60, 20, 20, 50
    t_max = max(float(np.max(t)) for _, t, _ in series) or 1.0
    pw, ph = width - left - right, height - top - bottom

    def x(t):
        return left + pw * t / t_max

    def y(f):
        return top + ph * (1 - f)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        f = k / 4
        out.append(f'<text x="{left - 6}" y="{y(f) + 4:.1f}" text-anchor="end">{f:g}</text>')
        tv = t_max * k / 4
        out.append(f'<text x="{x(tv):.1f}" y="{top + ph + 16}" text-anchor="middle">{tv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">t [1/J_XY]</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">F</text>')
    for i, (label, t, f) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{x(a):.2f},{y(min(max(b, 0.0), 1.0)):.2f}" for a, b in zip(t, f))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 16 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly - 4}" x2="{left + pw - 130}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 125}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series):
    write_text(Path(path), svg_plot(series))
