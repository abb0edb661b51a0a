"""Persistence of datasets and run logs, plus plot-data export.

Every CSV writer formats floats with ``repr`` so that identical arrays give
byte-identical files. The SVG plotter is deliberately small: one polyline
per series, axis ticks and a legend, nothing else.
"""

from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .estimator import Dataset, split_contiguous
from .sensing import FRAME_COLUMNS, fmt

RUN_LOG_COLUMNS = (
    "t", "q_d_deg", "q_truth_deg", "q_hat_deg", "s", "tau", "duty_A", "duty_B",
    "theta_hat_1", "theta_hat_2", "theta_hat_3", "V", "raw_A", "raw_B",
)

# panel name -> (y columns, y-axis label); the x column is always t
PANELS = {
    "raw_strains": (("raw_A", "raw_B"), "ADC counts"),
    "actuation": (("duty_A", "duty_B"), "PWM duty"),
    "prediction": (("q_truth_deg", "q_hat_deg"), "curvature (deg)"),
    "tracking": (("q_d_deg", "q_truth_deg"), "curvature (deg)"),
    "error": (("error_deg",), "q_truth - q_d (deg)"),
}

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def write_columns(path, columns: dict, order) -> None:
    """Write equal-length arrays as CSV columns in ``order``."""
    cols = [np.asarray(columns[k]) for k in order]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(order)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])


def read_columns(path) -> dict:
    """Read a CSV written by :func:`write_columns` into float arrays."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {k: data[:, i] for i, k in enumerate(header)}


def write_dataset_csv(dataset: Dataset, path) -> None:
    cols = {
        "t": dataset.t,
        "raw_A": dataset.raw_A,
        "raw_B": dataset.raw_B,
        "duty_A": dataset.duty_A,
        "duty_B": dataset.duty_B,
        "q_truth_deg": dataset.q_deg,
    }
    write_columns(path, cols, FRAME_COLUMNS)


def read_dataset_csv(path, mode: str) -> Dataset:
    """Load a frame CSV; sessions are recovered from time resets."""
    c = read_columns(path)
    t = c["t"]
    session = np.concatenate([[0], np.cumsum(np.diff(t) < 0)]) if len(t) else np.zeros(0, int)
    ds = Dataset(
        mode=mode,
        t=t,
        raw_A=c["raw_A"].astype(np.int64),
        raw_B=c["raw_B"].astype(np.int64),
        duty_A=c["duty_A"],
        duty_B=c["duty_B"],
        q_deg=c["q_truth_deg"],
        session=session,
    )
    if len(ds) >= 3:
        ds.splits = split_contiguous(len(ds))
    return ds


def write_run_log(log: dict, path) -> None:
    cols = [k for k in RUN_LOG_COLUMNS if k in log]
    write_columns(path, log, cols)


def panel_table(log: dict, panel: str) -> dict | None:
    """Columns of one panel, or None when the log lacks them."""
    ys, _ = PANELS[panel]
    if panel == "error":
        if not {"q_truth_deg", "q_d_deg"} <= log.keys():
            return None
        return {"t": log["t"], "error_deg": np.asarray(log["q_truth_deg"]) - np.asarray(log["q_d_deg"])}
    if not set(ys) <= log.keys():
        return None
    return {"t": log["t"], **{k: log[k] for k in ys}}


def _nice_ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _num(x: float) -> str:
    return f"{x:.2f}"


def svg_line_chart(x, series: dict, title="", xlabel="t (s)", ylabel="", width=640, height=320,
                   max_points=2000) -> str:
    """Render ``series`` (label -> y array) against ``x`` as an SVG string.

    Long series are decimated by striding to at most ``max_points``
    vertices per line; the CSV keeps every sample.
    """
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 60, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    xlo, xhi = (float(x.min()), float(x.max())) if len(x) else (0.0, 1.0)
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.zeros(0)
    ylo, yhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def sx(v):
        return left + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return top + (yhi - v) / (yhi - ylo) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    ET.SubElement(svg, "rect", x=str(left), y=str(top), width=str(pw), height=str(ph),
                  fill="none", stroke="black")
    text = {"font-family": "sans-serif", "font-size": "11"}
    for v in _nice_ticks(xlo, xhi):
        px = _num(sx(v))
        ET.SubElement(svg, "line", x1=px, x2=px, y1=str(top + ph), y2=str(top + ph + 4), stroke="black")
        ET.SubElement(svg, "text", x=px, y=str(top + ph + 16), **{"text-anchor": "middle"}, **text).text = f"{v:g}"
    for v in _nice_ticks(ylo, yhi):
        py = _num(sy(v))
        ET.SubElement(svg, "line", x1=str(left - 4), x2=str(left), y1=py, y2=py, stroke="black")
        ET.SubElement(svg, "text", x=str(left - 6), y=py, **{"text-anchor": "end"}, **text).text = f"{v:g}"
    ET.SubElement(svg, "text", x=str(left + pw / 2), y=str(height - 8), **{"text-anchor": "middle"}, **text).text = xlabel
    ET.SubElement(svg, "text", x="14", y=str(top + ph / 2), transform=f"rotate(-90 14 {top + ph / 2})",
                  **{"text-anchor": "middle"}, **text).text = ylabel
    ET.SubElement(svg, "text", x=str(left), y="18", **text).text = title

    stride = max(1, math.ceil(len(x) / max_points))
    for i, (label, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)[::stride]
        xs = x[::stride]
        ok = np.isfinite(y)
        pts = " ".join(f"{_num(sx(a))},{_num(sy(b))}" for a, b in zip(xs[ok], y[ok]))
        color = PALETTE[i % len(PALETTE)]
        ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=color, **{"stroke-width": "1"})
        ly = top + 12 + 14 * i
        ET.SubElement(svg, "line", x1=str(left + pw - 110), x2=str(left + pw - 90), y1=str(ly), y2=str(ly),
                      stroke=color, **{"stroke-width": "2"})
        ET.SubElement(svg, "text", x=str(left + pw - 85), y=str(ly + 4), **text).text = label
    return ET.tostring(svg, encoding="unicode")


def export_plots(log: dict, out_dir, prefix: str = "") -> list[Path]:
    """Write a CSV and an SVG for every panel the log supports.

    Returns the written paths. A tracking log yields all five panels; an
    evaluation log (t, raw, duty, q_truth_deg, q_hat_deg) yields the first
    three.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for panel, (ys, ylabel) in PANELS.items():
        table = panel_table(log, panel)
        if table is None:
            continue
        stem = f"{prefix}{panel}"
        csv_path = out / f"{stem}.csv"
        write_columns(csv_path, table, ("t",) + ys)
        svg_path = out / f"{stem}.svg"
        svg_path.write_text(svg_line_chart(table["t"], {k: table[k] for k in ys}, title=stem, ylabel=ylabel))
        written += [csv_path, svg_path]
    return written
