"""Result rendering: aligned tables, CSV, and standalone SVG figures.

SVG is built by hand (no raster, no plotting dependency) so tests can
parse coordinates and diff outputs.  Numbers render at 3 decimal places.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import SummaryStats, confusion, summarize
from .types import METRIC_NAMES


@dataclass(frozen=True)
class FigureSpec:
    kind: str  # "boxplot" | "line"
    series: list  # [(label, [values])]
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    out_path: str = "figure.svg"

    def __post_init__(self):
        if self.kind not in ("boxplot", "line"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.series or any(len(vals) == 0 for _, vals in self.series):
            raise ValueError("figure needs at least one non-empty series")


# -- geometry ----------------------------------------------------------------

MARGIN_LEFT = 70.0
MARGIN_TOP = 30.0
PLOT_HEIGHT = 340.0
SLOT_WIDTH = 90.0
BOX_WIDTH = 56.0


def value_range(all_values: list[float], y_range=None) -> tuple[float, float]:
    if y_range is not None:
        return float(y_range[0]), float(y_range[1])
    lo = min(all_values)
    hi = max(all_values)
    pad = 0.05 * ((hi - lo) or 1.0)
    return lo - pad, hi + pad


def value_to_y(v: float, lo: float, hi: float) -> float:
    """Linear map of a value onto the plot's pixel y axis (top = hi)."""
    return MARGIN_TOP + PLOT_HEIGHT * (hi - v) / (hi - lo)


def _svg_header(width: float, height: float, title: str) -> list[str]:
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{escape(title)}</text>'
        )
    return parts


def _axes(parts: list[str], width: float, lo: float, hi: float, x_label: str, y_label: str):
    x0 = MARGIN_LEFT
    y1 = MARGIN_TOP + PLOT_HEIGHT
    parts.append(
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y1}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{y1}" x2="{width - 20:.1f}" y2="{y1}" stroke="black"/>')
    for i in range(6):
        v = lo + (hi - lo) * i / 5
        y = value_to_y(v, lo, hi)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v:.3f}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="16" y="{MARGIN_TOP + PLOT_HEIGHT / 2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {MARGIN_TOP + PLOT_HEIGHT / 2:.1f})">{escape(y_label)}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{(x0 + width - 20) / 2:.1f}" y="{y1 + 38:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>'
        )


def emit_boxplot(
    series: list,
    out_path: str | Path,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    y_range=None,
) -> Path:
    """One box per (label, values) pair, in order; whiskers per the 1.5*IQR
    rule, outliers as circles.  Geometry comes straight from summarize()."""
    if not series or any(len(vals) == 0 for _, vals in series):
        raise ValueError("boxplot needs at least one non-empty series")
    all_values = [float(v) for _, vals in series for v in vals]
    lo, hi = value_range(all_values, y_range)
    width = MARGIN_LEFT + SLOT_WIDTH * len(series) + 40
    height = MARGIN_TOP + PLOT_HEIGHT + 60
    parts = _svg_header(width, height, title)
    _axes(parts, width, lo, hi, x_label, y_label)

    for i, (label, vals) in enumerate(series):
        stats: SummaryStats = summarize(vals)
        cx = MARGIN_LEFT + SLOT_WIDTH * i + SLOT_WIDTH / 2
        bx = cx - BOX_WIDTH / 2
        y_q1 = value_to_y(stats.q1, lo, hi)
        y_q3 = value_to_y(stats.q3, lo, hi)
        y_med = value_to_y(stats.median, lo, hi)
        y_wlo = value_to_y(stats.whisker_low, lo, hi)
        y_whi = value_to_y(stats.whisker_high, lo, hi)
        lbl = escape(str(label))
        parts.append(
            f'<line class="whisker-high" data-model="{lbl}" x1="{cx:.2f}" y1="{y_q3:.2f}" '
            f'x2="{cx:.2f}" y2="{y_whi:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<line class="whisker-low" data-model="{lbl}" x1="{cx:.2f}" y1="{y_q1:.2f}" '
            f'x2="{cx:.2f}" y2="{y_wlo:.2f}" stroke="black"/>'
        )
        for wy in (y_whi, y_wlo):
            parts.append(
                f'<line class="whisker-cap" data-model="{lbl}" x1="{cx - 14:.2f}" '
                f'y1="{wy:.2f}" x2="{cx + 14:.2f}" y2="{wy:.2f}" stroke="black"/>'
            )
        parts.append(
            f'<rect class="box" data-model="{lbl}" x="{bx:.2f}" y="{y_q3:.2f}" '
            f'width="{BOX_WIDTH:.2f}" height="{max(y_q1 - y_q3, 0.0):.2f}" '
            f'fill="#9ecae1" stroke="black"/>'
        )
        parts.append(
            f'<line class="median" data-model="{lbl}" x1="{bx:.2f}" y1="{y_med:.2f}" '
            f'x2="{bx + BOX_WIDTH:.2f}" y2="{y_med:.2f}" stroke="black" stroke-width="2"/>'
        )
        for v in vals:
            if v < stats.whisker_low or v > stats.whisker_high:
                parts.append(
                    f'<circle class="outlier" data-model="{lbl}" cx="{cx:.2f}" '
                    f'cy="{value_to_y(float(v), lo, hi):.2f}" r="3" fill="none" stroke="black"/>'
                )
        parts.append(
            f'<text x="{cx:.2f}" y="{MARGIN_TOP + PLOT_HEIGHT + 18:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{lbl}</text>'
        )

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts))
    return out_path


def emit_lineplot(
    series: list,
    out_path: str | Path,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    y_range=None,
) -> Path:
    """Polyline per (label, [(x, y), ...]) series with point markers."""
    if not series or any(len(pts) == 0 for _, pts in series):
        raise ValueError("line plot needs at least one non-empty series")
    ys = [float(y) for _, pts in series for _, y in pts]
    xs = [float(x) for _, pts in series for x, _ in pts]
    lo, hi = value_range(ys, y_range)
    x_lo, x_hi = min(xs), max(xs)
    span = (x_hi - x_lo) or 1.0
    width = MARGIN_LEFT + 420 + 40
    height = MARGIN_TOP + PLOT_HEIGHT + 60

    def x_pos(x: float) -> float:
        return MARGIN_LEFT + 420 * (x - x_lo) / span

    parts = _svg_header(width, height, title)
    _axes(parts, width, lo, hi, x_label, y_label)
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    for i, (label, pts) in enumerate(series):
        color = palette[i % len(palette)]
        coords = " ".join(
            f"{x_pos(float(x)):.2f},{value_to_y(float(y), lo, hi):.2f}" for x, y in pts
        )
        lbl = escape(str(label))
        parts.append(
            f'<polyline class="series" data-series="{lbl}" points="{coords}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in pts:
            parts.append(
                f'<circle class="point" data-series="{lbl}" cx="{x_pos(float(x)):.2f}" '
                f'cy="{value_to_y(float(y), lo, hi):.2f}" r="3" fill="{color}"/>'
            )
    for x in sorted(set(xs)):
        parts.append(
            f'<text x="{x_pos(x):.2f}" y="{MARGIN_TOP + PLOT_HEIGHT + 18:.1f}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">{x:g}</text>'
        )
    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts))
    return out_path


def render(spec: FigureSpec) -> Path:
    if spec.kind == "boxplot":
        return emit_boxplot(
            spec.series, spec.out_path, spec.title, spec.x_label, spec.y_label
        )
    pts_series = [
        (label, [(i, v) for i, v in enumerate(vals)]) for label, vals in spec.series
    ]
    return emit_lineplot(
        pts_series, spec.out_path, spec.title, spec.x_label, spec.y_label
    )


# -- tables -------------------------------------------------------------------


def _format_cell(value, column: str, signed_columns: set[str]) -> str:
    if value is None or value == "":
        return "-"
    if isinstance(value, float):
        if column in signed_columns:
            return f"{value:+.3f}"
        return f"{value:.3f}"
    return str(value)


def emit_table(
    rows: list[dict],
    columns: list[str],
    csv_path: str | Path,
    txt_path: str | Path | None = None,
    signed_columns: set[str] | None = None,
) -> Path:
    """CSV plus a column-aligned text table; missing cells render as '-',
    delta-style columns with an explicit sign."""
    signed_columns = signed_columns or set()
    for i, row in enumerate(rows):
        unknown = set(row) - set(columns)
        if unknown:
            raise ValueError(f"row {i} has columns outside the header: {sorted(unknown)}")
    cells = [
        [_format_cell(row.get(col), col, signed_columns) for col in columns]
        for row in rows
    ]
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(cells)
    if txt_path is not None:
        widths = [
            max(len(col), *(len(r[i]) for r in cells)) if cells else len(col)
            for i, col in enumerate(columns)
        ]
        lines = [
            "  ".join(col.ljust(widths[i]) for i, col in enumerate(columns)),
            "  ".join("-" * widths[i] for i in range(len(columns))),
        ]
        for r in cells:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(columns))))
        Path(txt_path).write_text("\n".join(lines) + "\n")
    return csv_path


# -- confusion overlay ---------------------------------------------------------

OVERLAY_COLORS = {
    "tp": "#ffc0cb",  # pink
    "tn": "#000000",  # black
    "fp": "#0000ff",  # blue
    "fn": "#ffff00",  # yellow
}


def emit_overlay(pred, gt, out_path: str | Path, scale: int = 1) -> Path:
    """Pixel overlay of prediction vs reference as run-length SVG rects."""
    p = np.asarray(pred.bits if hasattr(pred, "bits") else pred).astype(bool)
    g = np.asarray(gt.bits if hasattr(gt, "bits") else gt).astype(bool)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    confusion(p, g)  # dimension sanity; classes derived below
    klass = np.where(p & g, 0, np.where(p & ~g, 2, np.where(~p & g, 3, 1)))
    names = ["tp", "tn", "fp", "fn"]
    h, w = p.shape
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale}" height="{h * scale}" '
        f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">',
        f'<rect class="tn" x="0" y="0" width="{w}" height="{h}" '
        f'fill="{OVERLAY_COLORS["tn"]}"/>',
    ]
    for row in range(h):
        run_start = 0
        line = klass[row]
        for col in range(1, w + 1):
            if col == w or line[col] != line[run_start]:
                cls = names[line[run_start]]
                if cls != "tn":
                    parts.append(
                        f'<rect class="{cls}" x="{run_start}" y="{row}" '
                        f'width="{col - run_start}" height="1" fill="{OVERLAY_COLORS[cls]}"/>'
                    )
                run_start = col
    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts))
    return out_path


# -- experiment-directory driver ------------------------------------------------


def _load_results_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def render_results(results_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render tables/figures for one experiment directory (by summary kind)."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = json.loads((results_dir / "summary.json").read_text())
    kind = summary["kind"]
    written: list[Path] = []

    if kind in ("sweep-mc", "sweep-uo"):
        rows = _load_results_csv(results_dir / "results.csv")
        by_model: dict[str, list[float]] = {}
        for row in rows:
            by_model.setdefault(row["model"], []).append(float(row["dsc"]))
        order = [p["point"] for p in summary["points"]]
        series = [(m, by_model[m]) for m in order if m in by_model]
        written.append(
            emit_boxplot(
                series,
                out_dir / f"{kind}_boxplot.svg",
                title="Test DSC by training corruption",
                x_label="model",
                y_label="DSC",
            )
        )
        table_rows = []
        for p in summary["points"]:
            row = {"model": p.get("label", p["point"])}
            row.update({name: p["aggregate"][name] for name in METRIC_NAMES})
            table_rows.append(row)
        written.append(
            emit_table(
                table_rows,
                ["model", *METRIC_NAMES],
                out_dir / f"{kind}_metrics.csv",
                out_dir / f"{kind}_metrics.txt",
            )
        )
    elif kind == "transfer":
        table_rows = []
        for level in summary["levels"]:
            row = {"missing": f"{level['fraction']:.0%}"}
            for name in METRIC_NAMES:
                row[f"delta_{name}"] = level["deltas"][name]["delta"]
            table_rows.append(row)
        columns = ["missing", *(f"delta_{n}" for n in METRIC_NAMES)]
        written.append(
            emit_table(
                table_rows,
                columns,
                out_dir / "transfer_deltas.csv",
                out_dir / "transfer_deltas.txt",
                signed_columns=set(columns[1:]),
            )
        )
    elif kind == "bootstrap":
        traj = summary["trajectory"]
        pts = [(t["iteration"], t["aggregate"]["dsc"]) for t in traj]
        written.append(
            emit_lineplot(
                [("test DSC", pts)],
                out_dir / "bootstrap_trajectory.svg",
                title="Self-training trajectory",
                x_label="iteration",
                y_label="DSC",
            )
        )
        table_rows = [
            {"iteration": t["iteration"],
             **{name: t["aggregate"][name] for name in METRIC_NAMES}}
            for t in traj
        ]
        written.append(
            emit_table(
                table_rows,
                ["iteration", *METRIC_NAMES],
                out_dir / "bootstrap_metrics.csv",
                out_dir / "bootstrap_metrics.txt",
            )
        )
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    return written
