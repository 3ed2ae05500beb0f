import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from segstress.metrics import summarize
from segstress.report import (
    FigureSpec,
    MARGIN_TOP,
    PLOT_HEIGHT,
    emit_boxplot,
    emit_lineplot,
    emit_overlay,
    emit_table,
    render,
    render_results,
    value_range,
)

SVG_NS = "{http://www.w3.org/2000/svg}"


def _parse(path):
    return ET.parse(path).getroot()


def test_boxplot_single_value_degenerate(tmp_path):
    path = emit_boxplot([("m", [0.5])], tmp_path / "b.svg")
    root = _parse(path)  # well-formed XML
    box = root.find(f"{SVG_NS}rect[@class='box']")
    assert float(box.get("height")) == 0.0


def test_boxplot_geometry_matches_summarize(tmp_path):
    # oracle: recompute pixel coordinates from the five-number summary by hand
    values_a = [0.1, 0.2, 0.3, 0.4, 0.9]
    values_b = [0.5, 0.6, 0.7, 0.8]
    path = emit_boxplot([("A", values_a), ("B", values_b)], tmp_path / "b.svg",
                        y_range=(0.0, 1.0))
    root = _parse(path)

    def expected_y(v):
        return MARGIN_TOP + PLOT_HEIGHT * (1.0 - v) / 1.0

    boxes = root.findall(f"{SVG_NS}rect[@class='box']")
    medians = root.findall(f"{SVG_NS}line[@class='median']")
    assert len(boxes) == 2
    for (label, values), box, med in zip([("A", values_a), ("B", values_b)], boxes, medians):
        stats = summarize(values)
        assert box.get("data-model") == label
        assert float(box.get("y")) == pytest.approx(expected_y(stats.q3), abs=0.01)
        assert float(box.get("y")) + float(box.get("height")) == pytest.approx(
            expected_y(stats.q1), abs=0.01
        )
        assert float(med.get("y1")) == pytest.approx(expected_y(stats.median), abs=0.01)


def test_boxplot_outliers_drawn(tmp_path):
    values = [0.5, 0.51, 0.52, 0.53, 0.99]
    path = emit_boxplot([("m", values)], tmp_path / "b.svg")
    root = _parse(path)
    outliers = root.findall(f"{SVG_NS}circle[@class='outlier']")
    assert len(outliers) == 1


def test_boxplot_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_boxplot([], tmp_path / "b.svg")
    with pytest.raises(ValueError):
        emit_boxplot([("m", [])], tmp_path / "b.svg")


def test_lineplot_basic(tmp_path):
    pts = [(0, 0.70), (1, 0.75), (2, 0.80)]
    path = emit_lineplot([("dsc", pts)], tmp_path / "l.svg")
    root = _parse(path)
    poly = root.find(f"{SVG_NS}polyline[@class='series']")
    assert poly is not None
    assert len(poly.get("points").split()) == 3
    assert len(root.findall(f"{SVG_NS}circle[@class='point']")) == 3


def test_figure_spec_dispatch(tmp_path):
    spec = FigureSpec(kind="boxplot", series=[("m", [0.1, 0.2])],
                      out_path=str(tmp_path / "f.svg"))
    assert render(spec).exists()
    with pytest.raises(ValueError):
        FigureSpec(kind="scatter", series=[("m", [1.0])])


def test_value_range_padding():
    lo, hi = value_range([0.0, 1.0])
    assert lo < 0.0 < 1.0 < hi


def test_table_formats(tmp_path):
    rows = [
        {"model": "baseline", "dsc": 0.874, "jaccard": 0.753},
        {"model": "3x3", "dsc": 0.861},  # jaccard absent -> "-"
    ]
    csv_path = emit_table(rows, ["model", "dsc", "jaccard"],
                          tmp_path / "t.csv", tmp_path / "t.txt")
    with open(csv_path, newline="") as fh:
        parsed = list(csv.reader(fh))
    assert parsed[0] == ["model", "dsc", "jaccard"]
    assert parsed[1] == ["baseline", "0.874", "0.753"]
    assert parsed[2][2] == "-"
    text = (tmp_path / "t.txt").read_text().splitlines()
    assert text[0].split() == ["model", "dsc", "jaccard"]
    # column alignment: all data rows have identical field start offsets
    assert text[2].index("0.874") == text[3].index("0.861")


def test_table_signed_deltas(tmp_path):
    rows = [{"metric": "dsc", "delta": -0.027}, {"metric": "recall", "delta": 0.059}]
    emit_table(rows, ["metric", "delta"], tmp_path / "d.csv",
               signed_columns={"delta"})
    parsed = list(csv.reader(open(tmp_path / "d.csv", newline="")))
    assert parsed[1][1] == "-0.027"
    assert parsed[2][1] == "+0.059"


def test_table_rejects_ragged(tmp_path):
    with pytest.raises(ValueError):
        emit_table([{"a": 1, "zz": 2}], ["a"], tmp_path / "t.csv")


def test_table_three_decimal_precision(tmp_path):
    emit_table([{"v": 0.8885}], ["v"], tmp_path / "t.csv")
    parsed = list(csv.reader(open(tmp_path / "t.csv", newline="")))
    assert parsed[1][0] == f"{0.8885:.3f}"


def test_overlay_colors(tmp_path):
    pred = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    gt = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    path = emit_overlay(pred, gt, tmp_path / "o.svg")
    root = _parse(path)
    rects = root.findall(f"{SVG_NS}rect")
    by_class = {}
    for r in rects:
        by_class.setdefault(r.get("class"), []).append(r)
    assert by_class["tn"][0].get("fill") == "#000000"  # background rect
    assert by_class["tp"][0].get("fill") == "#ffc0cb"
    assert by_class["fp"][0].get("fill") == "#0000ff"
    assert by_class["fn"][0].get("fill") == "#ffff00"
    assert len(by_class["tp"]) == len(by_class["fp"]) == len(by_class["fn"]) == 1


def test_overlay_shape_mismatch(tmp_path):
    with pytest.raises(ValueError):
        emit_overlay(np.zeros((2, 2)), np.zeros((3, 2)), tmp_path / "o.svg")


def _fake_sweep_dir(tmp_path):
    out = tmp_path / "mc"
    out.mkdir()
    points = []
    rows = []
    for i, frac in enumerate([0.0, 0.5]):
        point = f"mc_{round(frac*1000):04d}"
        agg = {"dsc": 0.9 - i * 0.1, "jaccard": 0.8, "precision": 0.9,
               "recall": 0.85, "specificity": 0.95}
        points.append({"point": point, "fraction": frac, "aggregate": agg,
                       "dsc_summary": {}, "model": "m"})
        for j in range(3):
            rows.append({"model": point, "image_id": f"img{j}", "dsc": 0.9 - i * 0.1,
                         "jaccard": 0.8, "precision": 0.9, "recall": 0.85,
                         "specificity": 0.95})
    (out / "summary.json").write_text(json.dumps(
        {"kind": "sweep-mc", "points": points}))
    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return out


def test_render_results_sweep(tmp_path):
    results = _fake_sweep_dir(tmp_path)
    files = render_results(results, tmp_path / "figs")
    names = {f.name for f in files}
    assert "sweep-mc_boxplot.svg" in names
    assert "sweep-mc_metrics.csv" in names
    for f in files:
        assert f.exists()


def test_render_results_bootstrap(tmp_path):
    out = tmp_path / "bs"
    out.mkdir()
    traj = [
        {"iteration": i,
         "aggregate": {"dsc": 0.7 + 0.01 * i, "jaccard": 0.6, "precision": 0.7,
                       "recall": 0.7, "specificity": 0.9}}
        for i in range(3)
    ]
    (out / "summary.json").write_text(json.dumps({"kind": "bootstrap", "trajectory": traj}))
    files = render_results(out, tmp_path / "figs")
    assert any(f.name == "bootstrap_trajectory.svg" for f in files)


def test_render_results_transfer(tmp_path):
    out = tmp_path / "tr"
    out.mkdir()
    levels = [
        {"fraction": 0.5,
         "deltas": {name: {"m_single_tissue": 0.8, "m_multi_tissue": 0.83,
                           "delta": -0.03}
                    for name in ("dsc", "jaccard", "precision", "recall", "specificity")}}
    ]
    (out / "summary.json").write_text(json.dumps({"kind": "transfer", "levels": levels}))
    files = render_results(out, tmp_path / "figs")
    csv_file = next(f for f in files if f.name == "transfer_deltas.csv")
    parsed = list(csv.reader(open(csv_file, newline="")))
    assert parsed[1][1] == "-0.030"  # explicit sign


def test_render_results_unknown_kind(tmp_path):
    out = tmp_path / "x"
    out.mkdir()
    (out / "summary.json").write_text(json.dumps({"kind": "mystery"}))
    with pytest.raises(ValueError):
        render_results(out, tmp_path / "figs")
