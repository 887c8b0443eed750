import re

import pytest

from fairir.errors import FormatError
from fairir.eval import FRONT_COLUMNS, front_from_csv
from fairir.plots import alpha_curve, front_scatter, plot_sweep, read_csv_rows

# 5 x 4 in at 72 dpi with matplotlib's default subplot box (0.125..0.9 by 0.11..0.88).
AX_LEFT, AX_RIGHT = 0.125 * 360, 0.9 * 360
AX_TOP, AX_BOTTOM = (1 - 0.88) * 288, (1 - 0.11) * 288


def row(model, run_id, asd, auc):
    return {"model": model, "run_id": run_id, "ASD": str(asd), "AUC": str(auc)}


def uses(svg, gid):
    block = svg[svg.index(f'<g id="{gid}">'):]
    block = block[: block.index("</g>\n   </g>")]
    return [(float(x), float(y)) for x, y in re.findall(r'<use [^>]*x="([-\d.]+)" y="([-\d.]+)"', block)]


def test_empty_front_shows_no_points():
    svg, marks = front_scatter([], "asd")
    assert marks == []
    assert 'id="no-points"' in svg and "marks-" not in svg


def test_single_point_is_centred_in_axes():
    svg, marks = front_scatter([row("FAD", "r1", 0.2, 0.7)], "asd")
    cx, cy = (AX_LEFT + AX_RIGHT) / 2, (AX_TOP + AX_BOTTOM) / 2
    assert marks[0]["px"] == pytest.approx(cx, abs=0.01)
    assert marks[0]["py"] == pytest.approx(cy, abs=0.01)
    assert uses(svg, "marks-FAD") == [pytest.approx((cx, cy), abs=0.01)]


def test_extreme_points_land_at_padded_corners():
    rows = [row("FAIR_scalar", "a", 0.1, 0.6), row("FAIR_scalar", "b", 0.3, 0.8)]
    svg, marks = front_scatter(rows, "asd")
    pad = 0.05 / 1.1  # 5% padding each side of the data range
    w, h = AX_RIGHT - AX_LEFT, AX_BOTTOM - AX_TOP
    expect = [(AX_LEFT + pad * w, AX_BOTTOM - pad * h), (AX_RIGHT - pad * w, AX_TOP + pad * h)]
    assert [(m["px"], m["py"]) for m in marks] == [pytest.approx(e, abs=0.01) for e in expect]
    assert uses(svg, "marks-FAIR_scalar") == [pytest.approx(e, abs=0.01) for e in expect]


def test_marks_grouped_per_family_and_rows_without_values_skipped():
    rows = [row("FAD", "a", 0.1, 0.6), row("FAIR_scalar", "b", 0.3, 0.8), row("FAD", "c", "", 0.7)]
    svg, marks = front_scatter(rows, "asd")
    assert [m["run_id"] for m in marks] == ["a", "b"]
    assert len(uses(svg, "marks-FAD")) == 1 and len(uses(svg, "marks-FAIR_scalar")) == 1


def test_svg_is_byte_identical_on_rerun():
    rows = [row("FAD", "a", 0.1, 0.6), row("FAIR_scalar", "b", 0.3, 0.8)]
    assert front_scatter(rows, "asd")[0] == front_scatter(rows, "asd")[0]
    pts = [{"model": "FAD", "alpha": a, "AUC": "0.7", "AUC_s": "0.6"} for a in ("0", "0.1", "1")]
    assert alpha_curve(pts)[0] == alpha_curve(pts)[0]
    assert "<dc:date>" not in front_scatter(rows, "asd")[0]


def test_unknown_metric():
    with pytest.raises(FormatError):
        front_scatter([], "dp")


def test_alpha_curve_takes_medians_and_drops_zero():
    pts = [{"model": "FAD", "alpha": str(a), "AUC": str(v), "AUC_s": "0.5"}
           for a, v in [(0, 0.9), (0.1, 0.6), (0.1, 0.8), (0.1, 0.7), (10, 0.65), (10, 0.75)]]
    _, marks = alpha_curve(pts)
    auc = [(m["x"], m["y"]) for m in marks if m["series"] == "AUC"]
    assert auc == [pytest.approx((-1.0, 0.7)), pytest.approx((1.0, 0.7))]
    svg, marks = alpha_curve([])
    assert marks == [] and 'id="no-points"' in svg


def test_missing_columns_are_format_errors(tmp_path):
    p = tmp_path / "points.csv"
    p.write_text("model,alpha\nFAD,1\n")
    with pytest.raises(FormatError, match="AUC"):
        read_csv_rows(p, ("model", "alpha", "AUC"))
    with pytest.raises(FormatError):
        front_from_csv("model,alpha\nFAD,1\n")
    assert read_csv_rows(p, ("model",)) == [{"model": "FAD", "alpha": "1"}]
    assert "run_id" in FRONT_COLUMNS


def test_plot_sweep_requires_fronts(tmp_path):
    with pytest.raises(FormatError, match="front"):
        plot_sweep(tmp_path)


def test_plot_sweep_writes_svgs(tmp_path):
    from fairir.sweep import SweepSpec, sweep
    spec = SweepSpec(dataset="synthetic", families=("FAIR_scalar",), alphas={"FAIR_scalar": (0.0, 1.0)},
                     seeds=(0,), out=str(tmp_path / "out"), overrides={"max_epochs": 2, "patience": 1})
    sweep(spec)
    first = {p.name: p.read_bytes() for p in plot_sweep(tmp_path / "out")}
    assert set(first) == {f"front_{m}_{n}.svg" for m in ("asd", "aeod", "aod") for n in ("FAIR_scalar", "all")} | {
        "alpha_curve.svg"}
    second = {p.name: p.read_bytes() for p in plot_sweep(tmp_path / "out")}
    assert first == second
