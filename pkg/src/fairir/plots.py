"""Static SVG figures: front scatter plots and alpha curves.

Output is byte-identical for identical inputs: the SVG id salt is fixed, no
date is embedded, and the figure is rendered at 72 dpi so SVG units equal
points. Each plotting function returns the SVG text together with the
display coordinates (in SVG user units, origin top-left) of every plotted
mark, which makes the geometry testable.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import FormatError  # noqa: E402
from .eval import front_from_csv  # noqa: E402
from .train import ALL_FAMILIES  # noqa: E402

DPI = 72
FIGSIZE = (5.0, 4.0)
MARKERS = dict(zip(ALL_FAMILIES, ("o", "s", "^", "D", "v", "P", "X")))
METRIC_COLUMNS = {"asd": "ASD", "aeod": "AEOD", "aod": "AOD"}
RC = {"svg.hashsalt": "fairir", "svg.fonttype": "path", "path.simplify": False}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", dpi=DPI, metadata={"Date": None, "Creator": "fairir"})
    plt.close(fig)
    return buf.getvalue()


def _display(fig, ax, x, y) -> tuple[float, float]:
    """SVG user-unit coordinates of data point ``(x, y)``."""
    fig.canvas.draw()
    px, py = ax.transData.transform((x, y))
    return float(px), float(fig.bbox.height - py)


def _float(v):
    return None if v in ("", None) else float(v)


def front_scatter(rows: list[dict], metric: str, title: str = "") -> tuple[str, list[dict]]:
    """Scatter of test AUC_y against the test unfairness ``metric``, one marker per family.

    ``rows`` are front-CSV rows (see :func:`fairir.eval.front_to_csv`).
    Returns ``(svg_text, marks)``; each mark has ``model``, ``run_id``, data
    ``x``/``y`` and SVG ``px``/``py``.
    """
    if metric not in METRIC_COLUMNS:
        raise FormatError(f"unknown metric {metric!r}")
    col = METRIC_COLUMNS[metric]
    pts = [(r["model"], r["run_id"], _float(r[col]), _float(r["AUC"])) for r in rows]
    pts = [p for p in pts if p[2] is not None and p[3] is not None]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
        ax.set_xlabel(col)
        ax.set_ylabel("AUC_y")
        ax.set_title(title or f"Pareto front: AUC_y vs {col}")
        marks = []
        if not pts:
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
            ax.text(0.5, 0.5, "no points", ha="center", va="center", transform=ax.transAxes, gid="no-points")
        else:
            xs = [p[2] for p in pts]
            ys = [p[3] for p in pts]
            pad_x = max(0.05 * (max(xs) - min(xs)), 0.01)
            pad_y = max(0.05 * (max(ys) - min(ys)), 0.01)
            ax.set_xlim(min(xs) - pad_x, max(xs) + pad_x)
            ax.set_ylim(min(ys) - pad_y, max(ys) + pad_y)
            for fam in sorted({p[0] for p in pts}):
                fp = [p for p in pts if p[0] == fam]
                ax.plot([p[2] for p in fp], [p[3] for p in fp], linestyle="none", marker=MARKERS.get(fam, "o"),
                        label=fam, gid=f"marks-{fam}")
            ax.legend(loc="lower right", fontsize="small")
            for fam, rid, x, y in pts:
                px, py = _display(fig, ax, x, y)
                marks.append({"model": fam, "run_id": rid, "x": x, "y": y, "px": px, "py": py})
        return _svg(fig), marks


def alpha_curve(rows: list[dict], title: str = "") -> tuple[str, list[dict]]:
    """Median test AUC_y and AUC_s against log10(alpha), one pair of lines per family.

    ``rows`` are ``points.csv`` rows; alpha = 0 has no logarithm and is left out.
    """
    groups: dict[tuple, list] = {}
    for r in rows:
        a = float(r["alpha"])
        if a > 0:
            groups.setdefault((r["model"], a), []).append(r)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
        ax.set_xlabel("log10 alpha")
        ax.set_ylabel("AUC")
        ax.set_title(title or "AUC_y and AUC_s against alpha")
        marks = []
        fams = sorted({f for f, _ in groups})
        if not fams:
            ax.text(0.5, 0.5, "no points", ha="center", va="center", transform=ax.transAxes, gid="no-points")
        for fam in fams:
            alphas = sorted(a for f, a in groups if f == fam)
            for col, style in (("AUC", "-"), ("AUC_s", "--")):
                xs, ys = [], []
                for a in alphas:
                    vals = sorted(_float(r[col]) for r in groups[(fam, a)] if _float(r[col]) is not None)
                    if vals:
                        n = len(vals)
                        xs.append(math.log10(a))
                        ys.append(vals[n // 2] if n % 2 else 0.5 * (vals[n // 2 - 1] + vals[n // 2]))
                if xs:
                    ax.plot(xs, ys, style, marker=MARKERS.get(fam, "o"), label=f"{fam} {col}", gid=f"{col}-{fam}")
                    marks.extend({"model": fam, "series": col, "x": x, "y": y} for x, y in zip(xs, ys))
        if fams:
            ax.legend(loc="best", fontsize="small")
        for m in marks:
            m["px"], m["py"] = _display(fig, ax, m["x"], m["y"])
        return _svg(fig), marks


def read_csv_rows(path, required=()) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    header = next(csv.reader(io.StringIO(text)), [])
    missing = set(required) - set(header)
    if missing:
        raise FormatError(f"{path}: missing columns {sorted(missing)}")
    return rows


def plot_sweep(out, dest=None) -> list[Path]:
    """Write one SVG per (metric, front file) and the alpha curve for a sweep directory."""
    out = Path(out)
    dest = Path(dest) if dest else out / "plots"
    fronts = out / "fronts"
    if not fronts.exists():
        raise FormatError(f"no front files under {out}; run the sweep or the front command first")
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in METRIC_COLUMNS:
        for csv_path in sorted((fronts / metric).glob("*.csv")):
            rows = front_from_csv(csv_path.read_text(encoding="utf-8"))
            svg, _ = front_scatter(rows, metric, f"{csv_path.stem}: AUC_y vs {METRIC_COLUMNS[metric]}")
            p = dest / f"front_{metric}_{csv_path.stem}.svg"
            p.write_text(svg, encoding="utf-8")
            written.append(p)
    points = out / "points.csv"
    if points.exists():
        svg, _ = alpha_curve(read_csv_rows(points, ("model", "alpha", "AUC", "AUC_s")))
        p = dest / "alpha_curve.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written
