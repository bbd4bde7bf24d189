"""Deterministic SVG plots generated straight from harness CSV files.

Plots are derived artifacts: the CSV stays the source of truth and the same
CSV bytes always produce the same SVG bytes. Two kinds are supported.

``line``
    MI-versus-grid curves. Needs one x column (``snr_db``, falling back to
    ``rho``) and one y column (first of ``mean_estimate_nats``,
    ``estimate_nats``, ``tilde_nats``). Rows sharing an
    (estimator, alpha, tau) triple form one series when those columns exist,
    otherwise the file is a single series. Each series draws exactly one
    solid polyline plus, when a std column is present, one translucent
    polygon band of +/- one std. A truth column (``truth_nats`` or
    ``reference_nats``) adds exactly one dashed polyline.

``scatter``
    Constellation clouds. Needs ``kind``, ``re``, ``im`` columns; channel
    inputs (kind ``x``) draw above the noisy outputs (kind ``y``).
"""

from __future__ import annotations

import csv
import io

VIEW_W, VIEW_H = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 62, 16, 20, 44
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f")

X_COLUMNS = ("snr_db", "rho")
Y_COLUMNS = ("mean_estimate_nats", "estimate_nats", "tilde_nats")
STD_COLUMNS = ("std_estimate_nats", "tilde_std_nats", "eval_std_nats")
TRUTH_COLUMNS = ("truth_nats", "reference_nats")
SERIES_COLUMNS = ("estimator", "alpha", "tau")


class PlotError(Exception):
    """CSV unsuitable for the requested plot kind; no file is written."""


def _read_rows(csv_path: str):
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"{csv_path}: empty file, nothing to plot")
        rows = list(reader)
    if not rows:
        raise PlotError(f"{csv_path}: no data rows, nothing to plot")
    return reader.fieldnames, rows


def _pick(fieldnames, candidates, what):
    for name in candidates:
        if name in fieldnames:
            return name
    raise PlotError(f"no {what} column found, expected one of {candidates}")


def _scale(lo: float, hi: float, pad: float = 0.05):
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _ticks(lo: float, hi: float, n: int = 5):
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


class _Canvas:
    """Maps data coordinates onto the fixed SVG viewport."""

    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.plot_w = VIEW_W - MARGIN_L - MARGIN_R
        self.plot_h = VIEW_H - MARGIN_T - MARGIN_B

    def x(self, v: float) -> float:
        frac = (v - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        return MARGIN_L + frac * self.plot_w

    def y(self, v: float) -> float:
        frac = (v - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return MARGIN_T + (1.0 - frac) * self.plot_h

    def points(self, xs, ys) -> str:
        return " ".join(f"{self.x(px):.2f},{self.y(py):.2f}"
                        for px, py in zip(xs, ys))


def _svg_header(buf, title: str):
    buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" '
              f'viewBox="0 0 {VIEW_W} {VIEW_H}" width="{VIEW_W}" '
              f'height="{VIEW_H}">\n')
    buf.write(f'<rect width="{VIEW_W}" height="{VIEW_H}" fill="white"/>\n')
    buf.write(f'<text x="{VIEW_W / 2:.0f}" y="14" text-anchor="middle" '
              f'font-family="monospace" font-size="12">{title}</text>\n')


def _svg_axes(buf, canvas: _Canvas, xlabel: str, ylabel: str):
    x0, y0 = MARGIN_L, MARGIN_T
    w, h = canvas.plot_w, canvas.plot_h
    buf.write(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" '
              f'fill="none" stroke="#222" stroke-width="1"/>\n')
    for tick in _ticks(*canvas.xlim):
        px = canvas.x(tick)
        buf.write(f'<line x1="{px:.2f}" y1="{y0 + h}" x2="{px:.2f}" '
                  f'y2="{y0 + h + 4}" stroke="#222"/>\n')
        buf.write(f'<text x="{px:.2f}" y="{y0 + h + 16}" '
                  f'text-anchor="middle" font-family="monospace" '
                  f'font-size="10">{tick:.4g}</text>\n')
    for tick in _ticks(*canvas.ylim):
        py = canvas.y(tick)
        buf.write(f'<line x1="{x0 - 4}" y1="{py:.2f}" x2="{x0}" '
                  f'y2="{py:.2f}" stroke="#222"/>\n')
        buf.write(f'<text x="{x0 - 7}" y="{py + 3:.2f}" text-anchor="end" '
                  f'font-family="monospace" font-size="10">{tick:.4g}</text>\n')
    buf.write(f'<text x="{x0 + w / 2:.0f}" y="{VIEW_H - 8}" '
              f'text-anchor="middle" font-family="monospace" '
              f'font-size="11">{xlabel}</text>\n')
    buf.write(f'<text x="14" y="{y0 + h / 2:.0f}" text-anchor="middle" '
              f'font-family="monospace" font-size="11" '
              f'transform="rotate(-90 14 {y0 + h / 2:.0f})">{ylabel}</text>\n')


def _series_rows(fieldnames, rows):
    """Ordered {label: rows} keyed by (estimator, alpha, tau) when present."""
    keys = [c for c in SERIES_COLUMNS if c in fieldnames]
    if not keys:
        return {"series": rows}
    groups = {}
    for row in rows:
        label = row.get("estimator") or "series"
        if row.get("alpha") not in (None, "", "1.0"):
            label += f" a={row['alpha']}"
        if row.get("tau") not in (None, "", "1.0", "inf"):
            label += f" t={row['tau']}"
        groups.setdefault(label, []).append(row)
    return groups


def _line_svg(fieldnames, rows, title: str) -> str:
    x_col = _pick(fieldnames, X_COLUMNS, "x-axis")
    y_col = _pick(fieldnames, Y_COLUMNS, "estimate")
    std_col = next((c for c in STD_COLUMNS if c in fieldnames), None)
    truth_col = next((c for c in TRUTH_COLUMNS if c in fieldnames), None)

    def value(row, col):
        text = row.get(col, "")
        if text == "":
            raise PlotError(f"blank '{col}' cell; cannot place row on the "
                            f"{x_col} axis")
        return float(text)

    series = _series_rows(fieldnames, rows)
    xs_all, ys_all = [], []
    parsed = {}
    for label, members in series.items():
        pts = sorted((value(r, x_col), value(r, y_col),
                      float(r[std_col]) if std_col else 0.0) for r in members)
        parsed[label] = pts
        xs_all.extend(p[0] for p in pts)
        ys_all.extend(p[1] - p[2] for p in pts)
        ys_all.extend(p[1] + p[2] for p in pts)
    truth_pts = []
    if truth_col:
        seen = {}
        for row in rows:
            seen[value(row, x_col)] = value(row, truth_col)
        truth_pts = sorted(seen.items())
        ys_all.extend(v for _, v in truth_pts)

    canvas = _Canvas(_scale(min(xs_all), max(xs_all)),
                     _scale(min(ys_all), max(ys_all)))
    buf = io.StringIO()
    _svg_header(buf, title)
    _svg_axes(buf, canvas, x_col, "MI (nats)")
    for idx, (label, pts) in enumerate(parsed.items()):
        color = PALETTE[idx % len(PALETTE)]
        xs = [p[0] for p in pts]
        if std_col:
            upper = canvas.points(xs, [p[1] + p[2] for p in pts])
            lower = canvas.points(xs[::-1], [p[1] - p[2] for p in pts][::-1])
            buf.write(f'<polygon points="{upper} {lower}" fill="{color}" '
                      f'fill-opacity="0.15" stroke="none"/>\n')
        buf.write(f'<polyline points="{canvas.points(xs, [p[1] for p in pts])}" '
                  f'fill="none" stroke="{color}" stroke-width="1.8"/>\n')
        ly = MARGIN_T + 14 + 14 * idx
        buf.write(f'<rect x="{MARGIN_L + 8}" y="{ly - 8}" width="10" '
                  f'height="10" fill="{color}"/>\n')
        buf.write(f'<text x="{MARGIN_L + 22}" y="{ly + 1}" '
                  f'font-family="monospace" font-size="10">{label}</text>\n')
    if truth_pts:
        pts = canvas.points([p[0] for p in truth_pts],
                            [p[1] for p in truth_pts])
        buf.write(f'<polyline points="{pts}" fill="none" stroke="#444" '
                  f'stroke-width="1.4" stroke-dasharray="6 4"/>\n')
        ly = MARGIN_T + 14 + 14 * len(parsed)
        buf.write(f'<line x1="{MARGIN_L + 8}" y1="{ly - 3}" '
                  f'x2="{MARGIN_L + 18}" y2="{ly - 3}" stroke="#444" '
                  f'stroke-width="1.4" stroke-dasharray="6 4"/>\n')
        buf.write(f'<text x="{MARGIN_L + 22}" y="{ly + 1}" '
                  f'font-family="monospace" font-size="10">{truth_col}</text>\n')
    buf.write("</svg>\n")
    return buf.getvalue()


def _scatter_svg(fieldnames, rows, title: str) -> str:
    for col in ("kind", "re", "im"):
        if col not in fieldnames:
            raise PlotError(f"scatter plot needs columns ('kind', 're', "
                            f"'im'); missing '{col}'")
    pts = [(row["kind"], float(row["re"]), float(row["im"])) for row in rows]
    res = [p[1] for p in pts]
    ims = [p[2] for p in pts]
    lo = min(min(res), min(ims))
    hi = max(max(res), max(ims))
    lim = _scale(lo, hi)
    canvas = _Canvas(lim, lim)
    buf = io.StringIO()
    _svg_header(buf, title)
    _svg_axes(buf, canvas, "re", "im")
    styles = {"y": ('fill="#d62728" fill-opacity="0.35"', 2.0),
              "x": ('fill="#1f77b4"', 3.2)}
    for kind in ("y", "x"):
        style, radius = styles[kind]
        for k, re, im in pts:
            if k == kind:
                buf.write(f'<circle cx="{canvas.x(re):.2f}" '
                          f'cy="{canvas.y(im):.2f}" r="{radius}" {style}/>\n')
    for idx, kind in enumerate(("x", "y")):
        style, radius = styles[kind]
        ly = MARGIN_T + 14 + 14 * idx
        buf.write(f'<circle cx="{MARGIN_L + 13}" cy="{ly - 3}" r="{radius}" '
                  f'{style}/>\n')
        buf.write(f'<text x="{MARGIN_L + 22}" y="{ly + 1}" '
                  f'font-family="monospace" font-size="10">{kind}</text>\n')
    buf.write("</svg>\n")
    return buf.getvalue()


def render_plot(csv_path: str, kind: str = "line") -> str:
    """SVG text for a CSV file; raises PlotError before any output exists."""
    fieldnames, rows = _read_rows(csv_path)
    title = csv_path.rsplit("/", 1)[-1]
    if kind == "line":
        return _line_svg(fieldnames, rows, title)
    if kind == "scatter":
        return _scatter_svg(fieldnames, rows, title)
    raise PlotError(f"unknown plot kind '{kind}', expected 'line' or "
                    f"'scatter'")


def write_plot(csv_path: str, out_path: str, kind: str = "line") -> str:
    """Render ``csv_path`` to ``out_path``. The SVG is built fully in memory
    first, so a PlotError never leaves a partial file behind."""
    svg = render_plot(csv_path, kind)
    with open(out_path, "w") as fh:
        fh.write(svg)
    return out_path
