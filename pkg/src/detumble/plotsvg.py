"""Static SVG plots of trace files.

Rendering is deliberately hand-rolled so that identical trace bytes yield
identical SVG bytes: fixed canvas, fixed 1-2-5 tick ladder, fixed coordinate
formatting, no timestamps. Long traces are thinned by a deterministic stride
before plotting (the closing sample is always kept).
"""

import math

import numpy as np

WIDTH = 960
HEIGHT = 540
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 46, 56
MAX_POINTS = 4000

_COLORS = ("#1f77b4", "#d62728", "#2ca02c")

PLOT_KINDS = ("rates", "inputs", "residual", "lyapunov")

_KIND_SPEC = {
    "rates": {
        "columns": ("wx", "wy", "wz"),
        "labels": ("wx", "wy", "wz"),
        "scale": 180.0 / math.pi,
        "ylabel": "angular velocity [deg/s]",
        "title": "Body angular velocities",
    },
    "inputs": {
        "columns": ("mx", "v"),
        "labels": ("m_x", "v"),
        "scale": 1.0,
        "ylabel": "dipole / dummy input [A m^2]",
        "title": "Controller inputs",
    },
    "residual": {
        "columns": ("f_norm",),
        "labels": ("|F|",),
        "scale": 1.0,
        "ylabel": "optimality residual norm",
        "title": "Optimality residual",
    },
    "lyapunov": {
        "columns": ("lyap",),
        "labels": ("V",),
        "scale": 1.0,
        "ylabel": "kinetic energy [J]",
        "title": "Rotational kinetic energy",
    },
}


def _nice_num(x: float, do_round: bool) -> float:
    exp = math.floor(math.log10(x))
    frac = x / 10.0 ** exp
    if do_round:
        nice = 1.0 if frac < 1.5 else 2.0 if frac < 3.0 else 5.0 if frac < 7.0 else 10.0
    else:
        nice = 1.0 if frac <= 1.0 else 2.0 if frac <= 2.0 else 5.0 if frac <= 5.0 else 10.0
    return nice * 10.0 ** exp


def nice_ticks(lo: float, hi: float, target: int = 6):
    """Tick positions covering [lo, hi] on a 1-2-5 ladder."""
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise ValueError("cannot place ticks on a non-finite range")
    if hi <= lo:
        hi = lo + (abs(lo) if lo != 0.0 else 1.0)
    step = _nice_num(_nice_num(hi - lo, False) / max(target - 1, 1), True)
    first = math.floor(lo / step) * step
    count = int(round((math.ceil(hi / step) * step - first) / step)) + 1
    return [first + i * step for i in range(count)], step


def _fmt_tick(v: float, step: float) -> str:
    if v == 0.0:
        return "0"
    decimals = max(0, -int(math.floor(math.log10(step))))
    if decimals == 0 and abs(v) < 1e6:
        return f"{v:.0f}"
    if abs(v) >= 1e6 or abs(v) < 1e-4:
        return f"{v:.3e}"
    return f"{v:.{decimals}f}"


def _thin(index_count: int):
    stride = max(1, int(math.ceil(index_count / MAX_POINTS)))
    idx = list(range(0, index_count, stride))
    if idx[-1] != index_count - 1:
        idx.append(index_count - 1)
    return idx


def render_plot(columns: dict, kind: str) -> str:
    """Render one trace plot as an SVG document string."""
    if kind not in _KIND_SPEC:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    spec = _KIND_SPEC[kind]
    if "t" not in columns or len(columns["t"]) == 0:
        raise ValueError("trace is empty; nothing to plot")
    for name in spec["columns"]:
        if name not in columns:
            raise ValueError(f"trace is missing column '{name}'")
        if not np.isfinite(columns[name]).any():
            raise ValueError(f"trace has no values in column '{name}'")

    idx = _thin(len(columns["t"]))
    t_min = np.asarray(columns["t"])[idx] / 60.0
    series = [np.asarray(columns[name])[idx] * spec["scale"] for name in spec["columns"]]

    x_lo, x_hi = float(t_min[0]), float(t_min[-1])
    finite = np.concatenate([s[np.isfinite(s)] for s in series])
    y_lo, y_hi = float(finite.min()), float(finite.max())
    if y_hi == y_lo:
        pad = abs(y_hi) * 0.1 if y_hi != 0.0 else 1.0
    else:
        pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    x_ticks, x_step = nice_ticks(x_lo, x_hi)
    y_ticks, y_step = nice_ticks(y_lo, y_hi)
    x_lo, x_hi = x_ticks[0], x_ticks[-1]
    y_lo, y_hi = y_ticks[0], y_ticks[-1]

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return MARGIN_T + ph - (y - y_lo) / (y_hi - y_lo) * ph

    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
               f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="24" font-family="sans-serif" font-size="16" '
               f'text-anchor="middle">{spec["title"]}</text>')

    for xt in x_ticks:
        px = sx(xt)
        out.append(f'<line x1="{px:.2f}" y1="{MARGIN_T}" x2="{px:.2f}" '
                   f'y2="{MARGIN_T + ph}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{px:.2f}" y="{MARGIN_T + ph + 18}" font-family="sans-serif" '
                   f'font-size="11" text-anchor="middle">{_fmt_tick(xt, x_step)}</text>')
    for yt in y_ticks:
        py = sy(yt)
        out.append(f'<line x1="{MARGIN_L}" y1="{py:.2f}" x2="{MARGIN_L + pw}" '
                   f'y2="{py:.2f}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{py + 4:.2f}" font-family="sans-serif" '
                   f'font-size="11" text-anchor="end">{_fmt_tick(yt, y_step)}</text>')

    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black" stroke-width="1"/>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 12}" font-family="sans-serif" '
               f'font-size="13" text-anchor="middle">time [min]</text>')
    out.append(f'<text x="20" y="{MARGIN_T + ph / 2:.1f}" font-family="sans-serif" '
               f'font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN_T + ph / 2:.1f})">{spec["ylabel"]}</text>')

    for s_idx, vals in enumerate(series):
        color = _COLORS[s_idx % len(_COLORS)]
        pts = []
        for xv, yv in zip(t_min, vals):
            if math.isfinite(yv):
                pts.append(f"{sx(xv):.2f},{sy(yv):.2f}")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                   f'points="{" ".join(pts)}"/>')
        lx = MARGIN_L + pw - 150
        ly = MARGIN_T + 16 + 18 * s_idx
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 26}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        label = spec["labels"][s_idx]
        if kind == "rates":
            label = f"{label} [deg/s]"
        out.append(f'<text x="{lx + 32}" y="{ly}" font-family="sans-serif" '
                   f'font-size="12">{label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
