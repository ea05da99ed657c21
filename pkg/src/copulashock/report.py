"""Report artifacts: CSV/JSON serialisers and SVG plots.

Every writer here is a pure function of its inputs: floats are printed
with 17 significant digits, JSON keys are sorted, and the SVG is built
by hand (no plotting library) so reruns produce byte-identical files.
"""

import json
from datetime import date

import numpy as np

from .clustering import ClusterAssignment
from .indicator import IndicatorSeries, MarketPeriod

__all__ = [
    "save_indicator_csv",
    "load_indicator_csv",
    "save_periods_json",
    "load_periods_json",
    "save_labels_csv",
    "load_labels_csv",
    "save_distance_csv",
    "load_distance_csv",
    "timeline_svg",
    "cluster_svg",
]

_PALETTE = [
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
]


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_indicator_csv(series: IndicatorSeries, path):
    lines = ["date,indicator"]
    for d, v in zip(series.dates, series.values):
        lines.append("%s,%s" % (d.isoformat(), _fmt(v)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_indicator_csv(path) -> IndicatorSeries:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "date,indicator":
        raise ValueError(f"{path}: expected 'date,indicator' header")
    dates = []
    values = []
    for ln in lines[1:]:
        ds, _, vs = ln.partition(",")
        dates.append(date.fromisoformat(ds))
        values.append(float(vs))
    return IndicatorSeries(dates=dates, values=np.array(values))


def save_periods_json(periods, path):
    payload = [
        {
            "start": p.start.isoformat(),
            "end": p.end.isoformat(),
            "kind": p.kind,
            "run_length": p.run_length,
        }
        for p in periods
    ]
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_periods_json(path) -> list:
    with open(path) as fh:
        payload = json.load(fh)
    return [
        MarketPeriod(
            start=date.fromisoformat(p["start"]),
            end=date.fromisoformat(p["end"]),
            kind=p["kind"],
            run_length=int(p["run_length"]),
        )
        for p in payload
    ]


def save_labels_csv(dates, assignment: ClusterAssignment, path):
    medoid_set = set(int(i) for i in assignment.medoids)
    lines = ["index,date,label,is_medoid"]
    for idx, (d, lab) in enumerate(zip(dates, assignment.labels)):
        lines.append(
            "%d,%s,%d,%d"
            % (idx, d.isoformat(), int(lab), 1 if idx in medoid_set else 0)
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_labels_csv(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "index,date,label,is_medoid":
        raise ValueError(f"{path}: expected labels header")
    dates = []
    labels = []
    medoids = []
    for ln in lines[1:]:
        idx, ds, lab, med = ln.split(",")
        dates.append(date.fromisoformat(ds))
        labels.append(int(lab))
        if med == "1":
            medoids.append(int(idx))
    labels = np.array(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if len(labels) else 0
    return dates, ClusterAssignment(
        labels=labels, medoids=np.array(medoids, dtype=np.int64), k=k
    )


def save_distance_csv(dist: np.ndarray, path):
    lines = [",".join(_fmt(v) for v in row) for row in dist]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_distance_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = [
            [float(v) for v in ln.strip().split(",")] for ln in fh if ln.strip()
        ]
    return np.array(rows)


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------

_W, _H = 900, 300
_ML, _MR, _MT, _MB = 60, 20, 28, 42


def _f(v: float) -> str:
    return "%.2f" % v


def _scales(n: int, values: np.ndarray):
    finite = values[np.isfinite(values)]
    vmax = float(finite.max()) * 1.08 if finite.size else 2.0
    vmax = min(max(vmax, 2.0), 10.0)
    span_x = _W - _ML - _MR
    span_y = _H - _MT - _MB

    def sx(i):
        return _ML + (span_x * i / max(n - 1, 1))

    def sy(v):
        v = min(v, vmax)
        return _H - _MB - span_y * max(v, 0.0) / vmax

    return sx, sy, vmax


def _axes(parts, dates, sx, sy, vmax):
    parts.append(
        '<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
        'stroke="#888" stroke-width="1"/>'
        % (_f(_ML), _f(_MT), _f(_W - _ML - _MR), _f(_H - _MT - _MB))
    )
    n = len(dates)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        idx = int(round(frac * (n - 1)))
        x = sx(idx)
        parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#888"/>'
            % (_f(x), _f(_H - _MB), _f(x), _f(_H - _MB + 4))
        )
        parts.append(
            '<text x="%s" y="%s" text-anchor="middle" font-size="10">%s</text>'
            % (_f(x), _f(_H - _MB + 16), dates[idx].isoformat())
        )
    ticks = 4
    for t in range(ticks + 1):
        v = vmax * t / ticks
        y = sy(v)
        parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#888"/>'
            % (_f(_ML - 4), _f(y), _f(_ML), _f(y))
        )
        parts.append(
            '<text x="%s" y="%s" text-anchor="end" font-size="10">%s</text>'
            % (_f(_ML - 7), _f(y + 3), _f(v))
        )
    # reference level: indicator above one means inverted association
    y1 = sy(1.0)
    parts.append(
        '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#555" '
        'stroke-dasharray="5,4"/>' % (_f(_ML), _f(y1), _f(_W - _MR), _f(y1))
    )


def timeline_svg(series: IndicatorSeries, periods, title="shock indicator") -> str:
    """Indicator curve with warning/crisis spans shaded behind it."""
    n = len(series)
    values = np.asarray(series.values, dtype=np.float64)
    sx, sy, vmax = _scales(n, values)
    index_of = {d: i for i, d in enumerate(series.dates)}
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d" font-family="sans-serif">' % (_W, _H, _W, _H),
        '<text x="%s" y="18" font-size="13">%s</text>' % (_f(_ML), title),
    ]
    for p in periods:
        x0 = sx(index_of[p.start])
        x1 = sx(index_of[p.end])
        color = "#d9534f" if p.kind == "crisis" else "#f2c14e"
        parts.append(
            '<rect x="%s" y="%s" width="%s" height="%s" fill="%s" '
            'fill-opacity="0.35"/>'
            % (_f(x0), _f(_MT), _f(max(x1 - x0, 1.0)), _f(_H - _MT - _MB), color)
        )
    _axes(parts, series.dates, sx, sy, vmax)
    pts = " ".join(
        "%s,%s" % (_f(sx(i)), _f(sy(v))) for i, v in enumerate(values)
    )
    if n == 1:
        parts.append(
            '<circle cx="%s" cy="%s" r="2.5" fill="#1f77b4"/>'
            % (_f(sx(0)), _f(sy(values[0])))
        )
    else:
        parts.append(
            '<polyline points="%s" fill="none" stroke="#1f77b4" '
            'stroke-width="1.2"/>' % pts
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cluster_svg(dates, values, assignment: ClusterAssignment, title="window clusters") -> str:
    """Indicator scatter coloured by cluster label; medoids ringed."""
    n = len(dates)
    values = np.asarray(values, dtype=np.float64)
    sx, sy, vmax = _scales(n, values)
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d" font-family="sans-serif">' % (_W, _H, _W, _H),
        '<text x="%s" y="18" font-size="13">%s</text>' % (_f(_ML), title),
    ]
    _axes(parts, list(dates), sx, sy, vmax)
    for i in range(n):
        color = _PALETTE[int(assignment.labels[i]) % len(_PALETTE)]
        parts.append(
            '<circle cx="%s" cy="%s" r="2.2" fill="%s"/>'
            % (_f(sx(i)), _f(sy(values[i])), color)
        )
    for med in assignment.medoids:
        parts.append(
            '<circle cx="%s" cy="%s" r="5" fill="none" stroke="#000" '
            'stroke-width="1.2"/>' % (_f(sx(int(med))), _f(sy(values[int(med)])))
        )
    for lab in range(assignment.k):
        x = _W - _MR - 90
        y = _MT + 14 + 13 * lab
        parts.append(
            '<rect x="%s" y="%s" width="9" height="9" fill="%s"/>'
            % (_f(x), _f(y - 8), _PALETTE[lab % len(_PALETTE)])
        )
        parts.append(
            '<text x="%s" y="%s" font-size="10">cluster %d</text>'
            % (_f(x + 13), _f(y), lab)
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
