"""Curve-report figures: mean best-cost curves with CI bands.

The input contract is the curve-report file: a single ``#``-prefixed JSON
header record followed by ``method,trial,mean_best,ci_half,walk_frac``
rows. This tool only reads those files; it never recomputes statistics.
Output is vector by default with a fixed style and no timestamps, so
rendering the same report twice yields byte-identical files.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np

matplotlib.use("Agg")

STYLE = {
    "svg.hashsalt": "plotkit",
    "figure.figsize": (6.4, 6.0),
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
}
# fixed palette keyed by method order within the figure
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class ReportTable:
    """One method's aggregated curves as read from a report file."""

    method: str
    fingerprint: str
    n_runs: int
    budget: int
    mean_best: np.ndarray
    ci_half: np.ndarray
    walk_frac: np.ndarray


@dataclass
class FigureSpec:
    report_paths: tuple
    out_path: str
    labels: dict = field(default_factory=dict)
    fmt: str = "svg"
    x_range: Optional[tuple] = None   # None: exact data extents
    y_range: Optional[tuple] = None
    walk_panel: bool = True

    def __post_init__(self):
        self.report_paths = tuple(self.report_paths)
        if not self.report_paths:
            raise ValueError("need at least one input report")
        shown = list(self.labels.values())
        if len(set(shown)) != len(shown):
            raise ValueError("method labels must be unique")


def _malformed(path, lineno, why):
    return ValueError(f"{path}:{lineno}: malformed report ({why})")


def load_report_file(path) -> list:
    """Parse one report file into ReportTable records, header order."""
    with open(path) as f:
        lines = f.readlines()
    if not lines or not lines[0].startswith("#"):
        raise _malformed(path, 1, "missing JSON header record")
    try:
        meta = json.loads(lines[0].lstrip("# "))
        methods = meta["methods"]
        budget = int(meta["budget"])
        fingerprint = meta["fingerprint"]
        n_runs = meta["n_runs"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise _malformed(path, 1, e) from e
    rows = {m: {} for m in methods}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise _malformed(path, lineno, f"expected 5 fields, got {len(parts)}")
        m = parts[0]
        if m not in rows:
            raise _malformed(path, lineno, f"method {m!r} not in header")
        try:
            t = int(parts[1])
            vals = tuple(float(v) for v in parts[2:])
        except ValueError as e:
            raise _malformed(path, lineno, e) from e
        if not 0 <= t < budget or t in rows[m]:
            raise _malformed(path, lineno, f"bad or duplicate trial {t}")
        rows[m][t] = vals
    out = []
    for m in methods:
        if len(rows[m]) != budget:
            raise _malformed(path, len(lines),
                             f"method {m!r} has {len(rows[m])} of "
                             f"{budget} trials")
        data = np.array([rows[m][t] for t in range(budget)])
        out.append(ReportTable(method=m, fingerprint=fingerprint,
                               n_runs=int(n_runs[m]), budget=budget,
                               mean_best=data[:, 0], ci_half=data[:, 1],
                               walk_frac=data[:, 2]))
    return out


def auto_ranges(tables) -> tuple:
    """((x_lo, x_hi), (y_lo, y_hi)) spanning the band extents exactly."""
    budget = tables[0].budget
    lo = min(float(np.min(t.mean_best - t.ci_half)) for t in tables)
    hi = max(float(np.max(t.mean_best + t.ci_half)) for t in tables)
    return (0.0, float(budget - 1)), (lo, hi)


def build_figure(spec: FigureSpec, tables):
    """Assemble the matplotlib figure; separated for inspection in tests."""
    import matplotlib.pyplot as plt

    with plt.rc_context(STYLE):
        if spec.walk_panel:
            fig, (ax_cost, ax_walk) = plt.subplots(
                2, 1, sharex=True, gridspec_kw={"height_ratios": [2, 1]})
        else:
            fig, ax_cost = plt.subplots()
            ax_walk = None
        trials = np.arange(tables[0].budget)
        for i, tab in enumerate(tables):
            color = PALETTE[i % len(PALETTE)]
            label = spec.labels.get(tab.method, tab.method)
            ax_cost.plot(trials, tab.mean_best, color=color, label=label)
            ax_cost.fill_between(trials, tab.mean_best - tab.ci_half,
                                 tab.mean_best + tab.ci_half,
                                 color=color, alpha=0.25, linewidth=0)
            if ax_walk is not None:
                ax_walk.plot(trials, tab.walk_frac, color=color, label=label)
        x_auto, y_auto = auto_ranges(tables)
        ax_cost.set_xlim(spec.x_range or x_auto)
        ax_cost.set_ylim(spec.y_range or y_auto)
        ax_cost.set_ylabel("mean best cost")
        ax_cost.legend()
        if ax_walk is not None:
            ax_walk.set_ylim(0.0, 1.0)
            ax_walk.set_ylabel("walking fraction")
            ax_walk.set_xlabel("trial")
        else:
            ax_cost.set_xlabel("trial")
        fig.tight_layout()
    return fig


def render_curves(spec: FigureSpec) -> str:
    """Render the reports named by the spec and write the image file."""
    tables = []
    for path in spec.report_paths:
        tables.extend(load_report_file(path))
    budgets = {t.budget for t in tables}
    if len(budgets) != 1:
        raise ValueError(f"reports must share one trial budget, got "
                         f"{sorted(budgets)}")
    shown = [spec.labels.get(t.method, t.method) for t in tables]
    if len(set(shown)) != len(shown):
        raise ValueError(f"duplicate method labels across reports: {shown}")
    import matplotlib.pyplot as plt

    fig = build_figure(spec, tables)
    # fixed hash salt and no Date record: repeated renders of one report
    # are byte-identical
    with plt.rc_context(STYLE):
        fig.savefig(spec.out_path, format=spec.fmt, metadata={"Date": None})
    plt.close(fig)
    return str(spec.out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plotkit", description="render curve-report files to a figure")
    ap.add_argument("reports", help="report file path or glob")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--format", default="svg", help="image format")
    ap.add_argument("--label", action="append", default=[],
                    metavar="METHOD=LABEL", help="rename a method")
    ap.add_argument("--no-walk-panel", action="store_true")
    args = ap.parse_args(argv)
    paths = sorted(glob.glob(args.reports)) or \
        ([args.reports] if Path(args.reports).exists() else [])
    labels = {}
    for item in args.label:
        if "=" not in item:
            print(f"error: bad label {item!r}, expected METHOD=LABEL",
                  file=sys.stderr)
            return 1
        k, v = item.split("=", 1)
        labels[k] = v
    try:
        spec = FigureSpec(report_paths=paths, out_path=args.out,
                          labels=labels, fmt=args.format,
                          walk_panel=not args.no_walk_panel)
        out = render_curves(spec)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"figure -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
