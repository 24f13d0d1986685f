"""Aggregation of BO run histories into per-method curve reports.

A CurveReport is the tabular contract consumed by external plotting tools:
per trial, the mean best-cost-so-far over runs, a normal-approximation 95%
confidence half-width, and the fraction of runs that have walked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .engine import RunHistory

CI_Z = 1.96


@dataclass
class CurveReport:
    method: str
    fingerprint: str
    n_runs: int
    budget: int
    mean_best: np.ndarray
    ci_half: np.ndarray
    walk_frac: np.ndarray

    def __post_init__(self):
        for arr in (self.mean_best, self.ci_half, self.walk_frac):
            if arr.shape != (self.budget,):
                raise ValueError("curve length must equal the trial budget")
        if np.any(np.diff(self.mean_best) > 1.0e-12):
            raise ValueError("mean best-so-far curve must be non-increasing")
        if np.any(np.diff(self.walk_frac) < -1.0e-12):
            raise ValueError("walking fraction must be non-decreasing")
        if np.any((self.walk_frac < 0) | (self.walk_frac > 1)):
            raise ValueError("walking fraction must lie in [0, 1]")


def build_curve_report(method: str, histories: list) -> CurveReport:
    """Aggregate one method's runs; rejects mixed fingerprints or budgets."""
    if len(histories) < 2:
        raise ValueError("need at least 2 runs per method")
    budgets = sorted({len(h.best_curve) for h in histories})
    if len(budgets) != 1:
        bad = [(h.seed, len(h.best_curve)) for h in histories
               if len(h.best_curve) != budgets[-1]]
        raise ValueError(f"inconsistent budgets across runs: {bad}")
    fps = {h.fingerprint for h in histories}
    if len(fps) != 1:
        raise ValueError(f"refusing to mix config fingerprints: {sorted(fps)}")
    budget = budgets[0]
    curves = np.stack([h.best_curve for h in histories])
    n = len(histories)
    sd = curves.std(0, ddof=1)
    walked = np.stack([
        [h.first_walk is not None and h.first_walk <= t for t in range(budget)]
        for h in histories])
    return CurveReport(method=method, fingerprint=fps.pop(), n_runs=n,
                       budget=budget, mean_best=curves.mean(0),
                       ci_half=CI_Z * sd / np.sqrt(n),
                       walk_frac=walked.mean(0))


def save_reports(reports: list, path) -> None:
    """One JSON header then method,trial,mean,ci,walk_frac rows."""
    if not reports:
        raise ValueError("nothing to save")
    fps = {r.fingerprint for r in reports}
    if len(fps) != 1:
        raise ValueError(f"refusing to mix config fingerprints: {sorted(fps)}")
    budgets = {r.budget for r in reports}
    if len(budgets) != 1:
        raise ValueError("reports must share the trial budget")
    header = {"fingerprint": reports[0].fingerprint,
              "budget": reports[0].budget,
              "methods": [r.method for r in reports],
              "n_runs": {r.method: r.n_runs for r in reports},
              "columns": ["method", "trial", "mean_best", "ci_half",
                          "walk_frac"]}
    with open(path, "w") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for r in reports:
            for t in range(r.budget):
                f.write(f"{r.method},{t},{float(r.mean_best[t])!r},"
                        f"{float(r.ci_half[t])!r},{float(r.walk_frac[t])!r}\n")


def load_reports(path) -> list:
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing report header record")
        meta = json.loads(first.lstrip("# "))
        rows = {}
        for line in f:
            if not line.strip():
                continue
            m, t, mean, ci, frac = line.split(",")
            rows.setdefault(m, []).append((int(t), float(mean), float(ci),
                                           float(frac)))
    out = []
    for m in meta["methods"]:
        data = sorted(rows[m])
        out.append(CurveReport(
            method=m, fingerprint=meta["fingerprint"],
            n_runs=meta["n_runs"][m], budget=meta["budget"],
            mean_best=np.array([r[1] for r in data]),
            ci_half=np.array([r[2] for r in data]),
            walk_frac=np.array([r[3] for r in data])))
    return out


def render_report_figure(reports: list, path) -> None:
    """Two-panel matplotlib figure: best-cost curves with CI bands, walk
    fraction below."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_cost, ax_walk) = plt.subplots(
        2, 1, figsize=(6.4, 6.0), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})
    for r in reports:
        t = np.arange(r.budget)
        ax_cost.plot(t, r.mean_best, label=r.method)
        ax_cost.fill_between(t, r.mean_best - r.ci_half,
                             r.mean_best + r.ci_half, alpha=0.25)
        ax_walk.plot(t, r.walk_frac, label=r.method)
    ax_cost.set_ylabel("mean best cost")
    ax_cost.legend()
    ax_walk.set_ylabel("walking fraction")
    ax_walk.set_xlabel("trial")
    ax_walk.set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
