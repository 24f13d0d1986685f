"""Command-line orchestration: datasets, transforms, campaigns, reports.

Subcommands
    collect    roll out a Sobol grid at one fidelity and write the dataset
    train-nn   fit the trajectory-summary network on a dataset
    bo         execute a BO campaign (methods x seeds) from a config file
    itne-map   build and summarize the duty-factor behavior map
    report     aggregate run files into curve reports and an optional figure

Campaign runs are resumable: existing run files are kept, missing ones are
computed. GAITOPT_WORKERS bounds the worker pool for collection and runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .campaign import CampaignConfig, METHODS, run_method
from .engine import build_behavior_map, load_history, save_history
from .features import (DogThresholds, collect_dataset, load_dataset,
                       save_dataset)
from .mlp import load_weights, save_weights, train
from .reports import (build_curve_report, load_reports, render_report_figure,
                      save_reports)
from .robot import Fidelity


def _workers() -> int:
    return max(int(os.environ.get("GAITOPT_WORKERS", "1")), 1)


def _load_config(path) -> dict:
    with open(path) as f:
        cfg = yaml.safe_load(f)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return cfg


def _campaign_from_config(cfg: dict) -> CampaignConfig:
    seeds = cfg.get("seeds", list(range(20)))
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    return CampaignConfig(
        methods=tuple(cfg.get("methods", ("se", "dog"))),
        source_fidelity=Fidelity[cfg.get("source_fidelity", "L1_SIMPLE_GEAR")],
        objective_fidelity=Fidelity[cfg.get("objective_fidelity",
                                            "L0_HARDWARE")],
        cost_id=cfg.get("cost", "hardware"),
        profile=cfg.get("profile", "steady"),
        dims=int(cfg.get("dims", 9)),
        padding=int(cfg.get("padding", 0)),
        seeds=tuple(seeds),
        budget=int(cfg.get("budget", 50)),
        candidate_size=int(cfg.get("candidate_size", 1000)),
        acquisition=cfg.get("acquisition", "ucb"),
        no_mismatch=bool(cfg.get("no_mismatch", False)),
        objective_overrides=dict(cfg.get("objective_overrides", {})))


def cmd_collect(args) -> int:
    cfg = _load_config(args.config)
    thr = DogThresholds(*cfg["thresholds"]) if "thresholds" in cfg \
        else DogThresholds()
    ds = collect_dataset(
        n=int(cfg.get("n", 2000)), dims=int(cfg.get("dims", 9)),
        fidelity=Fidelity[cfg.get("fidelity", "L1_SIMPLE_GEAR")],
        schema=cfg.get("schema", "basic"), seed=int(cfg.get("seed", 0)),
        workers=_workers(), profile=cfg.get("profile", "steady"),
        padding=int(cfg.get("padding", 0)), thresholds=thr)
    out = Path(cfg.get("out", args.out or "dataset.csv"))
    try:
        save_dataset(ds, out)
    except OSError as e:
        print(f"error: cannot write dataset to {out}: {e}", file=sys.stderr)
        return 1
    print(f"wrote {ds.n} rows to {out} (walk fraction "
          f"{ds.walked.mean():.4f})")
    return 0


def cmd_train_nn(args) -> int:
    ds = load_dataset(args.dataset)
    w = train(ds.points, ds.summaries, hidden=tuple(args.hidden),
              seed=args.seed)
    save_weights(w, args.out)
    print(f"wrote weights to {args.out} "
          f"({ds.points.shape[1]} -> {ds.summaries.shape[1]})")
    return 0


def _run_one(payload):
    cfg_dict, method, seed, dataset_path, weights_path, out = payload
    config = _campaign_from_config(cfg_dict)
    dataset = load_dataset(dataset_path)
    weights = load_weights(weights_path) if weights_path else None
    hist = run_method(method, config, dataset, weights, seed)
    save_history(hist, out)
    return out


def cmd_bo(args) -> int:
    cfg = _load_config(args.config)
    config = _campaign_from_config(cfg)
    dataset_path = cfg.get("dataset")
    if not dataset_path or not Path(dataset_path).exists():
        print(f"error: dataset file not found: {dataset_path}",
              file=sys.stderr)
        return 1
    weights_path = cfg.get("weights")
    if any(m == "trajnn" for m in config.methods):
        if not weights_path or not Path(weights_path).exists():
            print(f"error: weights file not found: {weights_path}",
                  file=sys.stderr)
            return 1
    outdir = Path(cfg.get("outdir", args.outdir or "runs"))
    outdir.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()

    jobs = []
    run_files = {}
    for method in config.methods:
        for seed in config.seeds:
            out = outdir / f"{method}_seed{seed}.json"
            run_files.setdefault(method, []).append(str(out))
            if out.exists() and load_history(out).fingerprint == fp:
                continue
            jobs.append((cfg, method, seed, dataset_path,
                         weights_path if method == "trajnn" else None,
                         str(out)))
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    manifest = {"fingerprint": fp, "config": cfg, "run_files": run_files}
    with open(outdir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    print(f"{len(done)} new runs, "
          f"{sum(len(v) for v in run_files.values())} total in {outdir}")
    return 0


def cmd_itne_map(args) -> int:
    ds = load_dataset(args.dataset)
    bmap = build_behavior_map(ds, args.cost)
    cells = {f"{k[0]},{k[1]}": [[c, int(r)] for c, r in v]
             for k, v in bmap.cells.items()}
    payload = {"cost": args.cost, "meta": bmap.meta,
               "occupied": len(cells), "cells": cells}
    with open(args.out, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
    depth = [len(v) for v in bmap.cells.values()]
    print(f"{len(cells)} occupied cells (mean depth "
          f"{sum(depth) / len(depth):.2f}) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    rundir = Path(args.runs)
    by_method = {}
    for p in sorted(rundir.glob("*_seed*.json")):
        method = p.name.rsplit("_seed", 1)[0]
        by_method.setdefault(method, []).append(load_history(p))
    if not by_method:
        print(f"error: no run files in {rundir}", file=sys.stderr)
        return 1
    try:
        reports = [build_curve_report(m, hs)
                   for m, hs in sorted(by_method.items())]
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for r in reports:
            save_reports([r], outdir / f"report_{r.method}.csv")
        save_reports(reports, outdir / "report_combined.csv")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.figure:
        render_report_figure(reports, args.figure)
        print(f"figure -> {args.figure}")
    print(f"{len(reports)} method reports -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaitopt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect a Sobol-grid dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_collect)

    p = sub.add_parser("train-nn", help="train the summary network")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int, nargs="+", default=[128, 128])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_nn)

    p = sub.add_parser("bo", help="run a BO campaign from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_bo)

    p = sub.add_parser("itne-map", help="build the duty-factor behavior map")
    p.add_argument("--dataset", required=True)
    p.add_argument("--cost", default="hardware")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_itne_map)

    p = sub.add_parser("report", help="aggregate run files into reports")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
