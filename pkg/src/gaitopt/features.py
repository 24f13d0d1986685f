"""Gait feature extraction and Sobol-grid dataset collection.

Two feature views of a rollout: hand-designed per-step gait scores and
fixed-length trajectory summaries. Datasets pair the first n points of a
seeded Sobol sequence with both views plus every registered cost.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .control import (ParamSpace, PROFILES, ReactiveParams, SpeedProfile,
                      cost_hardware, cost_nonsmooth, cost_smooth, rollout)
from .robot import Fidelity, RobotModel, SimConfig
from .sim import Trajectory

MAX_SOBOL_DIM = 64
COLLECTION_T_MAX = 5.0   # kernel-building episodes are shorter than BO runs


@dataclass(frozen=True)
class DogThresholds:
    """Pass/fail thresholds for the binary per-step gait features.

    Magnitudes follow nominal human gait variability: 2 cm swing clearance,
    2 cm CoM height consistency, 5 degrees of trunk lean consistency.
    """

    clearance: float = 0.02
    height_tol: float = 0.02
    pitch_tol: float = 0.087

    def __post_init__(self):
        if min(self.clearance, self.height_tol, self.pitch_tol) <= 0:
            raise ValueError("all thresholds must be strictly positive")


@dataclass
class DogScore:
    score: float
    features: np.ndarray  # (steps, 4): M1..M3 binary, M4 = step speed


def dog_step_features(traj: Trajectory, step: int,
                      thresholds: DogThresholds) -> tuple:
    """(M1, M2, M3, M4) for one detected step.

    M1: swing apex cleared the ground by more than the threshold.
    M2: CoM height consistent between step start and end.
    M3: trunk lean consistent between step start and end.
    M4: mean forward speed over the step (clamped at 0).
    """
    if step >= len(traj.events):
        raise IndexError(f"step {step} out of range ({len(traj.events)} steps)")
    ev = traj.events[step]
    m1 = 1.0 if ev.clearance > thresholds.clearance else 0.0
    m2 = 1.0 if abs(ev.z_start - ev.z_end) <= thresholds.height_tol else 0.0
    m3 = 1.0 if abs(ev.pitch_start - ev.pitch_end) <= thresholds.pitch_tol else 0.0
    m4 = max(ev.mean_speed, 0.0)
    return m1, m2, m3, m4


def dog_score(traj: Trajectory,
              thresholds: DogThresholds = DogThresholds()) -> DogScore:
    """Scalar gait score: per-step feature sums scaled by normalized sim time."""
    n = len(traj.events)
    feats = np.zeros((n, 4))
    for i in range(n):
        feats[i] = dog_step_features(traj, i, thresholds)
    score = (traj.t_sim / traj.t_max) * float(feats.sum())
    return DogScore(score=score, features=feats)


def duty_factor(traj: Trajectory) -> tuple:
    """Per-leg stance-time fraction over the recorded (walked) samples."""
    c = traj.contact
    if c.shape[0] <= 1:
        return (0.0, 0.0)
    m = c[1:].mean(0)
    return float(m[0]), float(m[1])


# summary schemas: name -> ordered field list
SCHEMAS = {
    "basic": ["t_walk", "x_end", "theta_avg", "vx_avg"],
    "extended": ["t_walk", "x_end", "theta_avg", "vx_avg", "theta_end",
                 "vx_end", "c_tau", "y_end", "vy_end", "thetadot_end"],
}


@dataclass
class TrajectorySummary:
    schema: str
    values: np.ndarray

    def __post_init__(self):
        if self.schema not in SCHEMAS:
            raise ValueError(f"unknown summary schema {self.schema!r}")
        if self.values.shape != (len(SCHEMAS[self.schema]),):
            raise ValueError("summary length does not match schema")

    def as_dict(self) -> dict:
        return dict(zip(SCHEMAS[self.schema], self.values.tolist()))


def summarize(traj: Trajectory, schema: str = "basic",
              model: RobotModel = None) -> TrajectorySummary:
    """Fixed-length summary vector; averages run over the walked portion."""
    if schema not in SCHEMAS:
        raise ValueError(f"unknown summary schema {schema!r}")
    t_walk = traj.t_sim if traj.termination == "fell" else traj.t_max
    vals = {
        "t_walk": t_walk,
        "x_end": traj.com_x_end,
        "theta_avg": float(np.mean(traj.states[:, 2])),
        "vx_avg": float(np.mean(traj.com[:, 2])),
    }
    if schema == "extended":
        m = model if model is not None else RobotModel()
        d = traj.com_x_end
        weight = m.total_mass * 9.81
        vals.update({
            "theta_end": float(traj.states[-1, 2]),
            "vx_end": float(traj.com[-1, 2]),
            "c_tau": float(traj.torque_sq_integral / (weight * d)) if d > 0 else 100.0,
            "y_end": float(traj.com[-1, 1]),
            "vy_end": float(traj.com[-1, 3]),
            "thetadot_end": float(traj.states[-1, 9]),
        })
    arr = np.array([vals[k] for k in SCHEMAS[schema]])
    return TrajectorySummary(schema=schema, values=arr)


def sobol_points(n: int, d: int, seed: int) -> np.ndarray:
    """First n points of the seed-scrambled d-dimensional Sobol sequence."""
    if n < 1:
        raise ValueError("need at least one point")
    if not 1 <= d <= MAX_SOBOL_DIM:
        raise ValueError(f"dimension must lie in [1, {MAX_SOBOL_DIM}]")
    gen = qmc.Sobol(d, scramble=True, seed=seed)
    m = max(int(np.ceil(np.log2(n))), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = gen.random(2 ** m) if n > 1 else gen.random(1)
    return pts[:n].copy()


COSTS = {
    "hardware": lambda traj, profile, model: cost_hardware(traj, profile),
    "smooth": lambda traj, profile, model: cost_smooth(traj),
    "nonsmooth": cost_nonsmooth,
}


@dataclass
class Dataset:
    """Columnar record of rollouts over a Sobol grid of controllers."""

    points: np.ndarray          # (n, d) unit-cube controller parameters
    summaries: np.ndarray       # (n, schema length)
    dog: np.ndarray             # (n,) gait scores
    costs: dict                 # cost id -> (n,)
    duty: np.ndarray            # (n, 2) per-leg duty factors
    walked: np.ndarray          # (n,) bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.points.shape[0]
        cols = [self.summaries, self.dog, self.duty, self.walked] + \
            list(self.costs.values())
        if any(c.shape[0] != n for c in cols):
            raise ValueError("all dataset columns must share the row count")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def point_index(self, x: np.ndarray):
        """Row index of an exact unit-cube point, or None."""
        if not hasattr(self, "_index"):
            self._index = {self.points[i].tobytes(): i for i in range(self.n)}
        return self._index.get(np.ascontiguousarray(x, float).tobytes())


def _collect_row(args):
    (i, u, dims, fid_value, schema, profile_name, t_max,
     thresholds, padding) = args
    model = RobotModel()
    space = ParamSpace(dims, padding)
    profile = PROFILES[profile_name]
    config = SimConfig(fidelity=Fidelity(fid_value), t_max=t_max)
    traj = rollout(space.to_params(u), profile, model, config)
    summary = summarize(traj, schema, model).values
    score = dog_score(traj, thresholds).score
    costs = {cid: fn(traj, profile, model) for cid, fn in COSTS.items()}
    return (i, summary, score, costs, np.array(duty_factor(traj)),
            traj.termination == "completed")


def collect_dataset(n: int, dims: int = 9,
                    fidelity: Fidelity = Fidelity.L1_SIMPLE_GEAR,
                    schema: str = "basic", seed: int = 0,
                    workers: int = None, profile: str = "steady",
                    t_max: float = COLLECTION_T_MAX,
                    thresholds: DogThresholds = DogThresholds(),
                    padding: int = 0) -> Dataset:
    """Roll out the first n Sobol controllers at one fidelity level.

    Row order follows the Sobol index regardless of worker count. Rollout
    divergence is recorded as a fall, never aborts the collection.
    """
    if n < 1:
        raise ValueError("need at least one row")
    if workers is None:
        workers = int(os.environ.get("GAITOPT_WORKERS", "1"))
    pts = sobol_points(n, ParamSpace(dims, padding).d, seed)
    jobs = [(i, pts[i], dims, fidelity.value, schema, profile, t_max,
             thresholds, padding) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_collect_row, jobs, chunksize=32))
    else:
        rows = [_collect_row(j) for j in jobs]
    rows.sort(key=lambda r: r[0])

    summaries = np.stack([r[1] for r in rows])
    dog = np.array([r[2] for r in rows])
    costs = {cid: np.array([r[3][cid] for r in rows]) for cid in COSTS}
    duty = np.stack([r[4] for r in rows])
    walked = np.array([r[5] for r in rows], bool)
    meta = {"n": n, "dims": dims, "padding": padding,
            "fidelity": fidelity.name, "schema": schema,
            "seed": seed, "profile": profile, "t_max": t_max,
            "bounds": ParamSpace(dims, padding).describe()["bounds"],
            "thresholds": [thresholds.clearance, thresholds.height_tol,
                           thresholds.pitch_tol]}
    return Dataset(points=pts, summaries=summaries, dog=dog, costs=costs,
                   duty=duty, walked=walked, meta=meta)


def save_dataset(ds: Dataset, path) -> None:
    """One JSON header record, then one CSV row per Sobol point."""
    cost_ids = sorted(ds.costs)
    header = dict(ds.meta)
    header["columns"] = (
        [f"u{i}" for i in range(ds.points.shape[1])]
        + [f"s{i}" for i in range(ds.summaries.shape[1])]
        + ["dog"] + [f"cost_{c}" for c in cost_ids]
        + ["duty0", "duty1", "walked"])
    header["cost_ids"] = cost_ids
    with open(path, "w") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for i in range(ds.n):
            row = np.concatenate([
                ds.points[i], ds.summaries[i], [ds.dog[i]],
                [ds.costs[c][i] for c in cost_ids], ds.duty[i],
                [float(ds.walked[i])]])
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing dataset header record")
        meta = json.loads(first.lstrip("# "))
        rows = np.array([[float(v) for v in line.split(",")]
                         for line in f if line.strip()])
    d = meta["dims"] + meta.get("padding", 0)
    m = len(SCHEMAS[meta["schema"]])
    cost_ids = meta.pop("cost_ids")
    meta.pop("columns")
    k = d + m
    costs = {c: rows[:, k + 1 + j] for j, c in enumerate(cost_ids)}
    nc = len(cost_ids)
    return Dataset(points=rows[:, :d], summaries=rows[:, d:d + m],
                   dog=rows[:, k], costs=costs,
                   duty=rows[:, k + 1 + nc:k + 3 + nc],
                   walked=rows[:, k + 3 + nc] > 0.5, meta=meta)
