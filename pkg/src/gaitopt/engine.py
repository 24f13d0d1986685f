"""Bayesian-optimization loop, cost priors and the behavior-map baseline."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import norm

from .features import Dataset, duty_factor, sobol_points
from .gp import GPHyper, GPModel, KernelSpec, mismatch_update, optimize_hypers

WALK_COST = 100.0
GRID_CELLS = 21
GRID_STEP = 0.05
MAP_DEPTH = 5
ITNE_ELL = 0.1


@dataclass
class BOConfig:
    budget: int = 50
    candidate_size: int = 1000
    acquisition: str = "ei"       # "ei" | "ucb"
    beta: float = 2.0
    kernel_id: str = "se"
    trigger: bool = True          # start hyper optimization after first walk
    opt_period: int = 3           # trials between evidence optimizations
    opt_restarts: int = 5
    seed: int = 0
    dims: int = 9

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.candidate_size < self.budget:
            raise ValueError("candidate set must cover the trial budget")
        if self.acquisition not in ("ei", "ucb"):
            raise ValueError("acquisition must be 'ei' or 'ucb'")
        if self.opt_period < 1:
            raise ValueError("optimization period must be at least 1")


@dataclass
class TrialRecord:
    index: int
    point: np.ndarray
    cost: float
    walked: bool
    phi_sim: Optional[list] = None
    phi_hw: Optional[list] = None
    wall_time: float = 0.0


@dataclass
class RunHistory:
    trials: list
    best_curve: np.ndarray
    first_walk: Optional[int]
    seed: int
    fingerprint: str = ""
    valid: bool = True
    exhausted: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.best_curve) > 0):
            raise ValueError("best-so-far curve must be non-increasing")

    @property
    def best_cost(self) -> float:
        return float(self.best_curve[-1]) if len(self.best_curve) else np.inf


def expected_improvement(mean, variance, best) -> np.ndarray:
    """EI for minimization; handles zero variance exactly."""
    mean = np.asarray(mean, float)
    var = np.asarray(variance, float)
    if np.any(var < 0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(var)
    improve = best - mean
    out = np.maximum(improve, 0.0)
    pos = sigma > 0
    z = np.where(pos, improve / np.where(pos, sigma, 1.0), 0.0)
    ei = improve * norm.cdf(z) + sigma * norm.pdf(z)
    return np.where(pos, ei, out)


def _acquisition_values(model: GPModel, candidates, acquisition, beta, best):
    mean, var = model.posterior(candidates)
    if acquisition == "ucb":
        return -mean + beta * np.sqrt(np.maximum(var, 0.0))
    if model.n == 0 or not np.isfinite(best):
        # no observations: EI is undefined, fall back to prior-mean ranking
        return -mean
    return expected_improvement(mean, var, best)


def propose_next(model: GPModel, candidates: np.ndarray, acquisition: str = "ei",
                 beta: float = 2.0, evaluated=None) -> int:
    """Index of the acquisition argmax over unevaluated candidates.

    Exact ties resolve to the lowest candidate index.
    """
    candidates = np.atleast_2d(candidates)
    if candidates.shape[0] == 0:
        raise ValueError("candidate set is empty")
    taken = set() if evaluated is None else set(evaluated)
    free = [i for i in range(candidates.shape[0]) if i not in taken]
    if not free:
        raise RuntimeError("all candidates evaluated; budget exceeds pool")
    best = float(np.min(model.y)) if model.n else np.inf
    acq = _acquisition_values(model, candidates[free], acquisition, beta, best)
    return free[int(np.argmax(acq))]


def bo_run(config: BOConfig, objective: Callable,
           candidates: Optional[np.ndarray] = None,
           model: Optional[GPModel] = None,
           hw_transform: Optional[Callable] = None,
           fingerprint: str = "") -> RunHistory:
    """Propose/evaluate/record loop over a fixed candidate set.

    objective: unit-cube point -> (cost, Trajectory). For adjusted kernels,
    hw_transform(x, traj) supplies the hardware-side feature value and each
    trial feeds the mismatch model. Hyperparameter optimization starts at
    the first walked trial, then repeats every opt_period trials.
    """
    if candidates is None:
        candidates = sobol_points(config.candidate_size, config.dims,
                                  config.seed)
    if model is None:
        model = GPModel(KernelSpec("se", hyper=GPHyper(
            lengthscales=np.ones(candidates.shape[1]))), candidates.shape[1])
    adjusted = model.spec.variant in ("adjusted", "adjusted_v2")

    trials = []
    best_curve = []
    evaluated = []
    first_walk = None
    triggered = False
    last_opt = -10
    valid = True
    for t in range(config.budget):
        t0 = time.perf_counter()
        try:
            idx = propose_next(model, candidates, config.acquisition,
                               config.beta, evaluated)
        except np.linalg.LinAlgError:
            valid = False
            break
        x = candidates[idx]
        cost, traj = objective(x)
        cost = float(cost)
        evaluated.append(idx)
        model.add(x, cost)

        walked = traj.walked if traj is not None else cost < WALK_COST
        phi_sim_val = phi_hw_val = None
        if adjusted and hw_transform is not None:
            phi_sim_val = np.atleast_1d(np.asarray(model.spec.transform(x), float))
            phi_hw_val = np.atleast_1d(np.asarray(hw_transform(x, traj), float))
            mismatch_update(model.spec.mismatch, x, phi_sim_val, phi_hw_val)

        if walked and first_walk is None:
            first_walk = t
        best_curve.append(cost if not best_curve
                          else min(best_curve[-1], cost))
        trials.append(TrialRecord(
            index=t, point=x.copy(), cost=cost, walked=walked,
            phi_sim=None if phi_sim_val is None else phi_sim_val.tolist(),
            phi_hw=None if phi_hw_val is None else phi_hw_val.tolist(),
            wall_time=time.perf_counter() - t0))

        if walked and config.trigger:
            triggered = True
        if triggered and model.n >= 2 and t - last_opt >= config.opt_period:
            try:
                optimize_hypers(model, restarts=config.opt_restarts,
                                seed=config.seed * 1000 + t)
            except np.linalg.LinAlgError:
                valid = False
                break
            last_opt = t
    return RunHistory(trials=trials, best_curve=np.array(best_curve),
                      first_walk=first_walk, seed=config.seed,
                      fingerprint=fingerprint, valid=valid)


def build_cost_prior(dataset: Dataset, cost_id: str, subset_size: int,
                     seed: int) -> Callable:
    """Nearest-neighbor prior mean over a seeded random dataset subset."""
    if cost_id not in dataset.costs:
        raise ValueError(f"dataset has no cost column {cost_id!r}")
    subset_size = min(subset_size, dataset.n)
    if subset_size < 1:
        raise ValueError("subset must be nonempty")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(dataset.n, subset_size, replace=False))
    pts = dataset.points[idx]
    costs = dataset.costs[cost_id][idx]
    tree = cKDTree(pts)

    def prior(x):
        _, j = tree.query(np.asarray(x, float).reshape(1, -1))
        return float(costs[int(j[0])])

    prior.subset_indices = idx
    return prior


@dataclass
class BehaviorMap:
    """21x21 duty-factor grid; each cell keeps the lowest-cost controllers."""

    cells: dict                   # (i, j) -> list of (cost, row index)
    dataset: Dataset
    cost_id: str
    meta: dict = field(default_factory=dict)

    def occupied(self) -> list:
        return sorted(self.cells)


def duty_cell(df: float) -> int:
    if not 0.0 <= df <= 1.0:
        raise ValueError("duty factor must lie in [0, 1]")
    return min(int(df / GRID_STEP), GRID_CELLS - 1)


def build_behavior_map(dataset: Dataset, cost_id: str = "hardware",
                       walked_only: bool = False) -> BehaviorMap:
    """Bin dataset rows by duty-factor pair, keep 5 lowest-cost per cell."""
    if cost_id not in dataset.costs:
        raise ValueError(f"dataset has no cost column {cost_id!r}")
    cells = {}
    costs = dataset.costs[cost_id]
    for r in range(dataset.n):
        if walked_only and not dataset.walked[r]:
            continue
        key = (duty_cell(dataset.duty[r, 0]), duty_cell(dataset.duty[r, 1]))
        cells.setdefault(key, []).append((float(costs[r]), r))
    for key in cells:
        cells[key] = sorted(cells[key])[:MAP_DEPTH]
    return BehaviorMap(cells=cells, dataset=dataset, cost_id=cost_id,
                       meta={"fidelity": dataset.meta.get("fidelity"),
                             "seed": dataset.meta.get("seed")})


def itne_run(bmap: BehaviorMap, variant_seed: int, objective: Callable,
             budget: int, use_prior: bool = True, acquisition: str = "ei",
             beta: float = 2.0, fingerprint: str = "") -> RunHistory:
    """BO over the behavior map: one seeded pick per occupied cell.

    The search domain is the occupied cells with a 2D SE kernel over
    duty-factor coordinates; with use_prior the prior mean at a cell is its
    selected controller's simulation cost. The proposed cell's controller
    is evaluated on the objective.
    """
    keys = bmap.occupied()
    if not keys:
        raise ValueError("behavior map is empty")
    rng = np.random.default_rng(variant_seed)
    picks = [bmap.cells[k][int(rng.integers(len(bmap.cells[k])))] for k in keys]
    coords = np.array([[(k[0] + 0.5) * GRID_STEP, (k[1] + 0.5) * GRID_STEP]
                       for k in keys])
    sim_costs = np.array([p[0] for p in picks])
    prior_fn = None
    if use_prior:
        prior_tbl = {coords[i].tobytes(): sim_costs[i] for i in range(len(keys))}

        def prior_fn(x):
            return prior_tbl[np.ascontiguousarray(x, float).tobytes()]

    model = GPModel(KernelSpec("se", hyper=GPHyper(
        lengthscales=np.full(2, ITNE_ELL))), 2, mean_fn=prior_fn)

    trials = []
    best_curve = []
    evaluated = []
    first_walk = None
    exhausted = budget > len(keys)
    for t in range(min(budget, len(keys))):
        t0 = time.perf_counter()
        idx = propose_next(model, coords, acquisition, beta, evaluated)
        row = picks[idx][1]
        x = bmap.dataset.points[row]
        cost, traj = objective(x)
        cost = float(cost)
        evaluated.append(idx)
        model.add(coords[idx], cost)
        walked = traj.walked if traj is not None else cost < WALK_COST
        if walked and first_walk is None:
            first_walk = t
        best_curve.append(cost if not best_curve
                          else min(best_curve[-1], cost))
        trials.append(TrialRecord(index=t, point=x.copy(), cost=cost,
                                  walked=walked,
                                  phi_sim=[float(sim_costs[idx])],
                                  wall_time=time.perf_counter() - t0))
    return RunHistory(trials=trials, best_curve=np.array(best_curve),
                      first_walk=first_walk, seed=variant_seed,
                      fingerprint=fingerprint, exhausted=exhausted)


def save_history(hist: RunHistory, path) -> None:
    payload = {
        "seed": hist.seed, "fingerprint": hist.fingerprint,
        "valid": hist.valid, "exhausted": hist.exhausted,
        "first_walk": hist.first_walk,
        "best_curve": hist.best_curve.tolist(),
        "trials": [{"index": tr.index, "point": tr.point.tolist(),
                    "cost": tr.cost, "walked": tr.walked,
                    "phi_sim": tr.phi_sim, "phi_hw": tr.phi_hw,
                    "wall_time": tr.wall_time} for tr in hist.trials],
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_history(path) -> RunHistory:
    with open(path) as f:
        p = json.load(f)
    trials = [TrialRecord(index=tr["index"], point=np.array(tr["point"]),
                          cost=tr["cost"], walked=tr["walked"],
                          phi_sim=tr["phi_sim"], phi_hw=tr["phi_hw"],
                          wall_time=tr["wall_time"]) for tr in p["trials"]]
    return RunHistory(trials=trials, best_curve=np.array(p["best_curve"]),
                      first_walk=p["first_walk"], seed=p["seed"],
                      fingerprint=p["fingerprint"], valid=p["valid"],
                      exhausted=p["exhausted"])
