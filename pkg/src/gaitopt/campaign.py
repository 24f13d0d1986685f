"""Method catalog and run assembly for fidelity-transfer BO campaigns.

A campaign compares surrogate strategies that reuse a kernel-source
dataset (collected at a cheaper fidelity) while the objective runs at the
"hardware" fidelity. Each (method, seed) pair yields one RunHistory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import PROFILES, ParamSpace, rollout
from .engine import (BOConfig, BehaviorMap, bo_run, build_behavior_map,
                     build_cost_prior, itne_run)
from .features import COSTS, Dataset, DogThresholds, dog_score
from .gp import (GPHyper, GPModel, KernelSpec, MismatchModel, table_transform,
                 zscore_transform)
from .mlp import MLPWeights, nn_transform
from .robot import Fidelity, RobotModel, SimConfig

METHODS = ("se", "dog", "trajnn", "adjusted_dog", "adjusted_v2_dog",
           "prior", "itne", "itne_noprior")
BO_T_MAX = 10.0
PRIOR_SUBSET = 150


@dataclass
class CampaignConfig:
    methods: tuple = ("se", "dog")
    source_fidelity: Fidelity = Fidelity.L1_SIMPLE_GEAR
    objective_fidelity: Fidelity = Fidelity.L0_HARDWARE
    cost_id: str = "hardware"
    profile: str = "steady"
    dims: int = 9
    padding: int = 0
    seeds: tuple = tuple(range(20))
    budget: int = 50
    candidate_size: int = 1000
    acquisition: str = "ucb"
    no_mismatch: bool = False
    # hardware-side SimConfig field overrides, e.g. extra boom drag to
    # emulate an unmodeled physical effect on the objective only
    objective_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.cost_id not in COSTS:
            raise ValueError(f"unknown cost {self.cost_id!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.source_fidelity == self.objective_fidelity and not self.no_mismatch:
            raise ValueError("kernel-source fidelity equals objective "
                             "fidelity; flag the campaign as no-mismatch")

    def fingerprint(self) -> str:
        blob = json.dumps({
            "methods": sorted(self.methods),
            "source": self.source_fidelity.name,
            "objective": self.objective_fidelity.name,
            "cost": self.cost_id, "profile": self.profile,
            "dims": self.dims, "padding": self.padding,
            "seeds": list(self.seeds),
            "budget": self.budget, "candidates": self.candidate_size,
            "acquisition": self.acquisition,
            "no_mismatch": self.no_mismatch,
            "overrides": dict(sorted(self.objective_overrides.items()))},
            sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_objective(config: CampaignConfig, model: Optional[RobotModel] = None):
    """Hardware-side objective: unit-cube point -> (cost, Trajectory)."""
    robot = model if model is not None else RobotModel()
    space = ParamSpace(config.dims, config.padding)
    profile = PROFILES[config.profile]
    sim = SimConfig(fidelity=config.objective_fidelity, t_max=BO_T_MAX,
                    **config.objective_overrides)
    cost_fn = COSTS[config.cost_id]

    def objective(x):
        traj = rollout(space.to_params(x), profile, robot, sim)
        return cost_fn(traj, profile, robot), traj

    return objective


def candidate_subset(dataset: Dataset, size: int, seed: int) -> np.ndarray:
    """Seeded subset of dataset rows used as the run's candidate set."""
    size = min(size, dataset.n)
    rng = np.random.default_rng(seed)
    # seeded order, not sorted: the tie-break in propose_next picks the
    # first candidate on an empty model, which should vary across runs
    idx = rng.choice(dataset.n, size, replace=False)
    return dataset.points[idx]


def median_lengthscale(dataset: Dataset, phi=None, subset: int = 256) -> float:
    """Median pairwise distance heuristic for the initial GP lengthscale.

    Computed in the method's own feature space (identity for x-space
    kernels) over a fixed seeded subset of dataset rows, so every run of a
    campaign shares the same initialization.
    """
    rng = np.random.default_rng(0)
    idx = rng.choice(dataset.n, min(subset, dataset.n), replace=False)
    if phi is None:
        feats = dataset.points[idx]
    else:
        feats = np.stack([np.atleast_1d(phi(dataset.points[i])) for i in idx])
    dist = np.sqrt(((feats[:, None, :] - feats[None, :, :]) ** 2).sum(-1))
    return float(np.median(dist[np.triu_indices(len(feats), 1)]))


def dog_transform(dataset: Dataset):
    """Standardized gait-score transform backed by dataset rollouts."""
    raw = table_transform(dataset.points, dataset.dog)
    return zscore_transform(raw, dataset.points)


def hw_dog_transform(dataset: Dataset, mean, std):
    """Hardware-side gait score in the same standardized units."""
    thr = DogThresholds(*dataset.meta.get("thresholds", [0.02, 0.02, 0.087]))

    def hw(x, traj):
        return (np.array([dog_score(traj, thr).score]) - mean) / std

    return hw


def build_method_model(method: str, config: CampaignConfig, dataset: Dataset,
                       weights: Optional[MLPWeights], seed: int):
    """(GPModel, hw_transform) for one BO method; None for map methods.

    All surrogates share a dataset-informed initialization: lengthscales
    from the median-distance heuristic in the method's feature space and a
    prior mean pinned at the dataset's mean cost (cost-prior BO keeps its
    lookup mean instead). Hyperparameters are re-fit online once a run
    finds a walking controller.
    """
    d = config.dims + config.padding
    mu = float(np.mean(dataset.costs[config.cost_id]))
    if method == "se":
        ell = median_lengthscale(dataset)
        spec = KernelSpec("se", hyper=GPHyper(lengthscales=ell * np.ones(d),
                                              mean_offset=mu))
        return GPModel(spec, d), None
    if method == "prior":
        ell = median_lengthscale(dataset)
        spec = KernelSpec("se", hyper=GPHyper(lengthscales=ell * np.ones(d)))
        prior = build_cost_prior(dataset, config.cost_id, PRIOR_SUBSET, seed)
        return GPModel(spec, d, mean_fn=prior), None
    if method == "trajnn":
        if weights is None:
            raise ValueError("trajnn method needs trained network weights")
        phi, _, _ = zscore_transform(nn_transform(weights), dataset.points)
        m = weights.spec.output_dim
        ell = median_lengthscale(dataset, phi)
        spec = KernelSpec("transform", transform=phi,
                          hyper=GPHyper(lengthscales=ell * np.ones(m),
                                        mean_offset=mu))
        return GPModel(spec, d), None
    if method in ("dog", "adjusted_dog", "adjusted_v2_dog"):
        phi, mean, std = dog_transform(dataset)
        ell = median_lengthscale(dataset, phi)
        if method == "dog":
            spec = KernelSpec("transform", transform=phi,
                              hyper=GPHyper(lengthscales=ell * np.ones(1),
                                            mean_offset=mu))
            return GPModel(spec, d), None
        mm = MismatchModel(d, 1)
        variant = "adjusted" if method == "adjusted_dog" else "adjusted_v2"
        # the mismatch coordinate starts at zero everywhere and moves by
        # fractions of a feature sigma once hardware data arrives; a finer
        # lengthscale there lets a few observations separate corrected
        # candidates from unexplored ones
        hyper = GPHyper(lengthscales=ell * np.ones(1), mean_offset=mu,
                        ell2=ell / 4 * np.ones(1) if variant == "adjusted" else None)
        spec = KernelSpec(variant, transform=phi, mismatch=mm, hyper=hyper)
        return GPModel(spec, d), hw_dog_transform(dataset, mean, std)
    raise ValueError(f"{method!r} is not a surrogate-model method")


def first_walk_median(histories, budget: int) -> float:
    """Median first-walk trial with never-walked runs right-censored.

    first_walk is a 0-based trial index; runs that never walk enter as
    budget (one past the last index), so the median is a real trial index
    whenever fewer than half the runs are censored.
    """
    vals = sorted(budget if h.first_walk is None else h.first_walk
                  for h in histories)
    n = len(vals)
    if n == 0:
        raise ValueError("need at least one run")
    mid = n // 2
    return float(vals[mid]) if n % 2 else (vals[mid - 1] + vals[mid]) / 2.0


def run_method(method: str, config: CampaignConfig, dataset: Dataset,
               weights: Optional[MLPWeights], seed: int,
               bmap: Optional[BehaviorMap] = None):
    """Execute one (method, seed) run and return its RunHistory."""
    objective = make_objective(config)
    fp = config.fingerprint()
    if method in ("itne", "itne_noprior"):
        if bmap is None:
            bmap = build_behavior_map(dataset, config.cost_id)
        return itne_run(bmap, seed, objective, config.budget,
                        use_prior=(method == "itne"), fingerprint=fp)
    model, hw = build_method_model(method, config, dataset, weights, seed)
    cands = candidate_subset(dataset, config.candidate_size, seed)
    bo_cfg = BOConfig(budget=config.budget,
                      candidate_size=cands.shape[0],
                      acquisition=config.acquisition,
                      kernel_id=method, seed=seed, dims=config.dims)
    return bo_run(bo_cfg, objective, candidates=cands, model=model,
                  hw_transform=hw, fingerprint=fp)
