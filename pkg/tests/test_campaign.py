"""Campaign assembly: config validation, fingerprints, objective overrides
and per-method surrogate construction."""

import numpy as np
import pytest

from gaitopt.campaign import (CampaignConfig, build_method_model,
                              candidate_subset, first_walk_median,
                              make_objective, median_lengthscale)
from gaitopt.engine import RunHistory
from gaitopt.features import Dataset
from gaitopt.robot import Fidelity


def synthetic_dataset(n=200, d=3, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, d))
    costs = np.sum((pts - 0.5) ** 2, 1) * 10
    return Dataset(points=pts, summaries=rng.random((n, 4)),
                   dog=rng.random(n) * 8,
                   costs={"hardware": costs},
                   duty=rng.random((n, 2)), walked=costs < 1.0,
                   meta={"fidelity": "L2_NO_BOOM", "seed": seed})


def test_config_validation():
    with pytest.raises(ValueError):
        CampaignConfig(methods=("se", "gradient"))
    with pytest.raises(ValueError):
        CampaignConfig(cost_id="nope")
    with pytest.raises(ValueError):
        CampaignConfig(seeds=(0, 1, 1))
    with pytest.raises(ValueError):
        CampaignConfig(source_fidelity=Fidelity.L0_HARDWARE,
                       objective_fidelity=Fidelity.L0_HARDWARE)
    # equal fidelities are fine when declared mismatch-free
    CampaignConfig(source_fidelity=Fidelity.L0_HARDWARE,
                   objective_fidelity=Fidelity.L0_HARDWARE, no_mismatch=True)


def test_fingerprint_sensitivity():
    base = CampaignConfig()
    same = CampaignConfig()
    assert base.fingerprint() == same.fingerprint()
    variants = [CampaignConfig(budget=49),
                CampaignConfig(profile="variable"),
                CampaignConfig(seeds=tuple(range(19))),
                CampaignConfig(objective_overrides={"boom_drag": 60.0}),
                CampaignConfig(acquisition="ei"),
                CampaignConfig(source_fidelity=Fidelity.L2_NO_BOOM)]
    prints = {v.fingerprint() for v in variants}
    assert len(prints) == len(variants)
    assert base.fingerprint() not in prints


def test_candidate_subset_determinism():
    ds = synthetic_dataset()
    a = candidate_subset(ds, 50, seed=4)
    assert a.shape == (50, 3)
    assert np.array_equal(a, candidate_subset(ds, 50, seed=4))
    assert not np.array_equal(a, candidate_subset(ds, 50, seed=5))
    rows = {p.tobytes() for p in ds.points}
    assert all(p.tobytes() in rows for p in a)
    assert candidate_subset(ds, 10_000, seed=0).shape == (ds.n, 3)


def test_median_lengthscale():
    ds = synthetic_dataset(n=120)
    ell = median_lengthscale(ds)
    # brute-force oracle over the same seeded subset
    rng = np.random.default_rng(0)
    idx = rng.choice(ds.n, 120, replace=False)
    feats = ds.points[idx]
    dists = [float(np.linalg.norm(feats[i] - feats[j]))
             for i in range(120) for j in range(i + 1, 120)]
    assert ell == pytest.approx(np.median(dists), rel=1e-12)
    # transform-space variant uses phi, not x
    ell1 = median_lengthscale(ds, phi=lambda x: np.array([0.0]))
    assert ell1 == 0.0


def test_make_objective_override_changes_cost():
    cfg = CampaignConfig(dims=9, budget=2, candidate_size=2)
    hard = CampaignConfig(dims=9, budget=2, candidate_size=2,
                          objective_overrides={"boom_drag": 60.0})
    x = np.full(9, 0.5)
    c0, traj0 = make_objective(cfg)(x)
    c1, traj1 = make_objective(hard)(x)
    assert traj0.t_max == 10.0
    assert (c0, traj0.com[-1, 0]) != (c1, traj1.com[-1, 0])
    # same config evaluates deterministically
    c2, _ = make_objective(cfg)(x)
    assert c0 == c2


def test_build_method_models():
    ds = synthetic_dataset()
    cfg = CampaignConfig(methods=("se",), dims=3, padding=0, budget=10,
                         candidate_size=50,
                         source_fidelity=Fidelity.L2_NO_BOOM)
    mu = float(np.mean(ds.costs["hardware"]))

    m, hw = build_method_model("se", cfg, ds, None, seed=0)
    assert hw is None
    assert m.spec.variant == "se"
    assert m.spec.hyper.mean_offset == mu
    assert m.spec.hyper.lengthscales.shape == (3,)

    m, hw = build_method_model("prior", cfg, ds, None, seed=0)
    assert m.mean_fn is not None
    assert m.spec.hyper.mean_offset == 0.0

    m, hw = build_method_model("dog", cfg, ds, None, seed=0)
    assert hw is None
    assert m.spec.variant == "transform"
    assert m.spec.hyper.lengthscales.shape == (1,)

    m, hw = build_method_model("adjusted_dog", cfg, ds, None, seed=0)
    assert m.spec.variant == "adjusted"
    assert hw is not None
    np.testing.assert_allclose(m.spec.hyper.ell2,
                               m.spec.hyper.lengthscales / 4)

    m, hw = build_method_model("adjusted_v2_dog", cfg, ds, None, seed=0)
    assert m.spec.variant == "adjusted_v2"
    assert m.spec.hyper.ell2 is None

    with pytest.raises(ValueError):
        build_method_model("trajnn", cfg, ds, None, seed=0)
    with pytest.raises(ValueError):
        build_method_model("itne", cfg, ds, None, seed=0)


def test_dog_transform_standardized():
    ds = synthetic_dataset()
    cfg = CampaignConfig(methods=("dog",), dims=3,
                         source_fidelity=Fidelity.L2_NO_BOOM)
    m, _ = build_method_model("dog", cfg, ds, None, seed=0)
    vals = np.array([m.spec.transform(p)[0] for p in ds.points])
    assert np.mean(vals) == pytest.approx(0.0, abs=1e-10)
    assert np.std(vals) == pytest.approx(1.0, rel=1e-10)


def make_hist(first_walk):
    return RunHistory(trials=[], best_curve=np.array([5.0]),
                      first_walk=first_walk, seed=0)


def test_first_walk_median_censoring():
    hs = [make_hist(v) for v in (3, 7, None, 1)]
    # censored run counts as budget=50: sorted [1, 3, 7, 50] -> 5.0
    assert first_walk_median(hs, 50) == 5.0
    assert first_walk_median([make_hist(None)] * 3, 50) == 50.0
    assert first_walk_median([make_hist(4)], 50) == 4.0
    with pytest.raises(ValueError):
        first_walk_median([], 50)
