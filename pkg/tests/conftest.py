"""Shared fixtures: cached datasets and network weights for slow tests.

Artifacts live in a cache directory (GAITOPT_TEST_CACHE, default under
/tmp) and are rebuilt from scratch when missing, so a cold run is slow but
correct and reruns are fast.
"""

import os
from pathlib import Path

import pytest

from gaitopt.features import collect_dataset, load_dataset, save_dataset
from gaitopt.mlp import load_weights, save_weights, train
from gaitopt.robot import Fidelity

CACHE = Path(os.environ.get("GAITOPT_TEST_CACHE", "/tmp/gaitopt_cache"))


def _cached_dataset(name, **kwargs):
    path = CACHE / f"{name}.csv"
    if path.exists():
        return load_dataset(path)
    CACHE.mkdir(parents=True, exist_ok=True)
    ds = collect_dataset(**kwargs)
    save_dataset(ds, path)
    return ds


def _cached_weights(name, dataset):
    path = CACHE / f"{name}.json"
    if path.exists():
        return load_weights(path)
    CACHE.mkdir(parents=True, exist_ok=True)
    w = train(dataset.points, dataset.summaries, seed=0)
    save_weights(w, path)
    return w


@pytest.fixture(scope="session")
def ds_l1_9d():
    """2000-row 9D collection at L1, the walk-rate regression fixture."""
    return _cached_dataset("l1_9d", n=2000, dims=9,
                           fidelity=Fidelity.L1_SIMPLE_GEAR,
                           schema="basic", seed=0)


@pytest.fixture(scope="session")
def ds_l1_pad16():
    """Padded (9+16 dims) L1 dataset: kernel source for the low-mismatch
    campaign."""
    return _cached_dataset("l1_pad16", n=2000, dims=9, padding=16,
                           fidelity=Fidelity.L1_SIMPLE_GEAR,
                           schema="basic", seed=0)


@pytest.fixture(scope="session")
def nn_l1_pad16(ds_l1_pad16):
    return _cached_weights("nn_l1_pad16", ds_l1_pad16)


@pytest.fixture(scope="session")
def ds_l2_9d():
    """9D L2 dataset: kernel source for the severe-mismatch campaign."""
    return _cached_dataset("l2_9d", n=2000, dims=9,
                           fidelity=Fidelity.L2_NO_BOOM,
                           schema="basic", seed=0)


@pytest.fixture(scope="session")
def ds_l1_ramp_pad16():
    """Padded L1 dataset collected under the ramp speed profile."""
    return _cached_dataset("l1_ramp_pad16", n=2000, dims=9, padding=16,
                           fidelity=Fidelity.L1_SIMPLE_GEAR,
                           schema="basic", seed=0, profile="ramp")


@pytest.fixture(scope="session")
def nn_l1_ramp(ds_l1_ramp_pad16):
    return _cached_weights("nn_l1_ramp", ds_l1_ramp_pad16)
