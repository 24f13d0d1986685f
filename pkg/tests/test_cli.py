"""End-to-end command-line workflow on a small dataset."""

import json

import numpy as np
import pytest
import yaml

from gaitopt.cli import main
from gaitopt.features import load_dataset
from gaitopt.mlp import load_weights
from gaitopt.reports import load_reports


def write_yaml(path, payload):
    with open(path, "w") as f:
        yaml.safe_dump(payload, f)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, capsys=None):
    """Dataset + campaign run via the CLI, shared by the checks below."""
    root = tmp_path_factory.mktemp("cli")
    collect_cfg = root / "collect.yaml"
    write_yaml(collect_cfg, {"n": 48, "dims": 5, "seed": 2,
                             "fidelity": "L2_NO_BOOM",
                             "out": str(root / "ds.csv")})
    assert main(["collect", "--config", str(collect_cfg)]) == 0
    bo_cfg = root / "bo.yaml"
    write_yaml(bo_cfg, {"methods": ["se", "dog"], "dims": 5,
                        "source_fidelity": "L2_NO_BOOM",
                        "seeds": [0, 1], "budget": 4, "candidate_size": 48,
                        "dataset": str(root / "ds.csv"),
                        "outdir": str(root / "runs")})
    assert main(["bo", "--config", str(bo_cfg)]) == 0
    return root


def test_collect_rows_and_rerun_identical(workdir, tmp_path):
    ds = load_dataset(workdir / "ds.csv")
    assert ds.n == 48
    assert ds.meta["fidelity"] == "L2_NO_BOOM"
    cfg = tmp_path / "c.yaml"
    write_yaml(cfg, {"n": 48, "dims": 5, "seed": 2, "fidelity": "L2_NO_BOOM",
                     "out": str(tmp_path / "ds.csv")})
    assert main(["collect", "--config", str(cfg)]) == 0
    assert (tmp_path / "ds.csv").read_bytes() == \
        (workdir / "ds.csv").read_bytes()


def test_train_nn(workdir):
    out = workdir / "w.json"
    assert main(["train-nn", "--dataset", str(workdir / "ds.csv"),
                 "--out", str(out), "--hidden", "8", "--seed", "1"]) == 0
    w = load_weights(out)
    assert w.spec.input_dim == 5
    assert w.meta["seed"] == 1


def test_bo_outputs_and_resume(workdir, capsys):
    runs = workdir / "runs"
    files = sorted(p.name for p in runs.glob("*_seed*.json"))
    assert files == ["dog_seed0.json", "dog_seed1.json",
                     "se_seed0.json", "se_seed1.json"]
    manifest = json.loads((runs / "manifest.json").read_text())
    assert set(manifest["run_files"]) == {"se", "dog"}
    assert len(manifest["fingerprint"]) == 16
    bo_cfg = workdir / "bo.yaml"
    capsys.readouterr()
    assert main(["bo", "--config", str(bo_cfg)]) == 0
    assert "0 new runs, 4 total" in capsys.readouterr().out


def test_report_outputs(workdir):
    out = workdir / "reports"
    fig = workdir / "fig.png"
    assert main(["report", "--runs", str(workdir / "runs"),
                 "--out", str(out), "--figure", str(fig)]) == 0
    combined = load_reports(out / "report_combined.csv")
    assert [r.method for r in combined] == ["dog", "se"]
    assert all(r.n_runs == 2 and r.budget == 4 for r in combined)
    single = load_reports(out / "report_se.csv")
    np.testing.assert_array_equal(single[0].mean_best, combined[1].mean_best)
    assert fig.stat().st_size > 0


def test_itne_map_json(workdir):
    out = workdir / "map.json"
    assert main(["itne-map", "--dataset", str(workdir / "ds.csv"),
                 "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["occupied"] == len(payload["cells"]) > 0
    assert all(1 <= len(v) <= 5 for v in payload["cells"].values())


def test_missing_inputs_exit_nonzero(workdir, tmp_path, capsys):
    cfg = tmp_path / "bo.yaml"
    write_yaml(cfg, {"methods": ["se"], "dataset": str(tmp_path / "no.csv"),
                     "seeds": [0], "budget": 2, "candidate_size": 10})
    assert main(["bo", "--config", str(cfg)]) == 1
    assert "not found" in capsys.readouterr().err
    assert main(["report", "--runs", str(tmp_path / "empty"),
                 "--out", str(tmp_path / "r")]) == 1
    cfg2 = tmp_path / "c.yaml"
    write_yaml(cfg2, {"n": 4, "dims": 5, "fidelity": "L9_BOGUS"})
    assert main(["collect", "--config", str(cfg2)]) == 1
