import csv
import json

import numpy as np
import pytest
import yaml

from mnic import cli
from mnic.cli import ConfigError, ExperimentConfig, emit_plotdata
from mnic.genmodels import GMMSpec, NormGrowthTrace, norm_growth_experiment, region_grid
from mnic.interpolator import fit_batch
from mnic.kernels import Dataset, KernelSpec

FIT_DATA = {
    "X": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
    "y": [1.0, -1.0, 1.0, -1.0],
}


def write_config(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_fit_inline_dataset(tmp_path):
    cfg = {"command": "fit", "seed": 0, "kernel": {"kind": "gaussian", "bandwidth": 1.0},
           "data": FIT_DATA}
    out = tmp_path / "out"
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "fit.csv")
    assert rows[0] == ["quantity", "index", "value"]
    duals = [float(r[2]) for r in rows[1:] if r[0] == "dual"]
    norm = [float(r[2]) for r in rows[1:] if r[0] == "norm_sq"]
    state = fit_batch(KernelSpec.gaussian(1.0), 0.0, Dataset(FIT_DATA["X"], FIT_DATA["y"]))
    np.testing.assert_array_equal(duals, state.dual)
    assert norm == [state.norm_sq]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["fit.csv"]
    assert manifest["config"]["kernel"]["kind"] == "gaussian"
    assert len(manifest["config_hash"]) == 64


def test_region_map_default_grid(tmp_path):
    cfg = {"command": "region-map", "seed": 1, "region": {"alpha": 0.3}}
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "region-map.csv")
    assert rows[0] == cli.REGION_HEADER
    assert len(rows) == 2501
    assert {r[3] for r in rows[1:]} <= {"Unknown", "Decaying_Ridge", "Decaying_Interpolation"}


@pytest.mark.parametrize("cfg", [
    {"command": "online", "seed": 3, "model": {"kind": "gmm", "mu": 1.0, "psi": 2.0}, "n": 30},
    {"command": "regret", "seed": 3, "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n": 25},
    {"command": "simulate-gmm", "seed": 4, "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0},
     "n_grid": [10, 20], "trials": 3},
    {"command": "simulate-mixture", "seed": 5, "n_grid": [10, 20], "trials": 2,
     "model": {"kind": "mixture", "mu": 2.0, "p": 60, "alpha": 0.3, "noise": "student_t", "dof": 6}},
    {"command": "separation", "seed": 6, "model": {"kind": "gmm", "mu": 1.0, "d": 40}, "n": 15,
     "separation": {"redraws": 20}},
    {"command": "sweep", "seed": 7, "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0},
     "n_grid": [10, 20], "trials": 3, "test_size": 50},
], ids=lambda c: c["command"])
def test_commands_deterministic(tmp_path, cfg):
    path = write_config(tmp_path, cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--config", path, "--out", str(a)]) == 0
    assert cli.main(["--config", path, "--out", str(b), "--threads", "2"]) == 0
    primary = f"{cfg['command']}.csv"
    assert (a / primary).read_bytes() == (b / primary).read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_regret_command_outputs(tmp_path):
    cfg = {"command": "regret", "seed": 3, "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n": 25}
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "regret.csv")
    rec = dict(zip(rows[0], rows[1]))
    assert all(rec[k] == "true" for k in rec if k.startswith("holds_"))
    steps = read_csv(tmp_path / "regret_per_step.csv")
    assert steps[0] == cli.ONLINE_HEADER and len(steps) == 26


def test_seed_override_changes_output(tmp_path):
    cfg = {"command": "online", "seed": 1, "model": {"kind": "gmm", "mu": 1.0}, "n": 10}
    path = write_config(tmp_path, cfg)
    cli.main(["--config", path, "--out", str(tmp_path / "a")])
    cli.main(["--config", path, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "online.csv").read_bytes() != (tmp_path / "b" / "online.csv").read_bytes()
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 2


def test_jsonl_format(tmp_path):
    cfg = {"command": "fit", "seed": 0, "data": FIT_DATA, "format": "jsonl",
           "kernel": {"kind": "gaussian", "bandwidth": 1.0}}
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "fit.jsonl").read_text().splitlines()
    recs = [json.loads(line) for line in lines]
    assert recs[0]["quantity"] == "dual"
    assert set(recs[0]) == {"quantity", "index", "value"}


@pytest.mark.parametrize("cfg", [
    {"command": "fit"},
    {"command": "bogus", "seed": 1},
    {"command": "fit", "seed": -1},
    {"command": "simulate-gmm", "seed": 1, "n_grid": [20, 10], "model": {"kind": "gmm", "mu": 1.0}},
    {"command": "fit", "seed": 1, "colour": "red"},
    {"command": "region-map", "seed": 1, "region": {"alpha": 0.7}},
    {"command": "sweep", "seed": 1},
])
def test_invalid_config_exit_2(tmp_path, cfg):
    out = tmp_path / "o"
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(out)]) == 2
    err = json.loads((out / "error.json").read_text())
    assert err["kind"] == "invalid_config"


def test_missing_config_file(tmp_path):
    assert cli.main(["--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2


def test_rank_deficient_exit_3(tmp_path):
    data = {"X": [[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]], "y": [1.0, -1.0, 1.0]}
    cfg = {"command": "online", "seed": 0, "data": data}
    out = tmp_path / "o"
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["kind"] == "numerical_failure"
    assert err["step"] == 2
    assert abs(err["s_sq"]) < 1e-10
    # lenient mode skips the in-span point instead
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(out), "--lenient"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["info"]["skipped"] == [2]


def test_data_file_reader(tmp_path):
    mat = tmp_path / "data.csv"
    mat.write_text("1,0,1\n0,1,-1\n")
    cfg = {"command": "fit", "seed": 0, "data": {"path": str(mat)}}
    assert cli.main(["--config", write_config(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fit.csv")
    assert [r[2] for r in rows[1:3]] == ["1.0", "-1.0"]


def test_config_hash_ignores_output_dir():
    base = {"command": "fit", "seed": 1, "data": FIT_DATA}
    a = ExperimentConfig.from_dict({**base, "output_dir": "x"})
    b = ExperimentConfig.from_dict({**base, "output_dir": "y"})
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig.from_dict({**base, "seed": 2}).hash()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**base, "seed": 2 ** 64})


def test_fmt_value_round_trip():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(cli.fmt_value(v)) == v
    assert cli.fmt_value(np.float64(0.1)) == "0.1"
    assert cli.fmt_value(None) == ""


def test_emit_plotdata_empty_trace(tmp_path):
    empty = NormGrowthTrace(np.array([], dtype=int), np.zeros((0, 0)), np.zeros((0, 0)),
                            np.array([]), np.array([]))
    path = emit_plotdata(empty, tmp_path / "empty.csv")
    assert read_csv(path) == [cli.PLOT_HEADER]


def test_emit_plotdata_gmm_trace(tmp_path):
    trace = norm_growth_experiment(GMMSpec(mu=2.0, psi=2.0), [10, 20], 3, 0)
    rows = read_csv(emit_plotdata(trace, tmp_path / "t.csv"))
    bounds = [r for r in rows[1:] if r[2] == "theory_bound"]
    assert [float(r[3]) for r in bounds] == [0.5, 0.5]
    assert rows[0] == cli.PLOT_HEADER


def test_emit_plotdata_region_grid(tmp_path):
    grid = region_grid(0.3, np.linspace(0.1, 3, 50), np.linspace(1.1, 4, 50))
    rows = read_csv(emit_plotdata(grid, tmp_path / "r.csv"))
    assert rows[0] == cli.REGION_HEADER and len(rows) == 2501
