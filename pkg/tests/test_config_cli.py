import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgres import config as cfgmod
from kgres.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from kgres.config import ConfigError, RunConfig


def read_json(path):
    return json.loads(path.read_text())


def test_round_trip_and_hash():
    cfg = RunConfig()
    again = cfgmod.loads(cfgmod.dumps(cfg))
    assert again == cfg
    assert cfgmod.config_hash(again) == cfgmod.config_hash(cfg)
    other = cfgmod.apply_override(cfg, "model.epsilon=0.003")
    assert other.model.epsilon == 0.003
    assert cfgmod.config_hash(other) != cfgmod.config_hash(cfg)


def test_unknown_keys_rejected():
    data = cfgmod.to_dict(RunConfig())
    data["model"]["bogus"] = 1
    with pytest.raises(ConfigError):
        cfgmod.from_dict(data)
    with pytest.raises(ConfigError):
        cfgmod.apply_override(RunConfig(), "solver.nope=3")
    with pytest.raises(ConfigError):
        cfgmod.apply_override(RunConfig(), "solver.dt_factor")


def test_validation_rejects_bad_values():
    for bad in ("model.alpha0=2.0", "wkb.precision=\"medium\"", "symflow.kind=\"zz\"", "solver.n_points=1000",
                "harness.K=0.5", "symflow.window_h=-1"):
        with pytest.raises(ConfigError):
            cfgmod.validate(cfgmod.apply_override(RunConfig(), bad))


def test_experiment_config_mapping():
    cfg = cfgmod.apply_override(RunConfig(), "harness.fit_window=[0.2, 0.8]")
    e = cfgmod.experiment_config(cfg, epsilon=3e-3)
    assert e.epsilon == 3e-3 and e.fit_window == (0.2, 0.8)
    assert e.K == cfg.harness.K and e.n_points == cfg.solver.n_points


def test_cli_rejects_regime_violation(tmp_path):
    code = main(["analyze", "--out", str(tmp_path), "--override", "model.alpha0=2.0", "--quiet"])
    assert code == EXIT_CONFIG
    fail = read_json(tmp_path / "failure.json")
    assert fail["stage"] == "config"


def test_cli_analyze(tmp_path):
    code = main(["analyze", "--out", str(tmp_path), "--window-h", "0.05", "--quiet"])
    assert code == EXIT_OK
    audit = read_json(tmp_path / "analyze" / "audit.json")
    assert audit["classification_matches"] and audit["weak_transparency"]["passed"]
    assert audit["windows"]["radius"] == 0.05
    assert audit["Gamma"] == 0.0
    cfg = read_json(tmp_path / "analyze" / "config.json")
    assert cfg["symflow"]["window_h"] == 0.05
    assert audit["config_hash"] == cfgmod.config_hash(cfgmod.from_dict(cfg))


def test_cli_linear_simulate_reports_conservation(tmp_path):
    args = ["simulate", "--out", str(tmp_path), "--quiet", "--override", "solver.nonlinear=false",
            "--override", "solver.n_points=2048", "--override", "solver.t_end=0.05"]
    assert main(args) == EXIT_OK
    rep = read_json(tmp_path / "simulate" / "simulate.json")
    assert rep["conservation"]["max_relative_l2_drift"] < 1e-10


def test_cli_output_is_reproducible(tmp_path):
    args = ["simulate", "--quiet", "--override", "solver.n_points=2048", "--override", "solver.t_end=0.02",
            "--override", "wkb.precision=\"leading\""]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "simulate" / "series.csv").read_bytes()
    b = (tmp_path / "b" / "simulate" / "series.csv").read_bytes()
    assert a == b
    header = a.decode().splitlines()[0]
    assert header.startswith("# config_hash=") and "csv_version=1" in header


def test_cli_wkb_rate_check(tmp_path):
    args = ["wkb", "--out", str(tmp_path), "--quiet", "--override", "wkb.precision=\"leading\"",
            "--override", "wkb.t_end=0.1", "--override", "wkb.n_snapshots=2"]
    assert main(args) == EXIT_OK
    rep = read_json(tmp_path / "wkb" / "wkb.json")
    assert rep["dtg_micro_step_relative_error"] < 1e-4
    data = np.loadtxt(tmp_path / "wkb" / "amplitudes.csv", delimiter=",")
    assert data.shape[1] == 5


def test_cli_runtime_failure_is_recorded(tmp_path):
    # a zero datum has no growth index, so the horizon cannot be formed
    code = main(["experiment", "--out", str(tmp_path), "--quiet", "--override", "wkb.v0.height=0.0"])
    assert code == EXIT_RUNTIME
    fail = read_json(tmp_path / "experiment" / "failure.json")
    assert fail["error"] == "ValueError" and "Gamma1" in fail["message"]


def test_cli_experiment_bundle(tmp_path):
    args = ["experiment", "--out", str(tmp_path), "--quiet", "--override", "solver.n_points=2048",
            "--override", "wkb.precision=\"leading\"", "--override", "harness.controls=false",
            "--override", "harness.n_records=20"]
    assert main(args) == EXIT_OK
    bundle = tmp_path / "experiment"
    assert {p.name for p in bundle.iterdir()} >= {"config.json", "audit.json", "timeseries.csv", "ratefit.json"}
    fit = read_json(bundle / "ratefit.json")
    assert fit["instability"]["report"]["verdict"] == "pass"
    assert fit["config_hash"] == read_json(bundle / "audit.json")["config_hash"]


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-4, 0.05), n=st.sampled_from([256, 1024, 4096]), seed=st.integers(0, 1000))
def test_override_round_trip(eps, n, seed):
    cfg = cfgmod.apply_override(RunConfig(), f"model.epsilon={eps!r}")
    cfg = cfgmod.apply_override(cfg, f"solver.n_points={n}")
    cfg = cfgmod.apply_override(cfg, f"symflow.seed={seed}")
    back = cfgmod.loads(cfgmod.dumps(cfg))
    assert back.model.epsilon == eps and back.solver.n_points == n and back.symflow.seed == seed
