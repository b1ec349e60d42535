import json
import os

import numpy as np
import pytest
import yaml

from simplexdiff.cli import FMT, load_config, main


def write_config(path, **overrides):
    cfg = {
        "schema_version": 1,
        "process": {"name": "beta",
                    "params": {"b": 2.0, "S": 0.5, "kappa": 1.0}},
        "integrator": {"dt": 1e-3, "t_end": 1.0, "record_every": 200},
        "ensemble": {"size": 500,
                     "initial": {"kind": "delta", "point": [0.9, 0.1]}},
        "seed": 7,
        "audit": {"samples_per_face": 100},
    }
    cfg.update(overrides)
    with open(path, "w") as f:
        yaml.safe_dump(cfg, f)
    return cfg


def test_check_valid_dirichlet(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path, process={
        "name": "dirichlet",
        "params": {"b": [2.0, 2.0], "S": [0.5, 0.5], "kappa": [1.0, 1.0]}})
    code = main(["check", "--config", str(cfg_path),
                 "--outdir", str(tmp_path / "out")])
    assert code == 0
    report = json.loads((tmp_path / "out" / "audit.json").read_text())
    assert report["overall_pass"] is True


def test_check_broken_fails_listing_every_face(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path, process={
        "name": "broken", "params": {"style": "constant_diffusion", "n": 3}})
    code = main(["check", "--config", str(cfg_path),
                 "--outdir", str(tmp_path / "out")])
    assert code == 1
    report = json.loads((tmp_path / "out" / "audit.json").read_text())
    faces = {c["constraint"].split(":")[0] for c in report["checks"]}
    assert faces == {"zero-face-1", "zero-face-2", "unit-sum-face"}


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("process: [unclosed\n  nope")
    assert main(["check", "--config", str(bad)]) == 2
    missing = tmp_path / "missing.yaml"
    assert main(["check", "--config", str(missing)]) == 2
    wrong_schema = tmp_path / "schema.yaml"
    wrong_schema.write_text("schema_version: 99\nprocess: {name: beta}\nseed: 1\n")
    assert main(["check", "--config", str(wrong_schema)]) == 2


def test_simulate_outputs(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path, output={"dump_every": 500})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_path),
                 "--outdir", str(out)]) == 0
    assert (out / "moments.csv").exists()
    assert (out / "run_meta.json").exists()
    assert (out / "ensemble_0.5.csv").exists()
    assert (out / "ensemble_1.csv").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["seed"] == 7
    assert meta["violation_count"] == 0
    header = (out / "moments.csv").read_text().splitlines()[0]
    assert header.startswith("t,mean_1,mean_2,cov_1_1")


def test_simulate_final_mean_near_target(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path,
                 integrator={"dt": 1e-3, "t_end": 6.0, "record_every": 1000},
                 ensemble={"size": 2000,
                           "initial": {"kind": "delta", "point": [0.9, 0.1]}})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_path),
                 "--outdir", str(out)]) == 0
    rows = (out / "moments.csv").read_text().splitlines()
    final_mean = float(rows[-1].split(",")[1])
    se = np.sqrt(1.0 / 12.0 / 2000.0)
    assert abs(final_mean - 0.5) < 3.0 * se + 0.4 * np.exp(-6.0)


def test_simulate_refuses_failed_audit_unless_skipped(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path, process={
        "name": "broken", "params": {"style": "outward_drift", "n": 3}},
        ensemble={"size": 50, "initial": {"kind": "uniform"}})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_path),
                 "--outdir", str(out)]) == 1
    assert not (out / "moments.csv").exists()
    assert main(["simulate", "--config", str(cfg_path),
                 "--outdir", str(out), "--skip-audit"]) == 0
    assert (out / "moments.csv").exists()


def test_csv_roundtrip_bytes(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path)
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_path), "--outdir", str(out)])
    text = (out / "moments.csv").read_text()
    lines = text.splitlines()
    rebuilt = [lines[0]]
    for line in lines[1:]:
        rebuilt.append(",".join(FMT % float(x) for x in line.split(",")))
    assert "\n".join(rebuilt) + "\n" == text


def test_threads_flag_does_not_change_results(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path)
    outs = []
    for i, threads in enumerate(("1", "8")):
        out = tmp_path / f"out{i}"
        assert main(["simulate", "--config", str(cfg_path),
                     "--outdir", str(out), "--threads", threads]) == 0
        outs.append((out / "moments.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_override_changes_results(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", str(cfg_path), "--outdir", str(out1)])
    main(["simulate", "--config", str(cfg_path), "--outdir", str(out2),
          "--seed", "8"])
    assert (out1 / "moments.csv").read_bytes() != (out2 / "moments.csv").read_bytes()


def test_outdir_env_var(tmp_path, monkeypatch):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path)
    envdir = tmp_path / "from_env"
    monkeypatch.setenv("SIMPLEXDIFF_OUTDIR", str(envdir))
    assert main(["check", "--config", str(cfg_path)]) == 0
    assert (envdir / "audit.json").exists()


def test_compare_beta_stationary(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path,
                 integrator={"dt": 1e-3, "t_end": 8.0, "record_every": 800},
                 ensemble={"size": 2000,
                           "initial": {"kind": "delta", "point": [0.9, 0.1]}},
                 compare={"stationary_window": [4.0, 8.0]})
    out = tmp_path / "out"
    assert main(["compare", "--config", str(cfg_path),
                 "--outdir", str(out)]) == 0
    result = json.loads((out / "compare.json").read_text())
    assert result["overall_pass"] is True
    assert result["rate_check"]["matching_third_form"] in ("ito", "both")
    var_check = [c for c in result["stationary"]["checks"]
                 if c["quantity"] == "cov[1,1]"][0]
    assert var_check["residual"] <= var_check["threshold"]


def test_compare_too_few_snapshots_exits_2(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path,
                 integrator={"dt": 1e-2, "t_end": 0.02, "record_every": 100})
    assert main(["compare", "--config", str(cfg_path),
                 "--outdir", str(tmp_path / "out")]) == 2


def test_sweep_empty_grid_exits_2(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path, sweep={"grid": []})
    assert main(["sweep", "--config", str(cfg_path),
                 "--outdir", str(tmp_path / "out")]) == 2


def test_sweep_s_grid_means_track_target(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    write_config(cfg_path,
                 integrator={"dt": 1e-3, "t_end": 6.0, "record_every": 600},
                 ensemble={"size": 1000,
                           "initial": {"kind": "delta", "point": [0.9, 0.1]}},
                 compare={"stationary_window": [3.0, 6.0]},
                 sweep={"grid": [
                     {"process": {"params": {"b": 2.0, "S": s, "kappa": 1.0}}}
                     for s in (0.3, 0.5, 0.7)]})
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg_path),
                 "--outdir", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    for i, s in enumerate((0.3, 0.5, 0.7)):
        result = json.loads((out / f"point_{i:03d}" / "compare.json").read_text())
        mean_check = [c for c in result["stationary"]["checks"]
                      if c["quantity"] == "mean[1]"][0]
        assert mean_check["oracle"] == pytest.approx(s)
        assert mean_check["passed"]


def test_load_config_requires_keys(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("schema_version: 1\nseed: 3\n")
    from simplexdiff.errors import ConfigError
    with pytest.raises(ConfigError):
        load_config(str(p))
