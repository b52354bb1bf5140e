import csv
import json

import numpy as np
import pytest

from hyperfill.experiments import (EPS, GROWTH_THRESHOLD, ConfigError, ExperimentConfig, beta_for,
                                   build_instance, config_hash, run, write_outputs)

FIX_A = {"fixture": "fix_a"}


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"experiment": "equivalence_sweep", "instance": FIX_A, "colour": 1})
    with pytest.raises(ConfigError, match="unknown experiment"):
        ExperimentConfig.from_dict({"experiment": "nope", "instance": FIX_A})
    with pytest.raises(ConfigError, match="nonempty"):
        ExperimentConfig.from_dict({"experiment": "equivalence_sweep", "instance": FIX_A, "theta": []})
    with pytest.raises(ConfigError, match="two resolutions"):
        ExperimentConfig.from_dict({"experiment": "improvement_region", "instance": FIX_A, "resolutions": [8]})
    with pytest.raises(ConfigError, match="mapping"):
        ExperimentConfig.from_dict({"experiment": "localization", "instance": "fix_a"})


def test_empty_E_is_config_error(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"distance_matrix": [[0, 1], [1, 0]]}))
    with pytest.raises(ConfigError, match="nonempty"):
        build_instance({"space": str(path), "E": []})
    with pytest.raises(ConfigError, match="Z minus E"):
        build_instance({"space": str(path), "E": [0, 1]})
    with pytest.raises(ConfigError):
        build_instance({})
    space, E = build_instance({"space": str(path), "E": [1]})
    assert space.n == 2 and E.ids.tolist() == [1]


def test_beta_link():
    assert beta_for(0.5, 2.0) == pytest.approx(0.25)
    assert EPS == pytest.approx(0.25, rel=1e-15)


def test_config_hash_stable():
    a = ExperimentConfig.from_dict({"experiment": "equivalence_sweep", "instance": FIX_A})
    b = ExperimentConfig.from_dict({"instance": FIX_A, "experiment": "equivalence_sweep"})
    assert config_hash(a) == config_hash(b)
    c = ExperimentConfig.from_dict({"experiment": "equivalence_sweep", "instance": FIX_A, "seed": 1})
    assert config_hash(c) != config_hash(a)


def test_fix_a_one_cell_sweep():
    rep = run({"experiment": "equivalence_sweep", "instance": FIX_A, "depth_offset": 2})
    assert len(rep["cells"]) == 1
    K = rep["summary"]["K"]
    assert isinstance(K, float) and 1 <= K < np.inf
    for key in ("config_sha256", "seed", "normalization", "version", "kernel_backend", "hardy_proxy"):
        assert key in rep
    assert str(GROWTH_THRESHOLD) in rep["hardy_proxy"]


def test_theta_row_has_monotone_beta():
    rep = run({"experiment": "equivalence_sweep", "instance": {"fixture": "fix_b"},
               "theta": [0.3, 0.5, 0.7], "p": [2.0], "depth_offset": 1})
    betas = [c["beta"] for c in rep["cells"]]
    assert betas == sorted(betas, reverse=True)
    for c in rep["cells"]:
        assert c["beta"] / EPS == pytest.approx(c["p"] * (1 - c["theta"]), rel=1e-14)
        assert c["flags"] == ""


def test_improvement_region_small():
    rep = run({"experiment": "improvement_region", "instance": {"fixture": "punctured_1d"},
               "theta": [0.4], "p": [2.0], "resolutions": [8, 16]})
    (cell,) = rep["cells"]
    assert len(cell["constants"]) == 2 and len(cell["growth"]) == 1
    assert cell["flags"] in ("finite", "exploding")
    assert rep["summary"]["resolutions"] == [8, 16]


def test_punctured_domain_reports_codimensions():
    with pytest.warns(UserWarning, match="coarse"):
        rep = run({"experiment": "punctured_domain", "instance": {"fixture": "punctured_1d"},
                   "theta": [0.4], "p": [2.0], "resolutions": [4, 16]})
    s = rep["summary"]
    assert s["codim_outer_upper"] == pytest.approx(0.0, abs=0.3)
    assert s["codim_origin_lower"] == pytest.approx(1.0, abs=0.3)
    assert rep["cells"][0]["hypotheses"] is True


def test_capacity_decay_small():
    rep = run({"experiment": "capacity_decay", "instance": {"fixture": "punctured_1d"},
               "theta": [0.4], "p": [2.0], "resolutions": [32], "eta": [0.2, 0.1, 0.05, 0.01]})
    # the instance spans [-2, 2], so raw eta 0.05 and 0.01 fall below twice the normalized spacing
    assert rep["summary"]["notes"] == ["2 eta values below 2h excluded"]
    assert len(rep["cells"]) == 2
    assert all(c["flags"] == "ok" for c in rep["cells"])
    assert np.isfinite(rep["summary"]["slope"])


def test_weight_suite_small():
    rep = run({"experiment": "weight_suite", "instance": {"fixture": "fix_b"}, "p": [2.0],
               "sigma_fractions": [-1e6, -0.5, 0.0, 0.5], "depth_offset": 1})
    rows = {c["fraction"]: c for c in rep["cells"]}
    assert rows[-1e6]["flags"].startswith("rejected")
    assert rows[0.0]["C_X"] == rep["summary"]["C_X_sigma0"] and rows[0.0]["ratio"] == 1.0
    ok = [rows[f]["C_X"] for f in (-0.5, 0.0, 0.5)]
    assert max(ok[k + 1] / ok[k] for k in range(2)) <= 3 and min(ok[k + 1] / ok[k] for k in range(2)) >= 1 / 3


def test_localization_full_radius_agrees():
    space, _ = build_instance({"fixture": "fix_b"})
    R = 2 * space.diam / space.scale
    rep = run({"experiment": "localization", "instance": {"fixture": "fix_b"}, "R": [R]})
    (cell,) = rep["cells"]
    assert cell["ratio"] == 1.0 and cell["size"] == 8


def test_determinism_and_outputs(tmp_path):
    cfg = {"experiment": "equivalence_sweep", "instance": {"fixture": "fix_b"},
           "theta": [0.3, 0.7], "p": [1.5, 3.0], "depth_offset": 1}
    a = write_outputs(run(cfg), tmp_path / "a")
    b = write_outputs(run(cfg), tmp_path / "b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    with open(a / "cells.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["theta", "p", "beta", "C_Z", "C_X", "ratio", "flags"]
    assert len(rows) == 4
    with open(a / "slopes.csv") as fh:
        assert next(csv.reader(fh)) == ["series", "x", "y"]


def test_thread_count_does_not_change_report(monkeypatch):
    cfg = {"experiment": "equivalence_sweep", "instance": {"fixture": "fix_b"},
           "theta": [0.3, 0.5], "p": [2.0, 3.0], "depth_offset": 1}
    monkeypatch.setenv("HYPERFILL_THREADS", "1")
    serial = json.dumps(run(cfg), sort_keys=True)
    monkeypatch.setenv("HYPERFILL_THREADS", "4")
    assert json.dumps(run(cfg), sort_keys=True) == serial
