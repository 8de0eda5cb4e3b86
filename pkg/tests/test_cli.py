import csv
import json

import pytest

from weakkam.cli import main
from weakkam.config import DEFAULTS, ConfigError, RunConfig, parse_override


def write_cfg(tmp_path, **entries):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(entries))
    return str(p)


def run(tmp_path, command, cfg=None, *sets, out="out"):
    argv = [command, "--output", str(tmp_path / out)]
    if cfg is not None:
        argv += ["--config", cfg]
    for s in sets:
        argv += ["--set", s]
    return main(argv), tmp_path / out


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_parse_override():
    assert parse_override("grid.dims=[8]") == (["grid", "dims"], [8])
    assert parse_override("rule=midpoint") == (["rule"], "midpoint")
    with pytest.raises(ConfigError):
        parse_override("dt")


def test_defaults_and_overrides(tmp_path):
    cfg = RunConfig.load(write_cfg(tmp_path, dt=0.1), ["grid.dims=[32]", "model.amplitude=2"])
    assert cfg["dt"] == 0.1 and cfg["grid"]["dims"] == [32]
    assert cfg["model"]["potential"] == DEFAULTS["model"]["potential"]
    assert cfg.grid().size == 32


@pytest.mark.parametrize("key, value, field", [
    ("dt", 0, "dt"), ("tol", -1, "tol"), ("max_iter", 0, "max_iter"),
    ("damping", 1.5, "damping"), ("direction", "sideways", "direction"),
])
def test_validation_exit_one(tmp_path, capsys, key, value, field):
    code, _ = run(tmp_path, "solve", write_cfg(tmp_path, **{key: value}))
    assert code == 1
    assert field in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    code, _ = run(tmp_path, "solve")
    assert code == 1 and "--config" in capsys.readouterr().err
    code, _ = run(tmp_path, "solve", str(tmp_path / "nope.json"))
    assert code == 1


def test_critical_free_model(tmp_path):
    cfg = write_cfg(tmp_path, model={"potential": "zero"}, grid={"dims": [32]}, dt=0.1)
    code, out = run(tmp_path, "critical", cfg)
    assert code == 0
    s = summary(out)
    assert s["c"] == 0.0 and abs(s["c_est"]) <= 1e-9
    assert list(csv.reader(open(out / "cycle.csv")))[0] == ["step", "x0", "edge_weight"]


def test_solve_outputs(tmp_path):
    cfg = write_cfg(tmp_path, grid={"dims": [64]})
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    s = summary(out)
    assert s["c_est"] == pytest.approx(1.0, abs=1e-9)
    assert s["backend"] in ("cython", "python")
    for name in ("solution.csv", "residuals.csv", "orbit.csv"):
        header = next(csv.reader(open(out / name)))
        assert all(h and not h[0].isdigit() for h in header)


def test_solve_forward_random(tmp_path):
    cfg = write_cfg(tmp_path, grid={"dims": [64]}, direction="forward", init="random")
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0 and not (out / "orbit.csv").exists()


def test_non_convergence_exit_two(tmp_path):
    code, out = run(tmp_path, "solve", write_cfg(tmp_path, max_iter=3))
    assert code == 2
    assert len(list(csv.reader(open(out / "residuals.csv")))) == 4


def test_mather_command(tmp_path):
    code, out = run(tmp_path, "mather", write_cfg(tmp_path, grid={"dims": [64]}))
    assert code == 0
    s = summary(out)
    assert s["mather_set_size"] == 1 and s["cycle"] == [0]
    rows = list(csv.reader(open(out / "mather_set.csv")))
    assert rows == [["index", "x0"], ["0", "0.0"]]


def test_symmetry_check_passes_on_winding_torus(tmp_path):
    cfg = write_cfg(tmp_path, grid={"dims": [24, 16], "lengths": [6.283185307179586, 8.0]},
                    model={"shift": [0.0, 1.0]}, dt=0.25, vmax=3.0,
                    symmetry=[{"type": "shift", "axis": 1, "amount": 1}], harness_seeds=2)
    code, out = run(tmp_path, "symmetry-check", cfg)
    assert code == 0
    s = summary(out)
    assert s["symmetry_deviation"] == 0.0
    assert s["invariance"]["asserted"] and s["invariance"]["worst_deviation"] <= 1e-9
    assert s["averaging_domination_worst"] <= 1e-12


def test_symmetry_check_rejects_broken_symmetry(tmp_path, capsys):
    cfg = write_cfg(tmp_path, grid={"dims": [64]}, symmetry=[{"type": "shift", "amount": 32}])
    code, _ = run(tmp_path, "symmetry-check", cfg)
    assert code == 3
    assert "not invariant" in capsys.readouterr().err


def test_symmetry_check_needs_group(tmp_path):
    code, _ = run(tmp_path, "symmetry-check", write_cfg(tmp_path))
    assert code == 1


def test_pendulum_demo_reports_sup_norm(tmp_path):
    code, out = run(tmp_path, "pendulum-demo")
    assert code == 0
    s = summary(out)
    assert s["c_disc"] == 1.0
    assert 0.0 < s["sup_norm_backward"] < 0.2
    rows = list(csv.reader(open(out / "comparison.csv")))
    assert rows[0] == ["theta", "u_backward", "reference_plus", "u_forward", "reference_minus"]
    assert len(rows) == 257


def test_deterministic_outputs(tmp_path):
    cfg = write_cfg(tmp_path, grid={"dims": [64]}, init="random", seed=3)
    _, a = run(tmp_path, "solve", cfg, out="a")
    _, b = run(tmp_path, "solve", cfg, out="b")
    for name in ("solution.csv", "residuals.csv", "orbit.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_tabulated_model(tmp_path):
    import numpy as np
    from weakkam.grid import GridFunction, PeriodicGrid, write_grid_function
    g = PeriodicGrid.circle(64)
    write_grid_function(tmp_path / "pot.csv", GridFunction.from_callable(g, lambda x: np.cos(x[..., 0])), "U")
    cfg = write_cfg(tmp_path, grid={"dims": [64]}, model={"kind": "tabulated", "potential": "pot.csv"})
    code, out = run(tmp_path, "critical", cfg)
    assert code == 0 and summary(out)["c"] == pytest.approx(1.0, abs=1e-12)
