import csv
import json

import pytest

from htype_lab.cli import main
from htype_lab.experiments import EXPERIMENTS, ConfigError, validate


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj, indent=2) if isinstance(obj, dict) else obj)
    return path


def run(tmp_path, obj, *extra):
    cfg = write(tmp_path, obj)
    out = tmp_path / "out"
    code = main(["run", str(cfg), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert name in out


def test_axioms_quaternionic(tmp_path):
    code, out = run(tmp_path, {"experiment": "axioms", "algebra": "quaternionic", "N": 8, "trials": 50})
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["scalars"]["max_base_residual"] < 1e-12
    assert summary["seed"] == summary["inputs"]["seed"]
    assert len(summary["config_hash"]) == 64


def test_curvature_example(tmp_path):
    code, out = run(tmp_path, {"experiment": "curvature", "law": {"inverse_power": 1}, "n_max": 32})
    assert code == 0
    rows = read_csv(out / "curvature.csv")
    assert list(rows[0]) == ["n", "a_n", "K_P", "K_Q", "obstruction", "K_P_closed", "K_Q_closed"]
    assert float(rows[3]["K_P"]) == pytest.approx(-12.0, rel=1e-12)


def test_shrink_example(tmp_path):
    code, out = run(tmp_path, {"experiment": "shrink", "c": 2.449489742783178, "n_max": 16})
    assert code == 0
    rows = read_csv(out / "shrink.csv")
    assert len(rows) == 16
    assert float(rows[-1]["endpoint_z"]) == pytest.approx(0.9999999999, abs=1e-8)


@pytest.mark.parametrize("cfg", [
    {"experiment": "badjoint", "trials": 50},
    {"experiment": "levi-civita", "law": {"constant": 1}, "n_max": 5},
    {"experiment": "levi-civita", "metric": {"type": "riemannian", "law": {"exponential": 0.8}}, "n_max": 5},
    {"experiment": "optimize", "n_list": [1, 2], "nodes": 17, "N": 4},
])
def test_other_experiments_pass(tmp_path, cfg):
    assert run(tmp_path, cfg)[0] == 0


def test_csv_is_rfc4180(tmp_path):
    _, out = run(tmp_path, {"experiment": "badjoint", "trials": 5})
    raw = (out / "badjoint.csv").read_bytes()
    assert raw.count(b"\r\n") == 6 and b"\n" not in raw.replace(b"\r\n", b"")


def test_assertion_failure_is_exit_1(tmp_path, capsys):
    code, out = run(tmp_path, {"experiment": "axioms", "N": 2, "trials": 20, "tol": 1e-30})
    assert code == 1
    err = capsys.readouterr().err
    assert "assertion failed: base:" in err
    summary = json.loads((out / "summary.json").read_text())
    assert not summary["passed"] and summary["failed"]


def test_unknown_key_is_line_anchored(tmp_path, capsys):
    text = '{\n  "experiment": "axioms",\n  "trials": 10,\n  "colour": "red"\n}\n'
    cfg = write(tmp_path, text)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"{cfg}:4: ") and "colour" in err


def test_invalid_json_is_line_anchored(tmp_path, capsys):
    cfg = write(tmp_path, '{\n  "experiment": "axioms",\n  "trials": 10,,\n}')
    assert main(["run", str(cfg)]) == 2
    assert f"{cfg}:3: invalid JSON" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "cannot read config" in capsys.readouterr().err


@pytest.mark.parametrize("obj, key", [
    ({"experiment": "dance"}, "experiment"),
    ({"experiment": "axioms", "algebra": "octonionic"}, "algebra"),
    ({"experiment": "axioms", "trials": 2.5}, "trials"),
    ({"experiment": "axioms", "law": {"constant": 1}}, "law"),
    ({"experiment": "curvature", "law": {"constant": 1}}, "law"),
    ({"experiment": "curvature", "metric": {"type": "finsler", "p": 4}}, "metric"),
    ({"experiment": "shrink", "z": [2.0]}, "z"),
    ({"experiment": "shrink", "N": 10}, "N"),
    ({"experiment": "shrink", "n_min": 5, "n_max": 2}, "n_max"),
    ({"experiment": "shrink", "n_list": [1], "n_max": 2}, "n_list"),
    ({"experiment": "optimize", "nodes": 4}, "nodes"),
    ({"experiment": "levi-civita", "law": {"inverse_power": -1}}, "law"),
    ({"experiment": "badjoint", "law": {"inverse_power": 1}, "metric": {}}, "law"),
])
def test_validation_names_the_key(obj, key):
    with pytest.raises(ConfigError) as info:
        validate(obj)
    assert info.value.key == key


def test_seed_override_and_hash(tmp_path):
    obj = {"experiment": "badjoint", "trials": 5, "seed": 1}
    a = validate(obj)
    b = validate(obj, seed_override=2)
    assert b.seed == 2 and a.config_hash() != b.config_hash()
    assert validate(dict(obj, output="elsewhere")).config_hash() == a.config_hash()
    _, out = run(tmp_path, obj, "--seed", "9")
    assert json.loads((out / "summary.json").read_text())["seed"] == 9


def test_negative_seed_rejected(tmp_path):
    cfg = write(tmp_path, {"experiment": "badjoint"})
    assert main(["run", str(cfg), "--seed", "-1"]) == 2


def test_repeat_runs_identical(tmp_path):
    obj = {"experiment": "badjoint", "trials": 20}
    cfg = write(tmp_path, obj)
    main(["run", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", str(cfg), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "badjoint.csv").read_bytes() == (tmp_path / "b" / "badjoint.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
