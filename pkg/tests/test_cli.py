import csv
import json

import jsonschema
import pytest

from baireone.cli import DEFAULTS, env_overrides, load_config, load_schema, main, run
from baireone.errors import ConfigError


def _cert(path):
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, load_schema("certificate"), cls=jsonschema.Draft202012Validator)
    return doc


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_defaults_and_validation():
    cfg = load_config(overrides={"command": "demo", "demo": "step"}, environ={})
    assert cfg["n_max"] == DEFAULTS["n_max"] and cfg["demo"] == "step"
    with pytest.raises(ConfigError):
        load_config(overrides={"command": "demo", "bogus": 1}, environ={})
    with pytest.raises(ConfigError):
        load_config(overrides={"command": "fly"}, environ={})
    with pytest.raises(ConfigError):
        load_config(overrides={"command": "extend", "g": {"expr": "x", "tails": [0]}}, environ={})


def test_env_overrides_and_precedence(tmp_path):
    env = {"BAIREONE_N_MAX": "7", "BAIREONE_EPS_SCHEDULE__RATIO": "0.6",
           "BAIREONE_DOMAIN": "[0,2]", "OTHER": "x"}
    assert env_overrides(env) == {"n_max": 7, "eps_schedule": {"ratio": 0.6}, "domain": "[0,2]"}
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"command": "demo", "demo": "xsin", "n_max": 5, "seed": 1}))
    cfg = load_config(str(path), {"seed": 9}, env)
    assert cfg["n_max"] == 7 and cfg["seed"] == 9 and cfg["domain"] == "[0,2]"
    assert cfg["eps_schedule"] == {"eps1": 0.05, "ratio": 0.6}


def test_config_errors_exit_1(tmp_path):
    assert run({"command": "extend", "g": {"expr": "x*+1"}, **_small()}, tmp_path) == 1
    assert run({"command": "extend", **_small()}, tmp_path) == 1
    assert run({"command": "extract", "surface": "x*y", "g": {"expr": "x"}}, tmp_path) == 1
    assert run({"command": "extend", "g": {"expr": ["x", "x"]}}, tmp_path) == 1
    assert main(["--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_numerical_errors_exit_2(tmp_path):
    assert run({"command": "extend", "g": {"expr": "log(x-2)"}, **_small()}, tmp_path) == 2
    assert run({"command": "extend", "g": {"expr": "sin(1/x)", "overrides": [{"at": 0, "value": 0}]},
                **_small()}, tmp_path) == 2


def _small():
    return {"n_max": 4, "sections": 1, "grid_points": 5, "samples": 11}


def test_extend_xsin(tmp_path):
    cfg = {"command": "extend", "g": {"expr": "x*sin(1/x)", "overrides": [{"at": 0, "value": 0}]}, "n_max": 20}
    assert run(load_config(overrides=cfg, environ={}), tmp_path) == 0
    doc = _cert(tmp_path / "certificate.json")
    assert doc["passed"] and len(doc["scheme"]["bands"]) == 20
    raw = (tmp_path / "surface.csv").read_bytes()
    assert b"\r" not in raw
    rows = _rows(tmp_path / "surface.csv")
    assert list(rows[0]) == ["x", "y", "f_1"] and len(rows) == 65 * 65
    # 17 significant digits round-trip the floats exactly
    sample = [r["f_1"] for r in rows if "e" not in r["f_1"] and r["f_1"] not in ("0",)]
    assert any(len(v.replace("-", "").replace(".", "").lstrip("0")) == 17 for v in sample)


def test_demo_step(tmp_path):
    assert main(["demo", "step", "--out", str(tmp_path)]) == 0
    doc = _cert(tmp_path / "certificate.json")
    assert doc["diagonal_check"]["passed"] and doc["diagonal_check"]["reference"] == "limit"


def test_extract_xy(tmp_path):
    assert run(load_config(overrides={"command": "extract", "surface": "x*y", "levels": 12}, environ={}), tmp_path) == 0
    rows = _rows(tmp_path / "convergence.csv")
    assert float(rows[11]["max_error"]) <= 2.0**-12
    doc = _cert(tmp_path / "extraction.json")
    assert doc["transfer"] == "bounded" and doc["passed"]


def test_analyze_and_roundtrip(tmp_path):
    a = tmp_path / "a"
    assert run(load_config(overrides={"command": "analyze", "surface": "x*y", "sections": 2}, environ={}), a) == 0
    doc = _cert(a / "analysis.json")
    assert doc["diagonal"]["total"] == pytest.approx(1.0, abs=1e-9)
    r = tmp_path / "r"
    cfg = {"command": "roundtrip", "g": {"expr": "x"}, "samples": 100}
    assert run(load_config(overrides=cfg, environ={}), r) == 0
    assert _cert(r / "roundtrip.json")["passed"]


def test_stage_list_spec(tmp_path):
    cfg = {"command": "extend", "g": {"stages": ["0", "x/2", "3*x/4", "x"], "tails": [1, 0.5, 0.25, 0]},
           "n_max": 6, "sections": 2}
    assert run(load_config(overrides=cfg, environ={}), tmp_path) == 0
    assert _cert(tmp_path / "certificate.json")["diagonal_check"]["reference"] == "series"
    bad = dict(cfg, g={"stages": ["x", "x"], "tails": [0, 1]})
    assert run(load_config(overrides=bad, environ={}), tmp_path) == 1


def test_pseudonorm_demo(tmp_path):
    assert main(["demo", "pseudonorm", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "pseudonorm.csv")
    got = {float(r["h"]): float(r["ratio"]) for r in rows}
    assert got[1e-2] == pytest.approx(10.0, rel=1e-12) and got[1e-4] == pytest.approx(100.0, rel=1e-12)
    _cert(tmp_path / "pseudonorm.json")


def test_outputs_are_byte_identical_across_runs_and_threads(tmp_path):
    outs = []
    for i, threads in enumerate(["1", "1", "3"]):
        d = tmp_path / str(i)
        assert main(["demo", "identity", "--out", str(d), "--seed", "5", "--threads", threads]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] == outs[2]
    d = tmp_path / "other-seed"
    assert main(["demo", "identity", "--out", str(d), "--seed", "6"]) == 0
    assert (d / "certificate.json").read_bytes() != outs[0]["certificate.json"]
