import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from varqec.ansatz import load_circuit
from varqec.cli import (ConfigError, DEFAULT_GRID, config_from_dict, load_config, main,
                        parse_target)
from varqec.detect import VARIANTS

DATA = Path(__file__).parent / "data"

REP3 = {"name": "rep3", "n": 3, "generators": ["ZZI", "IZZ"], "logical_x": "XXX",
        "logical_z": "ZII"}


@pytest.fixture
def rep3(tmp_path):
    path = tmp_path / "rep3.json"
    path.write_text(json.dumps(REP3))
    return path


def _config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _rep3_config(tmp_path, rep3, **extra):
    doc = {"code": str(rep3), "target": "plus",
           "constraints": {"allowed_two_qubit": ["CNOT"], "max_two_qubit": 3},
           "run": {"max_restarts": 5}, "base_seed": 0, "output_dir": str(tmp_path / "out")}
    doc.update(extra)
    return _config(tmp_path, doc)


# ---------------------------------------------------------------- config parsing

def test_defaults_and_round_trip():
    cfg = config_from_dict({})
    assert cfg.code == "five-qubit" and cfg.base_seed == 0
    assert cfg.sweep.r_grid == DEFAULT_GRID and cfg.sweep.variants == VARIANTS
    cfg = config_from_dict({"target": [1, [0, 1]], "constraints": {"coupling": [[0, 1], [1, 2]]}})
    t = cfg.logical_target()
    assert t.alpha == pytest.approx(2 ** -0.5) and t.beta == pytest.approx(1j * 2 ** -0.5)
    assert cfg.constraints.coupling == ((0, 1), (1, 2))


@pytest.mark.parametrize("doc, field", [
    ({"seed": 1}, "seed"),
    ({"run": {"dt": 0.1}}, "run.dt"),
    ({"run": {"max_steps": "many"}}, "run.max_steps"),
    ({"run": {"max_steps": 2.5}}, "run.max_steps"),
    ({"run": {"dtau": -1}}, "run"),
    ({"noise": {"gate_error": 1.5}}, "noise"),
    ({"constraints": {"allowed_two_qubit": ["Toffoli"]}}, "constraints"),
    ({"constraints": {"coupling": [[0, 9]]}}, "constraints.coupling"),
    ({"constraints": {"max_two_qubit": 2}, "search": {"k_blocks": 4}}, "search.k_blocks"),
    ({"search": {"prune": 1}}, "search.prune"),
    ({"sweep": {"variants": ["baseline", "magic-op"]}}, "sweep.variants"),
    ({"sweep": {"r_grid": [0.1, 2]}}, "sweep.r_grid"),
    ({"target": "tee"}, "target"),
    ({"target": [0, 0]}, "target"),
    ({"target": [1, "x"]}, "target[1]"),
    ({"code": "no-such-code"}, "code"),
    ({"base_seed": -3}, "base_seed"),
    ({"base_seed": True}, "base_seed"),
])
def test_invalid_configs_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert str(info.value).startswith(field)


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "code": "steane",\n  "target" "zero"\n}\n')
    with pytest.raises(ConfigError, match=r"bad.json:3:"):
        load_config(path)
    assert main(["compile", "--config", str(path)]) == 1
    assert "bad.json:3:" in capsys.readouterr().err


def test_unknown_key_exits_one(tmp_path, capsys):
    path = _config(tmp_path, {"code": "steane", "runs": {}})
    assert main(["verify", "x.json", "--config", path]) == 1
    assert "runs: unknown key" in capsys.readouterr().err


def test_parse_target_named_and_pair():
    assert parse_target("magic").beta == pytest.approx(np.exp(1j * np.pi / 4) / np.sqrt(2))
    t = parse_target([3, 4])
    assert (t.alpha, t.beta) == pytest.approx((0.6, 0.8))


# ---------------------------------------------------------------- codes

def test_codes_list(capsys):
    assert main(["codes", "list"]) == 0
    out = capsys.readouterr().out
    assert "five-qubit: n=5" in out and "steane: n=7" in out and "+XZZXI" in out


def test_codes_validate(tmp_path, rep3, capsys):
    assert main(["codes", "validate", str(rep3)]) == 0
    assert "valid [[3,1]]" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**REP3, "generators": ["ZZI", "IXX"]}))
    assert main(["codes", "validate", str(bad)]) == 1
    assert "anticommute" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["codes", "validate", str(bad)]) == 1


# ---------------------------------------------------------------- compile / verify

def test_compile_writes_files_and_round_trips(tmp_path, rep3, capsys):
    cfg = _rep3_config(tmp_path, rep3)
    assert main(["compile", "--config", cfg, "--workers", "1"]) == 0
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == {"circuit.json", "circuit.txt", "result.json",
                                              "trajectory.csv"}
    meta = json.loads((out / "result.json").read_text())
    assert meta["status"] == "converged" and meta["two_qubit_count"] == 2
    assert meta["e_min"] <= -1 + 1e-4 and meta["restarts_used"] >= 1
    rows = list(csv.reader((out / "trajectory.csv").open()))
    assert rows[0] == ["step", "energy"]
    assert float(rows[-1][1]) == pytest.approx(meta["e_min"], abs=1e-11)
    assert "CNOT" in (out / "circuit.txt").read_text()
    capsys.readouterr()
    assert main(["verify", str(out / "circuit.json"), "--config", cfg]) == 0
    assert capsys.readouterr().out.rstrip().endswith("PASS")
    # same circuit, wrong logical state
    assert main(["verify", str(out / "circuit.json"), "--config", cfg, "--target", "minus"]) == 3


def test_compile_is_byte_identical(tmp_path, rep3):
    cfg = _rep3_config(tmp_path, rep3)
    assert main(["compile", "--config", cfg, "--workers", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(["compile", "--config", cfg, "--workers", "1", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "circuit.json").read_bytes()
    assert a == (tmp_path / "b" / "circuit.json").read_bytes()
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == \
        (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_budget_zero_exits_two_and_still_writes(tmp_path):
    cfg = _config(tmp_path, {"code": "five-qubit", "target": "minus",
                             "constraints": {"max_two_qubit": 0},
                             "run": {"max_steps": 40, "max_restarts": 1},
                             "output_dir": str(tmp_path / "out")})
    assert main(["compile", "--config", cfg, "--workers", "1"]) == 2
    meta = json.loads((tmp_path / "out" / "result.json").read_text())
    assert meta["status"] == "budget-exhausted" and meta["two_qubit_count"] == 0
    assert (tmp_path / "out" / "circuit.json").exists()


def test_env_overrides_and_flag_precedence(tmp_path, rep3, monkeypatch):
    cfg = _rep3_config(tmp_path, rep3)
    monkeypatch.setenv("VARQEC_CONFIG", cfg)
    monkeypatch.setenv("VARQEC_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("VARQEC_SEED", "3")
    monkeypatch.setenv("VARQEC_WORKERS", "1")
    assert main(["compile"]) == 0
    meta = json.loads((tmp_path / "env" / "result.json").read_text())
    assert meta["config"]["base_seed"] == 3 and meta["seed"] >= 3
    assert main(["compile", "--out", str(tmp_path / "flag"), "--seed", "0"]) == 0
    meta = json.loads((tmp_path / "flag" / "result.json").read_text())
    assert meta["config"]["base_seed"] == 0
    monkeypatch.setenv("VARQEC_SEED", "minus one")
    assert main(["compile"]) == 1


def test_verify_frozen_encoder(capsys):
    code = ["--target", "minus", "--code", "five-qubit"]
    assert main(["verify", str(DATA / "five_minus_cz5.json")] + code) == 0
    out = capsys.readouterr().out
    stabs = [float(line.split()[-1]) for line in out.splitlines() if line.startswith("<")]
    assert len(stabs) == 4
    assert all(abs(v - 1) <= 1e-6 for v in stabs)


def test_verify_empty_circuit(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text('{"n_qubits": 5, "gates": []}')
    assert main(["verify", str(path), "--code", "five-qubit", "--target", "minus"]) == 3
    out = capsys.readouterr().out
    assert "energy          +0.000000000000" in out
    assert "n/a (E > E1)" in out
    # <00000|0_L> = 1/4 and <00000|1_L> = 0, so |<00000|->_L|^2 = 1/32
    fid = float(out.split("fidelity")[1].split()[0])
    assert fid == pytest.approx(1 / 32, abs=1e-12)


def test_verify_errors(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text('{"n_qubits": 3, "gates": []}')
    assert main(["verify", str(path), "--code", "five-qubit"]) == 1
    assert "do not fit" in capsys.readouterr().err
    path.write_text('{"n_qubits": 5}')
    assert main(["verify", str(path)]) == 1
    assert main(["verify", str(tmp_path / "missing.json")]) == 1


# ---------------------------------------------------------------- noise sweep

def _read_sweep(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_noise_sweep_csv(tmp_path, capsys):
    cfg = _config(tmp_path, {"code": "five-qubit", "target": "minus",
                             "output_dir": str(tmp_path / "out"),
                             "sweep": {"circuit": str(DATA / "five_minus_cz5.json"),
                                       "r_grid": [0, 0.01]}})
    assert main(["noise-sweep", "--config", cfg, "--workers", "1"]) == 0
    text = (tmp_path / "out" / "sweep.csv").read_text()
    assert text.splitlines()[0] == "r,variant,fidelity,accept_prob"
    rows = _read_sweep(tmp_path / "out" / "sweep.csv")
    assert len(rows) == 2 * len(VARIANTS)
    assert [r["variant"] for r in rows[:len(VARIANTS)]] == list(VARIANTS)
    for r in rows:
        if float(r["r"]) == 0:
            assert float(r["fidelity"]) == pytest.approx(1, abs=1e-6)
        # 12 significant digits
        assert len(r["fidelity"].replace("0.", "", 1).lstrip("0")) <= 12
    at = {r["variant"]: float(r["fidelity"]) for r in rows if float(r["r"]) == 0.01}
    assert at["logical-op"] >= at["stab-mean"] >= at["baseline"]


def test_noise_sweep_skips_unsupported_variant(tmp_path, caplog):
    out = tmp_path / "out"
    args = ["noise-sweep", "--code", "steane", "--target", "magic", "--out", str(out),
            "--circuit", str(DATA / "steane_magic_cnot10.json"), "--workers", "1",
            "--variants", "baseline,logical-op", "--r-grid", "0,0.01"]
    assert main(args) == 0
    assert "skipping logical-op" in caplog.text
    rows = _read_sweep(out / "sweep.csv")
    assert len(rows) == 4
    skipped = [r for r in rows if r["variant"] == "logical-op"]
    assert all(math.isnan(float(r["fidelity"])) and r["accept_prob"] == "nan" for r in skipped)
    base0 = [r for r in rows if r["variant"] == "baseline" and float(r["r"]) == 0][0]
    assert float(base0["fidelity"]) == pytest.approx(1, abs=1e-6)


def test_noise_sweep_parallel_matches_serial(tmp_path):
    common = ["noise-sweep", "--code", "five-qubit", "--target", "minus",
              "--circuit", str(DATA / "five_minus_cz5.json"),
              "--variants", "baseline,full-set", "--r-grid", "0.001,0.05"]
    assert main(common + ["--workers", "1", "--out", str(tmp_path / "s")]) == 0
    assert main(common + ["--workers", "2", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "sweep.csv").read_bytes() == (tmp_path / "p" / "sweep.csv").read_bytes()


def test_noise_sweep_rejects_bad_grid(tmp_path, capsys):
    assert main(["noise-sweep", "--r-grid", "0,abc", "--out", str(tmp_path)]) == 1
    assert main(["noise-sweep", "--r-grid", "0,1.5", "--out", str(tmp_path)]) == 1
    assert "r_grid" in capsys.readouterr().err


def test_unbound_circuit_is_rejected(tmp_path, capsys):
    path = tmp_path / "slots.json"
    path.write_text('{"n_qubits": 5, "gates": [{"kind": "Ry", "qubits": [0], "param_slot": 0}]}')
    assert main(["verify", str(path), "--target", "minus"]) == 1
    assert "unbound" in capsys.readouterr().err
    assert load_circuit(path)[1] is None
