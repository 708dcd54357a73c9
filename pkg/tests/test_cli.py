import csv
import io
import json
import math
import subprocess
import sys

import pytest

from spintree.analytic import exact_fidelity
from spintree.cli import dumps, main
from spintree.network import NetworkSpec


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def write_cfg(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


# -- build ------------------------------------------------------------------


def test_build_tree_with_aux(capsys):
    code, out, _ = run(capsys, "build", "--tree", "2", "--j0", "1", "--with-aux")
    assert code == 0
    net = NetworkSpec.from_json(out)
    assert len(net) == 9 and "(0,0)/aux" in net


def test_build_modified(capsys):
    code, out, _ = run(capsys, "build", "--modified-bt2")
    assert code == 0
    assert len(NetworkSpec.from_json(out)) == 13


def test_build_concatenated(capsys):
    code, out, _ = run(capsys, "build", "--wire", "0:1:1", "--wire", "0:2:2", "--link-j", "0.5", "--omega", "1")
    assert code == 0
    net = NetworkSpec.from_json(out)
    assert len(net) == 3 * 13 + 2
    assert net.coupling("link:1", "T0:(2,2)") == 0.5
    assert set(net.omegas) == {1.0}


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "--tree", "0"],
        ["build"],
        ["build", "--wire", "0:1"],
        ["build", "--wire", "0:1:0"],
        ["build", "--tree", "2", "--j0", "0"],
        ["nonsense"],
    ],
)
def test_build_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert err


def test_build_to_file(capsys, tmp_path):
    path = tmp_path / "net.json"
    code, out, _ = run(capsys, "build", "--tree", "1", "--out", str(path))
    assert code == 0 and out == ""
    assert len(NetworkSpec.from_json(path.read_text())) == 4


# -- simulate ---------------------------------------------------------------


def test_simulate_default(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "8", "--leaf", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["fidelity"] == pytest.approx(exact_fidelity(8), abs=1e-10)
    assert len(doc["per_step_norms"]) == 3
    assert all(abs(x - 1) < 1e-11 for x in doc["per_step_norms"])
    assert set(doc) >= {"fidelity", "amplitude", "per_step_norms", "elapsed_model_time", "final_state"}


def test_simulate_oracle(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "4", "--oracle")
    assert code == 0
    oracle = json.loads(out)["oracle"]
    assert oracle["max_deviation"] < 1e-9 and oracle["max_leak"] < 1e-12


def test_simulate_oracle_too_large(capsys):
    code, _, err = run(capsys, "simulate", "--route", "0:1", "--route", "1:2", "--oracle")
    assert code == 2
    assert "spins" in err


def test_simulate_route(capsys):
    code, out, _ = run(capsys, "simulate", "--route", "0:2", "--route", "1:3", "--n", "8")
    assert code == 0
    assert json.loads(out)["fidelity"] == pytest.approx(exact_fidelity(8) ** 2, abs=1e-9)


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "2", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    assert float(rows[0]["fidelity"]) == pytest.approx(exact_fidelity(2), abs=1e-10)


def test_simulate_inline_identity(capsys, tmp_path):
    amps = {"vacuum": [0.0, 0.0], "amps": {"a": [0.6, 0.0], "b": [0.0, 0.8]}}
    cfg = {
        "network": {"nodes": [{"id": "a", "omega": 0.0}, {"id": "b", "omega": 0.0}], "edges": [{"a": "a", "b": "b", "j": 1.0}]},
        "protocol": {"steps": [], "initial": amps, "target": {"vacuum": [0, 0], "amps": {"a": [1, 0]}}},
    }
    code, out, _ = run(capsys, "simulate", write_cfg(tmp_path, cfg))
    assert code == 0
    assert json.loads(out)["fidelity"] == pytest.approx(0.36, abs=1e-15)


def test_simulate_inline_rabi(capsys, tmp_path):
    cfg = {
        "network": {"nodes": [{"id": "a", "omega": 0.0}, {"id": "b", "omega": 0.0}], "edges": [{"a": "a", "b": "b", "j": 1.0}]},
        "protocol": {
            "steps": [{"evolve": math.pi / 2}],
            "initial": {"vacuum": [0, 0], "amps": {"a": [1, 0]}},
            "target": {"vacuum": [0, 0], "amps": {"b": [1, 0]}},
        },
    }
    code, out, _ = run(capsys, "simulate", write_cfg(tmp_path, cfg))
    assert code == 0
    assert json.loads(out)["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_simulate_builder_config(capsys, tmp_path):
    cfg = {"network": {"builder": "bt2+aux", "j0": 1.0, "n": 8, "leaf": 3}}
    code, out, _ = run(capsys, "simulate", write_cfg(tmp_path, cfg))
    assert code == 0
    assert json.loads(out)["fidelity"] == pytest.approx(exact_fidelity(8), abs=1e-10)


@pytest.mark.parametrize(
    "cfg",
    [
        {"network": {"builder": "bt2+aux", "nodes": []}},
        {"network": {}},
        {"protocol": {"builder": "bt2"}},
        {"network": {"builder": "bt2+aux"}, "protocol": {"builder": "bt2", "steps": []}},
        {"network": {"builder": "weird"}},
        {"network": {"builder": "tree", "order": 2}, "protocol": {"builder": "bt2"}},
        {"network": {"builder": "bt2+aux"}, "protocol": {"steps": [{"flip": ["zz"]}], "initial": {}, "target": {}}},
    ],
)
def test_simulate_bad_config(capsys, tmp_path, cfg):
    code, _, err = run(capsys, "simulate", write_cfg(tmp_path, cfg))
    assert code == 2 and err


def test_simulate_unreadable_config(capsys, tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert run(capsys, "simulate", str(p))[0] == 2
    assert run(capsys, "simulate", str(tmp_path / "missing.json"))[0] == 2


# -- sweep ------------------------------------------------------------------


def test_sweep_csv(capsys):
    code, out, err = run(capsys, "sweep", "--max-n", "60", "--numeric-cap", "40")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0])[:7] == [
        "n", "tau_n", "phi_mod_2pi", "F_analytic", "F_numeric", "infidelity", "running_min_infidelity",
    ]
    assert [int(r["n"]) for r in rows] == list(range(61))
    running = [float(r["running_min_infidelity"]) for r in rows]
    assert all(b <= a for a, b in zip(running, running[1:]))
    assert any(float(r["infidelity"]) < 1e-6 for r in rows[:9])
    for r in rows:
        if int(r["n"]) <= 40:
            assert abs(float(r["F_exact"]) - float(r["F_numeric"])) < 1e-10
        else:
            assert r["F_numeric"] == ""
    summary = json.loads(err.split("sweep summary: ", 1)[1])
    assert summary["claimed_gamma"] == 1.0


def test_sweep_bad_args(capsys):
    assert run(capsys, "sweep", "--max-n", "-1")[0] == 2
    assert run(capsys, "sweep")[0] == 2
    assert run(capsys, "sweep", "--max-n", "3", "--numeric-cap", "-2")[0] == 2


# -- linktime ---------------------------------------------------------------


def test_linktime_default(capsys):
    code, out, _ = run(capsys, "linktime")
    assert code == 0
    doc = json.loads(out)
    assert doc["time"] == pytest.approx(math.pi / 2, abs=1e-7)
    assert 1 - 1e-9 < doc["amplitude_modulus"] <= 1 + 1e-12
    assert doc["out_port"] == ["T0:(2,1)", "T0:(2,1)/aux"]


def test_linktime_config(capsys, tmp_path):
    cfg = {"network": {"builder": "concatenated", "j0": 1.0, "wirings": [[0, 2, 1], [1, 4, 2]], "link_j": 2.0}, "link": "link:1"}
    code, out, _ = run(capsys, "linktime", write_cfg(tmp_path, cfg))
    assert code == 0
    doc = json.loads(out)
    assert doc["time"] == pytest.approx(math.pi / 4, abs=1e-7)
    assert doc["in_port"] == ["T2:(0,0)", "T2:(0,0)/aux"]
    assert doc["amplitude_modulus"] <= 1 + 1e-12


@pytest.mark.parametrize(
    "cfg",
    [
        {"network": {"builder": "bt2+aux"}},
        {"network": {"nodes": [{"id": "x"}], "edges": []}},
        {"network": {"nodes": "bad", "edges": []}},
    ],
)
def test_linktime_malformed(capsys, tmp_path, cfg):
    assert run(capsys, "linktime", write_cfg(tmp_path, cfg))[0] == 2


# -- oracle-check -----------------------------------------------------------


def test_oracle_check_default(capsys):
    code, out, _ = run(capsys, "oracle-check", "--samples", "5")
    assert code == 0
    doc = json.loads(out)
    assert doc["nodes"] == 9 and doc["ok"] is True
    assert doc["max_deviation"] < 1e-9 and doc["max_leak"] < 1e-12


def test_oracle_check_too_large(capsys, tmp_path):
    cfg = {"network": {"builder": "modified-bt2"}}
    assert run(capsys, "oracle-check", write_cfg(tmp_path, cfg))[0] == 2


# -- determinism and formatting ---------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--n", "8"],
        ["sweep", "--max-n", "30"],
        ["linktime"],
        ["oracle-check", "--samples", "3", "--seed", "7"],
        ["build", "--wire", "0:1:1"],
    ],
)
def test_deterministic_output(capsys, argv):
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second and first


def test_seventeen_digit_floats():
    text = dumps({"x": 0.1, "y": [1.0, 2], "z": None, "s": "a\"b"})
    assert json.loads(text) == {"x": 0.1, "y": [1.0, 2], "z": None, "s": "a\"b"}
    assert "0.10000000000000001" in text
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_console_script():
    res = subprocess.run(
        [sys.executable, "-m", "spintree.cli", "build", "--tree", "0"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 2
    assert "error" in res.stderr
