import csv
import io
import json
import math
import subprocess
import sys

import pytest

from hyperepp import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_epp_ideal(capsys):
    code, out, _ = run(["epp", "--a", "1", "--b", "0", "--c", "0", "--d", "0"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["min_final_fidelity"] == pytest.approx(1, abs=1e-12)
    assert doc["total_probability"] == pytest.approx(1, abs=1e-12)


def test_nbsa_table(capsys):
    code, out, _ = run(["nbsa", "--table"], capsys)
    doc = json.loads(out)
    assert code == 0 and set(doc) == {"phi+", "phi-", "psi+", "psi-"}
    assert all(doc[k]["classification"] == k for k in doc)
    code, out, _ = run(["nbsa", "--table", "--format", "csv"], capsys)
    assert len(out.strip().splitlines()) == 5
    code, out, _ = run(["nbsa", "--input", "psi+", "--format", "text"], capsys)
    assert "psi+ -> psi+" in out


def test_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--param", "dphi_s", "--from", "0", "--to", "3.14159", "--steps", "13",
                        "--a", "0.4", "--b", "0.3", "--c", "0.2", "--d", "0.1"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 13
    for r in rows:
        formula = (1 + 0.2 * math.cos(float(r["dphi_s"]))) / 2
        assert abs(float(r["F_simulated"]) - formula) <= 1e-12


def test_other_commands(capsys):
    code, out, _ = run(["ff", "--model", "uniform-jitter", "--delta", "0.1", "--samples", "2000"], capsys)
    assert code == 0 and json.loads(out)["F_f"] == pytest.approx((1 + math.sin(0.1) / 0.1) / 2, abs=1e-3)
    code, out, _ = run(["factorize", "--L-a1", "1", "--L-a2", "1", "--L-b1", "2", "--L-b2", "2",
                        "--omega1", "1", "--omega2", "2", "--v", "1"], capsys)
    assert code == 0 and json.loads(out)["overlap"] == pytest.approx(1, abs=1e-12)
    code, out, _ = run(["baseline", "--f0", "0.75", "--f-target", "0.98"], capsys)
    doc = json.loads(out)
    assert doc["n_rounds"] == 2 and doc["pairs_consumed_expected"] == pytest.approx(7.80, abs=0.01)
    code, out, _ = run(["dispersive", "--dphi-s", "0.5", "--dphi-f", "0.9", "--compensation", "off"], capsys)
    assert json.loads(out)["max_final_fidelity"] == pytest.approx((1 + math.cos(0.9)) / 2, abs=1e-12)


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"noise": {"a": 0.5, "b": 0.5, "c": 0, "d": 0, "dphi_s": 0.3},
                               "output": {"format": "json"}}))
    code, out, _ = run(["sweep", "--config", str(cfg), "--steps", "1", "--from", "0", "--to", "0"], capsys)
    assert json.loads(out)["rows"][0]["a"] == 0.5
    code, out, _ = run(["sweep", "--config", str(cfg), "--a", "1", "--b", "0", "--steps", "1",
                        "--from", "0", "--to", "0"], capsys)
    row = json.loads(out)["rows"][0]
    assert row["a"] == 1 and row["b"] == 0


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"noise": {"a": 1, "gamma": 2}}))
    code, _, err = run(["epp", "--config", str(cfg)], capsys)
    assert code != 0
    doc = json.loads(err)
    assert doc["error"] == "ConfigError" and "gamma" in doc["message"]
    cfg.write_text(json.dumps({"plugins": {}}))
    assert run(["epp", "--config", str(cfg)], capsys)[0] != 0


def test_error_leaves_no_file(tmp_path, capsys):
    target = tmp_path / "out.json"
    code, _, err = run(["epp", "--a", "0.9", "--b", "0.9", "--out", str(target)], capsys)
    assert code != 0
    assert json.loads(err)["error"] == "ValueError"
    assert list(tmp_path.iterdir()) == []
    code, _, _ = run(["baseline", "--f0", "0.4", "--f-target", "0.9", "--out", str(target)], capsys)
    assert code != 0 and not target.exists()


def test_output_file_and_reproducibility(tmp_path, capsys):
    paths = [tmp_path / "r1.json", tmp_path / "r2.json"]
    for p in paths:
        assert run(["epp", "--a", "0.4", "--b", "0.3", "--c", "0.2", "--d", "0.1", "--mode", "sampled",
                    "--trials", "300", "--seed", "9", "--out", str(p)], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert json.loads(paths[0].read_text())["seed"] == 9


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hyperepp", "nbsa", "--input", "phi-"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["classification"] == "phi-"
