from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from avriso.cli import main, resolve_config
from avriso.errors import ConfigError


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and " seed=" in lines[0]
    return list(csv.reader(lines[1:]))


def test_profile_example(tmp_path, capsys):
    assert main(["profile", "--N", "2", "--D", "1", "--v-grid", "99", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "profile.csv")
    assert rows[0] == ["v", "value", "xi_star"]
    vals = np.array([[float(x) for x in r] for r in rows[1:]])
    assert len(vals) == 99
    assert np.allclose(vals[:, 0] + vals[::-1, 0], 1.0, atol=1e-15)
    assert np.allclose(vals[:, 1], vals[::-1, 1], rtol=1e-12)


def test_cone_check_example(tmp_path):
    assert main(["cone-check", "examples/quadrant_xy.json", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "deficits.csv")
    assert rows[0][-1] == "deficit"
    assert float(rows[1][-1]) <= 1e-3


def test_random_family_is_deterministic_and_thread_independent(tmp_path):
    args = ["cone-check", "quadrant", "--family", "random_star", "--count", "4", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "3", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "deficits.csv").read_bytes()
    assert a == (tmp_path / "b" / "deficits.csv").read_bytes()
    assert main(args[:-1] + ["8", "--out", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "deficits.csv").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"N": 3, "v_grid": 5, "seed": 11}))
    assert main(["profile", "--config", str(cfg), "--v-grid", "7", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "profile.csv").read_text()
    assert "seed=11" in text.splitlines()[0]
    assert len(_rows(tmp_path / "profile.csv")) == 8
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


@pytest.mark.parametrize("content", ['{"N": 3, "colour": 1}', '{"N": "three"}', "[1, 2]",
                                     "{not json", '{"seed": -1}', '{"v_grid": 2.5}'])
def test_config_errors_exit_2(tmp_path, capsys, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    assert main(["profile", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("ERROR:cli:config:")


def test_domain_errors_exit_2(tmp_path, capsys):
    assert main(["profile", "--N", "0.5", "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("ERROR:density1d:domain:")
    assert main(["cone-check", "no_such_cone", "--out", str(tmp_path)]) == 2


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["profile", "--N"])
    assert exc.value.code == 2
    assert "ERROR:cli:usage:" in capsys.readouterr().err


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        resolve_config("rigidity", {"v_grid": 3}, {})


def test_residual_1d(tmp_path):
    assert main(["residual-1d", "--k-min", "6", "--k-max", "9", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "certificates.csv")
    assert rows[0] == ["k", "w", "delta", "b_rel_err", "a_rel", "h_tilde_dist", "diam_ratio"]
    assert [int(r[0]) for r in rows[1:]] == [6, 7, 8, 9]


def test_localize_outputs(tmp_path):
    args = ["localize", "quadrant_xy", "--R-list", "10", "100", "--n-rays", "64",
            "--grid-size", "24"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    curve = _rows(tmp_path / "a" / "residual_curve.csv")
    assert curve[0] == ["R", "l1_residual"]
    assert [float(r[1]) for r in curve[1:]] == pytest.approx([0.2, 0.02], abs=1e-9)
    assert _rows(tmp_path / "a" / "potential.csv")[0] == ["x", "y", "phi"]
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("residual_curve.csv", "potential.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rigidity_outputs_and_exit_codes(tmp_path, capsys):
    assert main(["rigidity", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS verdict=rigid")
    doc = json.loads((tmp_path / "verdict.json").read_text())
    assert doc["verdict"] == "rigid" and "rays" in doc and "ball_fit" in doc
    assert _rows(tmp_path / "verdict.csv")[0] == ["field", "value"]
    code = main(["rigidity", "--set", "ellipse", "--axes", "1", "1.05", "--deficit", "1",
                 "--sym-diff", "0.001", "--out", str(tmp_path)])
    assert code == 1
    assert "ERROR:cli:assertion:" in capsys.readouterr().err


def test_selftest_subset(tmp_path, capsys):
    assert main(["selftest", "--criteria", "2", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2
    rows = _rows(tmp_path / "selftest.csv")
    assert [r[2] for r in rows[1:]] == ["PASS", "PASS"]
    assert main(["selftest", "--criteria", "42", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "avriso", "profile", "--v-grid", "3",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "profile.csv").exists()
