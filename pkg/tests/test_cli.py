import csv
import json
import math

import numpy as np
import pytest

from vnmeasure import cli


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def _run(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -1074, 1e300, -0.0):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(7) == "7"
    assert cli.fmt("") == ""


def test_curve_command(tmp_path):
    code, out = _run(tmp_path, "c.csv", "curve", "--d", "2", "--ds", "2", "--grid", "5",
                     "--t-max", "20")
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header.startswith("# config: ")
    cfg = json.loads(header[len("# config: "):])
    assert cfg["d"] == 2 and cfg["measure"] == "bures"
    rows = _rows(out)
    assert list(rows[0]) == ["g_t", "value", "floor"]
    assert float(rows[0]["value"]) == pytest.approx(1.0, abs=1e-9)
    assert float(rows[-1]["value"]) == pytest.approx(float(rows[-1]["floor"]), rel=0.05)
    manifest = json.loads((tmp_path / "c.csv.manifest.json").read_text())
    assert manifest["command"] == "curve"
    assert manifest["outputs"] == [str(out)]
    assert manifest["config"]["d_S"] == 2


def test_config_file_with_flag_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"d": 5, "d_S": 3, "measure": "hs", "N_uno": 4}))
    args = cli.build_parser().parse_args(["timescales", "--config", str(path), "--d", "6"])
    cfg = cli.resolve_config(args)
    assert (cfg.d, cfg.d_S, cfg.N_uno, cfg.measure.value) == (6, 3, 4, "hs")


def test_mc_verify_purity(tmp_path):
    code, out = _run(tmp_path, "p.csv", "mc-verify", "--quantity", "purity", "--measure", "hs",
                     "--d", "2", "--samples", "20000")
    assert code == 0
    row = _rows(out)[0]
    assert float(row["analytic"]) == 0.8


def test_mc_verify_gamma(tmp_path):
    code, out = _run(tmp_path, "g.csv", "mc-verify", "--quantity", "gamma", "--d", "4",
                     "--deltas", "0,0.25,1,4", "--samples", "10000")
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == ["delta", "analytic", "mc_mean", "mc_stderr", "z_score"]
    assert float(rows[0]["analytic"]) == pytest.approx(1.0)
    assert float(rows[0]["mc_mean"]) == pytest.approx(1.0)
    assert float(rows[0]["z_score"]) == 0.0
    assert all(abs(float(r["z_score"])) <= 4 for r in rows)


def test_mc_verify_reports_failures(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "Z_LIMIT", 1e-9)
    code, _ = _run(tmp_path, "bad.csv", "mc-verify", "--quantity", "f", "--d", "3",
                   "--deltas", "0.5", "--samples", "200")
    assert code == 1
    assert "mc-verify" in capsys.readouterr().err


def test_timescales(tmp_path):
    code, out = _run(tmp_path, "t.json", "timescales", "--d", "2", "--measure", "hs")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["tau_dec"] == pytest.approx(19.2 ** -0.5)
    assert data["ratio"] == pytest.approx(data["tau_fid"] / data["tau_dec"])
    assert data["tau_pair_formula_constants"]["prefactor"] == pytest.approx(1 / math.sqrt(3))


def test_ansatz_check(tmp_path):
    code, out = _run(tmp_path, "a.csv", "ansatz-check", "--d-max", "6")
    assert code == 0
    rows = _rows(out)
    assert [int(r["d"]) for r in rows] == [2, 3, 4, 5, 6]
    assert all(float(r["max_gamma_minus_ansatz"]) <= 1e-12 for r in rows)


def test_concentration(tmp_path):
    code, out = _run(tmp_path, "h.csv", "concentration", "--d", "3", "--n-uno", "3",
                     "--n-mac", "3", "--t", "1.0", "--samples", "300", "--deltas", "0,0.5,1.5")
    assert code == 0
    rows = _rows(out)
    assert float(rows[0]["bound"]) == 2.0
    assert float(rows[2]["empirical_prob"]) == 0.0


def test_semicircle(tmp_path):
    code, out = _run(tmp_path, "s.csv", "semicircle", "--d", "50", "--samples", "300",
                     "--bins", "50")
    assert code == 0
    text = out.read_text()
    ks = float(text.split("ks=")[1].split()[0])
    assert ks < 0.05
    radius = 2 * math.sqrt(50)
    for r in _rows(out):
        if float(r["bin_lo"]) >= 1.1 * radius or float(r["bin_hi"]) <= -1.1 * radius:
            assert int(r["count"]) == 0


def test_micro_check(tmp_path):
    code, out = _run(tmp_path, "m.csv", "micro-check", "--d", "2", "--n-uno", "1",
                     "--n-mac", "2", "--samples", "15")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 15
    assert all(r["ok"] == "1" for r in rows)


def test_replay_is_byte_identical(tmp_path):
    code, out = _run(tmp_path, "r.csv", "mc-verify", "--quantity", "superfid", "--d", "3",
                     "--samples", "5000", "--seed", "17")
    assert code == 0
    replayed = tmp_path / "r2.csv"
    assert cli.main(["replay", str(out) + ".manifest.json", "--out", str(replayed)]) == 0
    assert replayed.read_bytes() == out.read_bytes()


def test_output_independent_of_workers(tmp_path):
    base = ["mc-verify", "--quantity", "gamma", "--d", "4", "--samples", "9000", "--seed", "3"]
    _, one = _run(tmp_path, "w1.csv", *base, "--workers", "1")
    _, many = _run(tmp_path, "w8.csv", *base, "--workers", "8")
    assert one.read_bytes() == many.read_bytes()


def test_curve_quadrature_failure_exit(tmp_path, capsys, monkeypatch):
    from vnmeasure.quadrature import QuadratureError

    def boom(req):
        raise QuadratureError("no convergence", 0.0, 1e-9)

    monkeypatch.setattr(cli, "system_average_curve", boom)
    code, _ = _run(tmp_path, "x.csv", "curve", "--grid", "3")
    assert code == 2
    assert "no convergence" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "vnmeasure", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert res.stdout.strip()
