import csv
import json
import subprocess
import sys

import numpy as np

from tfspde import solver, tfgn
from tfspde.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_table_preset_example(tmp_path, capsys):
    out = tmp_path / "t1.csv"
    assert main(["table", "--preset", "table1", "--k", "200", "--seed", "7", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["hurst", "M", "error", "rate"]
    assert len(rows) == 1 + 4 * 3
    assert [r[0] for r in rows[1::3]] == ["0.4", "0.8", "1.2", "1.6"]
    assert [r[1] for r in rows[1:4]] == ["32", "48", "72"]
    assert rows[1][3] == "" and float(rows[2][3]) > 0
    doc = json.loads((tmp_path / "t1.json").read_text())
    assert doc["sweep"] == "hurst"
    rep = doc["reports"][0]
    assert rep["seed"] == 7 and rep["trajectories"] == 200
    assert rep["plan"]["mu"] == 1.0 and rep["predicted_rate"] == 0.4
    assert "rates" in capsys.readouterr().out


def test_sample_tfbm_is_reproducible(tmp_path):
    args = ["sample-tfbm", "--hurst", "0.8", "--mu", "1", "--steps", "64", "--paths", "3", "--seed", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--output", str(a), "--binary", str(tmp_path / "a.bin")]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert rows[0] == ["step", "time", "path_0", "path_1", "path_2"]
    assert len(rows) == 66 and rows[1][2:] == ["0.0"] * 3
    table = tfgn.load_table(tmp_path / "a.bin")
    np.testing.assert_array_equal(np.array([r[4] for r in rows[1:]], dtype=float)[1:],
                                  np.cumsum(table.data[2]))


def test_half_hurst_is_a_usage_error(tmp_path, capsys):
    code = main(["sample-tfbm", "--hurst", "0.5", "--mu", "1", "--steps", "8",
                 "--output", str(tmp_path / "x.csv")])
    assert code == 2
    assert "1/2" in capsys.readouterr().err


def test_missing_required_value(capsys):
    assert main(["sample-tfbm", "--mu", "1", "--steps", "8"]) == 2
    assert "--hurst" in capsys.readouterr().err


def test_bad_flag_exits_two():
    assert main(["sample-tfbm", "--hurst", "x"]) == 2
    assert main(["no-such-command"]) == 2


def test_factorization_failure_names_stage(tmp_path, capsys):
    code = main(["sample-tfbm", "--hurst", "1.99", "--mu", "0.001", "--steps", "512",
                 "--output", str(tmp_path / "x.csv")])
    assert code == 1
    err = capsys.readouterr().err
    assert "factorization" in err and "row" in err


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hurst": 0.8, "mu": 1.0, "steps": 16, "seed": 4}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", str(cfg), "sample-tfbm", "--output", str(a)]) == 0
    assert main(["sample-tfbm", "--hurst", "0.8", "--mu", "1", "--steps", "16", "--seed", "4",
                 "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["--config", str(cfg), "sample-tfbm", "--steps", "8", "--output", str(c)]) == 0
    assert len(read_csv(c)) == 10
    cfg.write_text(json.dumps({"hurst": 0.8, "colour": "blue"}))
    assert main(["--config", str(cfg), "sample-tfbm"]) == 2


def test_solve_exports_trajectory(tmp_path):
    out, binary = tmp_path / "traj.csv", tmp_path / "traj.bin"
    code = main(["solve", "--alpha", "0.5", "--hurst", "0.8", "--mu", "1", "--rho", "0.75",
                 "--modes-per-dim", "3", "--steps", "10", "--ratio", "2",
                 "--output", str(out), "--binary", str(binary)])
    assert code == 0
    rows = read_csv(out)
    assert rows[0] == ["m", "i1", "i2", "z", "conv", "u"] and len(rows) == 1 + 11 * 9
    back = solver.load_trajectory(binary)
    assert back["u"].shape == (11, 9)
    assert float(rows[-1][5]) == back["u"][10, -1]


def test_table_rejects_holder_preset(tmp_path):
    assert main(["table", "--preset", "holder_rough", "--output", str(tmp_path / "x.csv")]) == 2


def test_holder_command(tmp_path, capsys):
    out = tmp_path / "h.json"
    code = main(["holder", "--k", "4", "--modes-per-dim", "4", "--steps", "64", "--lags", "1,2,4,8",
                 "--output", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["lag_times"]) == 4 and doc["plan"]["trajectories"] == 4
    assert "Hölder exponent estimate" in capsys.readouterr().out
    assert main(["holder", "--lags", "1,2", "--output", str(out)]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tfspde", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sample-tfbm" in res.stdout
