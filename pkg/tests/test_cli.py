import json
import subprocess
import sys

import numpy as np
import pytest

from lagshadow.cli import main
from lagshadow.datagen import load_dataset, save_dataset
from lagshadow.domain import Trajectory, TrajectoryDataset


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def minimal(tmp_path, capsys):
    path = tmp_path / "d.json"
    code, out, _ = run(["gen-data", "--system", "pendulum", "--n-traj", 4, "--traj-len", 6,
                        "--out", path], capsys)
    assert code == 0
    return path


def test_gen_data_minimal(tmp_path, capsys):
    path = tmp_path / "d.json"
    code, out, _ = run(["gen-data", "--n-traj", 1, "--traj-len", 3, "--out", path], capsys)
    assert code == 0 and out.split() == ["trajectories", "1", "triples", "1"]
    assert load_dataset(path).n_triples == 1


def test_gen_data_pendulum_preset(tmp_path, capsys):
    path = tmp_path / "d.json"
    code, _, _ = run(["gen-data", "--system", "pendulum", "--out", path], capsys)
    assert code == 0 and len(load_dataset(path)) == 400


def test_gen_data_bad_fine_step(tmp_path, capsys):
    code, _, err = run(["gen-data", "--h", 0.5, "--h-fine", 0.3, "--out", tmp_path / "x"], capsys)
    assert code == 2 and "divide" in err
    assert not (tmp_path / "x").exists()


def test_invalid_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--method", "magic"])
    assert exc.value.code == 2


def test_train_lsi_pendulum_preset(tmp_path, capsys):
    data = tmp_path / "d.json"
    run(["gen-data", "--system", "pendulum", "--out", data], capsys)
    code, out, _ = run(["train", "--method", "lsi", "--epsilon", 5, "--data", data,
                        "--out", tmp_path / "m.json"], capsys)
    assert code == 0 and "centers 2000" in out


def test_train_usage_errors(tmp_path, minimal, capsys):
    code, _, err = run(["train", "--method", "lgp-exact", "--data", minimal, "--out",
                        tmp_path / "m.json"], capsys)
    assert code == 2 and "--system" in err
    short = tmp_path / "short.json"
    save_dataset(TrajectoryDataset([Trajectory(np.array([[0.0], [0.1]]), 0.5)], 0.5, 1), short)
    code, _, _ = run(["train", "--method", "gpflow", "--data", short, "--out", tmp_path / "g"],
                     capsys)
    assert code == 2
    code, _, _ = run(["train", "--data", tmp_path / "missing.json", "--out", tmp_path / "g"],
                     capsys)
    assert code == 2


@pytest.mark.parametrize("method", ["lsi", "lgp", "gpflow"])
def test_train_predict_round(tmp_path, minimal, capsys, method):
    model = tmp_path / "m.json"
    assert run(["train", "--method", method, "--data", minimal, "--out", model], capsys)[0] == 0
    out = tmp_path / "p.csv"
    code, text, _ = run(["predict", "--model", model, "--q0", 0.3, "--qdot0", 0, "--steps", 0,
                         "--out", out], capsys)
    rows = out.read_text().splitlines()
    assert code == 0 and len(rows) == 2 and rows[1].startswith("0,0.29999999999999999")


def test_predict_pendulum_13_steps(tmp_path, capsys):
    data, model, out = tmp_path / "d.json", tmp_path / "m.json", tmp_path / "p.csv"
    run(["gen-data", "--system", "pendulum", "--n-traj", 100, "--out", data], capsys)
    run(["train", "--method", "lsi", "--epsilon", 5, "--data", data, "--out", model], capsys)
    code, _, _ = run(["predict", "--model", model, "--q0", 0.3, "--qdot0", 0, "--steps", 13,
                      "--with-velocities", "--out", out], capsys)
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "t,q1,qd1,p1" and len(rows) == 15
    q = np.array([float(r.split(",")[1]) for r in rows[1:]])
    t = np.array([float(r.split(",")[0]) for r in rows[1:]])
    # small-angle pendulum: q(t) close to 0.3 cos t
    assert np.abs(q - 0.3 * np.cos(t)).max() < 0.02


def test_analyze_nu_identical(tmp_path, minimal, capsys):
    model = tmp_path / "m.json"
    run(["train", "--method", "lsi", "--data", minimal, "--out", model], capsys)
    code, out, _ = run(["analyze", "nu", "--a", model, "--b", model, "--resolution", 5], capsys)
    assert code == 0 and out.splitlines()[0] == "nu 0"
    code, out, _ = run(["analyze", "nu", "--a", "ref:pendulum", "--b", "ref:pendulum"], capsys)
    assert out.splitlines() == ["nu 0", "used 900 skipped 0"]


def test_analyze_shape_mismatch(tmp_path, minimal, capsys):
    model = tmp_path / "m.json"
    run(["train", "--method", "lsi", "--data", minimal, "--out", model], capsys)
    code, _, _ = run(["analyze", "nu", "--a", model, "--b", "ref:henon-heiles"], capsys)
    assert code == 2
    code, _, _ = run(["analyze", "contour", "--field", "ref:pendulum", "--axis", "0:-1:1:5",
                      "--axis", "2:-1:1:5", "--out", tmp_path / "c.csv"], capsys)
    assert code == 2


def test_analyze_contour_and_energy(tmp_path, capsys):
    c = tmp_path / "c.csv"
    code, _, _ = run(["analyze", "contour", "--field", "ref:pendulum", "--resolution", 4,
                      "--out", c], capsys)
    assert code == 0 and len(c.read_text().splitlines()) == 5
    traj = tmp_path / "t.csv"
    traj.write_text("t,q1,qd1\n0,0,1\n0.5,0.4794,0.8776\n")
    e = tmp_path / "e.csv"
    code, out, _ = run(["analyze", "energy", "--traj", traj, "--field", "ref:pendulum",
                        "--out", e], capsys)
    assert code == 0 and e.read_text().splitlines()[1] == "0,-0.5"


def test_analyze_divergence(tmp_path, capsys):
    traj = tmp_path / "t.csv"
    traj.write_text("t,q1,q2\n0,0.1,0\n0.1,0.2,0\n")
    assert run(["analyze", "divergence", "--traj", traj, "--bound", 2], capsys)[1].strip() == "none"
    traj.write_text("t,q1,q2\n0,0.1,0\n0.1,3,0\n")
    assert run(["analyze", "divergence", "--traj", traj, "--bound", 2], capsys)[1].strip() == "0.10000000000000001"


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_traj": 2, "traj_len": 4}))
    out = tmp_path / "d.json"
    code, text, _ = run(["--config", cfg, "gen-data", "--traj-len", 5, "--out", out], capsys)
    assert code == 0
    ds = load_dataset(out)
    assert len(ds) == 2 and len(ds.trajectories[0]) == 5
    cfg.write_text(json.dumps({"colour": "red"}))
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "gen-data", "--out", str(out)])
    assert exc.value.code == 2


def test_gen_data_deterministic(tmp_path, capsys):
    for name in ("a.json", "b.json"):
        run(["gen-data", "--system", "henon-heiles", "--n-traj", 3, "--out", tmp_path / name],
            capsys)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lagshadow.cli", "gen-data", "--h", "0.5",
                        "--h-fine", "0.3", "--out", str(tmp_path / "x")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and r.stdout == "" and "error" in r.stderr
