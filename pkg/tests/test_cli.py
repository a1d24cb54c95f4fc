import json
import re

import numpy as np
import pytest

from lprobe.cli import main
from lprobe.network import NetworkSpec, init_xavier
from lprobe.records import read_csv, save_checkpoint

TOY = """[run]
name = toy
problem = box1d_cubic
network = linear1d
loss = {loss}
quad = simpson:200
epochs = {epochs}
init_seed = 0
snapshot_every = 2500
"""


def _write(tmp_path, loss="dgm", epochs=10000, extra=""):
    path = tmp_path / f"{loss}.ini"
    path.write_text(TOY.format(loss=loss, epochs=epochs) + f"out_dir = {tmp_path / 'runs'}\n" + extra)
    return path


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("toy")
    assert main(["train", str(_write(tmp))]) == 0
    return tmp / "runs" / "toy"


class TestTrain:
    def test_quickstart_accuracy(self, toy_run):
        _, data = read_csv(toy_run / "trajectory.csv")
        assert data[-1, 0] == 10000
        assert data[-1, 2] < 1e-3

    def test_artifacts(self, toy_run):
        names = {p.name for p in toy_run.iterdir()}
        assert {"config.ini", "trajectory.csv", "epoch_0.json", "epoch_10000.json"} <= names
        assert (toy_run / "trajectory.csv").read_text().startswith("epoch,loss,rel_l2_error\n")

    def test_config_echo_parses_back(self, toy_run, tmp_path):
        from lprobe.config import load_config

        cfg = load_config(toy_run / "config.ini")
        assert load_config(toy_run / "config.ini") == cfg
        assert cfg.epochs == 10000 and cfg.loss == "dgm"

    def test_rerun_bit_identical(self, tmp_path):
        cfg = _write(tmp_path, epochs=300)
        assert main(["train", str(cfg), "--name", "a"]) == 0
        assert main(["train", str(cfg), "--name", "b"]) == 0
        a = (tmp_path / "runs" / "a" / "trajectory.csv").read_bytes()
        b = (tmp_path / "runs" / "b" / "trajectory.csv").read_bytes()
        assert a == b

    def test_missing_key(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text(TOY.format(loss="dgm", epochs=10).replace("init_seed = 0\n", ""))
        assert main(["train", str(path)]) == 2
        assert "init_seed" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_and_partial_artifacts(self, tmp_path):
        path = _write(tmp_path, epochs=50, extra="lr = 1e308\n")
        code = main(["train", str(path)])
        run = tmp_path / "runs" / "toy"
        assert code == 3
        assert (run / "trajectory.csv").exists() and (run / "epoch_0.json").exists()

    def test_retrain_from(self, toy_run, tmp_path, capsys):
        ckpt = toy_run / "epoch_10000.json"
        code = main(["retrain-from", str(ckpt), "--loss", "drm", "--name", "re", "--epochs", "20000", "--out-dir", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "gradient norm" in out
        _, data = read_csv(tmp_path / "re" / "trajectory.csv")
        assert data[-1, 2] < 1e-3


class TestAnalysis:
    def test_eig_toy(self, toy_run, tmp_path, capsys):
        assert main(["eig", str(toy_run / "epoch_10000.json"), "--out", str(tmp_path)]) == 0
        _, lam = read_csv(tmp_path / "eig_epoch_10000_dgm.csv")
        np.testing.assert_allclose(lam[:, 1], [12.0, 4.0], rtol=1e-6)
        _, curve = read_csv(tmp_path / "vcurve_epoch_10000_dgm.csv")
        assert curve[1, 1] == pytest.approx(1.68, abs=0.01)

    def test_eig_builtin_diagonal(self, tmp_path):
        assert main(["eig", "--builtin", "quadratic", "--dim", "5", "--out", str(tmp_path)]) == 0
        _, lam = read_csv(tmp_path / "eig_quadratic.csv")
        np.testing.assert_array_equal(lam[:, 1], [5, 4, 3, 2, 1])

    def test_eig_refuses_oversize(self, tmp_path, capsys):
        spec = NetworkSpec("resnet", 1, 20, 2)
        run = tmp_path / "big"
        cfg = _write(tmp_path, epochs=0).read_text().replace("linear1d", "resnet") + "width = 20\nblocks = 2\n"
        run.mkdir()
        (run / "config.ini").write_text(cfg)
        save_checkpoint(run / "epoch_0.json", spec, 0, 0, init_xavier(spec, 0))
        assert main(["eig", str(run / "epoch_0.json")]) == 2
        assert "1000" in capsys.readouterr().err

    def test_spec_mismatch(self, toy_run, tmp_path, capsys):
        spec = NetworkSpec("resnet")
        save_checkpoint(tmp_path / "epoch_0.json", spec, 0, 0, init_xavier(spec, 0))
        code = main(["roughness", str(tmp_path / "epoch_0.json"), "--config", str(toy_run / "config.ini")])
        assert code == 2
        assert "does not match" in capsys.readouterr().err

    def test_roughness_builtin_quadratic(self, tmp_path):
        assert main(["roughness", "--builtin", "quadratic", "--out", str(tmp_path), "--l", "0.5"]) == 0
        summary = json.loads((tmp_path / "roughness_quadratic_l0.5.json").read_text())
        assert set(summary) == {"M", "l", "m", "seed", "mu", "sigma", "index", "excluded"}
        assert summary["index"] == pytest.approx(0.0, abs=1e-12)
        header, _ = read_csv(tmp_path / "roughness_quadratic_l0.5.csv")
        assert header == ["direction", "T"]

    def test_roughness_sweep_rows(self, toy_run, tmp_path):
        args = ["roughness", str(toy_run / "epoch_10000.json"), "--l", "0.00025,0.0005,0.001", "--M", "10", "--m", "10", "--out", str(tmp_path)]
        assert main(args) == 0
        _, data = read_csv(tmp_path / "roughness_epoch_10000_dgm_sweep.csv")
        assert data.shape[0] == 3
        np.testing.assert_allclose(data[:, 0], [0.00025, 0.0005, 0.001])

    def test_slice2d_deterministic_with_svg(self, toy_run, tmp_path):
        ckpt = str(toy_run / "epoch_10000.json")
        for out in ("a", "b"):
            assert main(["slice2d", ckpt, "--grid", "12", "--l", "0.5", "--svg", "--out", str(tmp_path / out)]) == 0
        a = (tmp_path / "a" / "slice2d_epoch_10000_dgm.csv").read_bytes()
        assert a == (tmp_path / "b" / "slice2d_epoch_10000_dgm.csv").read_bytes()
        assert a.startswith(b"alpha,beta,loss\n")
        svg = (tmp_path / "a" / "slice2d_epoch_10000_dgm.svg").read_text()
        assert len(re.findall(r'class="isoline"', svg)) == 8

    def test_slice2d_quadratic_bowl(self, tmp_path):
        assert main(["slice2d", "--builtin", "quadratic", "--dim", "3", "--grid", "10", "--out", str(tmp_path)]) == 0
        _, data = read_csv(tmp_path / "slice2d_quadratic.csv")
        grid = data[:, 2].reshape(11, 11)
        np.testing.assert_allclose(grid, grid[::-1, ::-1], atol=1e-14)

    def test_slice1d(self, toy_run, tmp_path):
        assert main(["slice1d", str(toy_run / "epoch_10000.json"), "--m", "20", "--out", str(tmp_path)]) == 0
        header, data = read_csv(tmp_path / "slice1d_epoch_10000_dgm.csv")
        assert header == ["s", "loss"] and data.shape == (21, 2)

    def test_traj_roughness_single_checkpoint(self, toy_run, tmp_path):
        run = tmp_path / "one"
        run.mkdir()
        (run / "config.ini").write_text((toy_run / "config.ini").read_text())
        (run / "epoch_10000.json").write_text((toy_run / "epoch_10000.json").read_text())
        assert main(["traj-roughness", str(run), "--M", "20", "--m", "10"]) == 0
        header, data = read_csv(run / "traj_roughness_dgm.csv")
        assert header == ["epoch", "index"] and data.shape == (1, 2)
        # the toy DGM loss is an exact quadratic and this is its minimizer
        assert data[0, 1] < 1e-6

    def test_traj_roughness_series(self, toy_run, tmp_path):
        assert main(["traj-roughness", str(toy_run), "--out", str(tmp_path)]) == 0
        _, data = read_csv(tmp_path / "traj_roughness_dgm.csv")
        assert list(data[:4, 0]) == [0, 1, 2, 4]
        assert np.all(np.isfinite(data[:, 1]))

    def test_no_checkpoints(self, tmp_path):
        assert main(["traj-roughness", str(tmp_path)]) == 2
