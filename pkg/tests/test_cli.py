import csv
import json

import pytest

from chanclust.cli import main, parse_channels
from chanclust.data import lead_lag_pair, write_csv
from chanclust.errors import ForecastError


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def config_path(tmp_path, small_config):
    return write_json(tmp_path / "cfg.json", small_config)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestTrain:
    def test_file_contract(self, tmp_path, config_path):
        out = tmp_path / "run"
        assert main(["train", "--config", config_path, "--out", str(out)]) == 0
        for name in ("config.json", "run.json", "mapping_history.json", "model.ckpt", "log.txt"):
            assert (out / name).exists(), name
        history = json.loads((out / "mapping_history.json").read_text())
        assert min(min(h["assignment"]) for h in history) >= 1
        assert "epoch_seconds" in (out / "log.txt").read_text()

    def test_refuses_overwrite(self, tmp_path, config_path, capsys):
        out = str(tmp_path / "run")
        assert main(["train", "--config", config_path, "--out", out]) == 0
        before = (tmp_path / "run" / "run.json").read_bytes()
        assert main(["train", "--config", config_path, "--out", out]) == 1
        assert "--force" in capsys.readouterr().err
        assert main(["train", "--config", config_path, "--out", out, "--force"]) == 0
        assert (tmp_path / "run" / "run.json").read_bytes() == before

    def test_seed_override(self, tmp_path, config_path):
        main(["train", "--config", config_path, "--out", str(tmp_path / "a"), "--seed", "11"])
        assert json.loads((tmp_path / "a" / "run.json").read_text())["config"]["seed"] == 11

    def test_bad_config_exit_1(self, tmp_path, small_config, capsys):
        path = write_json(tmp_path / "bad.json", {**small_config, "lookback": 0})
        assert main(["train", "--config", path, "--out", str(tmp_path / "x")]) == 1
        assert "lookback" in capsys.readouterr().err

    def test_missing_config_exit_1(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 1

    def test_internal_error_exit_2(self, tmp_path, config_path, monkeypatch):
        import chanclust.cli as cli

        def boom(*a, **k):
            raise RuntimeError("boom")
        monkeypatch.setattr(cli, "run", boom)
        assert main(["train", "--config", config_path, "--out", str(tmp_path / "x")]) == 2


class TestGrid:
    def test_table_shape(self, tmp_path, small_config):
        configs = [{**small_config, "strategy": s} for s in ("CI", "CSC")]
        configs += [{**small_config, "strategy": s, "horizon": 6} for s in ("CI", "CSC")]
        path = write_json(tmp_path / "grid.json", configs)
        assert main(["grid", "--configs", path, "--out", str(tmp_path / "g")]) == 0
        rows = read_csv(tmp_path / "g" / "table.csv")
        assert rows[0] == ["dataset", "horizon", "CI MSE", "CI MAE", "CI RMP", "CSC MSE", "CSC MAE", "CSC RMP",
                           "best MSE", "best MAE"]
        assert len(rows) == 3
        assert rows[1][4] == "100.0% (6)"
        assert len(json.loads((tmp_path / "g" / "runs.json").read_text())) == 4

    def test_config_paths(self, tmp_path, config_path):
        path = write_json(tmp_path / "grid.json", [config_path])
        assert main(["grid", "--configs", path, "--out", str(tmp_path / "g")]) == 0

    def test_failure_row(self, tmp_path, small_config):
        path = write_json(tmp_path / "grid.json", [small_config, {**small_config, "strategy": "CI",
                                                                   "lookback": 500}])
        assert main(["grid", "--configs", path, "--out", str(tmp_path / "g")]) == 0
        rows = read_csv(tmp_path / "g" / "table.csv")
        assert len(rows) == 2
        assert rows[1][2:4] == ["error", "error"] and rows[1][-2] == "CSC"

    def test_empty(self, tmp_path):
        path = write_json(tmp_path / "grid.json", [])
        assert main(["grid", "--configs", path, "--out", str(tmp_path / "g")]) == 1


class TestXchannel:
    def _lead_lag(self, tmp_path):
        write_csv(lead_lag_pair(length=1500, seed=0), tmp_path / "pair.csv")
        return write_json(tmp_path / "x.json", {"dataset": str(tmp_path / "pair.csv"), "lookback": 48,
                                                 "horizon": 24, "epochs": 10})

    def test_lead_lag_outputs(self, tmp_path):
        cfg = self._lead_lag(tmp_path)
        out = tmp_path / "xc"
        assert main(["xchannel", "--config", cfg, "--out", str(out)]) == 0
        for name in ("train_matrix.csv", "test_matrix.csv", "train_matrix.svg", "test_matrix.svg"):
            assert (out / name).exists()
        summary = json.loads((out / "best_inputs.json").read_text())
        assert summary["test"][1]["best_input"] == 1 and not summary["test"][1]["self_is_best"]
        assert len(read_csv(out / "test_matrix.csv")) == 3

    def test_single_channel_subset(self, tmp_path):
        cfg = self._lead_lag(tmp_path)
        assert main(["xchannel", "--config", cfg, "--channels", "1", "--out", str(tmp_path / "xc")]) == 0
        assert len(read_csv(tmp_path / "xc" / "test_matrix.csv")) == 2

    def test_bad_channels(self, tmp_path):
        cfg = self._lead_lag(tmp_path)
        assert main(["xchannel", "--config", cfg, "--channels", "3", "--out", str(tmp_path / "xc")]) == 1

    def test_parse_channels(self):
        assert parse_channels("1-3,7", 8) == [0, 1, 2, 6]
        assert parse_channels(None, 3) == [0, 1, 2]
        with pytest.raises(ForecastError):
            parse_channels("a-b", 4)


class TestClusters:
    def test_identical_runs(self, tmp_path, config_path):
        dirs = []
        for k in range(2):
            d = tmp_path / f"r{k}"
            main(["train", "--config", config_path, "--out", str(d)])
            dirs.append(str(d))
        assert main(["clusters", "--runs", *dirs, "--out", str(tmp_path / "c")]) == 0
        stab = json.loads((tmp_path / "c" / "stability.json").read_text())
        assert stab["mean_rand"] == 1.0 and stab["mean_ari"] == 1.0
        rows = read_csv(tmp_path / "c" / "assignments.csv")
        assert rows[0] == ["channel", "run1", "run2"] and len(rows) == 7

    def test_single_run(self, tmp_path, config_path):
        main(["train", "--config", config_path, "--out", str(tmp_path / "r")])
        assert main(["clusters", "--runs", str(tmp_path / "r"), "--out", str(tmp_path / "c")]) == 1


class TestReport:
    def test_prints_table(self, tmp_path, config_path, capsys):
        main(["train", "--config", config_path, "--out", str(tmp_path / "r")])
        capsys.readouterr()
        assert main(["report", "--runs", str(tmp_path / "r"), "--out", str(tmp_path / "t.csv")]) == 0
        text = capsys.readouterr().out
        assert "CSC MSE" in text and "synthetic" in text
        assert read_csv(tmp_path / "t.csv")[0][:2] == ["dataset", "horizon"]

    def test_missing_run(self, tmp_path):
        assert main(["report", "--runs", str(tmp_path)]) == 1
