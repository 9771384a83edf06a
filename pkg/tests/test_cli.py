import json

import pytest

from eegmi import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


@pytest.fixture
def workspace(eegmmi_cache, tmp_path):
    return {
        "cache": str(eegmmi_cache),
        "out": str(tmp_path / "out"),
    }


def base_args(ws, *extra):
    return ["--set", f'cache_dir={ws["cache"]}', "--output", ws["out"],
            *extra]


class TestExitCodes:
    def test_unknown_config_key_is_config_error(self, capsys, tmp_path):
        code, _ = run_cli(capsys, "--set", "bogus=1", "--output",
                          str(tmp_path / "o"), "epochs")
        assert code == cli.EXIT_CONFIG

    def test_missing_config_file(self, capsys, tmp_path):
        code, _ = run_cli(capsys, "--config", str(tmp_path / "nope.json"),
                          "--output", str(tmp_path / "o"), "epochs")
        assert code == cli.EXIT_CONFIG

    def test_out_of_catalogue_subject(self, capsys, tmp_path):
        code, _ = run_cli(capsys, "--set", "subjects=[500]", "--set",
                          f"cache_dir={tmp_path}", "--output",
                          str(tmp_path / "o"), "fetch")
        assert code == cli.EXIT_CONFIG

    def test_missing_epoch_container_is_data_error(self, capsys, workspace):
        code, _ = run_cli(capsys, *base_args(workspace, "features"))
        assert code == cli.EXIT_DATA

    def test_unreachable_archive_is_fetch_error(self, capsys, tmp_path,
                                                monkeypatch):
        monkeypatch.setenv("EEGMI_ARCHIVE_URL", "http://127.0.0.1:1/x")
        code, _ = run_cli(capsys, "--set", f"cache_dir={tmp_path / 'c'}",
                          "--output", str(tmp_path / "o"), "fetch")
        assert code == cli.EXIT_FETCH


class TestLock:
    def test_locked_output_dir_refused(self, capsys, workspace, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / ".lock").write_text("12345")
        code, _ = run_cli(capsys, "--set",
                          f'cache_dir={workspace["cache"]}', "--output",
                          str(out), "epochs")
        assert code == cli.EXIT_CONFIG

    def test_lock_removed_after_run(self, capsys, workspace, tmp_path):
        from pathlib import Path
        code, _ = run_cli(capsys, *base_args(workspace, "epochs"))
        assert code == 0
        assert not (Path(workspace["out"]) / ".lock").exists()


class TestPipelineEndToEnd:
    def test_fetch_reports_cache_hits(self, capsys, workspace):
        code, report = run_cli(capsys, *base_args(workspace, "fetch"))
        assert code == 0
        assert report["cached"] == 3 and report["failed"] == []

    def test_epochs_then_features(self, capsys, workspace):
        from pathlib import Path
        code, summary = run_cli(capsys, *base_args(workspace, "epochs"))
        assert code == 0
        assert summary["epochs"] == 45
        assert Path(summary["path"]).exists()

        code, summary = run_cli(capsys, *base_args(workspace, "features"))
        assert code == 0
        assert summary["rows"] == 45
        assert summary["columns"] == 193   # 64 channels x 3 bins + label
        header = Path(summary["path"]).read_text().splitlines()[0]
        cols = header.split(",")
        assert cols[0] == "ch0_f8.33" and cols[-1] == "label"

        manifest = json.loads(
            (Path(workspace["out"]) / "manifest_features.json").read_text())
        assert manifest["command"] == "features"
        assert len(manifest["dataset_files"]) == 3

    def test_train_and_eval_mlp(self, capsys, workspace):
        from pathlib import Path
        code, _ = run_cli(capsys, *base_args(workspace, "epochs"))
        assert code == 0
        code, summary = run_cli(
            capsys, *base_args(workspace,
                               "--set", "model=mlp",
                               "--set", "optimizer=sgd",
                               "--set", "train.max_epochs=2",
                               "train"))
        assert code == 0
        ckpt = Path(summary["checkpoint"])
        assert ckpt.exists() and ckpt.name == "mlp_sgd.ckpt"
        assert summary["config"]["loss"] == "mse"
        assert summary["config"]["batch_size"] == 1
        assert summary["config"]["learning_rate"] == 0.01
        assert summary["config"]["hidden_layers"] == [100, 75]
        assert Path(summary["history"]).exists()

        code, summary = run_cli(
            capsys, *base_args(workspace, "eval", str(ckpt)))
        assert code == 0
        assert 0.0 <= summary["accuracy"] <= 1.0
        report = json.loads(Path(summary["report_json"]).read_text())
        assert report["classes"] == ["Left", "Right"]
        assert sum(map(sum, report["counts"])) == 45

    def test_train_convnet_config_echo(self, capsys, workspace):
        code, _ = run_cli(capsys, *base_args(workspace, "epochs"))
        assert code == 0
        code, summary = run_cli(
            capsys, *base_args(workspace,
                               "--set", "train.max_epochs=1",
                               "--set", "train.patience=1",
                               "train"))
        assert code == 0
        echo = summary["config"]
        assert echo["model"] == "convnet"
        assert echo["optimizer"] == "adam"
        assert echo["learning_rate"] == 0.001
        assert echo["batch_size"] == 100
        assert echo["loss"] == "cross_entropy"
        assert echo["schedule"] == "step_decay"
        assert echo["decay"] == {"factor": 0.1, "every": 10}
        assert echo["beta"] == [0.9, 0.99]
        assert echo["epsilon"] == 1e-8

    def test_epochs_idempotent(self, capsys, workspace):
        from pathlib import Path
        run_cli(capsys, *base_args(workspace, "epochs"))
        first = (Path(workspace["out"]) / "epochs.bin").read_bytes()
        code, _ = run_cli(capsys, *base_args(workspace, "epochs"))
        assert code == 0
        assert (Path(workspace["out"]) / "epochs.bin").read_bytes() == first


class TestReproduce:
    def test_four_way_comparison(self, capsys, workspace):
        from pathlib import Path
        code, summary = run_cli(
            capsys, *base_args(workspace,
                               "--set", "train.max_epochs=1",
                               "--set", "train.patience=1",
                               "reproduce", "--skip-fetch"))
        assert code == 0
        names = [r["name"] for r in summary["results"]]
        assert names == ["MLP-GD", "ConvNet-SGDM", "ConvNet-RmsPROP",
                         "ConvNet-Adam"]
        table = Path(summary["table"]).read_text().splitlines()
        assert table[0] == "name,model,optimizer,accuracy"
        assert len(table) == 5
        out = Path(workspace["out"])
        for stem in ("mlp_sgd", "convnet_sgdm", "convnet_rmsprop",
                     "convnet_adam"):
            assert (out / f"{stem}.ckpt").exists()
            assert (out / f"confusion_{stem}.json").exists()
        assert (out / "comparison.txt").exists()
