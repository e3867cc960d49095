import json

import pytest

from dualseg.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main


def _write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("clids")
    spec = {
        "num_samples": 6,
        "shape": [16, 16],
        "num_classes": 3,
        "labeled_fraction": 0.5,
        "noise_sigma": 0.15,
        "seed": 5,
    }
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = root / "ds"
    assert main(["gen-data", str(spec_path), str(out)]) == EXIT_OK
    return out


def _train_config(tmp_path, dataset, **overrides):
    cfg = {
        "dataset_dir": str(dataset),
        "out_dir": str(tmp_path / "run"),
        "pretrain_iters": 4,
        "selftrain_iters": 4,
        "eval_every": 2,
        "net": {"in_channels": 1, "num_classes": 3, "base_width": 4, "depth": 2, "init_seed": 2},
        "seed": 9,
    }
    cfg.update(overrides)
    return _write_json(tmp_path / "config.json", cfg)


class TestUsage:
    def test_no_args_is_usage_error(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_argument(self):
        assert main(["gen-data"]) == EXIT_USAGE

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0


class TestGenData:
    def test_writes_dataset(self, dataset):
        assert (dataset / "manifest.json").is_file()

    def test_bad_spec_is_validation_error(self, tmp_path):
        spec = _write_json(tmp_path / "bad.json", {"num_samples": 1})
        assert main(["gen-data", spec, str(tmp_path / "out")]) == EXIT_VALIDATION

    def test_missing_spec_is_io_error(self, tmp_path):
        assert main(["gen-data", str(tmp_path / "none.json"), str(tmp_path / "out")]) == EXIT_IO


class TestPipeline:
    def test_pretrain_train_eval_plot(self, tmp_path, dataset):
        cfg = _train_config(tmp_path, dataset)
        assert main(["pretrain", cfg]) == EXIT_OK
        assert (tmp_path / "run" / "pretrain" / "weights.bin").is_file()

        assert main(["train", cfg]) == EXIT_OK
        assert (tmp_path / "run" / "teacher_final" / "weights.bin").is_file()
        assert (tmp_path / "run" / "train_log.csv").is_file()

        report = tmp_path / "report.csv"
        assert main(
            ["eval", str(tmp_path / "run" / "teacher_final"), str(dataset), "--split", "unlabeled", "--out", str(report)]
        ) == EXIT_OK
        assert report.is_file()

        png = tmp_path / "curve.png"
        assert main(["plot-log", str(tmp_path / "run" / "train_log.csv"), str(png)]) == EXIT_OK
        assert png.stat().st_size > 0

    def test_train_without_pretrain_is_validation_error(self, tmp_path, dataset):
        cfg = _train_config(tmp_path, dataset)
        assert main(["train", cfg]) == EXIT_VALIDATION

    def test_bad_config_key(self, tmp_path, dataset):
        cfg = _train_config(tmp_path, dataset, momentum=0.9)
        assert main(["pretrain", cfg]) == EXIT_VALIDATION

    def test_eval_missing_checkpoint_is_io_error(self, tmp_path, dataset):
        assert main(["eval", str(tmp_path / "none"), str(dataset)]) == EXIT_IO


class TestVerifyProp1:
    def test_suppression_report(self, tmp_path, capsys):
        spec = _write_json(
            tmp_path / "noise.json",
            {"d": 4, "sigma": 1.0, "loss_kind": "constant", "loss_params": [2.0], "T": 3, "trials": 5000, "lambda": 0.3, "w_max": 0.01, "seed": 1},
        )
        out = tmp_path / "rep.csv"
        assert main(["verify-prop1", spec, "--out", str(out)]) == EXIT_OK
        assert out.is_file()
        assert "PASS" in capsys.readouterr().out

    def test_lambda_zero_reports_ratio_one(self, tmp_path, capsys):
        spec = _write_json(
            tmp_path / "noise.json",
            {"d": 4, "sigma": 1.0, "loss_kind": "constant", "loss_params": [2.0], "T": 2, "trials": 2000, "lambda": 0.0, "seed": 1},
        )
        assert main(["verify-prop1", spec]) == EXIT_OK
        captured = capsys.readouterr().out
        assert "ratio=1.0000" in captured
        assert "no suppression expected" in captured
