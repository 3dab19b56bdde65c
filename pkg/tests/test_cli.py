import json
import os

import pytest

from histonav.cli import EXIT_ARTIFACT, EXIT_CONFIG, EXIT_IO, EXIT_OK, build_parser, main


@pytest.fixture
def config_file(tmp_path, write_config):
    return write_config(
        {
            "output_dir": str(tmp_path / "out"),
            "tiling": {"size": 64, "mean_max": 230.0, "std_min": 8.0},
            "model": {"extractor": "tiny", "freeze_boundary": 3, "head_widths": [16, 3], "input_size": 16},
            "train": {"epochs": 1, "k": 2, "test_fraction": 0.2},
        }
    )


def test_parser_knows_every_command():
    parser = build_parser()
    for command in ("synth", "tile", "normalize", "split", "train", "evaluate", "report", "run", "config"):
        assert parser.parse_args([command]).command == command
    args = parser.parse_args(["predict", "a.png", "b", "--normalize"])
    assert args.inputs == ["a.png", "b"] and args.normalize


def test_config_command_prints_merged_settings(config_file, capsys):
    assert main(["config", "--config", config_file, "--seed", "7"]) == EXIT_OK
    settings = json.loads(capsys.readouterr().out)
    assert settings["seed"] == 7
    assert settings["train"]["epochs"] == 1


def test_invalid_config_exit_code(write_config):
    assert main(["config", "--config", write_config({"nonsense": True})]) == EXIT_CONFIG
    assert main(["tile", "--config", write_config({"workers": 0})]) == EXIT_CONFIG


def test_bad_expansion_targets_fail_before_writing(tmp_path, write_config):
    output_dir = tmp_path / "out"
    os.makedirs(output_dir / "slides")
    document = {"output_dir": str(output_dir), "tiling": {"targets": {"a": 5}}}
    assert main(["tile", "--config", write_config(document)]) == EXIT_CONFIG
    assert not (output_dir / "patches").exists()


def test_empty_slide_directory(config_file, tmp_path):
    os.makedirs(tmp_path / "out" / "slides")
    assert main(["tile", "--config", config_file]) == EXIT_OK
    manifest = tmp_path / "out" / "patches" / "manifest.csv"
    assert manifest.read_text().strip() == "slide_id,x,y,size,mean,std,label,accepted,path"


def test_missing_and_unreadable_slides(config_file, tmp_path):
    assert main(["tile", "--config", config_file]) == EXIT_IO
    os.makedirs(tmp_path / "out" / "slides" / "Type0")
    (tmp_path / "out" / "slides" / "Type0" / "broken.png").write_bytes(b"not an image")
    assert main(["tile", "--config", config_file]) == EXIT_IO


def test_training_steps_need_their_inputs(config_file):
    assert main(["train", "--config", config_file]) == EXIT_IO
    assert main(["report", "--config", config_file]) == EXIT_ARTIFACT


def test_evaluate_without_checkpoints(config_file):
    assert main(["synth", "--config", config_file, "--slides-per-class", "2"]) == EXIT_OK
    assert main(["tile", "--config", config_file]) == EXIT_OK
    assert main(["split", "--config", config_file]) == EXIT_OK
    assert main(["evaluate", "--config", config_file]) == EXIT_ARTIFACT
    assert main(["predict", "--config", config_file, "anything.png"]) == EXIT_ARTIFACT


@pytest.mark.slow
def test_run_command(config_file, tmp_path):
    assert main(["synth", "--config", config_file, "--slides-per-class", "2"]) == EXIT_OK
    assert main(["run", "--config", config_file, "--workers", "2"]) == EXIT_OK
    out = tmp_path / "out"
    assert "Accuracy" in (out / "reports" / "metrics.txt").read_text()
    for name in ("training_curves", "confusion_matrices", "roc_curves"):
        assert (out / "plots" / f"{name}.svg").is_file()
        assert (out / "plots" / f"{name}.csv").is_file()
    predictions = tmp_path / "predictions.csv"
    assert main(["predict", "--config", config_file, str(out / "normalized"), "--output", str(predictions)]) == EXIT_OK
    assert predictions.read_text().splitlines()[0] == "path,pred,p0,p1,p2"
