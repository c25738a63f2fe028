"""Tests for the command-line interface (in-process transport)."""

import pytest

from seglab.cli import main

CONFIG = (
    "dataset = synthetic\n"
    "output_dir = {out}\n"
    "synthetic.count = 12\n"
    "synthetic.image_size = 32\n"
    "grid.encoders = tiny\n"
    "model.decoder_channels = 32,16,8\n"
    "model.se_reduction = 4\n"
    "train.epochs = 1\n"
    "train.batch_size = 8\n"
    "train.seeds = 0\n"
    "augment.chain =\n"
)


def write_config(tmp_path, out_name="out", extra=""):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG.format(out=tmp_path / out_name) + extra)
    return path


def run(*argv):
    return main([*argv, "--poll", "0.02"])


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main([])
    assert exit_info.value.code == 1

    with pytest.raises(SystemExit) as exit_info:
        main(["teleport", "--config", "x.cfg"])
    assert exit_info.value.code == 1

    with pytest.raises(SystemExit) as exit_info:
        main(["train"])  # --config is required
    assert exit_info.value.code == 1
    assert "--config" in capsys.readouterr().err


def test_missing_config_file_exits_1(tmp_path, capsys):
    assert main(["prepare", "--config", str(tmp_path / "ghost.cfg")]) == 1
    assert "not found" in capsys.readouterr().err


def test_invalid_config_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("dataset = mars\n")
    assert run("prepare", "--config", str(path)) == 1
    assert "dataset" in capsys.readouterr().err


def test_bad_seeds_flag_exits_1(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("train", "--config", str(path), "--seeds", "0,x") == 1
    assert "--seeds" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# stage commands
# ---------------------------------------------------------------------------


def test_prepare_streams_progress(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("prepare", "--config", str(path)) == 0
    assert "cached 12 samples" in capsys.readouterr().out


def test_weights_prints_table(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("weights", "--config", str(path)) == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines.index("scheme\tw_background\tw_foreground")
    table = lines[header + 1 : header + 4]
    schemes = [row.split("\t")[0] for row in table]
    assert schemes == ["distribution", "cdw", "median_frequency"]
    for row in table:
        _, bg, fg = row.split("\t")
        assert float(bg) > 0 and float(fg) > 0
        assert len(bg.split(".")[1]) == 4  # four decimal places


def test_train_then_report(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("train", "--config", str(path)) == 0
    out = capsys.readouterr().out
    assert "1 runs to train" in out
    assert "test_iou=" in out

    assert run("report", "--config", str(path)) == 0
    out = capsys.readouterr().out
    assert "# dataset=synthetic" in out
    assert "encoder" in out


def test_all_runs_pipeline_and_prints_table(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("all", "--config", str(path)) == 0
    out = capsys.readouterr().out
    assert "# dataset=synthetic" in out
    assert (tmp_path / "out" / "manifest.json").exists()

    # a rerun trains nothing and still succeeds
    assert run("all", "--config", str(path)) == 0
    assert "0 runs to train, 1 already complete" in capsys.readouterr().out


def test_report_before_training_exits_1(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("report", "--config", str(path)) == 1
    assert "no results" in capsys.readouterr().err


def test_seeds_override_takes_effect(tmp_path, capsys):
    path = write_config(tmp_path)
    assert run("train", "--config", str(path), "--seeds", "0,1") == 0
    assert "2 runs to train" in capsys.readouterr().out


def test_output_dir_override(tmp_path, capsys):
    path = write_config(tmp_path)
    other = tmp_path / "elsewhere"
    assert run("prepare", "--config", str(path), "--output-dir", str(other)) == 0
    assert (other / "cache" / "splits.tsv").exists()
    assert not (tmp_path / "out").exists()


def test_all_failed_runs_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, extra="app.variant = relu\napp.dims = 2048,256\n")
    assert run("train", "--config", str(path)) == 2
    assert "FAILED" in capsys.readouterr().out


def test_partial_grid_exits_3(tmp_path, capsys):
    good = write_config(tmp_path)
    assert run("train", "--config", str(good)) == 0
    capsys.readouterr()
    bad = tmp_path / "bad.cfg"
    bad.write_text(
        CONFIG.format(out=tmp_path / "out") + "app.variant = relu\napp.dims = 2048,256\n"
    )
    assert run("train", "--config", str(bad)) == 3


def test_unreachable_server_exits_2(tmp_path, capsys):
    path = write_config(tmp_path)
    code = run("prepare", "--config", str(path), "--server", "http://127.0.0.1:1")
    assert code == 2
    assert "cannot reach server" in capsys.readouterr().err
