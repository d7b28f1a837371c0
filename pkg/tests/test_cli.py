"""CLI behavior: argument handling, artifacts on disk, exit codes."""
import json

import numpy as np
import pytest

from ncagrow.cli import main
from ncagrow.checkpoint import load as load_checkpoint
from ncagrow.state import grid_to_rgba_u8, make_seed


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("train") / "tiny.nca.json"
    code = run_cli("train", "--regime", "growing", "--preset", "plain-heart",
                   "--iters", "10", "--size", "12x12", "--hidden", "16",
                   "--seed", "1", "--out", str(out))
    assert code == 0
    return out


def test_train_writes_checkpoint_and_csv(tiny_checkpoint):
    assert tiny_checkpoint.exists()
    csv_path = tiny_checkpoint.with_name("tiny.loss.csv")
    assert csv_path.exists()
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "iteration,mean_loss,min_loss,max_loss"
    assert len(lines) == 11
    ck = load_checkpoint(tiny_checkpoint)
    assert ck.metadata["preset"] == "plain-heart"
    assert ck.grid.height == 12


def test_train_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.nca.json", tmp_path / "b.nca.json"
    args = ["train", "--regime", "growing", "--preset", "plain-heart",
            "--iters", "6", "--size", "12x12", "--hidden", "12", "--seed", "7"]
    assert run_cli(*args, "--out", str(out1)) == 0
    assert run_cli(*args, "--out", str(out2)) == 0
    a = json.loads(out1.read_text())
    b = json.loads(out2.read_text())
    assert a["weights"] == b["weights"]
    csv1 = (tmp_path / "a.loss.csv").read_text()
    csv2 = (tmp_path / "b.loss.csv").read_text()
    assert csv1 == csv2


def test_train_usage_errors(tmp_path):
    # missing --out trips argparse
    assert run_cli("train", "--regime", "growing", "--preset", "plain-heart") == 2
    # unknown preset
    assert run_cli("train", "--regime", "growing", "--preset", "flying-toaster",
                   "--out", str(tmp_path / "x.nca.json")) == 2
    # bad size / steps strings
    assert run_cli("train", "--regime", "growing", "--preset", "plain-heart",
                   "--size", "wide", "--out", str(tmp_path / "x.nca.json")) == 2
    assert run_cli("train", "--regime", "growing", "--preset", "plain-heart",
                   "--steps", "9", "--out", str(tmp_path / "x.nca.json")) == 2
    # signal regime demands the signal preset
    assert run_cli("train", "--regime", "signal", "--preset", "plain-heart",
                   "--out", str(tmp_path / "x.nca.json")) == 2


def test_grow_writes_frames_and_reports(tiny_checkpoint, tmp_path, capsys):
    frames = tmp_path / "frames"
    code = run_cli("grow", "--ckpt", str(tiny_checkpoint), "--steps", "8",
                   "--frames", str(frames), "--every", "4", "--seed", "3")
    assert code == 0
    names = sorted(p.name for p in frames.iterdir())
    assert names == ["frame_0000.png", "frame_0004.png", "frame_0008.png"]
    out = capsys.readouterr().out
    assert "closest=heart" in out


def test_grow_zero_steps_is_the_rendered_seed(tiny_checkpoint, tmp_path):
    from PIL import Image

    frames = tmp_path / "frames0"
    assert run_cli("grow", "--ckpt", str(tiny_checkpoint), "--steps", "0",
                   "--frames", str(frames)) == 0
    files = list(frames.iterdir())
    assert len(files) == 1
    ck = load_checkpoint(tiny_checkpoint)
    seed = make_seed(ck.grid)
    assert np.array_equal(np.asarray(Image.open(files[0])), grid_to_rgba_u8(seed))


def test_grow_rejects_wrong_genome(tiny_checkpoint):
    assert run_cli("grow", "--ckpt", str(tiny_checkpoint), "--genome", "0010",
                   "--steps", "2") == 2


def test_grow_missing_checkpoint_is_runtime_error(tmp_path):
    assert run_cli("grow", "--ckpt", str(tmp_path / "nope.nca.json"), "--steps", "1") == 3


def test_poke_validates_events(tiny_checkpoint, tmp_path):
    # signal on an env-less model
    assert run_cli("poke", "--ckpt", str(tiny_checkpoint), "--grow", "4",
                   "--signal-at", "6,6@2", "--steps-after", "4") == 2
    # event beyond the run length (damage works without env)
    assert run_cli("poke", "--ckpt", str(tiny_checkpoint), "--grow", "4",
                   "--damage", "6,6,2@99", "--steps-after", "4") == 2


def test_poke_damage_runs_on_plain_model(tiny_checkpoint, tmp_path, capsys):
    frames = tmp_path / "poked"
    code = run_cli("poke", "--ckpt", str(tiny_checkpoint), "--grow", "6",
                   "--damage", "6,6,2@6", "--steps-after", "6",
                   "--report-after", "4", "--frames", str(frames), "--every", "6")
    assert code == 0
    out = capsys.readouterr().out
    assert "CircleDamage" in out
    assert frames.exists()


def test_genome_real_values_accepted(tmp_path):
    out = tmp_path / "fam.nca.json"
    assert run_cli("train", "--regime", "growing", "--preset", "heart-size",
                   "--iters", "4", "--size", "12x12", "--hidden", "12",
                   "--seed", "0", "--out", str(out)) == 0
    assert run_cli("grow", "--ckpt", str(out), "--genome", "0.5", "--steps", "3") == 0
    assert run_cli("grow", "--ckpt", str(out), "--genome", "1", "--steps", "3") == 0
