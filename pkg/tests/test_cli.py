import pytest

from csbc.cli import main


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    assert main(["synth", "--seed", "4", "--frames", "12", "--out", str(root)]) == 0
    return root


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_synth_layout(world):
    assert len(list((world / "images").glob("*.pgm"))) == 12
    assert sorted(p.stem for p in (world / "detections").iterdir()) == ["root", "treeish", "wallish"]
    assert (world / "gt.txt").read_text().count("\n") == 12 * 3


def test_synth_zero_frames(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "--frames", 0, "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "gt.txt").read_text() == ""
    assert list((tmp_path / "images").iterdir()) == []


def test_pipeline(world, tmp_path, capsys):
    d = world / "detections"
    assert run(capsys, "calib", "--root", d / "root.txt", "--support", d / "treeish.txt", d / "wallish.txt",
               "--out", tmp_path / "cal.ini")[0] == 0
    code, out, _ = run(capsys, "train", "--detections", d / "treeish.txt", d / "wallish.txt",
                       "--gt", world / "gt.txt", "--images", world / "images", "--feature", "gray",
                       "--components", 3, "--out", tmp_path / "models")
    assert code == 0 and (tmp_path / "models" / "treeish.plsmodel").is_file()
    code, out, _ = run(capsys, "fuse", "--mode", "csbc", "--root", d / "root.txt",
                       "--support", d / "treeish.txt", d / "wallish.txt", "--calib", tmp_path / "cal.ini",
                       "--models", tmp_path / "models", "--images", world / "images", "--out", tmp_path / "f.txt")
    assert code == 0 and out.startswith("windows in: ") and ", discarded: " in out
    code, out, _ = run(capsys, "eval", "--detections", tmp_path / "f.txt", "--gt", world / "gt.txt",
                       "--out", tmp_path / "c.csv", "--svg", tmp_path / "c.svg")
    assert code == 0 and "log-average miss rate" in out
    assert run(capsys, "plot", "--curves", tmp_path / "c.csv", "--out", tmp_path / "p.svg")[0] == 0


def test_eval_extremes(tmp_path, capsys):
    (tmp_path / "gt.txt").write_text("a 0 0 10 20 0\nb 5 5 10 20 0\n")
    (tmp_path / "perfect.txt").write_text("a 0 0 10 20 1\nb 5 5 10 20 1\n")
    (tmp_path / "none.txt").write_text("")
    for name, expected in (("perfect", "lamr,0.00"), ("none", "lamr,100.00")):
        code, _, _ = run(capsys, "eval", "--detections", tmp_path / f"{name}.txt", "--gt", tmp_path / "gt.txt",
                         "--out", tmp_path / f"{name}.csv")
        assert code == 0
        assert (tmp_path / f"{name}.csv").read_text().splitlines()[-1] == expected


def test_usage_errors(world, tmp_path, capsys):
    d = world / "detections"
    assert run(capsys, "train", "--detections", d / "treeish.txt", "--gt", world / "gt.txt",
               "--images", world / "images", "--components", 0, "--out", tmp_path)[0] == 2
    assert run(capsys, "fuse", "--mode", "csbc", "--root", d / "root.txt", "--support", d / "treeish.txt",
               "--calib", tmp_path / "x.ini", "--out", tmp_path / "o.txt")[0] == 2
    assert run(capsys, "eval", "--gt", world / "gt.txt")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["fuse", "--overlap", "half"])
    assert exc.value.code == 2


def test_bundle(world, tmp_path, capsys):
    d = world / "detections"
    bundle = tmp_path / "b.ini"
    bundle.write_text(f"[eval]\ngt = {world / 'gt.txt'}\niou = 0.6\nout = {tmp_path / 'from_bundle.csv'}\n")
    code, _, _ = run(capsys, "eval", "--config", bundle, "--detections", d / "root.txt",
                     "--out", tmp_path / "explicit.csv")
    assert code == 0
    assert (tmp_path / "explicit.csv").is_file() and not (tmp_path / "from_bundle.csv").exists()

    bad = tmp_path / "bad.ini"
    bad.write_text("[eval\ngt = x\n")
    assert run(capsys, "eval", "--config", bad, "--detections", d / "root.txt")[0] == 2
    unknown = tmp_path / "unknown.ini"
    unknown.write_text("[eval]\ncolour = red\n")
    assert run(capsys, "eval", "--config", unknown, "--detections", d / "root.txt")[0] == 2


def test_bundle_scene_and_profiles(tmp_path, capsys):
    bundle = tmp_path / "b.ini"
    bundle.write_text(
        "[synth]\nframes = 2\nseed = 9\n[scene]\nn_pedestrians = 1\ntree = 0\nwall = 0\n"
        "[profile:only]\ntp_rate = 1.0\nlocalization_sigma = 0\n"
    )
    assert run(capsys, "synth", "--config", bundle, "--out", tmp_path / "o")[0] == 0
    assert (tmp_path / "o" / "detections" / "only.txt").read_text().count("\n") == 1 + 2


def test_missing_image_names_frame(world, tmp_path, capsys):
    (tmp_path / "d.txt").write_text("ghost 0 0 32 64 1.0\nghost 60 0 32 64 0.5\n")
    (tmp_path / "gt.txt").write_text("ghost 0 0 32 64 0\n")
    code, _, err = run(capsys, "train", "--detections", tmp_path / "d.txt", "--gt", tmp_path / "gt.txt",
                       "--images", world / "images", "--components", 1, "--out", tmp_path / "m")
    assert code == 1 and "ghost" in err


def test_parse_error_exit_code(tmp_path, capsys):
    (tmp_path / "d.txt").write_text("a 0 0 10\n")
    (tmp_path / "gt.txt").write_text("a 0 0 10 20 0\n")
    code, _, err = run(capsys, "eval", "--detections", tmp_path / "d.txt", "--gt", tmp_path / "gt.txt",
                       "--out", tmp_path / "c.csv")
    assert code == 1 and "line 1" in err
