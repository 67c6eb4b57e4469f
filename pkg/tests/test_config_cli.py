"""Run-config validation and the command-line pipeline.

The pipeline smoke test drives synth, fit-codebook, train, track, evaluate,
and inpaint-demo through ``main`` with a deliberately small budget; model
quality under that budget is not asserted here, only that every stage runs,
exits 0, and leaves well-formed artifacts behind.
"""

import json

import pytest

from gaptrack import (
    ConfigError,
    RunConfig,
    apply_overrides,
    from_dict,
    from_file,
    load_config,
    read_seqinfo,
)
from gaptrack.cli import main
from gaptrack.config import ENV_CONFIG, to_file


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed == 0
    assert cfg.codebook.size == 256
    assert cfg.model.hidden_dim == 48
    assert cfg.training.iterations == 5000
    assert cfg.tracker.gate_factor == 2.0
    assert cfg.tracker.termination_gap == 10
    assert cfg.tracker.inpaint.num_samples == 30


def test_sections_inherit_the_global_seed():
    cfg = from_dict({"seed": 42})
    assert cfg.train_schedule().seed == 42
    assert cfg.inpaint_params().seed == 42
    assert cfg.scene_spec().seed == 42

    pinned = from_dict({"seed": 42, "training": {"seed": 7}})
    assert pinned.train_schedule().seed == 7
    assert pinned.scene_spec().seed == 42


def test_builders_carry_section_fields():
    cfg = from_dict({
        "model": {"hidden_dim": 12},
        "training": {"iterations": 9, "batch_size": 3},
        "tracker": {"gate_factor": 1.5, "inpaint": {"num_samples": 4, "t_trs": 2}},
        "scene": {"num_objects": 2, "name": "tiny"},
    })
    assert cfg.model_config(17).num_clusters == 17
    assert cfg.model_config(17).hidden_dim == 12
    assert cfg.train_schedule().iterations == 9
    tracker = cfg.tracker_config()
    assert tracker.gate_factor == 1.5
    assert tracker.inpaint.num_samples == 4
    assert tracker.inpaint.t_trs == 2
    spec = cfg.scene_spec()
    assert (spec.num_objects, spec.name) == (2, "tiny")


def test_unknown_keys_fail_loudly():
    with pytest.raises(ConfigError, match="trainig"):
        from_dict({"trainig": {}})
    with pytest.raises(ConfigError, match="training.learning_rte"):
        from_dict({"training": {"learning_rte": 0.1}})
    with pytest.raises(ConfigError, match="tracker.inpaint.samples"):
        from_dict({"tracker": {"inpaint": {"samples": 5}}})


def test_value_types_are_checked():
    with pytest.raises(ConfigError, match="iterations"):
        from_dict({"training": {"iterations": "many"}})
    with pytest.raises(ConfigError, match="iterations"):
        from_dict({"training": {"iterations": 2.5}})
    with pytest.raises(ConfigError, match="gate_factor"):
        from_dict({"tracker": {"gate_factor": True}})
    with pytest.raises(ConfigError, match="emit_inpainted"):
        from_dict({"tracker": {"emit_inpainted": 1}})
    with pytest.raises(ConfigError, match="does not accept null"):
        from_dict({"seed": None})
    # ints are fine where floats are expected
    assert from_dict({"training": {"learning_rate": 1}}).training.learning_rate == 1


def test_nullable_fields_accept_null():
    cfg = from_dict({"training": {"clip_norm": None, "window": None}})
    assert cfg.training.clip_norm is None
    assert cfg.training.window is None
    assert from_dict({"tracker": {"assignment_gate": 12.5}}).tracker.assignment_gate == 12.5


def test_file_round_trip(tmp_path):
    cfg = from_dict({"seed": 3, "training": {"iterations": 7, "clip_norm": None}})
    path = tmp_path / "run.json"
    to_file(path, cfg)
    assert from_file(path) == cfg
    assert from_dict(cfg.to_dict()) == cfg


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        from_file(bad)
    nonobject = tmp_path / "list.json"
    nonobject.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="top level"):
        from_file(nonobject)


def test_load_config_resolution(tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)
    assert load_config() == RunConfig()

    env_file = tmp_path / "env.json"
    env_file.write_text(json.dumps({"seed": 99}))
    monkeypatch.setenv(ENV_CONFIG, str(env_file))
    assert load_config().seed == 99

    explicit = tmp_path / "explicit.json"
    explicit.write_text(json.dumps({"seed": 5}))
    assert load_config(explicit).seed == 5


def test_apply_overrides():
    cfg = RunConfig()
    out = apply_overrides(cfg, {
        "seed": 8,
        "training.iterations": 100,
        "tracker.inpaint.num_samples": 5,
    })
    assert out.seed == 8
    assert out.training.iterations == 100
    assert out.tracker.inpaint.num_samples == 5
    assert cfg.training.iterations == 5000  # original untouched

    with pytest.raises(ConfigError, match="training.lr"):
        apply_overrides(cfg, {"training.lr": 0.1})
    with pytest.raises(ConfigError, match="nope.x"):
        apply_overrides(cfg, {"nope.x": 1})
    with pytest.raises(ConfigError):
        apply_overrides(cfg, {"training.iterations": "many"})


# ---------------------------------------------------------------------------
# command line


PIPELINE_CONFIG = {
    "seed": 3,
    "codebook": {"size": 16},
    "model": {"hidden_dim": 16},
    "training": {"iterations": 300, "batch_size": 8, "learning_rate": 3e-3, "window": 20},
    "tracker": {"inpaint": {"num_samples": 8}},
    "scene": {
        "num_objects": 4,
        "num_frames": 60,
        "width": 960.0,
        "height": 540.0,
        "detection_dropout": 0.05,
        "detection_jitter": 0.2,
        "false_positive_rate": 0.05,
        "name": "pipe",
    },
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Config file plus synth/fit-codebook/train artifacts, built once."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "run.json"
    cfg_path.write_text(json.dumps(PIPELINE_CONFIG))
    seq = root / "seq"
    book = root / "book.npz"
    model = root / "model.npz"
    assert main(["synth", "--config", str(cfg_path), "--out", str(seq)]) == 0
    assert main(["fit-codebook", "--config", str(cfg_path), "--out", str(book)]) == 0
    assert main(["train", "--config", str(cfg_path), "--codebook", str(book),
                 "--out", str(model)]) == 0
    return {"root": root, "config": cfg_path, "seq": seq, "book": book, "model": model}


def test_synth_writes_a_complete_sequence(tmp_path, capsys):
    out = tmp_path / "scene"
    rc = main(["synth", "--out", str(out), "--objects", "3", "--frames", "40",
               "--name", "smoke", "--seed", "5"])
    assert rc == 0
    assert "wrote scene" in capsys.readouterr().out
    meta = read_seqinfo(out / "seqinfo.ini")
    assert meta.name == "smoke"
    assert meta.length == 40
    assert (out / "det" / "det.txt").exists()
    assert (out / "gt" / "gt.txt").exists()


def test_synth_seed_flag_changes_the_scene(tmp_path):
    outs = []
    for seed in (5, 5, 6):
        out = tmp_path / f"s{len(outs)}"
        assert main(["synth", "--out", str(out), "--objects", "2", "--frames", "30",
                     "--seed", str(seed)]) == 0
        outs.append((out / "det" / "det.txt").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_track_and_evaluate(pipeline, tmp_path, capsys):
    results = tmp_path / "results"
    rc = main(["track", "--config", str(pipeline["config"]),
               "--model", str(pipeline["model"]), "--codebook", str(pipeline["book"]),
               "--sequences", str(pipeline["seq"]), "--out", str(results)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "MOTA" in out and "overall" in out
    result_file = results / "pipe.txt"
    assert result_file.exists()
    assert (results / "metrics.txt").exists()

    rc = main(["evaluate", "--gt", str(pipeline["seq"]), "--results", str(result_file),
               "--out", str(tmp_path / "report.txt")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "mota=" in out and "idf1=" in out
    assert "mota=" in (tmp_path / "report.txt").read_text()


def test_track_can_suppress_inpainted_boxes(pipeline, tmp_path):
    results = tmp_path / "no-bridges"
    rc = main(["track", "--config", str(pipeline["config"]),
               "--model", str(pipeline["model"]), "--codebook", str(pipeline["book"]),
               "--sequences", str(pipeline["seq"]), "--out", str(results),
               "--suppress-inpainted"])
    assert rc == 0
    assert (results / "pipe.txt").exists()


def test_inpaint_demo_writes_branch_csv(pipeline, tmp_path, capsys):
    out = tmp_path / "branches.csv"
    rc = main(["inpaint-demo", "--config", str(pipeline["config"]),
               "--model", str(pipeline["model"]), "--codebook", str(pipeline["book"]),
               "--out", str(out), "--object", "1", "--prefix", "10", "--gap", "2",
               "--samples", "6"])
    assert rc == 0
    assert "sampled 6 branches" in capsys.readouterr().out
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("branch,rejected,reason,iou_score")
    assert len(lines) == 1 + 6


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["synth", "--out", "x", "--frames", "0"])
    assert info.value.code == 2


def test_config_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"training": {"lerning_rate": 0.1}}))
    rc = main(["synth", "--config", str(bad), "--out", str(tmp_path / "scene")])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    rc = main(["train", "--codebook", str(tmp_path / "missing.npz"),
               "--out", str(tmp_path / "model.npz")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
