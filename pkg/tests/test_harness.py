import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dmreward.harness.cli import main, metrics_header
from dmreward.harness.config import (ConfigError, DEFAULT_CONFIG_TEXT,
                                     build_teacher, build_train_config,
                                     load_config, parse_config_text,
                                     serialize_config)
from dmreward.harness.svg import emit_plot

TINY = [
    "--set", "train.iterations=3", "--set", "train.warmup=0",
    "--set", "train.n_groups=2", "--set", "train.group_size=4",
    "--set", "train.eval_every=1", "--set", "train.eval_samples=64",
]


class TestParse:
    def test_sections_and_comments(self):
        cfg = parse_config_text("[a]\nx = 1  # trailing\n# full line\n[b]\ny=2\n")
        assert cfg == {"a.x": "1", "b.y": "2"}

    def test_error_reports_line(self):
        with pytest.raises(ConfigError, match="f.cfg:3"):
            parse_config_text("[a]\nx = 1\nnot-an-assignment\n", "f.cfg")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="outside a section"):
            parse_config_text("x = 1\n")

    def test_empty_section_name(self):
        with pytest.raises(ConfigError, match="empty section"):
            parse_config_text("[]\n")

    def test_defaults_parse_clean(self):
        cfg = parse_config_text(DEFAULT_CONFIG_TEXT)
        assert cfg["train.iterations"] == "3000"
        assert cfg["grpo.eta"] == "0.5"

    def test_serialize_roundtrip(self):
        cfg = parse_config_text(DEFAULT_CONFIG_TEXT)
        assert parse_config_text(serialize_config(cfg)) == cfg


class TestLoadConfig:
    def test_overrides_win(self):
        cfg = load_config(None, ["train.seed=7"])
        assert cfg["train.seed"] == "7"

    def test_file_overrides_defaults(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("[train]\niterations = 10\n")
        cfg = load_config(p)
        assert cfg["train.iterations"] == "10"
        assert cfg["train.group_size"] == "8"  # default retained

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.cfg")

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            load_config(None, ["no-equals-sign"])
        with pytest.raises(ConfigError):
            load_config(None, ["nodot=1"])


class TestBuild:
    def test_default_train_config(self):
        cfg = build_train_config(parse_config_text(DEFAULT_CONFIG_TEXT))
        assert cfg.iterations == 3000
        assert cfg.spec.n_components == 8
        assert cfg.grpo.eta == 0.5
        assert cfg.student_opt.lr == 1e-3

    def test_custom_teacher(self):
        cfg = parse_config_text(
            "[teacher]\nkind = custom\nweights = 0.5 0.5\n"
            "means = -1 0 1 0\nvariances = 0.1 0.1\n")
        spec = build_teacher(cfg)
        assert spec.n_components == 2
        np.testing.assert_array_equal(spec.means, [[-1, 0], [1, 0]])

    def test_custom_teacher_bad_means_length(self):
        cfg = parse_config_text(
            "[teacher]\nkind = custom\nweights = 0.5 0.5\n"
            "means = -1 0 1\nvariances = 0.1 0.1\n")
        with pytest.raises(ConfigError, match="means"):
            build_teacher(cfg)

    def test_unknown_teacher(self):
        with pytest.raises(ConfigError, match="unknown teacher"):
            build_teacher({"teacher.kind": "grid"})

    def test_bad_value_names_key(self):
        cfg = load_config(None, ["train.iterations=soon"])
        with pytest.raises(ConfigError, match="train.iterations"):
            build_train_config(cfg)

    def test_aux_reward_list(self):
        cfg = load_config(None, [
            "reward.1.kind=radial", "reward.1.weight=10",
            "reward.1.center=1 0",
            "reward.2.kind=halfspace", "reward.2.normal=0 1"])
        tc = build_train_config(cfg)
        assert [r.kind for r in tc.aux_rewards] == ["radial", "halfspace"]
        np.testing.assert_array_equal(tc.aux_rewards[0].params["center"],
                                      [1.0, 0.0])


def assert_valid_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")


class TestTrainCommand:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--out", str(out)] + TINY) == 0
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == ",".join(metrics_header(8))
        assert len(lines) == 5  # header + iterations 0..3 at cadence 1
        assert (out / "config.resolved").exists()
        assert (out / "summary.txt").exists()
        for name in ("energy_dist", "coverage", "diagnostics"):
            assert_valid_svg(out / f"{name}.svg")
        ckpt = out / "ckpt" / "3"
        assert (ckpt / "rng").exists()
        assert any(p.name.startswith("student") for p in ckpt.iterdir())

    def test_byte_identical_replay(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["train", "--out", str(a)] + TINY)
        main(["train", "--out", str(b)] + TINY)
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()

    def test_missing_config_exits_2(self, tmp_path, capsys):
        rc = main(["train", "--config", str(tmp_path / "none.cfg"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "not found" in capsys.readouterr().err

    def test_bad_set_exits_2(self, tmp_path, capsys):
        rc = main(["train", "--set", "garbage", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "config error" in capsys.readouterr().err


class TestAblateCommand:
    def test_two_by_one_grid(self, tmp_path):
        out = tmp_path / "ab"
        rc = main(["ablate", "--out", str(out), "--grid", "train.gn=on,off"]
                  + TINY)
        assert rc == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0] == "run,train.gn,final_energy_dist,final_aux_reward"
        assert len(lines) == 3
        assert (out / "gn-on" / "metrics.csv").exists()
        assert (out / "gn-off" / "metrics.csv").exists()
        assert_valid_svg(out / "ablation_gn.svg")

    def test_failed_run_recorded_and_others_continue(self, tmp_path):
        out = tmp_path / "ab"
        rc = main(["ablate", "--out", str(out),
                   "--grid", "train.beta_mode=sample,spatial"] + TINY)
        assert rc == 1
        assert "spatial" in (out / "failures.log").read_text()
        assert (out / "beta_mode-sample" / "metrics.csv").exists()

    def test_empty_grid_exits_2(self, tmp_path, capsys):
        assert main(["ablate", "--out", str(tmp_path / "o")]) == 2
        assert "--grid" in capsys.readouterr().err


class TestDiagnoseCommand:
    def test_outputs_and_pass(self, tmp_path, capsys):
        out = tmp_path / "diag"
        rc = main(["diagnose", "--out", str(out)])
        captured = capsys.readouterr().out
        assert rc == 0
        assert "PASS" in captured
        lines = (out / "rs_variance.csv").read_text().splitlines()
        assert lines[0] == "tprime,rs_std"
        assert len(lines) == 6
        assert_valid_svg(out / "rs_variance.svg")


class TestPlotCommand:
    def test_renders_each_column(self, tmp_path):
        run_dir = tmp_path / "run"
        main(["train", "--out", str(run_dir)] + TINY)
        out = tmp_path / "plots"
        rc = main(["plot", str(run_dir / "metrics.csv"), "--out", str(out)])
        assert rc == 0
        assert_valid_svg(out / "energy_dist.svg")
        assert_valid_svg(out / "clip_frac.svg")

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["plot", str(tmp_path / "nope.csv")]) == 2

    def test_header_only_exits_2(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("iter,energy_dist\n")
        assert main(["plot", str(p), "--out", str(tmp_path / "o")]) == 2


class TestSvg:
    def test_empty_series_still_valid(self, tmp_path):
        p = tmp_path / "empty.svg"
        emit_plot({}, p, "nothing", "x", "y")
        assert_valid_svg(p)

    def test_escapes_markup_in_labels(self, tmp_path):
        p = tmp_path / "esc.svg"
        emit_plot({"<series & co>": [(0, 1.0), (1, 2.0)]}, p,
                  "a < b", "x & y", "y")
        assert_valid_svg(p)
