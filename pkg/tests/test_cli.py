import json

import pytest

from refground.cli import _parse_seeds, load_bench_config, main
from refground.errors import ConfigError
from refground.scene import scene_to_dict

from conftest import make_region, make_scene


@pytest.fixture
def scene_file(tmp_path):
    scene = make_scene([
        make_region("cup", -0.5, category="cup", color="red"),
        make_region("ball", 0.5, category="ball", color="blue"),
    ])
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene_to_dict(scene)))
    return str(path)


class TestSeedParsing:
    def test_inclusive_range(self):
        assert list(_parse_seeds("1..3")) == [1, 2, 3]

    def test_single_seed(self):
        assert list(_parse_seeds("7")) == [7]

    def test_bad_spec_rejected(self):
        with pytest.raises(ConfigError):
            _parse_seeds("a..b")
        with pytest.raises(ConfigError):
            _parse_seeds("5..1")


class TestGroundCommand:
    def test_unique_outcome(self, scene_file, capsys):
        code = main(["ground", "--scene", scene_file, "--say", "the red cup"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["kind"] == "unique"
        assert out["selected"] == "cup"
        assert "box" in out

    def test_missing_scene_file_exits_2(self, capsys):
        assert main(["ground", "--scene", "/nope.json", "--say", "x"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_perspective_flag(self, scene_file, capsys):
        code = main(["ground", "--scene", scene_file, "--say", "the cup on my left",
                     "--perspective", "off"])
        assert code == 0


class TestBenchCommand:
    def test_bench_writes_report(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["bench", "--seeds", "0..9", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["kind"] == "grounding"
        assert report["aggregates"]["trials"] == 10
        assert "accuracy" in capsys.readouterr().err

    def test_bench_determinism_across_runs(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["bench", "--seeds", "0..7", "--out", str(a)]) == 0
        assert main(["bench", "--seeds", "0..7", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"corpus": {"bogus_key": 1}}))
        assert main(["bench", "--config", str(cfg), "--seeds", "0..1"]) == 2
        assert "unknown keys" in capsys.readouterr().err

    def test_config_file_parsed(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "corpus": {"count_min": 4, "count_max": 6},
            "engine": {"sharpness": 0.8, "meteor": {"alpha": 0.9}},
            "duplicate_choices": [0, 2],
            "paraphrase_prob": 0.25,
        }))
        config = load_bench_config(str(cfg))
        assert config.corpus.count_min == 4
        assert config.engine.sharpness == 0.8
        assert config.duplicate_choices == (0, 2)
        assert config.paraphrase_prob == 0.25


class TestDialogSimCommand:
    def test_simulation_report(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"corpus": {"duplicate_count": 2}}))
        out = tmp_path / "sim.json"
        code = main(["dialog-sim", "--protocol", "object-specific",
                     "--user", "correcting", "--config", str(cfg),
                     "--seeds", "0..9", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["kind"] == "dialog-sim"
        assert report["aggregates"]["mean_questions"] >= 1.0

    def test_non_ambiguous_corpus_exits_2(self, tmp_path, capsys):
        code = main(["dialog-sim", "--protocol", "object-specific",
                     "--seeds", "0..4"])
        assert code == 2


class TestMakeSceneCommand:
    def test_writes_loadable_scene(self, tmp_path, capsys):
        out = tmp_path / "scene.json"
        assert main(["make-scene", "--seed", "4", "--out", str(out)]) == 0
        from refground.scene import load_scene

        scene = load_scene(out.read_bytes())
        assert len(scene.regions) >= 1

    def test_ground_consumes_generated_scene(self, tmp_path, capsys):
        out = tmp_path / "scene.json"
        main(["make-scene", "--seed", "4", "--out", str(out)])
        capsys.readouterr()
        doc = json.loads(out.read_text())
        attrs = doc["regions"][0]["attrs"]
        code = main(["ground", "--scene", str(out),
                     "--say", f"the {attrs['color']} {attrs['category']}"])
        assert code == 0
        view = json.loads(capsys.readouterr().out)
        assert view["kind"] == "unique"
