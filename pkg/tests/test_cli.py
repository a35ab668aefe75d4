import json

import pytest

from capgest.cli import main
from capgest.signals import N_FEATURES


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small on-disk dataset and a trained bundle, built through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    bundle = root / "model.capgest"
    assert main(["synth", "--out", str(data), "--users", "15", "--per-class", "4"]) == 0
    assert main(["train", "--data", str(data), "--out", str(bundle)]) == 0
    return {"data": data, "bundle": bundle}


class TestHappyPaths:
    def test_synth_output_layout(self, workspace):
        assert (workspace["data"] / "calibration.csv").is_file()
        assert any((workspace["data"] / "recordings").glob("*.csv"))

    def test_eval_json(self, workspace, capsys):
        code = main(
            ["eval", "--data", str(workspace["data"]), "--bundle",
             str(workspace["bundle"]), "--split", "test", "--json"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert 0.0 <= report["base_accuracy"] <= 1.0
        assert 0.0 <= report["corrected_accuracy"] <= 1.0

    def test_eval_text(self, workspace, capsys):
        assert main(
            ["eval", "--data", str(workspace["data"]), "--bundle", str(workspace["bundle"])]
        ) == 0
        assert "overall accuracy" in capsys.readouterr().out

    def test_bench_within_budget(self, workspace, capsys):
        code = main(
            ["bench", "--data", str(workspace["data"]), "--bundle",
             str(workspace["bundle"]), "--iters", "40", "--warmup", "5",
             "--budget-ms", "1000"]
        )
        assert code == 0
        assert "p95_ms" in capsys.readouterr().out

    def test_bench_budget_violation_exits_3(self, workspace, capsys):
        code = main(
            ["bench", "--data", str(workspace["data"]), "--bundle",
             str(workspace["bundle"]), "--iters", "10", "--warmup", "2",
             "--budget-ms", "0.0000001"]
        )
        assert code == 3

    def test_predict_from_features(self, workspace, tmp_path, capsys):
        path = tmp_path / "f.csv"
        row = ",".join(["0.25"] * N_FEATURES)
        path.write_text(f"# probe\n{row}\n{row}\n", encoding="utf-8")
        assert main(
            ["predict", "--bundle", str(workspace["bundle"]), "--features", str(path)]
        ) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert lines[0] in ("index_bend", "shoot", "flick_index", "flick_middle", "none")

    def test_inspect(self, workspace, capsys):
        assert main(["inspect", "--bundle", str(workspace["bundle"]), "--json"]) == 0
        records = json.loads(capsys.readouterr().out)
        assert isinstance(records, list)

    def test_cv(self, workspace, capsys):
        code = main(
            ["cv", "--data", str(workspace["data"]), "--combos", "1", "--json"]
        )
        assert code == 0
        assert json.loads(capsys.readouterr().out)["n_combos"] == 1

    def test_show_config(self, capsys):
        assert main(["show-config"]) == 0
        assert "n_pcs = 3" in capsys.readouterr().out

    def test_train_with_config_file(self, workspace, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("corrector_kernels = pca:9\nknn_k = 3\n", encoding="utf-8")
        out = tmp_path / "m.capgest"
        code = main(
            ["train", "--data", str(workspace["data"]), "--out", str(out),
             "--config", str(cfg)]
        )
        assert code == 0
        from capgest.pipeline import load_bundle

        assert load_bundle(out).config.knn_k == 3


class TestExitCodes:
    def test_usage_error_is_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", "x"])  # missing --out
        assert exc.value.code == 1

    def test_data_error_is_2(self, tmp_path, capsys):
        assert main(["eval", "--data", str(tmp_path), "--bundle", "nope"]) == 2
        assert "error" in capsys.readouterr().err

    def test_bad_feature_width_is_2(self, workspace, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.1,0.2,0.3\n", encoding="utf-8")
        assert main(
            ["predict", "--bundle", str(workspace["bundle"]), "--features", str(path)]
        ) == 2
