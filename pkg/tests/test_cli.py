import json
import subprocess
import sys

import pytest

from polyset.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert run("gen-dataset", "--records", "160", "--chains", "128", "--seed", "7", "--out-dir", out) == 0
    return out


@pytest.fixture(scope="module")
def iso_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("iso")
    assert run("gen-dataset", "--groups", "10", "--mn-range", "1e6", "1e6", "--disp-range", "3", "3",
               "--out-dir", out) == 0
    return out


class TestGenDataset:
    def test_outputs(self, corpus_dir):
        lines = (corpus_dir / "corpus.jsonl").read_text().splitlines()
        assert len(lines) == 161  # header + records
        for name in ("mn_histogram.csv", "dispersity_histogram.csv", "mn_dispersity_bins.csv",
                     "mn_vs_log10_mz1.csv", "dataset_overview.svg", "coverage.json", "gen-dataset_config.json"):
            assert (corpus_dir / name).stat().st_size > 0
        cfg = json.loads((corpus_dir / "gen-dataset_config.json").read_text())
        assert cfg["dataset"]["master_seed"] == 7 and cfg["dataset"]["n_groups"] == 40

    def test_rerun_identical(self, corpus_dir, tmp_path):
        assert run("gen-dataset", "--records", "160", "--chains", "128", "--seed", "7", "--out-dir", tmp_path) == 0
        for f in corpus_dir.iterdir():
            if f.name != "gen-dataset_config.json":
                assert f.read_bytes() == (tmp_path / f.name).read_bytes(), f.name

    def test_bad_dispersity(self, tmp_path, capsys):
        assert run("gen-dataset", "--disp-range", "1", "3", "--out-dir", tmp_path / "x") != 0
        assert "dispersity_range" in capsys.readouterr().err
        assert not (tmp_path / "x" / "corpus.jsonl").exists()

    def test_records_multiple(self, tmp_path):
        assert run("gen-dataset", "--records", "10", "--out-dir", tmp_path) != 0

    def test_config_file(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"records": 8, "chains": 16, "mn_range": [2e4, 3e4]}))
        assert run("gen-dataset", "--config", tmp_path / "c.json", "--chains", "32", "--out-dir", tmp_path / "o") == 0
        resolved = json.loads((tmp_path / "o" / "gen-dataset_config.json").read_text())["dataset"]
        assert resolved["chains_per_ensemble"] == 32 and resolved["mn_range"] == [2e4, 3e4]

    def test_config_unknown_key(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"nope": 1}))
        with pytest.raises(SystemExit):
            run("gen-dataset", "--config", tmp_path / "c.json")


class TestMoments:
    def test_lognormal(self, capsys, tmp_path):
        assert run("moments", "--family", "lognormal", "--mn", "1e6", "--disp", "3", "--out-dir", tmp_path) == 0
        out = json.loads((tmp_path / "moments.json").read_text())
        assert out["analytic"]["mz_plus_1"] == pytest.approx(2.7e7)
        assert out["empirical"]["mz_plus_1"] == pytest.approx(2.7e7, rel=0.02)
        assert "2.7e+07" in capsys.readouterr().out

    def test_schulz_zimm(self, capsys):
        assert run("moments", "--family", "schulz-zimm", "--mn", "1e6", "--disp", "3") == 0
        assert "7e+06" in capsys.readouterr().out

    def test_point_mass(self, tmp_path, capsys):
        assert run("moments", "--mn", "1e5", "--disp", "1", "--out-dir", tmp_path) == 0
        out = json.loads((tmp_path / "moments.json").read_text())
        assert out["point_mass"]
        assert len(set(out["analytic"][k] for k in ("mn", "mw", "mz", "mz_plus_1"))) == 1
        assert "point mass" in capsys.readouterr().out

    def test_bad_family(self):
        assert run("moments", "--family", "pareto", "--mn", "1e5", "--disp", "2") != 0


class TestTrainEval:
    def test_both(self, corpus_dir, tmp_path):
        argv = ("train-eval", corpus_dir / "corpus.jsonl", "--epochs", "20", "--out-dir", tmp_path)
        assert run(*argv) == 0
        for name in ("learning_curve_polyset.csv", "learning_curve_baseline.csv", "learning_curves.svg",
                     "parity_polyset.csv", "parity.svg", "smape_polyset.csv", "smape_distribution.svg",
                     "metrics.json", "model_polyset.json", "split.json", "train-eval_config.json"):
            assert (tmp_path / name).stat().st_size > 0, name
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert set(metrics) == {"polyset", "baseline", "comparison"}
        # rerun with the saved split gives identical metrics and figures
        again = tmp_path / "again"
        assert run(*argv[:-1], again, "--split", tmp_path / "split.json") == 0
        assert (again / "metrics.json").read_bytes() == (tmp_path / "metrics.json").read_bytes()
        assert (again / "parity.svg").read_bytes() == (tmp_path / "parity.svg").read_bytes()

    def test_divergence_exit(self, corpus_dir, tmp_path):
        code = run("train-eval", corpus_dir / "corpus.jsonl", "--repr", "polyset", "--lr", "1e12",
                   "--epochs", "30", "--out-dir", tmp_path)
        assert code != 0
        assert (tmp_path / "learning_curve_polyset.csv").exists()

    def test_missing_corpus(self, tmp_path):
        assert run("train-eval", tmp_path / "nope.jsonl", "--out-dir", tmp_path) != 0


class TestPca:
    def test_polyset(self, iso_dir, tmp_path, capsys):
        assert run("pca", iso_dir / "corpus.jsonl", "--mn", "1e6", "--disp", "3", "--out-dir", tmp_path) == 0
        summary = json.loads((tmp_path / "pca_polyset_summary.json").read_text())
        assert summary["spearman_pc_vs_logmz1"] >= 0.9
        header = (tmp_path / "pca_polyset.csv").read_text().splitlines()[0]
        assert header == "id,pc1,pc2,log10_mz1"
        assert (tmp_path / "pca_polyset.svg").exists()

    def test_baseline_notice(self, iso_dir, tmp_path, capsys):
        assert run("pca", iso_dir / "corpus.jsonl", "--mn", "1e6", "--disp", "3", "--repr", "baseline",
                   "--out-dir", tmp_path) == 0
        assert "degenerate embeddings" in capsys.readouterr().out

    def test_empty_selector(self, iso_dir, tmp_path):
        assert run("pca", iso_dir / "corpus.jsonl", "--mn", "2e5", "--disp", "3", "--out-dir", tmp_path) != 0

    def test_too_small(self, iso_dir, tmp_path):
        assert run("pca", iso_dir / "corpus.jsonl", "--groups", "0", "--out-dir", tmp_path) != 0


def test_embed_and_degeneracy(corpus_dir, tmp_path):
    assert run("embed", corpus_dir / "corpus.jsonl", "--out-dir", tmp_path) == 0
    from polyset.encode import read_embeddings
    ids, M, _, kind = read_embeddings(tmp_path / "embeddings_polyset.jsonl")
    assert M.shape == (160, 34) and kind == "polyset"
    assert run("degeneracy-report", corpus_dir / "corpus.jsonl", "--out-dir", tmp_path) == 0
    summary = json.loads((tmp_path / "degeneracy_summary.json").read_text())
    assert summary["n_groups"] == 40
    assert (tmp_path / "degeneracy.csv").read_text().count("\n") == 41


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "polyset", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("gen-dataset", "moments", "embed", "train-eval", "pca", "degeneracy-report"):
        assert cmd in proc.stdout
