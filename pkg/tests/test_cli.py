"""End-to-end command surface: files, digests, exit codes, reproducibility."""

import json

import numpy as np
import pytest

from attnsearch.cli import main, read_csv

TINY = {
    "seed": 4,
    "backbone": {"stages": [[2, 4], [2, 6]], "input_shape": [1, 6, 6], "classes": 3,
                 "sam": "se", "reduction": 2},
    "dataset": {"classes": 3, "per_class": 12, "shape": [1, 6, 6], "noise": 0.3},
    "supernet": {"steps": 12, "batch_size": 4, "learning_rate": 0.02,
                 "weight_decay": 0.001, "lr_drop_step": None},
    "search": {"iterations": 8},
    "study": {"ratios": [0.25, 0.5], "samples_per_ratio": 4},
    "theory": {"d": 4, "epsilon": 1.0, "delta": 0.2, "trials": 150, "probes": 20,
               "dof_convention": "corrected"},
}


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "exp.json"
    cfg = dict(TINY)
    cfg["output_dir"] = str(tmp_path / "out")
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestPretrainAndSearch:
    def test_pipeline_outputs(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run("pretrain", "--config", tiny_config) == 0
        ckpt = out / "supernet.ckpt"
        assert ckpt.exists()
        assert run("search", "--config", tiny_config, "--checkpoint", ckpt) == 0
        digest, rows = read_csv(out / "trace.csv")
        assert len(digest) == 64
        assert len(rows) == 8
        assert list(rows[0]) == ["iteration", "scheme", "sparse", "g_val",
                                 "g_rnd", "reward", "p_bar"]
        schemes = json.loads((out / "schemes.json").read_text())
        assert schemes["config_digest"] == digest
        assert 1 <= len(schemes["best"]) <= 3
        pbar_digest, pbar_rows = read_csv(out / "pbar.csv")
        assert pbar_digest == digest and len(pbar_rows) == 8

    def test_search_refuses_foreign_checkpoint(self, tiny_config, tmp_path):
        other_cfg = dict(TINY, seed=99, output_dir=str(tmp_path / "other"))
        other_path = tmp_path / "other.json"
        other_path.write_text(json.dumps(other_cfg))
        assert run("pretrain", "--config", other_path) == 0
        rc = run("search", "--config", tiny_config,
                 "--checkpoint", tmp_path / "other" / "supernet.ckpt")
        assert rc == 1

    def test_byte_identical_reruns(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        blobs = {}
        for tag in ("a", "b"):
            d = tmp_path / tag
            assert run("pretrain", "--config", tiny_config, "--output-dir", d) == 0
            assert run("search", "--config", tiny_config, "--output-dir", d,
                       "--checkpoint", d / "supernet.ckpt") == 0
            blobs[tag] = {name: (d / name).read_bytes()
                          for name in ("supernet.ckpt", "trace.csv", "pbar.csv",
                                       "schemes.json")}
        assert blobs["a"] == blobs["b"]

    def test_zero_steps_checkpoint_equals_initialization(self, tmp_path):
        cfg = dict(TINY, output_dir=str(tmp_path / "o"))
        cfg["supernet"] = dict(TINY["supernet"], steps=0)
        path = tmp_path / "zero.json"
        path.write_text(json.dumps(cfg))
        assert run("pretrain", "--config", path) == 0
        from attnsearch.checkpoint import load_checkpoint
        from attnsearch.config import ExperimentConfig
        conf = ExperimentConfig.from_file(path)
        loaded = conf.build_supernet()
        load_checkpoint(tmp_path / "o" / "supernet.ckpt", loaded, conf.digest())
        fresh = conf.build_supernet()
        for (n1, p1), (n2, p2) in zip(loaded.named_parameters(),
                                      fresh.named_parameters()):
            assert n1 == n2
            np.testing.assert_array_equal(p1.value, p2.value)


class TestEnumerateAndStudy:
    def test_enumerate_emits_all_rows(self, tmp_path):
        cfg = dict(TINY, output_dir=str(tmp_path / "o"))
        cfg["backbone"] = {"stages": [[1, 4], [1, 6]], "input_shape": [1, 6, 6],
                           "classes": 3, "sam": "se", "reduction": 2}
        path = tmp_path / "m2.json"
        path.write_text(json.dumps(cfg))
        assert run("enumerate", "--config", path) == 0
        _, rows = read_csv(tmp_path / "o" / "ranking.csv")
        assert len(rows) == 4
        assert {r["scheme"] for r in rows} == {"00", "01", "10", "11"}

    def test_enumerate_parallel_matches_serial(self, tiny_config, tmp_path):
        assert run("enumerate", "--config", tiny_config,
                   "--output-dir", tmp_path / "s") == 0
        assert run("enumerate", "--config", tiny_config,
                   "--output-dir", tmp_path / "p", "--workers", 4) == 0
        assert (tmp_path / "s" / "ranking.csv").read_bytes() == \
               (tmp_path / "p" / "ranking.csv").read_bytes()

    def test_study_parallel_matches_serial(self, tiny_config, tmp_path):
        assert run("study", "--config", tiny_config,
                   "--output-dir", tmp_path / "s") == 0
        assert run("study", "--config", tiny_config,
                   "--output-dir", tmp_path / "p", "--workers", 3) == 0
        assert (tmp_path / "s" / "study_rows.csv").read_bytes() == \
               (tmp_path / "p" / "study_rows.csv").read_bytes()

    def test_study_rows_and_summary(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run("study", "--config", tiny_config) == 0
        digest, rows = read_csv(out / "study_rows.csv")
        assert all(r["scheme"].count("1") == int(r["ones"]) for r in rows)
        summary = json.loads((out / "study_summary.json").read_text())
        assert summary["config_digest"] == digest
        assert set(summary["per_ratio"]) == {"0.25", "0.5"}
        for stats in summary["per_ratio"].values():
            assert stats["min"] <= stats["mean"] <= stats["max"]

    def test_report_recomputes_summary(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run("study", "--config", tiny_config) == 0
        assert run("report", "--rows", out / "study_rows.csv",
                   "--config", tiny_config, "--out", out / "rep.json") == 0
        rep = json.loads((out / "rep.json").read_text())
        summary = json.loads((out / "study_summary.json").read_text())
        assert rep["per_ratio"] == summary["per_ratio"]

    def test_report_rejects_wrong_config(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run("study", "--config", tiny_config) == 0
        other = tmp_path / "other.json"
        other.write_text(json.dumps(dict(TINY, seed=123)))
        assert run("report", "--rows", out / "study_rows.csv",
                   "--config", other) == 1


class TestBaselines:
    def test_hsp(self, tiny_config, tmp_path):
        assert run("baseline", "hsp", "--config", tiny_config,
                   "--period", 2, "--offset", 0) == 0
        payload = json.loads((tmp_path / "out" / "baseline_hsp.json").read_text())
        assert payload["scheme"] == "1010"

    def test_ga(self, tiny_config, tmp_path):
        assert run("baseline", "ga", "--config", tiny_config,
                   "--population", 8, "--generations", 4) == 0
        payload = json.loads((tmp_path / "out" / "baseline_ga.json").read_text())
        assert len(payload["scheme"]) == 4

    def test_l1_needs_checkpoint(self, tiny_config):
        assert run("baseline", "l1", "--config", tiny_config) == 1

    def test_l1_with_checkpoint(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run("pretrain", "--config", tiny_config) == 0
        assert run("baseline", "l1", "--config", tiny_config,
                   "--checkpoint", out / "supernet.ckpt", "--keep-ratio", 0.5) == 0
        payload = json.loads((out / "baseline_l1.json").read_text())
        assert payload["scheme"].count("1") == 2


class TestVerifySubcommands:
    def test_verify_thm1_passes_with_corrected_dof(self, tiny_config, tmp_path):
        assert run("verify-thm1", "--config", tiny_config) == 0
        report = json.loads((tmp_path / "out" / "thm1_report.json").read_text())
        assert report["passed"] is True
        assert report["m_min_corrected"] >= report["m_min_literal"]
        assert report["zeroing_dominance"]["ok"] is True

    def test_verify_thm1_literal_dof_fails_band(self, tmp_path):
        cfg = dict(TINY, output_dir=str(tmp_path / "o"))
        cfg["theory"] = {"d": 4, "epsilon": 0.8, "delta": 0.15, "trials": 300,
                         "probes": 10, "dof_convention": "literal"}
        path = tmp_path / "lit.json"
        path.write_text(json.dumps(cfg))
        assert run("verify-thm1", "--config", path) == 2

    def test_extend_demo(self, tiny_config, tmp_path):
        assert run("extend-demo", "--config", tiny_config) == 0
        report = json.loads((tmp_path / "out" / "extend_report.json").read_text())
        assert report["extension_error"] == 0.0
        assert report["embedding_error"] <= 1e-12
        assert report["extended_depth"] == report["original_depth"] + 4


class TestErrors:
    def test_missing_config_file(self, tmp_path):
        assert run("pretrain", "--config", tmp_path / "nope.json") == 1

    def test_unknown_subcommand(self):
        assert run("fly") == 1

    def test_supernet_backend_needs_checkpoint(self, tiny_config):
        assert run("enumerate", "--config", tiny_config,
                   "--backend", "supernet") == 1
