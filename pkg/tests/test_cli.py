import json
from pathlib import Path

import pytest

from safeqaoa.cli import main
from safeqaoa.config import ExperimentConfig
from safeqaoa.errors import ConfigError


def _write_config(path: Path, **overrides) -> Path:
    doc = {
        "families": ["sk"],
        "sizes": {"sk": [4]},
        "depths": [1],
        "max_weights": [2],
        "thresholds": [0.0, 0.3],
        "methods": ["exact-only", "safe"],
        "n_instances": 1,
        "master_seed": 77,
        "pretrain_steps": 5,
        "finetune_steps": 4,
        "relax_steps": 2,
        "init_ids": ["rand-0", "const-0.1"],
    }
    doc.update(overrides)
    cfg = path / "config.json"
    cfg.write_text(json.dumps(doc))
    return cfg


class TestConfig:
    def test_defaults_match_reference_protocol(self):
        cfg = ExperimentConfig()
        assert cfg.pretrain_steps == 500
        assert cfg.finetune_steps == 100
        assert cfg.learning_rate == 0.02
        assert (cfg.beta1, cfg.beta2) == (0.9, 0.999)
        assert cfg.thresholds == [0.0, 0.01, 0.3]
        assert cfg.max_weights == [3, 4]
        assert cfg.depths == [2, 4]
        assert cfg.n_instances == 5
        assert cfg.edge_prob == 0.3
        assert sorted(cfg.sizes["sk"]) == [12, 16, 20]

    def test_rejects_unknown_family(self):
        cfg = ExperimentConfig(families=["tsp"])
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"nope": 1})

    def test_sizes_shorthand(self):
        cfg = ExperimentConfig.from_dict({"families": ["sk", "maxcut"], "sizes": [12]})
        assert cfg.sizes == {"sk": [12], "maxcut": [12]}

    def test_sweep_spec_method_tokens(self):
        cfg = ExperimentConfig.from_dict(
            {"methods": ["safe-distill"], "thresholds": [0.0, 0.3]}
        )
        spec = cfg.sweep_spec()
        assert spec.thresholds == (0.3,)
        cfg2 = ExperimentConfig.from_dict({"methods": ["safe-nodistill"]})
        assert cfg2.sweep_spec().thresholds == (0.0,)


class TestGenerate:
    def test_writes_instances_idempotently(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
        files = sorted((out / "instances").glob("*.json"))
        assert [f.name for f in files] == ["sk-n4-i0.json"]
        first = files[0].read_bytes()
        assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
        assert files[0].read_bytes() == first
        doc = json.loads(first)
        assert "extremes" in doc


class TestRun:
    def test_dry_run_plans_matrix(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        assert main(["run", "--config", str(cfg), "--dry-run"]) == 0
        printed = capsys.readouterr().out
        assert "planned:" in printed and "exact-only" in printed and "wmax=2" in printed

    def test_small_sweep_and_report(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--workers", "1"]) == 0
        assert (out / "summary.csv").exists()
        assert (out / "config.json").exists()
        runs = sorted((out / "results").rglob("*.jsonl"))
        assert len(runs) == 6

        assert main(["report", str(out)]) == 0
        report = out / "report"
        for name in ("progression.csv", "cost.csv", "threshold_summary.csv", "runs.csv", "reduction_stats.json"):
            assert (report / name).exists(), name
        stats = json.loads((report / "reduction_stats.json").read_text())
        assert set(stats) == {"parameter_reduction", "workload_reduction", "step_reduction"}

    def test_rerun_byte_identical(self, tmp_path):
        cfg = _write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(b)]) == 0
        rels = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert rels
        for rel in rels:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_flag_overrides(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        assert (
            main(
                ["run", "--config", str(cfg), "--method", "exact-only",
                 "--finetune-steps", "2", "--dry-run"]
            )
            == 0
        )
        printed = capsys.readouterr().out
        assert "safe" not in printed.replace("exact-only", "")

    def test_invalid_config_exit_code(self, tmp_path):
        cfg = _write_config(tmp_path, families=["tsp"])
        assert main(["run", "--config", str(cfg), "--dry-run"]) == 2

    def test_invalid_threshold_exit_code(self, tmp_path):
        cfg = _write_config(tmp_path, thresholds=[-0.5])
        assert main(["run", "--config", str(cfg), "--dry-run"]) == 2


class TestReport:
    def test_empty_results_warns(self, tmp_path, capsys):
        empty = tmp_path / "nothing"
        empty.mkdir()
        assert main(["report", str(empty)]) == 0
        assert "warning" in capsys.readouterr().err
