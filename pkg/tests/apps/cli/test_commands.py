"""
Тесты команд CLI: коды завершения, ErrorOut в stderr, артефакты запусков.
"""

import io
import json
from pathlib import Path
from typing import Any

import pytest

from apps.cli.main import run
from apps.common.schemas import ErrorOut
from config import settings


@pytest.fixture(autouse=True)
def cache_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Кэш сегментов во временной директории."""
    path = tmp_path / "cache"
    monkeypatch.setattr(settings, "CACHE_DIR", path)
    return path


def invoke(*argv: str | Path) -> tuple[int, dict[str, Any] | None, str]:
    """
    Выполняет команду и разбирает отчёт из stdout.

    Returns:
        tuple[int, dict[str, Any] | None, str]: Код завершения, отчёт, содержимое stderr.
    """
    stdout, stderr = io.StringIO(), io.StringIO()
    code = run([str(arg) for arg in argv], stdout=stdout, stderr=stderr)
    output = stdout.getvalue()
    return code, json.loads(output) if output else None, stderr.getvalue()


def error_of(stderr: str) -> ErrorOut:
    return ErrorOut.model_validate_json(stderr.strip().splitlines()[-1])


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestGenerate:
    """Команда generate."""

    SPEC = {"n_graphs": 8, "min_nodes": 20, "max_nodes": 30, "num_classes": 2, "community_size": 10, "seed": 3}

    def test_generation_is_deterministic(self, tmp_path: Path) -> None:
        spec = write_json(tmp_path / "spec.json", self.SPEC)

        code, summary, _ = invoke("generate", "--spec", spec, "--out", tmp_path / "a" / "graphs.jsonl")
        again, _, _ = invoke("generate", "--spec", spec, "--out", tmp_path / "b" / "graphs.jsonl")

        assert (code, again) == (0, 0)
        assert summary is not None
        assert summary["graphs"] == 8
        assert sum(summary["class_histogram"].values()) == 8
        assert (tmp_path / "a" / "graphs.jsonl").read_bytes() == (tmp_path / "b" / "graphs.jsonl").read_bytes()
        assert (tmp_path / "a" / "graphs.split.json").exists()

    def test_invalid_spec_writes_nothing(self, tmp_path: Path) -> None:
        spec = write_json(tmp_path / "spec.json", {**self.SPEC, "num_classes": 5, "min_nodes": 2})
        out = tmp_path / "out" / "graphs.jsonl"

        code, summary, stderr = invoke("generate", "--spec", spec, "--out", out)

        assert code == 2
        assert summary is None
        assert error_of(stderr).code == "config_error"
        assert not out.parent.exists()

    def test_unknown_field(self, tmp_path: Path) -> None:
        spec = write_json(tmp_path / "spec.json", {**self.SPEC, "colour": "red"})

        code, _, stderr = invoke("generate", "--spec", spec, "--out", tmp_path / "graphs.jsonl")

        assert code == 2
        assert "colour" in str(error_of(stderr).details)


class TestPartition:
    """Команда partition."""

    def test_methods_and_cache(self, dataset_file: Path, cache_dir: Path) -> None:
        argv = ("partition", "--dataset", dataset_file, "--method", "locality-edge-cut", "random-edge-cut", "--cap", "5")

        code, report, _ = invoke(*argv)
        _, cached, _ = invoke(*argv)

        assert code == 0
        assert report is not None and cached is not None
        assert [row["cache_hit"] for row in report["partitions"]] == [False, False]
        assert [row["cache_hit"] for row in cached["partitions"]] == [True, True]
        assert all(row["max_segment_size"] <= 5 for row in report["partitions"])
        assert "edge_cut_comparison" in report
        assert len(list(cache_dir.glob("segments-*.jsonl"))) == 2

    def test_unknown_method(self, dataset_file: Path) -> None:
        code, _, stderr = invoke("partition", "--dataset", dataset_file, "--method", "metis")

        assert code == 2
        assert error_of(stderr).code == "config_error"

    def test_missing_dataset(self, tmp_path: Path) -> None:
        code, _, stderr = invoke("partition", "--dataset", tmp_path / "absent.jsonl")

        assert code == 4
        assert error_of(stderr).code == "io_error"


class TestTrainAndEvaluate:
    """Команды train и eval на маленьком датасете."""

    @pytest.fixture
    def config_file(self, dataset_file: Path, tmp_path: Path) -> Path:
        return write_json(
            tmp_path / "experiment.json",
            {
                "dataset": str(dataset_file),
                "plan": {
                    "variant": "gst-efd",
                    "max_segment_nodes": 5,
                    "batch_size": 2,
                    "epochs": 2,
                    "finetune_epochs": 1,
                    "lr": 0.01,
                },
                "architecture": {"hidden_width": 8, "mp_layers": 1},
                "output_dir": str(tmp_path / "run"),
            },
        )

    def test_train_writes_artifacts(self, config_file: Path, tmp_path: Path) -> None:
        code, summary, _ = invoke("train", "--config", config_file)

        assert code == 0
        assert summary is not None
        assert summary["epochs"] == 3
        assert summary["final"]["phase"] == "finetune"
        lines = (tmp_path / "run" / "runlog.jsonl").read_text(encoding="utf-8").splitlines()
        assert [json.loads(line)["phase"] for line in lines] == ["train", "train", "finetune"]
        assert all(json.loads(line)["config_hash"] == summary["config_hash"] for line in lines)
        assert json.loads((tmp_path / "run" / "summary.json").read_text(encoding="utf-8")) == summary

    def test_evaluate_checkpoint(self, config_file: Path, tmp_path: Path) -> None:
        invoke("train", "--config", config_file)

        code, report, _ = invoke("eval", "--checkpoint", tmp_path / "run" / "checkpoint.json", "--mode", "table")

        assert code == 0
        assert report is not None
        assert set(report["metrics"]) == {"fresh-segments", "table"}
        assert all(0.0 <= value <= 1.0 for value in report["metrics"].values())

    def test_resume_rejects_other_config(self, config_file: Path, tmp_path: Path) -> None:
        invoke("train", "--config", config_file)

        code, _, stderr = invoke("train", "--config", config_file, "--resume", tmp_path / "run" / "checkpoint.json", "--epochs", "3")

        assert code == 2
        error = error_of(stderr)
        assert error.code == "config_error"
        assert isinstance(error.details, dict) and set(error.details) == {"checkpoint", "config"}

    def test_resume_finished_run(self, config_file: Path, tmp_path: Path) -> None:
        _, first, _ = invoke("train", "--config", config_file)

        code, resumed, _ = invoke("train", "--config", config_file, "--resume", tmp_path / "run" / "checkpoint.json")

        assert code == 0
        assert first is not None and resumed is not None
        assert resumed["epochs"] == 3
        assert resumed["final"]["loss"] == first["final"]["loss"]

    def test_budget_too_small(self, config_file: Path) -> None:
        code, _, stderr = invoke("train", "--config", config_file, "--variant", "full", "--budget-nodes", "3")

        assert code == 3
        assert error_of(stderr).code == "budget_exceeded"

    def test_evaluate_missing_checkpoint(self, tmp_path: Path) -> None:
        code, _, _ = invoke("eval", "--checkpoint", tmp_path / "absent.json")

        assert code == 4


class TestRankingTrain:
    """generate (ранжирование) -> train с планом по умолчанию."""

    SPEC = {
        "family": "weighted-sum-ranking",
        "n_graphs": 4,
        "min_nodes": 20,
        "max_nodes": 30,
        "configs_per_graph": 4,
        "community_size": 10,
        "val_fraction": 0.25,
        "test_fraction": 0.25,
        "seed": 2,
    }

    def test_default_plan_trains_with_hinge(self, tmp_path: Path) -> None:
        spec = write_json(tmp_path / "spec.json", self.SPEC)
        dataset = tmp_path / "data" / "graphs.jsonl"
        assert invoke("generate", "--spec", spec, "--out", dataset)[0] == 0
        config = write_json(
            tmp_path / "experiment.json",
            {
                "dataset": str(dataset),
                "plan": {"max_segment_nodes": 10, "batch_size": 2, "epochs": 2, "lr": 0.01},
                "architecture": {"hidden_width": 8, "mp_layers": 1},
                "output_dir": str(tmp_path / "run"),
            },
        )

        code, summary, _ = invoke("train", "--config", config)

        assert code == 0
        assert summary is not None and summary["epochs"] == 2
        final = summary["final"]
        assert final["train_metric"] is None or 0.0 <= final["train_metric"] <= 1.0
        checkpoint = json.loads((tmp_path / "run" / "checkpoint.json").read_text(encoding="utf-8"))
        assert checkpoint["state"]["plan"]["loss"] == "pairwise-hinge"
        assert checkpoint["state"]["plan"]["aggregation"] == "sum"

    def test_cross_entropy_on_ranking_exits_with_config_error(self, tmp_path: Path) -> None:
        spec = write_json(tmp_path / "spec.json", self.SPEC)
        dataset = tmp_path / "data" / "graphs.jsonl"
        invoke("generate", "--spec", spec, "--out", dataset)
        config = write_json(
            tmp_path / "experiment.json",
            {
                "dataset": str(dataset),
                "plan": {"max_segment_nodes": 10, "batch_size": 2, "epochs": 1, "loss": "cross-entropy"},
                "output_dir": str(tmp_path / "run"),
            },
        )

        code, _, stderr = invoke("train", "--config", config)

        assert code == 2
        assert error_of(stderr).code == "config_error"


class TestAnalyze:
    """Команда analyze."""

    def test_bias_exact_relations(self) -> None:
        code, report, _ = invoke("analyze", "--mode", "bias", "--J", "3", "--trials", "2000")

        assert code == 0
        assert report is not None
        exact = [r for r in report["relations"] if r["detail"] == "rational equality"]
        assert exact and all(r["passed"] for r in exact)

    def test_staleness_simulation_and_trace(self, tmp_path: Path) -> None:
        code, report, _ = invoke(
            "analyze", "--mode", "staleness", "--J", "3", "--n-graphs", "4", "--sim-epochs", "3", "--out", tmp_path / "trace"
        )

        assert code == 0
        assert report is not None
        assert report["passed"] is True
        assert report["simulation"]["min_staleness"] >= 4
        assert len(report["trace"]) == 3

    def test_unknown_mode(self) -> None:
        code, _, stderr = invoke("analyze", "--mode", "nope")

        assert code == 2
        assert error_of(stderr).code == "config_error"
