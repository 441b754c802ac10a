import json
from pathlib import Path

import pytest

from kgrag.cli import main
from kgrag.runner import RunConfig, run_pipeline

from helpers import FIXTURES, GMT_PATH, SPORTS_PATH, USA_PATH


def base_config(tmp_path, **overrides):
    cfg = dict(
        graph=str(FIXTURES / "appendix_graph.tsv"),
        graph_format="tsv",
        dataset=str(FIXTURES / "trio_dataset.jsonl"),
        retrieval="builtin",
        max_hops=1,
        max_paths=100,
        scorer="attention",
        adapter="mock",
        mock_fixture=str(FIXTURES / "mock_fixture.json"),
        parallelism=1,
        output_dir=str(tmp_path / "run"),
    )
    cfg.update(overrides)
    return cfg


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


class TestRunCommand:
    def test_golden_run_predictions(self, tmp_path):
        cfg = RunConfig.from_dict(base_config(tmp_path))
        result = run_pipeline(cfg)
        rows = read_jsonl(result.run_dir / "predictions.jsonl")
        by_id = {r["question_id"]: r["answers"] for r in rows}
        assert by_id["appendix-0"] == ["University of Northern Colorado"]
        assert by_id["cat-b-0"] == ["United States of America"]
        assert by_id["cat-c-0"] == ["Colorado"]
        assert result.summary == {
            "n_questions": 3, "hit": 100.0, "f1": 100.0, "precision": 100.0, "recall": 100.0,
        }
        assert not result.failed_ids

    def test_run_directory_contents(self, tmp_path):
        cfg = RunConfig.from_dict(base_config(tmp_path))
        result = run_pipeline(cfg)
        d = result.run_dir
        assert (d / "config.json").exists()
        assert (d / "predictions.jsonl").exists()
        assert (d / "audit.jsonl").exists()
        assert (d / "summary.json").exists()
        assert (d / "prompts" / "appendix-0.prompt.txt").exists()
        assert (d / "prompts" / "appendix-0.llm_only.txt").exists()
        snapshot = json.loads((d / "config.json").read_text())
        assert snapshot["scorer"] == "attention"
        assert snapshot["output_dir"] == str(d)

    def test_golden_prompt_bytes(self, tmp_path, golden_prompt_bytes):
        cfg = RunConfig.from_dict(base_config(tmp_path, dataset=str(FIXTURES / "appendix_dataset.jsonl")))
        result = run_pipeline(cfg)
        written = (result.run_dir / "prompts" / "appendix-0.prompt.txt").read_bytes()
        assert written == golden_prompt_bytes

    def test_parallelism_does_not_change_bytes(self, tmp_path):
        r1 = run_pipeline(RunConfig.from_dict(base_config(tmp_path / "a", parallelism=1)))
        r8 = run_pipeline(RunConfig.from_dict(base_config(tmp_path / "b", parallelism=8)))
        p1 = (r1.run_dir / "predictions.jsonl").read_bytes()
        p8 = (r8.run_dir / "predictions.jsonl").read_bytes()
        assert p1 == p8

    def test_rerun_is_byte_stable(self, tmp_path):
        r1 = run_pipeline(RunConfig.from_dict(base_config(tmp_path / "a")))
        r2 = run_pipeline(RunConfig.from_dict(base_config(tmp_path / "b")))
        assert (r1.run_dir / "predictions.jsonl").read_bytes() == (r2.run_dir / "predictions.jsonl").read_bytes()
        for name in ("appendix-0", "cat-b-0", "cat-c-0"):
            a = (r1.run_dir / "prompts" / f"{name}.prompt.txt").read_bytes()
            b = (r2.run_dir / "prompts" / f"{name}.prompt.txt").read_bytes()
            assert a == b

    def test_resume_skips_done_questions(self, tmp_path):
        cfg = RunConfig.from_dict(base_config(tmp_path))
        first = run_pipeline(cfg)
        before = (first.run_dir / "predictions.jsonl").read_bytes()
        again = run_pipeline(RunConfig.from_dict(base_config(tmp_path)))
        assert sorted(again.skipped_ids) == ["appendix-0", "cat-b-0", "cat-c-0"]
        assert (again.run_dir / "predictions.jsonl").read_bytes() == before

    def test_ingest_retrieval_source(self, tmp_path):
        cfg = RunConfig.from_dict(base_config(
            tmp_path,
            dataset=str(FIXTURES / "appendix_dataset.jsonl"),
            retrieval="ingest",
            ingest_path=str(FIXTURES / "ingest_appendix.jsonl"),
        ))
        result = run_pipeline(cfg)
        rows = read_jsonl(result.run_dir / "predictions.jsonl")
        assert rows[0]["answers"] == ["University of Northern Colorado"]
        assert rows[0]["n_paths"] == 3  # the duplicated figure path was dropped

    def test_http_adapter_matches_mock(self, tmp_path, mock_adapter):
        from kgrag.mock_server import MockServerThread

        with MockServerThread(mock_adapter) as server:
            http_cfg = base_config(
                tmp_path / "http", adapter="http", adapter_url=server.base_url,
                adapter_retries=0, mock_fixture=None,
            )
            http_cfg["adapter_timeout"] = 10.0
            r_http = run_pipeline(RunConfig.from_dict(http_cfg))
        r_mock = run_pipeline(RunConfig.from_dict(base_config(tmp_path / "mock")))
        assert (r_http.run_dir / "predictions.jsonl").read_bytes() == \
            (r_mock.run_dir / "predictions.jsonl").read_bytes()

    def test_config_validation_errors(self, tmp_path):
        with pytest.raises(ValueError, match="ingest_path"):
            RunConfig.from_dict(base_config(tmp_path, retrieval="ingest")).validate()
        with pytest.raises(ValueError, match="adapter_url"):
            RunConfig.from_dict(base_config(tmp_path, adapter="http")).validate()
        with pytest.raises(ValueError, match="unknown config keys"):
            RunConfig.from_dict(base_config(tmp_path, typo_key=1))

    def test_cli_run_with_overrides(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config(tmp_path)), encoding="utf-8")
        out_dir = tmp_path / "cli-run"
        code = main(["run", "--config", str(config_path), "--output-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "predictions.jsonl").exists()
        assert "run directory" in capsys.readouterr().out


class TestAblations:
    VARIANTS = {
        "neither": dict(coarse_enabled=False, fine_enabled=False, integration_enabled=False),
        "filtering": dict(coarse_enabled=True, fine_enabled=True, integration_enabled=False),
        "integration": dict(coarse_enabled=False, fine_enabled=False, integration_enabled=True),
        "both": dict(coarse_enabled=True, fine_enabled=True, integration_enabled=True),
    }

    def test_four_variants_distinct_and_populated(self, tmp_path):
        outcomes = {}
        for name, flags in self.VARIANTS.items():
            cfg = RunConfig.from_dict(base_config(tmp_path / name, output_dir=str(tmp_path / name), **flags))
            result = run_pipeline(cfg)
            d = result.run_dir
            for artifact in ("config.json", "predictions.jsonl", "audit.jsonl", "summary.json"):
                assert (d / artifact).exists(), f"{name} missing {artifact}"
            outcomes[name] = {
                "predictions": (d / "predictions.jsonl").read_text(encoding="utf-8"),
                "prompt": (d / "prompts" / "appendix-0.prompt.txt").read_text(encoding="utf-8"),
                "summary": json.loads((d / "summary.json").read_text()),
            }
        # filtering changes the prompt tiers; integration changes the answers
        assert outcomes["neither"]["prompt"] != outcomes["both"]["prompt"]
        assert outcomes["filtering"]["prompt"] == outcomes["both"]["prompt"]
        assert outcomes["neither"]["predictions"] != outcomes["integration"]["predictions"]
        assert outcomes["neither"]["summary"]["f1"] < outcomes["both"]["summary"]["f1"]

    def test_integration_off_uses_raw_rag_answers(self, tmp_path):
        cfg = RunConfig.from_dict(base_config(tmp_path, integration_enabled=False))
        result = run_pipeline(cfg)
        by_id = {r["question_id"]: r["answers"] for r in read_jsonl(result.run_dir / "predictions.jsonl")}
        assert by_id["cat-c-0"] == ["Greeley Masonic Temple"]  # the weak wrong answer survives


class TestEvalCommand:
    def test_identity(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            json.dumps({"question_id": "appendix-0", "answers": ["University of Northern Colorado"]}) + "\n"
        )
        code = main(["eval", str(FIXTURES / "appendix_dataset.jsonl"), str(preds)])
        assert code == 0
        out = capsys.readouterr().out
        assert "100.00" in out

    def test_missing_file_clear_error(self, capsys):
        code = main(["eval", str(FIXTURES / "appendix_dataset.jsonl"), "/nonexistent/p.jsonl"])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestAnalyzeCommand:
    def test_categories(self, tmp_path, capsys):
        rag = write_preds(tmp_path / "rag.jsonl", {
            "appendix-0": ["University of Northern Colorado"], "cat-b-0": ["United States of America"],
            "cat-c-0": ["wrong"],
        })
        llm = write_preds(tmp_path / "llm.jsonl", {
            "appendix-0": ["University of Northern Colorado"], "cat-b-0": ["wrong"],
            "cat-c-0": ["Colorado"],
        })
        code = main(["analyze", "categories", str(FIXTURES / "trio_dataset.jsonl"), str(rag), str(llm)])
        assert code == 0
        out = capsys.readouterr().out
        assert "A,1" in out and "B,1" in out and "C,1" in out and "D,0" in out

    def test_categories_id_mismatch(self, tmp_path, capsys):
        rag = write_preds(tmp_path / "rag.jsonl", {"appendix-0": ["x"]})
        llm = write_preds(tmp_path / "llm.jsonl", {"appendix-0": ["x"], "cat-b-0": ["y"]})
        with pytest.raises(SystemExit, match="cat-b-0"):
            main(["analyze", "categories", str(FIXTURES / "trio_dataset.jsonl"), str(rag), str(llm)])

    def test_attention_analysis_on_audit(self, tmp_path, capsys):
        cfg = RunConfig.from_dict(base_config(tmp_path, dataset=str(FIXTURES / "appendix_dataset.jsonl")))
        result = run_pipeline(cfg)
        code = main(["analyze", "attention", str(result.run_dir / "audit.jsonl")])
        assert code == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        gold_mean = float(lines[1].split(",")[2])
        non_gold_mean = float(lines[2].split(",")[2])
        assert gold_mean > non_gold_mean

    def test_path_count_analysis_on_audit(self, tmp_path, capsys):
        cfg = RunConfig.from_dict(base_config(tmp_path))
        result = run_pipeline(cfg)
        code = main(["analyze", "path_count", str(result.run_dir / "audit.jsonl"), "--bins", "2"])
        assert code == 0
        assert "bin_center" in capsys.readouterr().out


class TestNoiseCommand:
    def test_standalone_injection(self, tmp_path, capsys):
        out = tmp_path / "noisy.jsonl"
        code = main([
            "noise", str(FIXTURES / "appendix_graph.tsv"), str(FIXTURES / "ingest_appendix.jsonl"),
            str(out), "--dataset", str(FIXTURES / "appendix_dataset.jsonl"), "--n", "30", "--seed", "4",
        ])
        assert code == 0
        rows = read_jsonl(out)
        assert len(rows) == 3 + 30  # dedup'd originals plus the noise budget
        assert sum(1 for r in rows if r["origin"].startswith("noise:")) == 30


def write_preds(path, by_id):
    rows = [{"question_id": qid, "answers": answers} for qid, answers in by_id.items()]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path
