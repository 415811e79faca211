import json
import subprocess
import sys
from pathlib import Path

import pytest

from modelzip.harness import ReportRow, write_rows_jsonl
from modelzip.synthdata import build_fixture_corpus, english_like_text


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "modelzip.cli", *[str(a) for a in args]],
        capture_output=True, text=True, timeout=600, env=env,
    )


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("clicorpus") / "wikisample"
    build_fixture_corpus(root, months=("2022-11", "2022-12", "2023-01"),
                         docs_per_month=1, text_bytes=3000)
    manifest = root.parent / "manifest.json"
    result = run_cli("ingest", root, "--out", manifest)
    assert result.returncode == 0, result.stderr
    return root, manifest


class TestCompressDecompress:
    @pytest.mark.parametrize("model", ["uniform", "adaptive2"])
    def test_round_trip_is_byte_identical(self, tmp_path, model):
        source = tmp_path / "doc.txt"
        source.write_text(english_like_text(5000, seed=2))
        packed = tmp_path / "doc.mzp"
        restored = tmp_path / "doc.out"
        result = run_cli("compress", source, packed, "--model", model)
        assert result.returncode == 0, result.stderr
        stats = json.loads(result.stdout)
        assert stats["raw_bytes"] == 5000
        result = run_cli("decompress", packed, restored)
        assert result.returncode == 0, result.stderr
        assert restored.read_bytes() == source.read_bytes()

    def test_compress_reports_rate(self, tmp_path):
        source = tmp_path / "x.bin"
        source.write_bytes(b"\x00" * 4096)
        result = run_cli("compress", source, tmp_path / "x.mzp", "--model", "adaptive0")
        stats = json.loads(result.stdout)
        assert stats["rate"] < 0.2

    def test_missing_input_is_user_error(self, tmp_path):
        result = run_cli("compress", tmp_path / "absent", tmp_path / "y.mzp",
                         "--model", "uniform")
        assert result.returncode == 1
        error = json.loads(result.stderr)
        assert "error" in error


class TestEval:
    def test_sliding_full_step_matches_chunked(self, corpus, tmp_path):
        root, manifest = corpus
        out_a = tmp_path / "chunked.jsonl"
        out_b = tmp_path / "sliding.jsonl"
        base = ["eval", "--manifest", manifest, "--root", root, "--model",
                "adaptive1", "--context", "2048", "--out"]
        assert run_cli(*base, out_a, "--mode", "chunked").returncode == 0
        assert run_cli(*base, out_b, "--mode", "sliding", "--step", "2048").returncode == 0
        bits = lambda p: [
            (json.loads(line)["doc_id"], json.loads(line)["total_bits"])
            for line in p.read_text().splitlines()
            if json.loads(line)["scope"] == "document"
        ]
        assert bits(out_a) == bits(out_b)

    def test_eval_with_bridge_endpoint(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "bridge.jsonl"
        result = run_cli("eval", "--manifest", manifest, "--root", root,
                         "--model", "mock:adaptive0", "--context", "2048",
                         "--months", "2022-11", "--out", out)
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert any(r["scope"] == "month" for r in rows)
        assert all(r["model"] == "mock-adaptive0" for r in rows)

    def test_eval_env_var_endpoint(self, corpus, tmp_path):
        import os

        root, manifest = corpus
        env = dict(os.environ, MODELZIP_SIDECAR="mock:uniform")
        result = run_cli("eval", "--manifest", manifest, "--root", root,
                         "--model", "bridge", "--months", "2022-11",
                         "--out", tmp_path / "env.jsonl", env=env)
        assert result.returncode == 0, result.stderr

    def test_csv_output(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "rows.jsonl"
        csv_out = tmp_path / "rows.csv"
        result = run_cli("eval", "--manifest", manifest, "--root", root,
                         "--model", "uniform", "--months", "2022-11",
                         "--out", out, "--csv", csv_out)
        assert result.returncode == 0
        header = csv_out.read_text().splitlines()[0]
        assert header.startswith("scope,model,dataset,doc_id,year_month")


class TestReport:
    def test_published_fixture_prints_gap(self, tmp_path):
        rows = []
        for i, ym in enumerate(
            [f"{y}-{m:02d}" for y in range(2017, 2023) for m in range(1, 13)]
            + [f"2023-{m:02d}" for m in range(1, 12)]
        ):
            rate = 0.07320 if ym <= "2022-12" else 0.07539
            rows.append(ReportRow(
                scope="month", model="Llama-2-7B", dataset="wikitext", doc_id="*",
                year_month=ym, mode="chunked", context_size=2048, step=2048,
                rate=rate * 100,
            ))
        rows_path = tmp_path / "rows.jsonl"
        with open(rows_path, "w") as fh:
            write_rows_jsonl(rows, fh)
        result = run_cli("report", "--rows", rows_path, "--cutoff", "2022-12",
                         "--out", tmp_path / "report")
        assert result.returncode == 0, result.stderr
        assert "+.219" in result.stdout
        summary = json.loads((tmp_path / "report" / "summary.json").read_text())
        row = summary["summaries"][0]
        assert abs(row["gap"] - 0.219) < 1e-9
        assert abs(row["rate_future_estimate"] - 7.758) < 1e-9

    def test_report_from_document_rows(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "rows.jsonl"
        run_cli("eval", "--manifest", manifest, "--root", root, "--model",
                "adaptive0", "--out", out)
        result = run_cli("report", "--rows", out, "--cutoff", "2022-12",
                         "--out", tmp_path / "rep")
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "rep" / "summary.csv").exists()

    def test_bad_cutoff_is_user_error(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "rows.jsonl"
        run_cli("eval", "--manifest", manifest, "--root", root, "--model",
                "uniform", "--out", out)
        result = run_cli("report", "--rows", out, "--cutoff", "2030-01",
                         "--out", tmp_path / "rep2")
        assert result.returncode == 1
        assert json.loads(result.stderr)["error"]["kind"] == "TemporalError"


class TestIngestCommand:
    def test_manifest_written(self, tmp_path):
        build_fixture_corpus(tmp_path / "set", months=("2023-01",), docs_per_month=1)
        out = tmp_path / "m.json"
        result = run_cli("ingest", tmp_path / "set", "--out", out)
        assert result.returncode == 0
        stats = json.loads(result.stdout)
        assert stats["documents"] == 2
        assert json.loads(out.read_text())["schema_version"] == 1

    def test_bad_layout_is_user_error(self, tmp_path):
        bad = tmp_path / "set" / "not-a-month"
        bad.mkdir(parents=True)
        (bad / "f.txt").write_text("x")
        result = run_cli("ingest", tmp_path / "set", "--out", tmp_path / "m.json")
        assert result.returncode == 1


class TestSelftest:
    def test_passes_and_echoes_seed(self):
        result = run_cli("selftest", "--seed", "7", "--cases", "12")
        assert result.returncode == 0, result.stdout + result.stderr
        assert "seed=7" in result.stdout
        assert "[PASS] rational oracle" in result.stdout
        assert "[PASS] protocol conformance against mock:uniform" in result.stdout


class TestEvalExtras:
    def test_deflate_baseline_rows(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "deflate.jsonl"
        result = run_cli("eval", "--manifest", manifest, "--root", root,
                         "--model", "deflate", "--out", out)
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        doc_rows = [r for r in rows if r["scope"] == "document"]
        assert doc_rows and all(r["model"] == "deflate" for r in doc_rows)
        text_rows = [r for r in doc_rows if r["doc_id"].endswith(".txt")]
        assert all(0.2 < r["rate"] < 0.6 for r in text_rows)
        assert all(r["payload_bytes"] is not None for r in doc_rows)

    def test_jobs_parallelism_matches_sequential(self, corpus, tmp_path):
        root, manifest = corpus
        seq_out = tmp_path / "seq.jsonl"
        par_out = tmp_path / "par.jsonl"
        base = ["eval", "--manifest", manifest, "--root", root, "--model",
                "adaptive0", "--context", "1024"]
        assert run_cli(*base, "--out", seq_out).returncode == 0
        assert run_cli(*base, "--out", par_out, "--jobs", "2").returncode == 0
        assert seq_out.read_text() == par_out.read_text()

    def test_config_file_precedence(self, corpus, tmp_path):
        root, manifest = corpus
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"context": 512, "mode": "chunked"}))
        out_file_only = tmp_path / "file.jsonl"
        out_flag_wins = tmp_path / "flag.jsonl"
        base = ["eval", "--manifest", manifest, "--root", root, "--model",
                "uniform", "--months", "2022-11", "--config", config, "--out"]
        assert run_cli(*base, out_file_only).returncode == 0
        assert run_cli(*base, out_flag_wins, "--context", "256").returncode == 0
        ctx = lambda p: {json.loads(line)["context_size"]
                         for line in p.read_text().splitlines()}
        assert ctx(out_file_only) == {512}
        assert ctx(out_flag_wins) == {256}

    def test_byte_incapable_session_skips_byte_docs(self, corpus, tmp_path):
        import sys
        from pathlib import Path as P

        root, manifest = corpus
        fakes = P(__file__).parent / "fake_sidecars.py"
        out = tmp_path / "skips.jsonl"
        result = run_cli("eval", "--manifest", manifest, "--root", root,
                         "--model", f"run:{sys.executable} {fakes} nullmap",
                         "--months", "2022-11", "--out", out)
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        skipped = [r for r in rows if r["status"] == "skipped"]
        assert skipped and all(r["doc_id"].endswith(".bin") for r in skipped)
        assert any(r["status"] == "ok" for r in rows if r["scope"] == "document")
