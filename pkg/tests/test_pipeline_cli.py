import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from covaudit.cli import main as cli_main
from covaudit.client import FatalTransportError, FixtureTransport
from covaudit.config import RunConfig, validate_config
from covaudit.pipeline import recompute_reports, run_pipeline

from oracles import read_report_csv

DESK = Path(__file__).parent / "data" / "desk"


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def runner():
    return CliRunner()


class TestValidateCommand:
    def test_desk_config_ok(self, runner):
        result = runner.invoke(
            cli_main, ["validate", "-c", str(DESK / "config.json")]
        )
        assert result.exit_code == 0
        assert "configuration ok" in result.output

    def test_broken_config_exits_2_with_locators(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"corpus": {"path": "absent.tsv"}}),
                        encoding="utf-8")
        result = runner.invoke(cli_main, ["validate", "-c", str(path)])
        assert result.exit_code == 2
        assert "corpus.path" in result.output
        assert "transport.type" in result.output

    def test_missing_config_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            cli_main, ["validate", "-c", str(tmp_path / "nope.json")]
        )
        assert result.exit_code == 2


class TestRunCommand:
    def test_id_filter_restricts_bundle(self, runner, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("r001\nr002\n# comment\n", encoding="utf-8")
        out = tmp_path / "out"
        result = runner.invoke(
            cli_main,
            ["run", "-c", str(DESK / "config.json"), "-o", str(out),
             "--ids", str(ids)],
        )
        assert result.exit_code == 0, result.output
        rows = read_report_csv(out / "reports" / "match_log.csv")
        assert len(rows) == 4  # 2 records x 2 modes
        assert {row["record_id"] for row in rows} == {"r001", "r002"}

    def test_unknown_id_exits_2(self, runner, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("r001\nghost\n", encoding="utf-8")
        result = runner.invoke(
            cli_main,
            ["run", "-c", str(DESK / "config.json"), "-o", str(tmp_path / "o"),
             "--ids", str(ids)],
        )
        assert result.exit_code == 2
        assert "ghost" in result.output

    def test_single_mode_flag(self, runner, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(
            cli_main,
            ["run", "-c", str(DESK / "config.json"), "-o", str(out),
             "--mode", "title_exact"],
        )
        assert result.exit_code == 0, result.output
        log_rows = read_report_csv(out / "reports" / "match_log.csv")
        assert {row["mode"] for row in log_rows} == {"title_exact"}
        score_rows = read_report_csv(out / "reports" / "retrieval_scores.csv")
        assert [row["mode"] for row in score_rows] == ["title_exact"]

    def test_fatal_transport_exits_3_and_keeps_checkpoint(
        self, runner, tmp_path, monkeypatch
    ):
        class DeadTransport:
            def fetch(self, request, *, record_id, mode):
                raise FatalTransportError("quota exhausted")

        monkeypatch.setattr(
            RunConfig, "make_transport", lambda self: DeadTransport()
        )
        out = tmp_path / "out"
        result = runner.invoke(
            cli_main, ["run", "-c", str(DESK / "config.json"), "-o", str(out)]
        )
        assert result.exit_code == 3
        assert "resume" in result.output
        assert (out / "state" / "checkpoint.jsonl").exists() or not (
            out / "reports"
        ).exists()

    def test_rerun_is_byte_identical(self, runner, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(
                cli_main, ["run", "-c", str(DESK / "config.json"), "-o", str(out)]
            )
            assert result.exit_code == 0, result.output
            outs.append(out)
        left = tree_bytes(outs[0] / "reports")
        right = tree_bytes(outs[1] / "reports")
        assert left == right


class TestReportCommand:
    def test_recompute_reproduces_reports(self, runner, tmp_path):
        out = tmp_path / "out"
        assert runner.invoke(
            cli_main, ["run", "-c", str(DESK / "config.json"), "-o", str(out)]
        ).exit_code == 0
        original = tree_bytes(out / "reports")

        redone = tmp_path / "redone"
        result = runner.invoke(
            cli_main,
            ["report", "-c", str(DESK / "config.json"),
             "--archive", str(out / "raw"), "-o", str(redone)],
        )
        assert result.exit_code == 0, result.output
        assert tree_bytes(redone / "reports") == original

    def test_archive_can_be_the_fixture_directory(self, runner, tmp_path):
        # the archive mirrors the fixture layout, so fixtures work directly
        out = tmp_path / "direct"
        result = runner.invoke(
            cli_main,
            ["report", "-c", str(DESK / "config.json"),
             "--archive", str(DESK / "fixtures"), "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert (out / "reports" / "retrieval_scores.csv").exists()

    def test_missing_archive_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            cli_main,
            ["report", "-c", str(DESK / "config.json"),
             "-o", str(tmp_path / "none")],
        )
        assert result.exit_code == 2
        assert "raw archive" in result.output


class TestPipelineLibrary:
    def test_parallel_run_bundle_matches_serial(self, tmp_path):
        from dataclasses import replace

        config = validate_config(DESK / "config.json")
        serial = run_pipeline(config, output_dir=tmp_path / "serial")
        parallel = run_pipeline(
            replace(config, parallelism=4), output_dir=tmp_path / "parallel"
        )
        assert tree_bytes(serial / "reports") == tree_bytes(parallel / "reports")

    def test_run_report_contents(self, tmp_path):
        from covaudit.client import DEFAULT_ATTRIBUTES

        config = validate_config(DESK / "config.json")
        out = run_pipeline(config, output_dir=tmp_path / "out")
        payload = json.loads(
            (out / "reports" / "run_report.json").read_text(encoding="utf-8")
        )
        assert payload["corpus_size"] == 200
        subset = payload["subset"]
        dropped = (
            subset["dropped_missing_year"]
            + subset["dropped_year_range"]
            + subset["dropped_no_institute"]
            + subset["dropped_document_type"]
        )
        assert subset["kept"] + dropped == 200
        assert subset["kept"] == 118
        assert subset["dropped_missing_year"] == 6
        assert payload["field_assignment"]["unmapped_institutes"] == ["i-ghost"]
        assert payload["request"] == {
            "count": 10, "model": "latest", "offset": 0,
            "attributes": list(DEFAULT_ATTRIBUTES),
        }
        assert any(
            e["record_id"] == "r200" and e["mode"] == "title_words"
            and e["error"].startswith("query:")
            for e in payload["errors"]
        )
        assert any(
            "out of rank order" in w["warning"] for w in payload["parse_warnings"]
        )

    def test_recompute_from_fixture_layout_equals_run(self, tmp_path):
        config = validate_config(DESK / "config.json")
        run_out = run_pipeline(config, output_dir=tmp_path / "ran")
        rep_out = recompute_reports(
            config, archive_dir=DESK / "fixtures", output_dir=tmp_path / "rep"
        )
        assert tree_bytes(run_out / "reports") == tree_bytes(rep_out / "reports")

    def test_target_name_collision_rejected(self, tmp_path):
        from dataclasses import replace

        from covaudit.config import ConfigError

        config = replace(
            validate_config(DESK / "config.json"), target_database="scopus"
        )
        with pytest.raises(ConfigError, match="collides"):
            run_pipeline(config, output_dir=tmp_path / "out")

    def test_injected_transport_used(self, tmp_path):
        config = validate_config(DESK / "config.json")
        calls = []

        class CountingTransport:
            def __init__(self):
                self.inner = FixtureTransport(DESK / "fixtures")

            def fetch(self, request, *, record_id, mode):
                calls.append(record_id)
                return self.inner.fetch(request, record_id=record_id, mode=mode)

        run_pipeline(
            config, transport=CountingTransport(), output_dir=tmp_path / "out",
            id_filter=["r001"],
        )
        assert calls == ["r001", "r001"]  # once per mode
