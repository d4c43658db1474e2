import csv
import io
import json

import pytest

from lib.Adversary import AdversaryKind
from lib.Config import CampaignConfig
from lib.Errors import ReportIntegrityError
from lib.Report import CSV_COLUMNS, format_table, load_report, report_to_json, verify_report, write_csv, write_json
from lib.Simulator import run_campaign

@pytest.fixture(scope="module")
def report():
    return run_campaign(CampaignConfig.from_dict({
        "sessions": 60, "adv_ratio": 0.2, "group_id": "toy", "latency_range_ms": "10:20", "rng_seed": 3
    }))

class TestJson:
    def test_round_trip(self, tmp_path, report):
        path = write_json(report, tmp_path / "report.json")
        loaded = load_report(path)
        assert loaded.aggregates == report.aggregates
        assert report_to_json(loaded) == report_to_json(report)
        assert verify_report(loaded) == report.aggregates

    def test_worker_count_not_serialized(self, report):
        assert "parallel" not in json.loads(report_to_json(report))["config"]

    def test_edited_far(self, tmp_path, report):
        data = json.loads(report_to_json(report))
        data["aggregates"]["far"] = 0.5
        path = tmp_path / "edited.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ReportIntegrityError) as info:
            verify_report(load_report(path))
        assert info.value.metric == "far"

    def test_edited_row(self, tmp_path, report):
        data = json.loads(report_to_json(report))
        row = next(s for s in data["sessions"] if s["kind"] == "honest")
        row["auth_latency_ms"] += 1000
        path = tmp_path / "edited.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ReportIntegrityError, match="auth_latency"):
            verify_report(load_report(path))

    def test_edited_kind_count(self, tmp_path, report):
        data = json.loads(report_to_json(report))
        data["aggregates"]["far_by_kind"]["replay"]["attempted"] += 1
        path = tmp_path / "edited.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ReportIntegrityError) as info:
            verify_report(load_report(path))
        assert info.value.metric == "far_by_kind.replay.attempted"

class TestCsv:
    def test_rows(self, report):
        out = io.StringIO()
        write_csv(report, out)
        rows = list(csv.reader(io.StringIO(out.getvalue())))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 61
        assert rows[1][0] == "0"
        assert CSV_COLUMNS[:5] == ["index", "kind", "accepted", "auth_latency_ms", "key_ms"]

class TestTable:
    def test_one_row_per_kind(self, report):
        lines = format_table(report).splitlines()
        for kind in AdversaryKind:
            row = next(line for line in lines if line.startswith(kind.value))
            attempted = report.aggregates["far_by_kind"][kind.value]["attempted"]
            assert row.split()[1] == str(attempted)
        header = lines[0]
        assert all(len(line) == len(header) for line in lines[2:7])
