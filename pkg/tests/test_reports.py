import csv
import json

import numpy as np
import pytest

from mallows_asep.reports import (
    ENGINE_VERSION,
    ExperimentReport,
    check_ge,
    check_le,
    read_jsonl,
    write_csv,
    write_jsonl,
)


def _report(seed=7):
    return ExperimentReport(
        experiment="demo",
        params={"K": np.int64(3), "q": 0.5, "seed": seed},
        statistics={"tv": np.float64(0.0123), "pmf": {0: 0.25, 1: 0.75},
                    "grid": np.arange(3)},
        checks=(check_le("tv", 0.0123, 0.05), check_ge("p", 0.2, 1e-3)),
        labels=("finite-t",),
    )


def test_check_constructors():
    assert check_le("a", 1.0, 2.0).passed
    assert not check_le("a", 3.0, 2.0).passed
    assert check_ge("b", 0.5, 0.5).passed
    assert not check_ge("b", 0.4, 0.5).passed


def test_passed_aggregates_checks():
    rep = _report()
    assert rep.passed
    bad = ExperimentReport("demo", {}, {}, checks=(check_le("x", 9.0, 1.0),))
    assert not bad.passed
    # no checks at all counts as passing (pure measurement report)
    assert ExperimentReport("demo", {}, {}).passed


def test_payload_is_plain_json_types():
    payload = _report().payload()
    text = json.dumps(payload)
    back = json.loads(text)
    assert back["engine_version"] == ENGINE_VERSION
    assert back["params"]["K"] == 3
    assert isinstance(back["params"]["K"], int)
    assert back["statistics"]["grid"] == [0, 1, 2]
    assert back["passed"] is True


def test_to_json_deterministic():
    assert _report().to_json() == _report().to_json()
    assert _report(seed=8).to_json() != _report(seed=7).to_json()


def test_jsonl_round_trip_and_header_isolation(tmp_path):
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    reps = [_report(), _report(seed=11)]
    write_jsonl(reps, p1)
    write_jsonl(reps, p2)
    head1, body1 = read_jsonl(p1)
    head2, body2 = read_jsonl(p2)
    assert "written_at" in head1
    # identical runs are byte-identical below the header line
    assert p1.read_text().split("\n", 1)[1] == p2.read_text().split("\n", 1)[1]
    assert body1 == body2
    assert body1[0]["experiment"] == "demo"


def test_read_jsonl_rejects_headerless(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(_report().payload()) + "\n")
    with pytest.raises(ValueError):
        read_jsonl(p)
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(ValueError):
        read_jsonl(tmp_path / "empty.jsonl")


def test_csv_layout(tmp_path):
    p = tmp_path / "out.csv"
    write_csv([_report(), ExperimentReport("bare", {}, {})], p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["experiment", "check", "value", "threshold", "op",
                       "passed", "labels"]
    assert len(rows) == 4  # header + two checks + one bare row
    assert rows[1][0] == "demo" and rows[1][1] == "tv"
    assert rows[1][6] == "finite-t"
    # value column uses repr so floats round-trip
    assert float(rows[1][2]) == 0.0123
    assert rows[3][0] == "bare" and rows[3][1] == ""


def test_summary_lines_mark_failures():
    rep = ExperimentReport("demo", {}, {},
                           checks=(check_le("good", 0.1, 1.0),
                                   check_le("bad", 2.0, 1.0)))
    lines = rep.summary_lines()
    assert lines[0].startswith("[FAIL]")
    assert any("bad" in ln and "FAIL" in ln for ln in lines)
