"""Configuration, output formats and experiment runners."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from truncdefect import harness as h
from truncdefect.errors import ConfigInvalid


def test_defaults_fill_every_parameter():
    cfg = h.ExperimentConfig.from_dict({"schema_version": 1, "experiment": "TravelTime"})
    assert set(cfg.parameters) == set(h.SCHEMAS[h.Experiment.TRAVEL_TIME])
    assert cfg.to_dict()["experiment"] == "TravelTime"
    again = h.ExperimentConfig.from_dict(cfg.to_dict())
    assert again.parameters == cfg.parameters


@pytest.mark.parametrize("doc, needle", [
    ({"experiment": "TravelTime", "schema_version": 2}, "schema_version"),
    ({"experiment": "Nope"}, "experiment"),
    ({}, "experiment"),
    ({"experiment": "TravelTime", "bogus": 1}, "bogus"),
    ({"experiment": "TravelTime", "parameters": {"epsilon": [-1.0]}}, "epsilon"),
    ({"experiment": "TravelTime", "parameters": {"leg": "Sideways"}}, "leg"),
    ({"experiment": "TravelTime", "parameters": {"delta": "half"}}, "delta"),
    ({"experiment": "TravelTime", "parameters": {"extra": 1}}, "extra"),
    ({"experiment": "DefectContinuation", "parameters": {"N_tau": 15}}, "N_tau"),
    ({"experiment": "DefectContinuation", "parameters": {"model": {"name": "brusselator"}}}, "model"),
])
def test_invalid_configs_name_the_field(doc, needle):
    with pytest.raises(ConfigInvalid) as info:
        h.ExperimentConfig.from_dict(doc)
    assert any(needle in line for line in info.value.errors)


def test_all_errors_reported_together():
    doc = {"experiment": "TravelTime", "parameters": {"epsilon": [-1.0], "leg": "x"}}
    with pytest.raises(ConfigInvalid) as info:
        h.ExperimentConfig.from_dict(doc)
    assert len(info.value.errors) >= 2


def test_field_specs():
    f = h.build_field({"coeffs": [[3, 0, 0.5]]})
    assert f.g_yyy0 == pytest.approx(3.0)
    assert h.build_field("quartic").is_even_in_y
    assert h.build_model({"name": "lambda_omega"}).d == 2


@given(v=st.floats(allow_nan=False, allow_infinity=False))
def test_csv_floats_roundtrip_exactly(v):
    assert float(h.format_value(v)) == v


def test_csv_layout(tmp_path):
    t = h.Table(["x", "y", "flag"], [[0.1, 1 / 3, True], [2, math.nan, False]])
    text = h.csv_text(t)
    assert text.endswith("\r\n") and text.count("\r\n") == 3
    assert "0.33333333333333331" in text
    rec = h.ResultRecord("TravelTime", "demo", {}, "claim", tables={"main": t, "extra": t})
    paths = h.write_tables([rec], tmp_path)
    assert sorted(p.name for p in paths) == ["demo.csv", "demo__extra.csv"]
    header, rows = h.read_csv(tmp_path / "demo.csv")
    assert header == ["x", "y", "flag"] and rows[0][1] == "0.33333333333333331"
    with pytest.raises(ValueError):
        h.csv_text(h.Table(["a"], [[1, 2]]))


def test_report_exit_codes(capsys):
    ok = h.ResultRecord("X", "a", {}, "c", passed=True)
    bad = h.ResultRecord("X", "b", {}, "c", passed=False)
    skipped = h.ResultRecord("X", "c", {}, "c", status="SKIPPED")
    assert h.report([ok, skipped]) == 0
    assert h.report([ok, bad]) == 1
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" in out and "[SKIPPED]" in out


def test_travel_time_run_writes_tables_and_summary(tmp_path):
    cfg = h.ExperimentConfig.from_dict(
        {"experiment": "TravelTime", "parameters": {"epsilon": [1e-3, 1e-2], "delta": [0.5]}},
        output_dir=tmp_path)
    records = h.run(cfg, jobs=2)
    assert all(r.status != "FAIL" for r in records)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["records"][0]["experiment"] == "TravelTime"
    assert any(p.suffix == ".csv" for p in tmp_path.iterdir())


def test_parallel_and_serial_runs_agree(tmp_path):
    doc = {"experiment": "InvertEpsilon", "parameters": {"L": [100.0, 200.0, 400.0, 800.0]}}
    a = h.run(h.ExperimentConfig.from_dict(doc, output_dir=tmp_path / "a"), jobs=1)
    b = h.run(h.ExperimentConfig.from_dict(doc, output_dir=tmp_path / "b"), jobs=3)
    for name in a[0].tables:
        assert h.csv_text(a[0].tables[name]) == h.csv_text(b[0].tables[name])


def test_dispersion_run_records_hypotheses(tmp_path):
    cfg = h.ExperimentConfig.from_dict({"experiment": "Dispersion"}, output_dir=tmp_path)
    (rec,) = h.run(cfg)
    assert rec.status == "INFO"
    assert rec.measured["double_zero"] and rec.measured["fold_nondegenerate"]
    assert rec.measured["omega_nl_pp0"] == pytest.approx(rec.expected["omega_nl_pp0"], abs=1e-9)
