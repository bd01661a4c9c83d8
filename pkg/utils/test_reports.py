"""
Tests for report tables and their markdown and CSV files.
"""

import math

import pytest

from econometrics.errors import ReportIoError
from models.config import ReportFormat
from utils import reports
from utils.reports import Table, emit_report, format_estimate, format_value, render_csv, render_markdown


def _table(**kwargs):
    base = dict(
        name="granger",
        title="Linear Granger causality",
        columns=["Null hypothesis", "Lag", "p-value"],
        rows=[["a does not cause b", 2, 0.1], ["b does not cause a", 2, 0.1000001]],
        p_value_columns=[2],
    )
    base.update(kwargs)
    return Table(**base)


@pytest.mark.parametrize(
    "value, text",
    [
        (None, ""),
        (True, "yes"),
        (12, "12"),
        (0.123456789, "0.123457"),
        (123456789.0, "1.23457e+08"),
        (-0.0, "0"),
        (math.nan, "NA"),
        ("SV-MA", "SV-MA"),
    ],
)
def test_format_value(value, text):
    assert format_value(value) == text


def test_format_estimate():
    assert format_estimate(-1234.56789, 0.0123456) == "-1234.57 (0.0123456)"


def test_boundary_p_value_is_bold():
    text = render_markdown(_table())
    assert "| a does not cause b | 2 | **0.1** |" in text
    assert "| b does not cause a | 2 | 0.1 |" in text
    assert reports.BOLD_NOTE in text


def test_only_p_value_columns_are_bold():
    table = _table(rows=[["x", 0.01, 0.5]], columns=["Null hypothesis", "Statistic", "p-value"])
    text = render_markdown(table)
    assert "**" not in text.replace(reports.BOLD_NOTE, "")


def test_markdown_layout():
    lines = render_markdown(_table(note="VAR lag chosen by AIC.")).split("\n")
    assert lines[0] == "# Linear Granger causality"
    assert lines[2] == "| Null hypothesis | Lag | p-value |"
    assert lines[3] == "|---|---|---|"
    assert "VAR lag chosen by AIC." in lines


def test_csv_has_plain_numbers_and_lf():
    text = render_csv(_table(rows=[["a, b", 1, 0.05]]))
    assert text == 'Null hypothesis,Lag,p-value\n"a, b",1,0.05\n'


def test_row_width_is_checked():
    with pytest.raises(ValueError):
        _table(rows=[["only one"]])
    with pytest.raises(ValueError):
        _table(p_value_columns=[5])


def test_emit_report_writes_one_file_per_table_and_format(tmp_path):
    other = _table(name="other")
    paths = emit_report([_table(), other], tmp_path)
    assert sorted(p.name for p in paths) == ["granger.csv", "granger.md", "other.csv", "other.md"]
    raw = (tmp_path / "granger.md").read_bytes()
    assert b"\r\n" not in raw
    raw.decode("utf-8")

    only_csv = emit_report([_table()], tmp_path / "csv", [ReportFormat.CSV])
    assert [p.name for p in only_csv] == ["granger.csv"]


def test_empty_battery_writes_nothing_and_warns(tmp_path, monkeypatch):
    warnings = []
    monkeypatch.setattr(reports.logfire, "warn", lambda message, **kw: warnings.append(message))
    assert emit_report([], tmp_path / "out") == []
    assert not (tmp_path / "out").exists()
    assert emit_report([_table(rows=[])], tmp_path / "out") == []
    assert len(warnings) == 2


def test_unwritable_directory_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory", encoding="utf-8")
    with pytest.raises(ReportIoError):
        emit_report([_table()], blocker)


def test_emitted_files_are_reproducible(tmp_path):
    emit_report([_table()], tmp_path / "a")
    emit_report([_table()], tmp_path / "b")
    for name in ("granger.md", "granger.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
