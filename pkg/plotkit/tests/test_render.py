"""Rendering contract: parsing, axis extents, determinism, cardinality."""

import json
from pathlib import Path

import numpy as np
import pytest

from plotkit import (FigureSpec, auto_ranges, load_report_file, render_curves)
from plotkit.render import build_figure, main

SAMPLE = Path(__file__).parent / "data" / "sample_report.csv"


def test_load_sample_report():
    tables = load_report_file(SAMPLE)
    assert [t.method for t in tables] == ["se", "dog", "trajnn"]
    for t in tables:
        assert t.budget == 25
        assert t.mean_best.shape == (25,)
        assert np.all(np.diff(t.mean_best) <= 0)
        assert np.all(t.ci_half >= 0)
        assert t.n_runs == 6


def test_malformed_reports_name_file_and_line(tmp_path):
    lines = SAMPLE.read_text().splitlines()
    bad = tmp_path / "noheader.csv"
    bad.write_text("\n".join(lines[1:]))
    with pytest.raises(ValueError, match="noheader.csv:1"):
        load_report_file(bad)
    bad = tmp_path / "badrow.csv"
    bad.write_text("\n".join(lines[:5] + ["se,4,oops,0.1,0.2"] + lines[6:]))
    with pytest.raises(ValueError, match="badrow.csv:6"):
        load_report_file(bad)
    bad = tmp_path / "short.csv"
    bad.write_text("\n".join(lines[:-3]))
    with pytest.raises(ValueError, match="short.csv"):
        load_report_file(bad)
    bad = tmp_path / "extra.csv"
    bad.write_text("\n".join(lines + ["ghost,0,1.0,0.0,0.0"]))
    with pytest.raises(ValueError, match="extra.csv:77"):
        load_report_file(bad)


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(report_paths=(), out_path="x.svg")
    with pytest.raises(ValueError):
        FigureSpec(report_paths=(str(SAMPLE),), out_path="x.svg",
                   labels={"se": "A", "dog": "A"})


def test_auto_ranges_are_exact_band_extents():
    tables = load_report_file(SAMPLE)
    (x0, x1), (y0, y1) = auto_ranges(tables)
    assert (x0, x1) == (0.0, 24.0)
    lo = min(np.min(t.mean_best - t.ci_half) for t in tables)
    hi = max(np.max(t.mean_best + t.ci_half) for t in tables)
    assert (y0, y1) == (lo, hi)
    spec = FigureSpec(report_paths=(str(SAMPLE),), out_path="unused.svg")
    fig = build_figure(spec, tables)
    ax = fig.axes[0]
    assert ax.get_xlim() == (x0, x1)
    assert ax.get_ylim() == (y0, y1)


def test_figure_cardinality():
    tables = load_report_file(SAMPLE)
    spec = FigureSpec(report_paths=(str(SAMPLE),), out_path="unused.svg",
                      labels={"se": "uninformed"})
    fig = build_figure(spec, tables)
    ax = fig.axes[0]
    assert len(ax.lines) == 3          # one curve per method
    assert len(ax.collections) == 3    # one band per method
    texts = [t.get_text() for t in ax.get_legend().get_texts()]
    assert texts == ["uninformed", "dog", "trajnn"]
    # single-method figure: 1 curve, 1 band, 1 legend entry
    fig1 = build_figure(spec, tables[:1])
    assert len(fig1.axes[0].lines) == 1
    assert len(fig1.axes[0].collections) == 1
    assert len(fig1.axes[0].get_legend().get_texts()) == 1
    fig2 = build_figure(FigureSpec(report_paths=(str(SAMPLE),),
                                   out_path="unused.svg", walk_panel=False),
                        tables)
    assert len(fig2.axes) == 1


def test_vector_output_deterministic(tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    render_curves(FigureSpec(report_paths=(str(SAMPLE),), out_path=str(a)))
    render_curves(FigureSpec(report_paths=(str(SAMPLE),), out_path=str(b)))
    data = a.read_bytes()
    assert data == b.read_bytes()
    assert data.lstrip().startswith(b"<?xml")


def test_cli(tmp_path, capsys):
    out = tmp_path / "fig.svg"
    assert main([str(SAMPLE), "--out", str(out),
                 "--label", "se=uninformed"]) == 0
    assert out.stat().st_size > 0
    assert main([str(tmp_path / "missing.csv"), "--out", str(out)]) == 1
    assert "error" in capsys.readouterr().err
    assert main([str(SAMPLE), "--out", str(out), "--label", "bogus"]) == 1
