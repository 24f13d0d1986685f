"""Offline rendering of curve-report files into vector figures."""

from .render import (FigureSpec, ReportTable, auto_ranges, load_report_file,
                     render_curves)

__all__ = ["FigureSpec", "ReportTable", "auto_ranges", "load_report_file",
           "render_curves"]
