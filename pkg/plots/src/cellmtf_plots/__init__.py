"""Figure generation for cellmtf CSV outputs."""

from .figures import FigureResult, plot_convergence, plot_raster, plot_timeseries
from .io import (
    PoleTable,
    SchemaError,
    Snapshot,
    StudyTable,
    read_northpole,
    read_snapshot,
    read_study_table,
)
from .manifest import render_manifest

__all__ = [
    "FigureResult",
    "PoleTable",
    "SchemaError",
    "Snapshot",
    "StudyTable",
    "plot_convergence",
    "plot_raster",
    "plot_timeseries",
    "read_northpole",
    "read_snapshot",
    "read_study_table",
    "render_manifest",
]
