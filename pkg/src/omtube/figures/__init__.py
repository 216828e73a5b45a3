"""Figure stages for ``omtube figures``.

- FigureBase: contract for a stage (writes CSV and SVG files)
- loader: discovery of builtin stages and ``omtube.figures`` entry points
- orchestrator: runs stages in priority order and records their status
"""

from .base import FigureBase, FigureError
from .loader import discover_figures
from .orchestrator import FigureOrchestrator

__all__ = [
    "FigureBase",
    "FigureError",
    "discover_figures",
    "FigureOrchestrator",
]
