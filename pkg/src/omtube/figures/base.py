from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class FigureError(Exception):
    """Raised when a figure stage fails in a way the orchestrator should record."""


@dataclass
class FigureBase:
    """Contract for a figure stage.

    ``run(context)`` writes its files into ``context["out_dir"]`` and returns
    ``(file name, data rows)`` pairs, which the orchestrator appends to
    ``context["manifest"]``. Stages may leave intermediate results in the
    context for later (higher ``priority`` value) stages.
    """

    name: str
    priority: int = 100
    enabled: bool = True
    params: dict[str, Any] = field(default_factory=dict)

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        raise NotImplementedError("figure stage must implement run(context)")

    @staticmethod
    def out_dir(context: dict[str, Any]) -> Path:
        try:
            return Path(context["out_dir"])
        except KeyError as e:
            raise FigureError("context has no out_dir") from e
