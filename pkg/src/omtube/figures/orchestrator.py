from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import OmtubeError
from .base import FigureError
from .loader import BUILTIN_PACKAGE, DiscoveredFigure, discover_figures

logger = logging.getLogger(__name__)


@dataclass
class FigureOrchestrator:
    """Runs the discovered figure stages in priority order.

    A failing stage is recorded with status ``error`` (expected failures:
    ``FigureError`` or a package error) or ``crash`` and the remaining stages
    still run.
    """

    builtin_package: str = BUILTIN_PACKAGE
    only: Optional[list[str]] = None
    skip: list[str] = field(default_factory=list)

    def list_figures(self) -> list[DiscoveredFigure]:
        return discover_figures(self.builtin_package)

    def run_all(self, initial_context: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        ctx: dict[str, Any] = initial_context if initial_context is not None else {}
        manifest = ctx.setdefault("manifest", [])
        results: dict[str, Any] = {}

        for d in self.list_figures():
            figure = d.figure
            if not figure.enabled or d.name in self.skip:
                results[d.name] = {"status": "skipped", "reason": "disabled"}
                continue
            if self.only is not None and d.name not in self.only:
                results[d.name] = {"status": "skipped", "reason": "not selected"}
                continue

            logger.info("figure stage %s (%s)", d.name, d.source)
            try:
                files = figure.run(ctx)
            except (FigureError, OmtubeError) as e:
                logger.error("figure stage %s failed: %s", d.name, e)
                results[d.name] = {"status": "error", "error": str(e)}
                continue
            except Exception as e:
                logger.exception("figure stage %s crashed", d.name)
                results[d.name] = {"status": "crash", "error": str(e)}
                continue
            manifest.extend(files)
            results[d.name] = {"status": "ok", "result": files}

        return {"context": ctx, "results": results}
