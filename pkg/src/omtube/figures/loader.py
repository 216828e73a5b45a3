from __future__ import annotations

import importlib
import inspect
import logging
import pkgutil
from dataclasses import dataclass
from importlib.metadata import entry_points
from typing import Any, Optional

from .base import FigureBase

logger = logging.getLogger(__name__)

BUILTIN_PACKAGE = "omtube.figures.implementation"
ENTRY_POINT_GROUP = "omtube.figures"


@dataclass
class DiscoveredFigure:
    name: str
    figure: FigureBase
    source: str


def _instantiate(obj: Any) -> Optional[FigureBase]:
    """Build a stage from a FigureBase subclass or a zero-argument factory."""
    try:
        inst = obj()
    except TypeError:
        # needs constructor arguments
        return None
    return inst if isinstance(inst, FigureBase) else None


def _discover_builtin(package_name: str) -> list[DiscoveredFigure]:
    try:
        pkg = importlib.import_module(package_name)
    except ImportError:
        logger.warning("figure package %s not importable", package_name)
        return []
    discovered: list[DiscoveredFigure] = []
    for _finder, name, _ispkg in pkgutil.iter_modules(pkg.__path__, pkg.__name__ + "."):
        mod = importlib.import_module(name)
        for _, obj in inspect.getmembers(mod, inspect.isclass):
            if not issubclass(obj, FigureBase) or obj is FigureBase:
                continue
            if obj.__module__ != mod.__name__:
                continue
            inst = _instantiate(obj)
            if inst is not None:
                discovered.append(DiscoveredFigure(inst.name, inst, "builtin"))
    return discovered


def _select_group(group: str) -> list[Any]:
    eps = entry_points()
    if hasattr(eps, "select"):
        return list(eps.select(group=group))
    return list(eps.get(group, []))  # Python 3.9


def _discover_entrypoints(group: str = ENTRY_POINT_GROUP) -> list[DiscoveredFigure]:
    discovered: list[DiscoveredFigure] = []
    for ep in _select_group(group):
        try:
            obj = ep.load()
        except Exception:
            logger.exception("cannot load figure entry point %s", ep.name)
            continue
        inst = _instantiate(obj)
        if inst is None:
            logger.warning("entry point %s is not a figure stage", ep.name)
            continue
        discovered.append(DiscoveredFigure(inst.name, inst, f"entrypoint:{ep.name}"))
    return discovered


def discover_figures(builtin_package: str = BUILTIN_PACKAGE) -> list[DiscoveredFigure]:
    """Builtin and entry-point stages, sorted by priority.

    An entry point overrides a builtin stage of the same name.
    """
    by_name: dict[str, DiscoveredFigure] = {}
    for d in _discover_builtin(builtin_package) + _discover_entrypoints():
        by_name[d.name] = d
    found = list(by_name.values())
    found.sort(key=lambda d: (d.figure.priority, d.name))
    return found
