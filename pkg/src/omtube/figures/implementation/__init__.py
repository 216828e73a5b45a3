"""Builtin figure stages, discovered by ``omtube.figures.loader``."""
