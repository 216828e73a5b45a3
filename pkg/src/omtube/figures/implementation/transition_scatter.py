"""Transition times against tube sizes, with per-bin means and the MPTT per tube size."""

from __future__ import annotations

from typing import Any

from ...harness import run_experiment
from ...io import write_table_csv
from ..base import FigureBase
from ..render import Series, write_chart


class TransitionScatterFigure(FigureBase):
    def __init__(self) -> None:
        super().__init__(name="transition_scatter", priority=40)

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        config = context["config"].to_experiment_config(context.get("seed"))
        result = run_experiment(config, workers=context.get("workers", 1))
        context["experiment"] = result
        out = self.out_dir(context)

        sized = [r for r in result.records if r.tube_size is not None]
        n_scatter = write_table_csv(
            out / "fig5_scatter.csv",
            ("path_index", "T", "tube_size"),
            ((r.path_index, r.T, r.tube_size) for r in sized),
        )
        n_bins = write_table_csv(
            out / "fig5_bins.csv",
            ("bin_lo", "bin_hi", "mean_tube_size", "count"),
            result.bins,
        )

        points = Series(
            "transition paths",
            [r.T for r in sized],
            [float(r.tube_size or 0.0) for r in sized],
            kind="points",
        )
        centers = [0.5 * (b.bin_lo + b.bin_hi) for b in result.bins]
        means = Series("bin mean", centers, [b.mean_tube_size for b in result.bins], kind="squares")
        scatter = [points, means]
        optima = context.get("mptt", [])
        if optima:
            scatter.append(
                Series("MPTT", [o[1] for o in optima], [o[0] for o in optima], kind="squares")
            )
        write_chart(
            out / "fig5_scatter.svg", "Transition time vs tube size", scatter, "T", "delta"
        )
        write_chart(
            out / "fig5_bins.svg", "Mean tube size per bin", [means], "T", "mean delta"
        )
        return [
            ("fig5_scatter.csv", n_scatter),
            ("fig5_bins.csv", n_bins),
            ("fig5_scatter.svg", 0),
            ("fig5_bins.svg", 0),
        ]
