"""A few sample transition paths, each with its MPTP and tube walls."""

from __future__ import annotations

from typing import Any

import numpy as np

from ...harness import exact_reference
from ...io import write_table_csv
from ...simulate import simulate_paths
from ..base import FigureBase, FigureError
from ..render import Series, write_chart


class TransitionPathsFigure(FigureBase):
    def __init__(self) -> None:
        super().__init__(
            name="transition_paths", priority=50, params={"n_paths": 3, "stride": 5}
        )

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        result = context.get("experiment")
        if result is None:
            raise FigureError("no experiment in context; transition_scatter must run first")
        config = context["config"].to_experiment_config(context.get("seed"))
        dt = config.sim.dt
        stride = self.params["stride"]
        chosen = sorted(
            (r for r in result.records if r.tube_size is not None),
            key=lambda r: r.path_index,
        )[: self.params["n_paths"]]
        samples = simulate_paths(
            config.system,
            config.sim_to_horizon,
            [r.path_index for r in chosen],
            [int(round(r.T / dt)) for r in chosen],
            workers=context.get("workers", 1),
        )

        rows: list[tuple[int, float, float, float, float, float]] = []
        series = []
        for rec, sample in zip(chosen, samples):
            ref = exact_reference(config.system, rec.T, dt, sample.n_steps).values
            width = float(np.max(np.abs(sample.values - ref)))
            times = sample.times[::stride]
            x, psi = sample.values[::stride], ref[::stride]
            rows.extend(
                (rec.path_index, float(t), float(a), float(b), float(b - width), float(b + width))
                for t, a, b in zip(times, x, psi)
            )
            label = f"path {rec.path_index}"
            series += [
                Series(label, times, x),
                Series(f"{label} MPTP", times, psi),
                Series(f"{label} tube", times, psi - width, kind="points"),
                Series(f"{label} tube", times, psi + width, kind="points"),
            ]

        out = self.out_dir(context)
        n = write_table_csv(
            out / "fig2_transition_paths.csv",
            ("path_index", "t", "x", "mptp", "tube_lo", "tube_hi"),
            rows,
        )
        write_chart(
            out / "fig2_transition_paths.svg", "Transition paths and their MPTPs", series, "t", "x"
        )
        return [("fig2_transition_paths.csv", n), ("fig2_transition_paths.svg", 0)]
