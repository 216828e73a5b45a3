"""Sample paths of the SDE started at x0, next to Brownian paths with the same noise."""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from ...io import write_table_csv
from ...model import DriftModel, SdeSystem
from ...simulate import SimConfig, simulate_path
from ..base import FigureBase
from ..render import Series, write_chart


def _sample(
    system: SdeSystem, sim: SimConfig, n_paths: int, stride: int, label: str
) -> tuple[list[tuple[int, float, float]], list[Series]]:
    rows: list[tuple[int, float, float]] = []
    series = []
    for i in range(n_paths):
        path, _exited = simulate_path(system, sim, path_index=i)
        times = path.times[::stride]
        values = path.values[::stride]
        rows.extend((i, float(t), float(x)) for t, x in zip(times, values))
        series.append(Series(f"{label} {i}", times, values))
    return rows, series


class SamplePathsFigure(FigureBase):
    def __init__(self) -> None:
        super().__init__(
            name="sample_paths",
            priority=10,
            params={"n_paths": 3, "horizon": 10.0, "stride": 10},
        )

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        config = context["config"]
        system = config.to_system()
        sim = config.to_sim_config(context.get("seed")).with_horizon(self.params["horizon"])
        p = self.params
        out = self.out_dir(context)

        rows, series = _sample(system, sim, p["n_paths"], p["stride"], "path")
        # same seeds and noise intensity, zero drift
        brownian = replace(system, drift=DriftModel((0.0,)))
        flat_rows, flat_series = _sample(brownian, sim, p["n_paths"], p["stride"], "brownian")

        header = ("path_index", "t", "x")
        n = write_table_csv(out / "fig1_paths.csv", header, rows)
        n_flat = write_table_csv(out / "fig1_brownian_paths.csv", header, flat_rows)
        write_chart(out / "fig1_paths.svg", "Sample paths", series + flat_series, "t", "x")
        return [
            ("fig1_paths.csv", n),
            ("fig1_brownian_paths.csv", n_flat),
            ("fig1_paths.svg", 0),
        ]
