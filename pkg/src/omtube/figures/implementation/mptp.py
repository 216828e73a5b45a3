"""Most probable transition path over a long window, and MPTPs for several T."""

from __future__ import annotations

from typing import Any

from ...io import write_path_csv, write_table_csv
from ...variational import solve_mptp
from ..base import FigureBase
from ..render import Series, write_chart


class MptpFigure(FigureBase):
    def __init__(self) -> None:
        super().__init__(
            name="mptp", priority=20, params={"T": 10.0, "family": (0.5, 1.0, 2.0, 4.0)}
        )

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        system = context["config"].to_system()
        T = self.params["T"]
        solution = solve_mptp(system, T)
        context["mptp_solution"] = solution
        out = self.out_dir(context)

        n = write_path_csv(out / "fig1_mptp.csv", solution.path)
        write_chart(
            out / "fig1_mptp.svg",
            f"Most probable transition path, T={T:g}",
            [Series("MPTP", solution.path.times, solution.path.values)],
            "t",
            "x",
        )

        rows: list[tuple[float, float, float]] = []
        family = []
        for t_total in self.params["family"]:
            path = solve_mptp(system, t_total).path
            rows.extend((t_total, float(t), float(x)) for t, x in zip(path.times, path.values))
            family.append(Series(f"T={t_total:g}", path.times, path.values))
        n_family = write_table_csv(out / "fig4_mptp_family.csv", ("T", "t", "x"), rows)
        write_chart(out / "fig4_mptp_family.svg", "MPTPs for several T", family, "t", "x")
        return [
            ("fig1_mptp.csv", n),
            ("fig4_mptp_family.csv", n_family),
            ("fig1_mptp.svg", 0),
            ("fig4_mptp_family.svg", 0),
        ]
