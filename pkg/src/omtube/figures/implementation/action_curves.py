"""Modified OM action of the MPTP against T, one curve per tube size, with its minimizer."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from ...action import tube_penalty
from ...errors import NumericalFailure
from ...io import write_table_csv
from ...mptt import minimize_modified_action
from ...variational import action_vs_time
from ..base import FigureBase
from ..render import Series, write_chart

logger = logging.getLogger(__name__)


class ActionCurvesFigure(FigureBase):
    def __init__(self) -> None:
        super().__init__(
            name="action_curves",
            priority=30,
            params={"deltas": (0.3, 0.5, 0.8), "t_min": 0.3, "t_max": 1.5, "n": 25},
        )

    def run(self, context: dict[str, Any]) -> list[tuple[str, int]]:
        system = context["config"].to_system()
        p = self.params
        deltas = p["deltas"]
        grid = np.linspace(p["t_min"], p["t_max"], p["n"])
        # the MPTP does not depend on delta; only the penalty does
        rows = action_vs_time(system, deltas[0], grid)

        header = ["T", "s_om"] + [f"s_mom_delta_{d:g}" for d in deltas]
        table = [
            [r.T, r.s_om] + [r.s_om + tube_penalty(system.c, d, r.T) for d in deltas]
            for r in rows
        ]
        optima: list[tuple[float, float, float]] = []
        for k, d in enumerate(deltas):
            column = [row[2 + k] for row in table]
            j = int(np.argmin(column))
            if j == 0 or j == len(column) - 1:
                logger.warning("delta=%g: S_mOM has no interior minimum on the grid", d)
                continue
            try:
                result = minimize_modified_action(system, d, (table[j - 1][0], table[j + 1][0]))
            except NumericalFailure as e:
                logger.warning("delta=%g: %s", d, e)
                continue
            optima.append((d, result.t_star, result.s_mom_at_t))
        context["mptt"] = optima

        out = self.out_dir(context)
        n = write_table_csv(out / "fig3_action_curves.csv", header, table)
        n_optima = write_table_csv(
            out / "fig3_mptt.csv", ("delta", "t_star", "s_mom"), optima
        )
        series = [
            Series(f"delta={d:g}", [r[0] for r in table], [r[2 + k] for r in table])
            for k, d in enumerate(deltas)
        ]
        series.append(
            Series("MPTT", [o[1] for o in optima], [o[2] for o in optima], kind="squares")
        )
        write_chart(
            out / "fig3_action_curves.svg", "Modified OM action", series, "T", "S_mOM"
        )
        return [
            ("fig3_action_curves.csv", n),
            ("fig3_mptt.csv", n_optima),
            ("fig3_action_curves.svg", 0),
        ]
