"""omtube command-line interface.

Data (CSV) goes to stdout or to the requested files; logs and summaries go
to stderr. Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import __version__
from .action import ActionFunctional, evaluate_action
from .config import RunConfig, load_config
from .errors import OmtubeError
from .harness import audit_memoization, reproduce_figures, run_experiment
from .io import read_path_csv, write_path_csv, write_table_csv
from .mptt import TransitionTimeMethod, estimate_transition_time, transition_time_bounds
from .simulate import default_workers, simulate_ensemble, simulate_path
from .tube import brownian_tube_probability, one_term_tube_probability
from .variational import action_vs_time, energy_profile, solve_mptp

logger = logging.getLogger("omtube")
stderr = Console(stderr=True)

F = TypeVar("F", bound=Callable[..., Any])

METHODS = {
    "action": TransitionTimeMethod.ACTION_MINIMIZATION,
    "shell": TransitionTimeMethod.ENERGY_SHELL,
    "closed": TransitionTimeMethod.CLOSED_FORM,
}


def _setup_logging(verbose: bool) -> None:
    handler = RichHandler(console=stderr, show_path=False, rich_tracebacks=verbose)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )


def handle_errors(func: F) -> F:
    """Map package and config validation errors onto exit codes."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            stderr.print(f"[red]invalid configuration:[/red] {escape(str(e))}")
            sys.exit(2)
        except OmtubeError as e:
            stderr.print(f"[red]{type(e).__name__}:[/red] {escape(str(e))}")
            sys.exit(e.exit_code)

    return wrapper  # type: ignore[return-value]


def config_option(func: F) -> F:
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="JSON run config (double-well defaults when omitted).",
    )(func)


def seed_option(func: F) -> F:
    return click.option("--seed", type=int, default=None, help="Override the master seed.")(
        func
    )


def workers_option(func: F) -> F:
    return click.option(
        "--workers",
        type=click.IntRange(min=1),
        default=None,
        help="Worker processes (default: physical cores).",
    )(func)


def _load(config_path: Optional[Path], seed: Optional[int] = None) -> RunConfig:
    config = load_config(config_path)
    if seed is not None:
        config = config.model_copy(
            update={"sim": config.sim.model_copy(update={"seed": seed})}
        )
    return config


def _workers(workers: Optional[int]) -> int:
    return workers if workers is not None else default_workers()


@click.group()
@click.version_option(__version__, prog_name="omtube")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
def cli(verbose: bool) -> None:
    """Most probable transition paths and times for 1-D SDEs."""
    _setup_logging(verbose)


@cli.command()
@config_option
@seed_option
@workers_option
@click.option("--path-index", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--n", "n_paths", type=click.IntRange(min=1), default=None,
              help="Run an ensemble of N paths and list first transitions instead.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@handle_errors
def simulate(
    config_path: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    path_index: int,
    n_paths: Optional[int],
    out: Optional[Path],
) -> None:
    """Simulate one sample path (t,x) or an ensemble's first transitions."""
    config = _load(config_path, seed)
    system, sim = config.to_system(), config.to_sim_config()
    target = out if out is not None else sys.stdout
    if n_paths is None:
        path, exited = simulate_path(system, sim, path_index)
        if exited:
            logger.warning("path %d left the domain at t=%g", path_index, path.t_end)
        write_path_csv(target, path)
        return
    summary = simulate_ensemble(system, sim, n_paths, _workers(workers))
    write_table_csv(target, ("path_index", "T"), ((r.path_index, r.T) for r in summary.transitions))
    stderr.print(
        f"{summary.n_transitions}/{summary.n_paths} transitions "
        f"({summary.transition_fraction:.4f}), {summary.n_censored_exit} exits, "
        f"{summary.n_no_transition} without transition"
    )


@cli.command("tube-prob")
@click.option("--c", "c", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--T", "T", type=float, required=True)
@click.option("--tol", type=float, default=1e-12, show_default=True)
@handle_errors
def tube_prob(c: float, delta: float, T: float, tol: float) -> None:
    """Brownian tube probability: full series and its leading term."""
    series = brownian_tube_probability(c, delta, T, tol)
    write_table_csv(
        sys.stdout, ("T", "series", "one_term"), [(T, series, one_term_tube_probability(c, delta, T))]
    )


@cli.command()
@click.option("--path", "path_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@config_option
@click.option("--kappa", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--functional", type=click.Choice([f.value for f in ActionFunctional]),
              default="om", show_default=True)
@handle_errors
def action(
    path_file: Path,
    config_path: Optional[Path],
    kappa: Optional[float],
    delta: Optional[float],
    functional: str,
) -> None:
    """Evaluate an action functional on a t,x path file."""
    system = _load(config_path).to_system()
    psi = read_path_csv(path_file)
    value = evaluate_action(psi, system, ActionFunctional(functional), kappa, delta)
    write_table_csv(
        sys.stdout,
        ("functional", "total", "kinetic_part", "divergence_part", "tube_penalty"),
        [(functional, *value.as_row())],
    )


@cli.command()
@config_option
@click.option("--T", "T", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@handle_errors
def mptp(config_path: Optional[Path], T: float, out: Optional[Path]) -> None:
    """Most probable transition path at fixed T (shooting)."""
    system = _load(config_path).to_system()
    solution = solve_mptp(system, T)
    write_path_csv(out if out is not None else sys.stdout, solution.path)
    profile = energy_profile(solution, system)
    stderr.print(
        f"v0={solution.v0:.12g} E={solution.energy:.12g} drift={profile.drift:.3g} "
        f"residual={solution.residual:.3g} S_OM={solution.om_action.total:.12g} "
        f"roots={solution.n_roots}"
    )


@cli.command("action-curve")
@config_option
@click.option("--delta", type=float, required=True)
@click.option("--tmin", type=float, default=0.3, show_default=True)
@click.option("--tmax", type=float, default=1.5, show_default=True)
@click.option("--n", "n_points", type=click.IntRange(min=2), default=25, show_default=True)
@handle_errors
def action_curve(
    config_path: Optional[Path], delta: float, tmin: float, tmax: float, n_points: int
) -> None:
    """S_OM, S_mOM and E of the MPTP over a T grid."""
    system = _load(config_path).to_system()
    rows = action_vs_time(system, delta, np.linspace(tmin, tmax, n_points))
    write_table_csv(
        sys.stdout,
        ("T", "s_om", "s_mom", "energy", "ok"),
        ((r.T, r.s_om, r.s_mom, r.energy, r.ok) for r in rows),
    )


@cli.command()
@config_option
@click.option("--delta", type=float, required=True)
@click.option("--method", type=click.Choice(sorted(METHODS)), default="action", show_default=True)
@click.option("--tmin", type=float, default=0.3, show_default=True)
@click.option("--tmax", type=float, default=1.5, show_default=True)
@handle_errors
def mptt(
    config_path: Optional[Path], delta: float, method: str, tmin: float, tmax: float
) -> None:
    """Most probable transition time with its lower and upper bounds."""
    system = _load(config_path).to_system()
    result = estimate_transition_time(
        system, delta, METHODS[method], (tmin, tmax), with_bounds=True
    )
    rho, t_upper = result.bounds or (float("nan"), float("nan"))
    write_table_csv(
        sys.stdout,
        ("delta", "t_star", "s_mom", "rho", "t_upper", "condition_ok"),
        [(delta, result.t_star, result.s_mom_at_t, rho, t_upper, result.condition_ok)],
    )


@cli.command()
@config_option
@click.option("--delta", type=float, required=True)
@handle_errors
def bounds(config_path: Optional[Path], delta: float) -> None:
    """Lower and upper bounds on the most probable transition time."""
    system = _load(config_path).to_system()
    b = transition_time_bounds(system, delta)
    write_table_csv(
        sys.stdout,
        ("delta", "rho", "t_upper", "t_theta", "theta_max", "mean_exit", "degenerate"),
        [(delta, b.rho, b.t_upper, b.t_theta, b.theta_max, b.mean_exit, b.degenerate)],
    )


@cli.command()
@config_option
@seed_option
@workers_option
@click.option("--bins", "bins_out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the binned means here.")
@click.option("--audit/--no-audit", default=False, help="Check memoized tube sizes.")
@handle_errors
def experiment(
    config_path: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    bins_out: Optional[Path],
    audit: bool,
) -> None:
    """Transition times and tube sizes of an ensemble (records CSV on stdout)."""
    config = _load(config_path, seed).to_experiment_config()
    n_workers = _workers(workers)
    result = run_experiment(config, workers=n_workers)
    write_table_csv(
        sys.stdout,
        ("path_index", "T", "tube_size"),
        ((r.path_index, r.T, r.tube_size) for r in result.records),
    )
    if bins_out is not None:
        write_table_csv(bins_out, ("bin_lo", "bin_hi", "mean_tube_size", "count"), result.bins)

    table = Table(title="mean tube size per bin")
    for col in ("bin", "mean", "count"):
        table.add_column(col, justify="right")
    for b in result.bins:
        table.add_row(f"[{b.bin_lo:g}, {b.bin_hi:g})", f"{b.mean_tube_size:.4f}", str(b.count))
    stderr.print(table)
    stderr.print(
        f"{result.summary.n_transitions}/{result.summary.n_paths} transitions, "
        f"{result.n_failed} without an MPTP"
    )
    if audit:
        report = audit_memoization(config, result.records, workers=n_workers)
        stderr.print(
            f"audit: {report.n_checked} paths, max |memo - exact| = {report.max_difference:.3g}"
        )


@cli.command()
@config_option
@seed_option
@workers_option
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@handle_errors
def figures(
    config_path: Optional[Path], seed: Optional[int], workers: Optional[int], out_dir: Path
) -> None:
    """Write the figure CSVs and SVGs; prints the manifest."""
    manifest = reproduce_figures(out_dir, _load(config_path, seed), _workers(workers))
    write_table_csv(sys.stdout, ("file", "rows"), manifest)


def main() -> None:
    cli(prog_name="omtube")


if __name__ == "__main__":
    main()
