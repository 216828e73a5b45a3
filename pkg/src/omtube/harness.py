"""Double-well experiment: transition times against tube sizes.

Every sample path that reaches xf before the horizon is compared with the
most probable transition path for its own transition time T; the largest
distance between the two is the path's tube size.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import NamedTuple, Optional

import numpy as np

from .config import RunConfig
from .errors import GridMismatch, InputError, NumericalFailure
from .model import SdeSystem
from .simulate import (
    EnsembleSummary,
    Path,
    SimConfig,
    TransitionRecord,
    simulate_ensemble,
    simulate_paths,
)
from .variational import solve_mptp

logger = logging.getLogger(__name__)

MEMO_STEP = 0.01
REPLAY_CHUNK = 512


@dataclass(frozen=True)
class ExperimentConfig:
    system: SdeSystem
    sim: SimConfig
    n_paths: int
    horizon: float
    bin_edges: tuple[float, ...]
    audit_size: int = 100

    def __post_init__(self) -> None:
        edges = self.bin_edges
        if self.n_paths < 0:
            raise InputError("n_paths must be non-negative")
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise InputError("bin edges must be strictly increasing")
        if edges[0] > 0.0 or edges[-1] < self.horizon:
            raise InputError(f"bin edges must cover (0, {self.horizon:g}]")

    @property
    def sim_to_horizon(self) -> SimConfig:
        return self.sim.with_horizon(self.horizon)


class BinStat(NamedTuple):
    bin_lo: float
    bin_hi: float
    mean_tube_size: float
    count: int


@dataclass
class ExperimentResult:
    records: list[TransitionRecord]
    bins: list[BinStat]
    summary: EnsembleSummary
    n_failed: int = 0
    failed_indices: list[int] = field(default_factory=list)


def path_tube_size(sample: Path, mptp: Path) -> float:
    """Largest distance between ``sample`` and ``mptp`` on the sample grid."""
    slack = sample.dt * (1.0 + 1e-9)
    if abs(sample.t0 - mptp.t0) > slack or abs(sample.t_end - mptp.t_end) > slack:
        raise GridMismatch(
            f"windows [{sample.t0:g}, {sample.t_end:g}] and "
            f"[{mptp.t0:g}, {mptp.t_end:g}] differ by more than one step"
        )
    reference = np.interp(sample.times, mptp.times, mptp.values)
    return float(np.max(np.abs(sample.values - reference)))


class MptpMemo:
    """MPTP solves cached on a T-grid and blended in scaled time ``s = t/T``."""

    def __init__(self, system: SdeSystem, step: float = MEMO_STEP) -> None:
        self.system = system
        self.step = step
        self._nodes: dict[int, Optional[Path]] = {}

    def _node(self, k: int) -> Optional[Path]:
        if k not in self._nodes:
            try:
                self._nodes[k] = solve_mptp(self.system, k * self.step).path
            except NumericalFailure as e:
                logger.warning("memo node T=%g unavailable: %s", k * self.step, e)
                self._nodes[k] = None
        return self._nodes[k]

    def reference(self, T: float, dt: float, n_steps: int) -> Path:
        """The MPTP at T evaluated on the grid ``i*dt``, i = 0..n_steps."""
        s = np.arange(n_steps + 1) * dt / T
        k = int(math.floor(T / self.step))
        w = T / self.step - k
        lower = self._node(k) if k >= 1 else None
        upper = self._node(k + 1)
        if lower is None or upper is None:
            exact = solve_mptp(self.system, T).path
            return Path(0.0, dt, np.interp(s * T, exact.times, exact.values))
        a = np.interp(s * lower.t_end, lower.times, lower.values)
        b = np.interp(s * upper.t_end, upper.times, upper.values)
        return Path(0.0, dt, (1.0 - w) * a + w * b)


def exact_reference(system: SdeSystem, T: float, dt: float, n_steps: int) -> Path:
    exact = solve_mptp(system, T).path
    grid = np.arange(n_steps + 1) * dt
    return Path(0.0, dt, np.interp(grid, exact.times, exact.values))


def bin_records(
    records: Sequence[TransitionRecord], edges: Sequence[float]
) -> list[BinStat]:
    """Mean tube size per [e_j, e_j+1); the last bin is closed. Empty bins read NaN.

    Sums are exactly rounded, so the means do not depend on record order.
    """
    ts = np.array([r.T for r in records if r.tube_size is not None], dtype=float)
    sizes = np.array(
        [r.tube_size for r in records if r.tube_size is not None], dtype=float
    )
    stats = []
    last = len(edges) - 2
    for j, (lo, hi) in enumerate(zip(edges, edges[1:])):
        inside = (ts >= lo) & ((ts <= hi) if j == last else (ts < hi))
        count = int(np.count_nonzero(inside))
        mean = math.fsum(sizes[inside]) / count if count else math.nan
        stats.append(BinStat(float(lo), float(hi), mean, count))
    return stats


def _replay(
    config: ExperimentConfig, records: Sequence[TransitionRecord], workers: int
) -> list[Path]:
    dt = config.sim.dt
    out: list[Path] = []
    for s in range(0, len(records), REPLAY_CHUNK):
        chunk = records[s : s + REPLAY_CHUNK]
        out.extend(
            simulate_paths(
                config.system,
                config.sim_to_horizon,
                [r.path_index for r in chunk],
                [int(round(r.T / dt)) for r in chunk],
                workers=workers,
            )
        )
    return out


def run_experiment(
    config: ExperimentConfig, workers: int = 1, memo_step: float = MEMO_STEP
) -> ExperimentResult:
    """Simulate, pair every transition with its MPTP, and bin tube sizes by T."""
    summary = simulate_ensemble(
        config.system, config.sim_to_horizon, config.n_paths, workers
    )
    memo = MptpMemo(config.system, memo_step)
    records: list[TransitionRecord] = []
    failed: list[int] = []
    paths = _replay(config, summary.transitions, workers)
    for rec, sample in zip(summary.transitions, paths):
        try:
            ref = memo.reference(rec.T, sample.dt, sample.n_steps)
            size = path_tube_size(sample, ref)
        except NumericalFailure as e:
            logger.warning("path %d (T=%g): %s", rec.path_index, rec.T, e)
            failed.append(rec.path_index)
            records.append(rec)
            continue
        records.append(TransitionRecord(rec.path_index, rec.T, size))
    if failed:
        logger.warning("%d transition path(s) without an MPTP", len(failed))
    bins = bin_records(records, config.bin_edges)
    return ExperimentResult(records, bins, summary, len(failed), failed)


class AuditReport(NamedTuple):
    n_checked: int
    max_difference: float
    mean_difference: float


def audit_memoization(
    config: ExperimentConfig,
    records: Sequence[TransitionRecord],
    sample_size: Optional[int] = None,
    workers: int = 1,
) -> AuditReport:
    """Compare memoized tube sizes with ones from an exact solve at each T."""
    usable = [r for r in records if r.tube_size is not None]
    size = config.audit_size if sample_size is None else sample_size
    if not usable or size <= 0:
        return AuditReport(0, 0.0, 0.0)
    picks = np.unique(np.linspace(0, len(usable) - 1, min(size, len(usable))).astype(int))
    chosen = [usable[i] for i in picks]
    diffs = []
    for rec, sample in zip(chosen, _replay(config, chosen, workers)):
        try:
            exact = exact_reference(config.system, rec.T, sample.dt, sample.n_steps)
        except NumericalFailure as e:
            logger.warning("audit skipped path %d: %s", rec.path_index, e)
            continue
        diffs.append(abs(path_tube_size(sample, exact) - float(rec.tube_size or 0.0)))
    if not diffs:
        return AuditReport(0, 0.0, 0.0)
    return AuditReport(len(diffs), float(max(diffs)), float(np.mean(diffs)))


def reproduce_figures(
    out_dir: FsPath,
    config: Optional[RunConfig] = None,
    workers: int = 1,
) -> list[tuple[str, int]]:
    """Write the figure CSVs and SVGs into ``out_dir``; returns ``(file, rows)``."""
    from .figures import FigureOrchestrator

    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    context = {
        "out_dir": out,
        "config": config or RunConfig(),
        "workers": workers,
        "manifest": [],
    }
    outcome = FigureOrchestrator().run_all(context)
    failed = [
        f"{name}: {res.get('error')}"
        for name, res in outcome["results"].items()
        if res["status"] != "ok"
    ]
    if failed:
        raise NumericalFailure("figure stage(s) failed: " + "; ".join(failed))
    return list(context["manifest"])
