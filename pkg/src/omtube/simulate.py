"""Theta-scheme sample paths, first transitions, exits and ensembles.

Every path ``i`` of a run draws its Gaussian increments from its own
generator seeded with ``mix64(master_seed, i)``. Paths are integrated in
lock-step batches with elementwise numpy arithmetic, so a path's values do
not depend on which batch or worker it lands in: ensembles are
bit-identical for any degree of parallelism.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np
import psutil
from scipy.stats import norm

from .errors import (
    EnsembleFailure,
    HorizonTooShort,
    InputError,
    NewtonDivergence,
)
from .model import DriftModel, SdeSystem

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
Z99 = float(norm.ppf(0.995))

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# steps integrated between host-side checks, and paths per lock-step batch
CHUNK_STEPS = 512
BATCH_SIZE = 1024
_REPLAY_BATCH = 128


def mix64(master: int, index: int) -> int:
    """SplitMix64 output for counter ``index`` of stream ``master``."""
    z = (master + (index + 1) * _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def path_generator(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(mix64(master, index))


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


@dataclass(frozen=True, eq=False)
class Path:
    """Uniformly gridded series; sample ``i`` sits at ``t0 + i*dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise InputError("a path needs at least two samples")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise InputError(f"path step must be positive, got dt={self.dt!r}")
        if not math.isfinite(self.t0):
            raise InputError("path start time must be finite")
        if not np.all(np.isfinite(values)):
            raise InputError("path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def truncated(self, n_steps: int) -> Path:
        return Path(self.t0, self.dt, self.values[: n_steps + 1])

    def at(self, t: Any) -> Any:
        return np.interp(t, self.times, self.values)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    seed: int = 1
    scheme_kappa: float = 0.0
    implicit_tol: float = 1e-12

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise InputError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            raise InputError(f"horizon must be >= dt, got {self.horizon!r}")
        if not 0 <= self.seed <= _MASK64:
            raise InputError("seed must be a 64-bit unsigned integer")
        if not 0.0 <= self.scheme_kappa <= 1.0:
            raise InputError("scheme_kappa must lie in [0, 1]")
        if not self.implicit_tol > 0.0:
            raise InputError("implicit_tol must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def with_horizon(self, horizon: float) -> SimConfig:
        return SimConfig(
            self.dt, horizon, self.seed, self.scheme_kappa, self.implicit_tol
        )


@dataclass(frozen=True)
class TransitionRecord:
    """First transition of one sample path; ``tube_size`` is set by the harness."""

    path_index: int
    T: float
    tube_size: Optional[float] = None


@dataclass(frozen=True)
class EnsembleSummary:
    n_paths: int
    transitions: list[TransitionRecord] = field(default_factory=list)
    n_censored_exit: int = 0
    n_no_transition: int = 0

    def __post_init__(self) -> None:
        total = len(self.transitions) + self.n_censored_exit + self.n_no_transition
        if total != self.n_paths:
            raise ValueError(f"path counts {total} do not partition n={self.n_paths}")

    @property
    def n_transitions(self) -> int:
        return len(self.transitions)

    @property
    def transition_fraction(self) -> float:
        return self.n_transitions / self.n_paths if self.n_paths else 0.0


class MonteCarloEstimate(NamedTuple):
    estimate: float
    ci_halfwidth: float


def _theta_update(
    drift: DriftModel,
    x_prev: np.ndarray,
    dw: np.ndarray,
    dt: float,
    kappa: float,
    tol: float,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """One theta-scheme step for an array of states; returns (x, failed mask)."""
    b_prev = drift.b(x_prev)
    if kappa == 0.0:
        return x_prev + b_prev * dt + dw, None
    rhs = x_prev + (1.0 - kappa) * b_prev * dt + dw
    x = x_prev + b_prev * dt + dw
    pending = np.ones(x.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        idx = np.flatnonzero(pending)
        xp = x[idx]
        g = xp - kappa * dt * drift.b(xp) - rhs[idx]
        dx = g / (1.0 - kappa * dt * drift.db(xp))
        x[idx] = xp - dx
        converged = np.abs(dx) <= tol * (1.0 + np.abs(xp))
        pending[idx[converged]] = False
        if not pending.any():
            return x, None
    return x, pending


def step(system: SdeSystem, x_prev: float, dW: float, config: SimConfig) -> float:
    """Advance one step; ``dW`` is the already scaled increment ``c*sqrt(dt)*xi``."""
    if not (math.isfinite(x_prev) and math.isfinite(dW)):
        raise InputError("step inputs must be finite")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x, failed = _theta_update(
            system.drift,
            np.array([x_prev], dtype=float),
            np.array([dW], dtype=float),
            config.dt,
            config.scheme_kappa,
            config.implicit_tol,
        )
    if failed is not None:
        raise NewtonDivergence(
            f"implicit step from x={x_prev:g} did not converge in {NEWTON_MAX_ITER} iterations"
        )
    return float(x[0])


class PathBatch:
    """Lock-step integration of independent paths with an absorbing boundary.

    ``active`` rows are still integrated by ``advance``; callers retire rows
    they no longer need. ``absorbed`` rows have left the domain and repeat
    their exiting sample.
    """

    def __init__(
        self,
        system: SdeSystem,
        config: SimConfig,
        indices: Iterable[int],
        halfwidth: Optional[float] = None,
    ) -> None:
        self.system = system
        self.config = config
        self.indices = np.fromiter(indices, dtype=np.int64)
        hw = system.l if halfwidth is None else halfwidth
        self.lo, self.hi = system.x0 - hw, system.x0 + hw
        size = self.indices.size
        self.x = np.full(size, float(system.x0))
        self.absorbed = np.zeros(size, dtype=bool)
        self.active = np.ones(size, dtype=bool)
        self._rngs = [path_generator(config.seed, int(i)) for i in self.indices]
        self._scale = system.c * math.sqrt(config.dt)

    def advance(self, n_steps: int) -> np.ndarray:
        """Integrate active rows ``n_steps`` further; inactive rows read NaN."""
        block = np.full((self.x.size, n_steps), np.nan)
        rows = np.flatnonzero(self.active)
        if rows.size == 0:
            return block
        dw = np.stack([self._rngs[r].standard_normal(n_steps) for r in rows])
        dw *= self._scale
        drift = self.system.drift
        dt, kappa, tol = self.config.dt, self.config.scheme_kappa, self.config.implicit_tol
        lo, hi = self.lo, self.hi
        x = self.x[rows]
        moving = ~self.absorbed[rows]
        out = np.empty((rows.size, n_steps))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for j in range(n_steps):
                if moving.all():
                    x, failed = _theta_update(drift, x, dw[:, j], dt, kappa, tol)
                    if failed is not None:
                        self._fail(rows[failed])
                    exited = (x <= lo) | (x >= hi)
                    if exited.any():
                        moving = ~exited
                elif moving.any():
                    idx = np.flatnonzero(moving)
                    x_new, failed = _theta_update(drift, x[idx], dw[idx, j], dt, kappa, tol)
                    if failed is not None:
                        self._fail(rows[idx[failed]])
                    x[idx] = x_new
                    moving[idx[(x_new <= lo) | (x_new >= hi)]] = False
                out[:, j] = x
        self.x[rows] = x
        self.absorbed[rows] = ~moving
        block[rows] = out
        return block

    def _fail(self, rows: np.ndarray) -> None:
        paths = self.indices[rows].tolist()
        raise NewtonDivergence(
            f"implicit step diverged for paths {paths}", path_indices=paths
        )


def _first_exit(values: np.ndarray, lo: float, hi: float) -> Optional[int]:
    outside = (values <= lo) | (values >= hi)
    return int(outside.argmax()) if outside.any() else None


def simulate_path(
    system: SdeSystem, config: SimConfig, path_index: int = 0
) -> tuple[Path, bool]:
    """Integrate path ``path_index`` from x0 to the horizon or first exit from D."""
    batch = PathBatch(system, config, [path_index])
    total = config.n_steps
    pieces = [np.array([system.x0], dtype=float)]
    done = 0
    while done < total and not batch.absorbed[0]:
        m = min(CHUNK_STEPS, total - done)
        pieces.append(batch.advance(m)[0])
        done += m
    values = np.concatenate(pieces)
    exit_at = _first_exit(values, batch.lo, batch.hi)
    if exit_at is not None:
        values = values[: exit_at + 1]
    return Path(0.0, config.dt, values), exit_at is not None


def _replay_batch(
    system: SdeSystem, config: SimConfig, indices: Sequence[int], steps: Sequence[int]
) -> list[np.ndarray]:
    batch = PathBatch(system, config, indices)
    want = np.asarray(steps, dtype=np.int64)
    pieces: list[list[np.ndarray]] = [[np.array([system.x0])] for _ in indices]
    done = 0
    while batch.active.any():
        m = min(CHUNK_STEPS, int(want[batch.active].max()) - done)
        block = batch.advance(m)
        for r in np.flatnonzero(batch.active):
            pieces[r].append(block[r])
        done += m
        batch.active &= (want > done) & ~batch.absorbed
    out = []
    for r, parts in enumerate(pieces):
        values = np.concatenate(parts)[: want[r] + 1]
        exit_at = _first_exit(values, batch.lo, batch.hi)
        out.append(values if exit_at is None else values[: exit_at + 1])
    return out


def simulate_paths(
    system: SdeSystem,
    config: SimConfig,
    indices: Sequence[int],
    n_steps: Sequence[int],
    workers: int = 1,
) -> list[Path]:
    """Replay selected ensemble paths, path ``indices[k]`` for ``n_steps[k]`` steps.

    Bit-identical to ``simulate_path`` on the same index (prefix property of
    the per-path streams).
    """
    if len(indices) != len(n_steps):
        raise InputError("indices and n_steps must have the same length")
    jobs = [
        (system, config, list(indices[s : s + _REPLAY_BATCH]), list(n_steps[s : s + _REPLAY_BATCH]))
        for s in range(0, len(indices), _REPLAY_BATCH)
    ]
    values: list[np.ndarray] = []
    for chunk in run_batches(_replay_batch, jobs, workers):
        values.extend(chunk)
    return [Path(0.0, config.dt, v) for v in values]


def first_transition_time(path: Path, system: SdeSystem) -> Optional[float]:
    """First grid time at which the path reaches or crosses ``xf``."""
    if path.values[0] == system.xf:
        raise InputError("path must start away from xf")
    side = math.copysign(1.0, system.x0 - system.xf)
    crossed = (path.values - system.xf) * side <= 0.0
    if not crossed.any():
        return None
    return path.t0 + int(crossed.argmax()) * path.dt


def run_batches(
    fn: Callable[..., Any], jobs: Sequence[tuple[Any, ...]], workers: int
) -> list[Any]:
    """Run ``fn(*job)`` for every job, in order; aggregate per-path failures."""
    results: list[Any] = [None] * len(jobs)
    failed: list[int] = []
    if workers <= 1 or len(jobs) <= 1:
        for k, job in enumerate(jobs):
            try:
                results[k] = fn(*job)
            except NewtonDivergence as e:
                failed.extend(e.path_indices)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *job) for job in jobs]
            for k, fut in enumerate(futures):
                try:
                    results[k] = fut.result()
                except NewtonDivergence as e:
                    failed.extend(e.path_indices)
    if failed:
        raise EnsembleFailure(
            f"{len(failed)} path(s) failed during integration", path_indices=failed
        )
    return results


class _EnsembleOutcome(NamedTuple):
    indices: np.ndarray
    transition_step: np.ndarray
    exited: np.ndarray


def _ensemble_batch(
    system: SdeSystem, config: SimConfig, start: int, stop: int
) -> _EnsembleOutcome:
    batch = PathBatch(system, config, range(start, stop))
    size = stop - start
    total = config.n_steps
    side = math.copysign(1.0, system.x0 - system.xf)
    transition_step = np.full(size, -1, dtype=np.int64)
    exited = np.zeros(size, dtype=bool)
    done = 0
    while done < total and batch.active.any():
        m = min(CHUNK_STEPS, total - done)
        rows = np.flatnonzero(batch.active)
        block = batch.advance(m)[rows]
        crossed = (block - system.xf) * side <= 0.0
        outside = (block <= batch.lo) | (block >= batch.hi)
        first_cross = crossed.argmax(axis=1)
        first_out = outside.argmax(axis=1)
        has_out = outside.any(axis=1)
        hit = crossed.any(axis=1) & (~has_out | (first_cross <= first_out))
        censored = has_out & ~hit
        transition_step[rows[hit]] = done + first_cross[hit] + 1
        exited[rows[censored]] = True
        batch.active[rows[hit | censored]] = False
        done += m
    return _EnsembleOutcome(batch.indices, transition_step, exited)


def simulate_ensemble(
    system: SdeSystem, config: SimConfig, n: int, workers: int = 1
) -> EnsembleSummary:
    """Run paths 0..n-1 and classify each by its first event."""
    if n < 0:
        raise InputError(f"ensemble size must be non-negative, got {n}")
    jobs = [(system, config, s, min(s + BATCH_SIZE, n)) for s in range(0, n, BATCH_SIZE)]
    outcomes = run_batches(_ensemble_batch, jobs, workers)
    records: list[TransitionRecord] = []
    n_exit = n_none = 0
    for out in outcomes:
        for i, k, gone in zip(out.indices, out.transition_step, out.exited):
            if k >= 0:
                records.append(TransitionRecord(int(i), 0.0 + int(k) * config.dt))
            elif gone:
                n_exit += 1
            else:
                n_none += 1
    records.sort(key=lambda r: r.path_index)
    logger.info(
        "ensemble of %d paths: %d transitions, %d exits, %d without transition",
        n,
        len(records),
        n_exit,
        n_none,
    )
    return EnsembleSummary(n, records, n_exit, n_none)


def _exit_batch(
    system: SdeSystem, config: SimConfig, halfwidth: float, start: int, stop: int
) -> np.ndarray:
    batch = PathBatch(system, config, range(start, stop), halfwidth=halfwidth)
    exit_step = np.full(stop - start, -1, dtype=np.int64)
    total = config.n_steps
    done = 0
    while done < total and batch.active.any():
        m = min(CHUNK_STEPS, total - done)
        rows = np.flatnonzero(batch.active)
        block = batch.advance(m)[rows]
        outside = (block <= batch.lo) | (block >= batch.hi)
        hit = outside.any(axis=1)
        exit_step[rows[hit]] = done + outside[hit].argmax(axis=1) + 1
        batch.active[rows[hit]] = False
        done += m
    return exit_step


def exit_time_mc(
    system: SdeSystem,
    enlarged_halfwidth: float,
    config: SimConfig,
    n: int,
    workers: int = 1,
) -> MonteCarloEstimate:
    """Mean first exit time from (x0 - h, x0 + h) with a 99% CI half-width."""
    if not enlarged_halfwidth > 0.0:
        raise InputError("exit half-width must be positive")
    if n < 2:
        raise InputError("need at least two paths for a confidence interval")
    jobs = [
        (system, config, enlarged_halfwidth, s, min(s + BATCH_SIZE, n))
        for s in range(0, n, BATCH_SIZE)
    ]
    steps = np.concatenate(run_batches(_exit_batch, jobs, workers))
    stuck = int(np.count_nonzero(steps < 0))
    if stuck > 0.01 * n:
        raise HorizonTooShort(
            f"{stuck}/{n} paths still inside at horizon {config.horizon:g}"
        )
    times = steps[steps >= 0] * config.dt
    half = Z99 * float(times.std(ddof=1)) / math.sqrt(times.size)
    return MonteCarloEstimate(float(times.mean()), half)
