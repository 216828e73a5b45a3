"""Most probable transition time: modified-action minimization and its bounds."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .action import modified_om_action, tube_penalty
from .errors import (
    InputError,
    NoBracket,
    NoInteriorMinimum,
    NoSignChange,
    NumericalFailure,
)
from .model import SdeSystem, check_tube, interval_abs_sup
from .tube import lower_bound_constants, maximize_theta, mean_exit_time_bvp
from .variational import energy_of_time, energy_profile, solve_mptp

logger = logging.getLogger(__name__)

SCAN_POINTS = 32
DEFAULT_BRACKET = (0.3, 1.5)
RHO_SCAN_START = 1e-8


class TransitionTimeMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    ACTION_MINIMIZATION = "action_minimization"
    ENERGY_SHELL = "energy_shell"


@dataclass(frozen=True)
class TimeBounds:
    rho: float
    t_upper: float
    t_theta: float
    theta_max: float
    mean_exit: float
    degenerate: bool = False

    def contains(self, t: float) -> bool:
        return self.rho <= t <= self.t_upper


@dataclass(frozen=True)
class ConditionCheck:
    ok: bool
    margin: float
    max_energy: float

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class TransitionTimeResult:
    t_star: float
    method: TransitionTimeMethod
    s_mom_at_t: float
    bounds: Optional[tuple[float, float]] = None
    condition_ok: Optional[bool] = None

    def __post_init__(self) -> None:
        if not self.t_star > 0.0:
            raise ValueError(f"t_star must be positive, got {self.t_star}")


def shell_energy(c: float, delta: float) -> float:
    """``pi^2 c^4 / (8 delta^2)``: the modified action's penalty rate."""
    return tube_penalty(c, delta, 1.0)


def brownian_mptt(x0: float, xf: float, delta: float, c: float) -> float:
    """Closed form ``2 delta |xf - x0| / (pi c^2)`` for zero drift."""
    if not (math.isfinite(c) and c > 0.0):
        raise InputError(f"c must be positive, got {c!r}")
    span = abs(xf - x0)
    if not 0.0 < delta < span:
        raise InputError(f"delta must lie in (0, {span:g}), got {delta!r}")
    return 2.0 * delta * span / (math.pi * c**2)


def _s_mom(system: SdeSystem, delta: float, T: float) -> tuple[float, float]:
    sol = solve_mptp(system, T)
    return (
        modified_om_action(sol.path, system, delta).total,
        energy_profile(sol, system).mean,
    )


def minimize_modified_action(
    system: SdeSystem,
    delta: float,
    t_bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = 1e-4,
    with_bounds: bool = False,
) -> TransitionTimeResult:
    """Minimize ``T -> S_mOM(psi_T)`` over ``t_bracket``.

    A uniform scan localizes the minimum; bounded Brent refines it. Scan
    points where shooting fails are left out.
    """
    check_tube(system, delta)
    a, b = t_bracket
    if not 0.0 < a < b:
        raise InputError(f"bad bracket {t_bracket}")
    scanned: list[tuple[float, float, float]] = []
    for T in np.linspace(a, b, SCAN_POINTS):
        try:
            scanned.append((float(T), *_s_mom(system, delta, float(T))))
        except NoBracket as e:
            logger.warning("scan point skipped: %s", e)
    if not scanned:
        raise NoBracket(f"shooting failed over the whole bracket {t_bracket}", T=a)
    ts = [row[0] for row in scanned]
    vals = [row[1] for row in scanned]
    k = int(np.argmin(vals))
    if k == 0:
        raise NoInteriorMinimum(f"S_mOM increases across {t_bracket}", direction="lower")
    if k == len(ts) - 1:
        raise NoInteriorMinimum(f"S_mOM decreases across {t_bracket}", direction="upper")

    ceiling = max(vals) + abs(max(vals)) + 1.0

    def objective(T: float) -> float:
        try:
            return _s_mom(system, delta, T)[0]
        except NoBracket:
            return ceiling

    best = minimize_scalar(
        objective, bounds=(ts[k - 1], ts[k + 1]), method="bounded", options={"xatol": tol}
    )
    t_star, s_star = (
        (float(best.x), float(best.fun)) if best.fun <= vals[k] else (ts[k], vals[k])
    )
    tail = [e for T, _, e in scanned if T > t_star] or [scanned[-1][2]]
    condition_ok = shell_energy(system.c, delta) > max(tail)
    bounds = None
    if with_bounds:
        tb = transition_time_bounds(system, delta)
        bounds = (tb.rho, tb.t_upper)
    logger.info("delta=%g: t_star=%.6g, S_mOM=%.6g", delta, t_star, s_star)
    return TransitionTimeResult(
        t_star, TransitionTimeMethod.ACTION_MINIMIZATION, s_star, bounds, condition_ok
    )


def energy_shell_time(
    system: SdeSystem,
    delta: float,
    t_bracket: tuple[float, float] = DEFAULT_BRACKET,
    rtol: float = 1e-6,
) -> float:
    """Solve ``E(T) = pi^2 c^4 / (8 delta^2)`` inside ``t_bracket``."""
    check_tube(system, delta)
    target = shell_energy(system.c, delta)
    a, b = t_bracket

    def gap(T: float) -> float:
        return energy_of_time(system, T) - target

    ga, gb = gap(a), gap(b)
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if np.sign(ga) == np.sign(gb):
        raise NoSignChange(
            f"E(T) - {target:.6g} keeps its sign on [{a:g}, {b:g}] ({ga:.3g}, {gb:.3g})"
        )
    t = brentq(gap, a, b, xtol=1e-12, rtol=1e-12, maxiter=200)
    miss = abs(gap(t)) / target
    if miss > rtol:
        raise NoSignChange(f"energy shell root at T={t:.6g} misses by {miss:.3g}")
    return float(t)


def _reachability(t: float, c: float, delta: float, span: float, b_sup: float) -> float:
    """Gaussian bound on reaching the delta-ball around xf at time t."""
    gap = max(0.0, span - delta - t * b_sup)
    return 2.0 * delta / math.sqrt(2.0 * math.pi * c**2 * t) * math.exp(
        -(gap**2) / (2.0 * c**2 * t)
    )


def transition_time_bounds(system: SdeSystem, delta: float) -> TimeBounds:
    """Lower and upper bounds ``(rho, T_upper)`` on the most probable transition time."""
    check_tube(system, delta)
    c = system.c
    mean_exit = mean_exit_time_bvp(system, system.l + delta, system.x0)
    constants = lower_bound_constants(system, delta)
    peak = maximize_theta(constants, c, delta)
    t_upper = mean_exit / peak.value if peak.value > 0.0 else math.inf

    lo, hi = system.domain
    b_sup = interval_abs_sup(system.drift.coefficients, lo, hi)

    def below(t: float) -> bool:
        return _reachability(t, c, delta, system.span, b_sup) < peak.value

    ts = [float(t) for t in np.geomspace(RHO_SCAN_START, peak.t, 400)]
    if not below(ts[0]):
        logger.warning("delta=%g: reachability bound never below Theta max; rho=0", delta)
        return TimeBounds(0.0, t_upper, peak.t, peak.value, mean_exit, degenerate=True)
    rho = peak.t
    for left, right in zip(ts, ts[1:]):
        if not below(right):
            for _ in range(100):
                mid = math.sqrt(left * right)
                if below(mid):
                    left = mid
                else:
                    right = mid
            rho = left
            break
    return TimeBounds(rho, t_upper, peak.t, peak.value, mean_exit)


def condition_check(
    system: SdeSystem, delta: float, t_grid: Sequence[float]
) -> ConditionCheck:
    """Is the penalty rate above every MPTP energy observed on ``t_grid``?"""
    energies = []
    for T in t_grid:
        try:
            energies.append(energy_profile(solve_mptp(system, T), system).mean)
        except NumericalFailure as e:
            logger.warning("T=%g skipped: %s", T, e)
    if not energies:
        raise NoBracket("no solvable T in the grid", T=float(t_grid[0]) if t_grid else 0.0)
    top = max(energies)
    margin = shell_energy(system.c, delta) - top
    return ConditionCheck(margin > 0.0, margin, top)


def estimate_transition_time(
    system: SdeSystem,
    delta: float,
    method: TransitionTimeMethod = TransitionTimeMethod.ACTION_MINIMIZATION,
    t_bracket: tuple[float, float] = DEFAULT_BRACKET,
    with_bounds: bool = False,
) -> TransitionTimeResult:
    method = TransitionTimeMethod(method)
    if method is TransitionTimeMethod.ACTION_MINIMIZATION:
        return minimize_modified_action(system, delta, t_bracket, with_bounds=with_bounds)
    check_tube(system, delta)
    if method is TransitionTimeMethod.CLOSED_FORM:
        if not system.is_driftless:
            raise InputError("the closed form applies to zero drift only")
        t_star = brownian_mptt(system.x0, system.xf, delta, system.c)
        s_mom = system.span**2 / (2.0 * t_star) + tube_penalty(system.c, delta, t_star)
        condition_ok: Optional[bool] = True
    else:
        t_star = energy_shell_time(system, delta, t_bracket)
        s_mom = _s_mom(system, delta, t_star)[0]
        condition_ok = None
    bounds = None
    if with_bounds:
        tb = transition_time_bounds(system, delta)
        bounds = (tb.rho, tb.t_upper)
    return TransitionTimeResult(t_star, method, s_mom, bounds, condition_ok)
