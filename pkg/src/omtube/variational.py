"""Most probable transition paths from the Euler-Lagrange equation.

Minimizers of the OM action at fixed T solve ``psi'' = b b' + (c^2/2) b''``
with ``psi(0) = x0`` and ``psi(T) = xf``. ``solve_mptp`` shoots on the
initial velocity with classical RK4 and falls back on a relaxation solve
where shooting cannot resolve a root. ``direct_minimizer`` discretizes the
action and minimizes it, and serves as an independent check.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from typing import Any, NamedTuple, Optional

import numpy as np
from scipy.integrate import quad, solve_bvp, trapezoid
from scipy.linalg import cholesky_banded, solve_banded
from scipy.optimize import brentq, minimize

from .action import ActionValue, modified_om_action, om_action
from .errors import (
    InputError,
    NoBracket,
    NoConvergence,
    NumericalFailure,
    ReparameterizationMismatch,
    ShootingOverflow,
)
from .model import SdeSystem, el_rhs_value, horner, interval_abs_sup, path_potential
from .simulate import Path

logger = logging.getLogger(__name__)

SHOOT_TOL = 1e-8
MIN_SHOOT_STEPS = 16
SCAN_POINTS = 801
SCAN_GRADING = 10.0
OVERFLOW_FACTOR = 10.0
ENERGY_TOL = 1e-6
REPARAM_RTOL = 0.01
EPS = float(np.finfo(float).eps)
STATIONARY_TOL = 1e-8
RELAX_STEP = 0.01
RELAX_MIN_NODES = 257
RELAX_MAX_NODES = 4097
BVP_TOL = 1e-10
BVP_MAX_NODES = 200_000


def el_rhs(system: SdeSystem, x: float) -> float:
    """``b'(x) b(x) + (c^2/2) b''(x)``, the acceleration along a minimizer."""
    if not math.isfinite(x):
        raise InputError(f"x must be finite, got {x!r}")
    return float(el_rhs_value(system, x))


def default_shoot_steps(T: float) -> int:
    return max(1000, math.ceil(T / 1e-3))


class Shot(NamedTuple):
    terminal_x: float
    path: Path
    velocity: np.ndarray


def shoot(
    system: SdeSystem, T: float, v0: float, n_steps: Optional[int] = None
) -> Shot:
    """RK4 for ``(psi, psi')`` from ``(x0, v0)`` over [0, T]."""
    if not (math.isfinite(T) and T > 0.0):
        raise InputError(f"T must be positive, got {T!r}")
    n = default_shoot_steps(T) if n_steps is None else int(n_steps)
    if n < MIN_SHOOT_STEPS:
        raise InputError(f"need at least {MIN_SHOOT_STEPS} RK4 steps, got {n}")
    coeffs = system.el_rhs_coeffs
    x0 = system.x0
    bound = OVERFLOW_FACTOR * system.l
    h = T / n
    half = 0.5 * h
    x, v = float(x0), float(v0)
    xs = [x]
    vs = [v]
    for _ in range(n):
        a1 = horner(coeffs, x)
        a2 = horner(coeffs, x + half * v)
        a3 = horner(coeffs, x + half * v + half * half * a1)
        a4 = horner(coeffs, x + h * v + h * half * a2)
        x_new = x + h * (v + h * (a1 + a2 + a3) / 6.0)
        v_new = v + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
        if not (math.isfinite(x_new) and abs(x_new - x0) <= bound):
            raise ShootingOverflow(
                f"shot with v0={v0:.6g} reached |x - x0| > {bound:g}", terminal=x
            )
        x, v = x_new, v_new
        xs.append(x)
        vs.append(v)
    return Shot(x, Path(0.0, h, np.array(xs)), np.array(vs))


def _shoot_many(system: SdeSystem, T: float, v0: np.ndarray, n: int) -> np.ndarray:
    """Terminal states for many initial velocities; diverged shots read +-inf."""
    coeffs = system.el_rhs_coeffs
    x0 = system.x0
    bound = OVERFLOW_FACTOR * system.l
    h = T / n
    half = 0.5 * h
    x = np.full(v0.shape, float(x0))
    v = np.array(v0, dtype=float)
    escaped = np.zeros(v0.shape, dtype=bool)
    side = np.zeros(v0.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            a1 = horner(coeffs, x)
            a2 = horner(coeffs, x + half * v)
            a3 = horner(coeffs, x + half * v + half * half * a1)
            a4 = horner(coeffs, x + h * v + h * half * a2)
            x_new = x + h * (v + h * (a1 + a2 + a3) / 6.0)
            v_new = v + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
            out = ~escaped & ~(np.abs(x_new - x0) <= bound)
            if out.any():
                side[out] = np.where(x_new[out] > x0, 1.0, -1.0)
                escaped |= out
            x = np.where(escaped, x, x_new)
            v = np.where(escaped, v, v_new)
    return np.where(escaped, np.copysign(np.inf, side), x)


@dataclass(frozen=True, eq=False)
class ShootingSolution:
    path: Path
    velocity: np.ndarray
    v0: float
    energy: float
    residual: float
    om_action: ActionValue
    n_roots: int = 1
    energy_drift: float = 0.0

    @property
    def energy_conserved(self) -> bool:
        return self.energy_drift <= ENERGY_TOL * max(1.0, abs(self.energy))


def _solution(
    system: SdeSystem, path: Path, velocity: np.ndarray, v0: float, residual: float
) -> ShootingSolution:
    e = 0.5 * velocity * velocity + path_potential(system, path.values)
    return ShootingSolution(
        path,
        velocity,
        float(v0),
        float(e[0]),
        float(residual),
        om_action(path, system),
        energy_drift=float(np.max(np.abs(e - e[0]))),
    )


def velocity_scan_grid(system: SdeSystem, T: float) -> np.ndarray:
    """Initial velocities in [-V, V], graded towards zero by a sinh map."""
    lo, hi = system.domain
    max_b = interval_abs_sup(system.drift.coefficients, lo, hi)
    V = 4.0 * (system.span / T + max_b)
    u = np.linspace(-1.0, 1.0, SCAN_POINTS)
    return V * np.sinh(SCAN_GRADING * u) / math.sinh(SCAN_GRADING)


def terminal_sensitivity(
    system: SdeSystem, T: float, v0: float, n_steps: Optional[int] = None
) -> float:
    """``d psi(T) / d v0``: RK4 on the shot together with its variational equation."""
    n = default_shoot_steps(T) if n_steps is None else int(n_steps)
    g, dg = system.el_rhs_coeffs, system.el_rhs_slope_coeffs
    h = T / n
    x, v, p, q = float(system.x0), float(v0), 0.0, 1.0
    for _ in range(n):
        a1, b1 = horner(g, x), horner(dg, x) * p
        x2, v2, p2, q2 = x + 0.5 * h * v, v + 0.5 * h * a1, p + 0.5 * h * q, q + 0.5 * h * b1
        a2, b2 = horner(g, x2), horner(dg, x2) * p2
        x3, v3, p3, q3 = x + 0.5 * h * v2, v + 0.5 * h * a2, p + 0.5 * h * q2, q + 0.5 * h * b2
        a3, b3 = horner(g, x3), horner(dg, x3) * p3
        x4, v4, p4, q4 = x + h * v3, v + h * a3, p + h * q3, q + h * b3
        a4, b4 = horner(g, x4), horner(dg, x4) * p4
        x += h * (v + 2.0 * v2 + 2.0 * v3 + v4) / 6.0
        v += h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
        p += h * (q + 2.0 * q2 + 2.0 * q3 + q4) / 6.0
        q += h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0
    return float(p)


def resolved_by_shooting(
    system: SdeSystem, T: float, v0: float, n_steps: int, tol: float = SHOOT_TOL
) -> bool:
    """Whether one float step of ``v0`` moves psi(T) by at most ``tol``."""
    spread = abs(terminal_sensitivity(system, T, v0, n_steps)) * EPS * max(1.0, abs(v0))
    return spread <= tol


def _relax(
    system: SdeSystem,
    duration: float,
    start: float,
    end: float,
    n_nodes: int,
    iters: int = 20000,
    gtol: float = 1e-8,
) -> np.ndarray:
    """Minimize the discrete action over interior nodes with both ends pinned.

    L-BFGS-B works in coordinates whitened by the Cholesky factor R of the
    kinetic-energy Hessian (``x = line + R^-1 z``), started from the line.
    """
    h = duration / (n_nodes - 1)
    line = np.linspace(start, end, n_nodes)
    interior = n_nodes - 2
    kinetic = np.zeros((2, interior))
    kinetic[0, 1:] = -1.0 / h
    kinetic[1, :] = 2.0 / h
    upper = cholesky_banded(kinetic)
    lower = np.zeros((2, interior))
    lower[0] = upper[1]
    lower[1, :-1] = upper[0, 1:]

    def nodes(z: np.ndarray) -> np.ndarray:
        x = line.copy()
        x[1:-1] += solve_banded((0, 1), upper, z)
        return x

    def objective(z: np.ndarray) -> tuple[float, np.ndarray]:
        x = nodes(z)
        grad = _discrete_gradient(x, h, system)
        return _discrete_action(x, h, system), solve_banded((1, 0), lower, grad)

    result = minimize(
        objective,
        np.zeros(interior),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": iters, "gtol": gtol, "ftol": 0.0},
    )
    if result.nit >= iters:
        raise NoConvergence(f"direct minimizer did not converge in {iters} iterations")
    x = nodes(result.x)
    s = _discrete_action(x, h, system)
    stationarity = float(np.max(np.abs(_discrete_gradient(x, h, system)))) / h
    if stationarity > STATIONARY_TOL * max(1.0, abs(s)):
        logger.warning(
            "direct minimizer stopped (%s) with gradient %.3g", result.message, stationarity
        )
    logger.debug("direct minimizer: %d iterations, S=%.12g", result.nit, s)
    return x


def _collocate(
    system: SdeSystem, duration: float, start: float, end: float, guess: Path
) -> Any:
    """Polish ``guess`` into an Euler-Lagrange solution with scipy's collocation solver."""
    g, dg = system.el_rhs_coeffs, system.el_rhs_slope_coeffs

    def rhs(t: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.vstack((y[1], horner(g, y[0]) + np.zeros_like(y[0])))

    def rhs_jac(t: np.ndarray, y: np.ndarray) -> np.ndarray:
        jac = np.zeros((2, 2, y.shape[1]))
        jac[0, 1] = 1.0
        jac[1, 0] = horner(dg, y[0])
        return jac

    def bc(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
        return np.array([ya[0] - start, yb[0] - end])

    velocity = np.gradient(guess.values, guess.dt, edge_order=2)
    result = solve_bvp(
        rhs,
        bc,
        guess.times,
        np.vstack((guess.values, velocity)),
        fun_jac=rhs_jac,
        tol=BVP_TOL,
        max_nodes=BVP_MAX_NODES,
    )
    if not result.success:
        raise NoConvergence(f"collocation on [0, {duration:g}] failed: {result.message}")
    return result.sol


def relaxation_solution(
    system: SdeSystem, T: float, n_steps: Optional[int] = None
) -> ShootingSolution:
    """An EL solution from direct minimization polished by collocation.

    On a symmetric flow the half problem ``x0 -> m`` over [0, T/2] is solved
    and reflected through ``(T/2, m)``, which gives the connecting path that
    crosses m at T/2.
    """
    n = default_shoot_steps(T) if n_steps is None else int(n_steps)
    n += n % 2
    symmetric = system.el_flow_symmetric
    horizon = 0.5 * T if symmetric else T
    end = system.midpoint if symmetric else system.xf
    n_nodes = min(max(RELAX_MIN_NODES, math.ceil(horizon / RELAX_STEP) + 1), RELAX_MAX_NODES)
    guess = Path(0.0, horizon / (n_nodes - 1), _relax(system, horizon, system.x0, end, n_nodes))
    sol = _collocate(system, horizon, system.x0, end, guess)
    times = np.arange(n + 1) * (T / n)
    if symmetric:
        half = sol(times[: n // 2 + 1])
        residual = max(abs(half[0, 0] - system.x0), abs(half[0, -1] - end))
        values = np.concatenate((half[0], 2.0 * end - half[0, -2::-1]))
        velocity = np.concatenate((half[1], half[1, -2::-1]))
    else:
        full = sol(times)
        residual = max(abs(full[0, 0] - system.x0), abs(full[0, -1] - system.xf))
        values, velocity = full[0].copy(), full[1].copy()
    values[0], values[-1] = system.x0, system.xf
    logger.debug("T=%g: relaxation solve, symmetric=%s, residual %.3g", T, symmetric, residual)
    return _solution(system, Path(0.0, T / n, values), velocity, velocity[0], residual)


def solve_mptp(
    system: SdeSystem,
    T: float,
    tol: float = SHOOT_TOL,
    n_steps: Optional[int] = None,
) -> ShootingSolution:
    """Shoot from x0 so that psi(T) = xf; among several roots keep the least OM action.

    A root is kept only when the float grid of v0 resolves psi(T) to ``tol``
    (see ``resolved_by_shooting``). Long transits hover near maxima of U_eff,
    where psi(T) depends on v0 roughly like ``exp(lambda T)``; when roots are
    dropped for that reason ``relaxation_solution`` joins the candidates.
    Solutions that conserve energy to ``ENERGY_TOL`` are preferred; if none
    does, the returned one has ``energy_conserved`` False.
    """
    if not (math.isfinite(T) and T > 0.0):
        raise InputError(f"T must be positive, got {T!r}")
    n = default_shoot_steps(T) if n_steps is None else int(n_steps)
    xf = system.xf
    vs = velocity_scan_grid(system, T)
    miss = _shoot_many(system, T, vs, n) - xf

    def residual(v: float) -> float:
        try:
            return shoot(system, T, v, n).terminal_x - xf
        except ShootingOverflow as e:
            return math.copysign(1e300, e.terminal - system.x0)

    roots: list[float] = [float(v) for v, f in zip(vs, miss) if f == 0.0]
    for k in range(vs.size - 1):
        fa, fb = miss[k], miss[k + 1]
        if fa == 0.0 or fb == 0.0 or np.sign(fa) == np.sign(fb):
            continue
        try:
            roots.append(brentq(residual, vs[k], vs[k + 1], xtol=1e-15, maxiter=200))
        except (ValueError, RuntimeError) as e:
            logger.debug("T=%g: bracket [%g, %g] dropped: %s", T, vs[k], vs[k + 1], e)

    candidates: list[ShootingSolution] = []
    unresolved = 0
    for v0 in roots:
        try:
            shot = shoot(system, T, v0, n)
        except ShootingOverflow:
            continue
        res = abs(shot.terminal_x - xf)
        if res > tol:
            logger.warning(
                "T=%g: discarding shooting root v0=%.12g with residual %.3g", T, v0, res
            )
            continue
        if not resolved_by_shooting(system, T, v0, n, tol):
            unresolved += 1
            logger.debug("T=%g: root v0=%.17g is below float resolution", T, v0)
            continue
        candidates.append(_solution(system, shot.path, shot.velocity, v0, res))
    if unresolved:
        try:
            candidates.append(relaxation_solution(system, T, n))
        except NumericalFailure as e:
            logger.warning("T=%g: relaxation solve failed: %s", T, e)
    if not candidates:
        raise NoBracket(f"no shooting root found at T={T:g}", T=T)

    pool = [s for s in candidates if s.energy_conserved] or candidates
    best = min(pool, key=lambda s: s.om_action.total)
    if not best.energy_conserved:
        logger.warning("T=%g: energy drift %.3g along the MPTP", T, best.energy_drift)
    logger.debug(
        "T=%g: v0=%.12g from %d candidate(s), %d unresolved",
        T,
        best.v0,
        len(candidates),
        unresolved,
    )
    return replace(best, n_roots=len(candidates))


class EnergyProfile(NamedTuple):
    mean: float
    drift: float


def energy_along(solution: ShootingSolution, system: SdeSystem) -> np.ndarray:
    v = solution.velocity
    return 0.5 * v * v + path_potential(system, solution.path.values)


def energy_profile(solution: ShootingSolution, system: SdeSystem) -> EnergyProfile:
    """Mean of ``E(t) = psi'^2/2 + U_eff(psi)`` and its largest departure from E(0)."""
    e = energy_along(solution, system)
    return EnergyProfile(float(e.mean()), float(np.max(np.abs(e - e[0]))))


def time_reparameterization(system: SdeSystem, solution: ShootingSolution) -> float:
    """``int dx / sqrt(2E - 2 U_eff(x))`` from x0 to xf along a monotone path."""
    values = solution.path.values
    steps = np.diff(values)
    if not (np.all(steps > 0.0) or np.all(steps < 0.0)):
        raise InputError("time reparameterization needs a monotone path")
    energy = energy_profile(solution, system).mean

    def dt_dx(x: float) -> float:
        return 1.0 / math.sqrt(max(2.0 * energy - 2.0 * path_potential(system, x), 1e-300))

    lo, hi = sorted((system.x0, system.xf))
    value, _err = quad(dt_dx, lo, hi, limit=400)
    return float(value)


def energy_of_time(
    system: SdeSystem,
    T: float,
    tol: float = SHOOT_TOL,
    n_steps: Optional[int] = None,
) -> float:
    """Conserved energy of the MPTP at T, cross-checked against the time integral."""
    solution = solve_mptp(system, T, tol, n_steps)
    energy = energy_profile(solution, system).mean
    steps = np.diff(solution.path.values)
    if np.all(steps > 0.0) or np.all(steps < 0.0):
        elapsed = time_reparameterization(system, solution)
        if abs(elapsed - T) > REPARAM_RTOL * T:
            raise ReparameterizationMismatch(
                f"E({T:g}) = {energy:.6g} implies a transit time of {elapsed:.6g}"
            )
    return energy


def _discrete_action(x: np.ndarray, h: float, system: SdeSystem) -> float:
    drift = system.drift
    m = 0.5 * (x[1:] + x[:-1])
    r = np.diff(x) / h - drift.b(m)
    return float(h * np.sum(0.5 * r * r + 0.5 * system.c**2 * drift.db(m)))


def _discrete_gradient(x: np.ndarray, h: float, system: SdeSystem) -> np.ndarray:
    """Gradient with respect to the interior nodes."""
    drift = system.drift
    m = 0.5 * (x[1:] + x[:-1])
    r = np.diff(x) / h - drift.b(m)
    db = drift.db(m)
    curv = 0.25 * system.c**2 * drift.d2b(m)
    right = h * (r * (1.0 / h - 0.5 * db) + curv)
    left = h * (r * (-1.0 / h - 0.5 * db) + curv)
    return right[:-1] + left[1:]




def direct_minimizer(
    system: SdeSystem,
    T: float,
    n_nodes: int = 256,
    iters: int = 20000,
    gtol: float = 1e-8,
) -> Path:
    """Minimize the midpoint-discretized OM action over paths pinned at x0 and xf.

    Shares no code with the shooter and serves as its cross-check.
    """
    if n_nodes < 32:
        raise InputError(f"need at least 32 nodes, got {n_nodes}")
    if not (math.isfinite(T) and T > 0.0):
        raise InputError(f"T must be positive, got {T!r}")
    h = T / (n_nodes - 1)
    return Path(0.0, h, _relax(system, T, system.x0, system.xf, n_nodes, iters, gtol))


class ActionCurveRow(NamedTuple):
    T: float
    s_om: float
    s_mom: float
    energy: float
    ok: bool
    reason: str = ""


def action_vs_time(
    system: SdeSystem,
    delta: float,
    T_grid: Iterable[float],
    tol: float = SHOOT_TOL,
) -> list[ActionCurveRow]:
    """``(T, S_OM, S_mOM, E)`` along the MPTP for each T; unsolvable rows are flagged."""
    rows = []
    for T in T_grid:
        try:
            sol = solve_mptp(system, T, tol)
        except NumericalFailure as e:
            logger.warning("T=%g: %s", T, e)
            rows.append(ActionCurveRow(T, math.nan, math.nan, math.nan, False, str(e)))
            continue
        s_mom = modified_om_action(sol.path, system, delta).total
        energy = energy_profile(sol, system).mean
        reason = "" if sol.energy_conserved else f"energy drift {sol.energy_drift:.3g}"
        rows.append(
            ActionCurveRow(T, sol.om_action.total, s_mom, energy, sol.energy_conserved, reason)
        )
    return rows


class UniformBounds(NamedTuple):
    max_velocity: float
    max_acceleration: float
    max_length: float
    el_rhs_hull_bound: float
    n_solved: int


def uniform_bound_diagnostics(
    system: SdeSystem, T_grid: Sequence[float], rho: float
) -> UniformBounds:
    """Sup norms of MPTP velocity, acceleration and length over a T grid.

    Velocity is maximised over ``T > rho`` only.
    """
    max_v = max_a = max_len = hull = 0.0
    solved = 0
    for T in T_grid:
        try:
            sol = solve_mptp(system, T)
        except NumericalFailure as e:
            logger.warning("T=%g skipped: %s", T, e)
            continue
        solved += 1
        values = sol.path.values
        accel = np.abs(el_rhs_value(system, values))
        if T > rho:
            max_v = max(max_v, float(np.max(np.abs(sol.velocity))))
        max_a = max(max_a, float(np.max(accel)))
        max_len = max(max_len, float(trapezoid(np.abs(sol.velocity), dx=sol.path.dt)))
        hull = max(
            hull,
            interval_abs_sup(system.el_rhs_coeffs, float(values.min()), float(values.max())),
        )
    return UniformBounds(max_v, max_a, max_len, hull, solved)
