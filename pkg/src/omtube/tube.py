"""Tube probabilities: Brownian series, Monte Carlo estimates and the bounds on them.

The upper side comes from the mean exit time of the enlarged domain through
Markov's inequality; the lower side is ``Theta(t)``, built from constants
that bound the drift over the tube region around the straight line x0 -> xf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from .action import om_action
from .errors import IncompatibleGrids, InputError, QuadratureFailure
from .model import SdeSystem, check_tube, horner, interval_abs_sup
from .simulate import (
    BATCH_SIZE,
    CHUNK_STEPS,
    Z99,
    MonteCarloEstimate,
    Path,
    PathBatch,
    SimConfig,
    run_batches,
)

SERIES_TOL = 1e-12
# eigen-series terms beyond which the image sum is used instead
MAX_SERIES_TERMS = 100_000
SUPREMUM_GRID = 2048
THETA_BRACKET = (1e-4, 1e3)
QUAD_RTOL = 1e-8


def _decay_rate(c: float, delta: float) -> float:
    return math.pi**2 * c**2 / (8.0 * delta**2)


def _check_positive(**values: float) -> None:
    for name, v in values.items():
        if not (math.isfinite(v) and v > 0.0):
            raise InputError(f"{name} must be positive and finite, got {v!r}")


def _image_sum(c: float, delta: float, T: float, tol: float) -> float:
    """Reflection-principle form, fast when T is small."""
    a = delta / (c * math.sqrt(T))
    total = float(ndtr(a) - ndtr(-a))
    k = 1
    while True:
        term = (ndtr((2 * k + 1) * a) - ndtr((2 * k - 1) * a)) + (
            ndtr((1 - 2 * k) * a) - ndtr((-1 - 2 * k) * a)
        )
        total += (-1) ** k * float(term)
        if abs(term) < tol:
            return total
        k += 1


def brownian_tube_probability(
    c: float, delta: float, T: float, tol: float = SERIES_TOL
) -> float:
    """Probability that ``c*B`` stays in (-delta, delta) over [0, T].

    Sums ``(-1)^n 4/((2n+1)pi) exp(-(2n+1)^2 pi^2 c^2 T / (8 delta^2))`` until
    the next term drops below ``tol``.
    """
    _check_positive(c=c, delta=delta, tol=tol)
    if not (math.isfinite(T) and T >= 0.0):
        raise InputError(f"T must be non-negative, got {T!r}")
    if T == 0.0:
        return 1.0
    rate = _decay_rate(c, delta) * T
    # index at which exp(-(2n+1)^2 rate) alone falls below tol
    needed = math.sqrt(max(-math.log(tol), 1.0) / rate)
    if needed > 2 * MAX_SERIES_TERMS:
        return min(1.0, max(0.0, _image_sum(c, delta, T, tol)))
    total = 0.0
    n = 0
    while True:
        k = 2 * n + 1
        term = 4.0 / (k * math.pi) * math.exp(-(k**2) * rate)
        total += term if n % 2 == 0 else -term
        k_next = k + 2
        if 4.0 / (k_next * math.pi) * math.exp(-(k_next**2) * rate) < tol:
            break
        n += 1
    return min(1.0, max(0.0, total))


def one_term_tube_probability(c: float, delta: float, T: float) -> float:
    """Leading term ``4/pi exp(-pi^2 c^2 T / (8 delta^2))`` of the series."""
    return 4.0 / math.pi * math.exp(-_decay_rate(c, delta) * T)


def mu1(c: float, delta: float, t: float) -> float:
    """The n=0 and n=1 terms of the Brownian series."""
    if not t >= 0.0:
        raise InputError(f"t must be non-negative, got {t!r}")
    rate = _decay_rate(c, delta) * t
    return 4.0 / math.pi * math.exp(-rate) - 4.0 / (3.0 * math.pi) * math.exp(-9.0 * rate)


def _log_mu1(c: float, delta: float, t: float) -> float:
    rate = _decay_rate(c, delta) * t
    return math.log(4.0 / math.pi) - rate + math.log1p(-math.exp(-8.0 * rate) / 3.0)


def markov_upper_bound(mean_exit_enlarged: float, T: float) -> float:
    """``min(1, E[tau] / T)``: sup of the tube probability over paths."""
    _check_positive(mean_exit_enlarged=mean_exit_enlarged, T=T)
    return min(1.0, mean_exit_enlarged / T)


def _tube_batch(
    system: SdeSystem,
    config: SimConfig,
    reference: np.ndarray,
    delta: float,
    bridge: bool,
    start: int,
    stop: int,
) -> np.ndarray:
    batch = PathBatch(system, config, range(start, stop))
    size = stop - start
    total = reference.size - 1
    alive = np.ones(size, dtype=bool)
    log_w = np.zeros(size)
    prev = np.full(size, system.x0 - reference[0])
    var = system.c**2 * config.dt
    done = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        while done < total and batch.active.any():
            m = min(CHUNK_STEPS, total - done)
            rows = np.flatnonzero(batch.active)
            y = batch.advance(m)[rows] - reference[done + 1 : done + 1 + m]
            escaped = ~(np.abs(y) < delta).all(axis=1) | batch.absorbed[rows]
            if bridge and var > 0.0:
                y_prev = np.column_stack([prev[rows], y[:, :-1]])
                p_cross = np.exp(-2.0 * (delta - y_prev) * (delta - y) / var)
                p_cross += np.exp(-2.0 * (delta + y_prev) * (delta + y) / var)
                log_w[rows] += np.log1p(-np.minimum(p_cross, 1.0)).sum(axis=1)
            prev[rows] = y[:, -1]
            alive[rows[escaped]] = False
            batch.active[rows[escaped]] = False
            done += m
    return np.where(alive, np.exp(log_w), 0.0)


def empirical_tube_probability(
    system: SdeSystem,
    psi: Path,
    delta: float,
    config: SimConfig,
    n: int,
    workers: int = 1,
    bridge: bool = True,
) -> MonteCarloEstimate:
    """Fraction of paths staying within ``delta`` of ``psi`` over its window.

    ``psi`` is interpolated onto the simulation grid, which must refine it by
    an integer factor. With ``bridge`` each surviving path is weighted by its
    Brownian-bridge probability of not touching the tube wall between grid
    points; absorbed paths always count as failures.
    """
    _check_positive(delta=delta)
    if n < 1:
        raise InputError("need at least one path")
    ratio = psi.dt / config.dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise IncompatibleGrids(
            f"reference step {psi.dt:g} is not a multiple of simulation step {config.dt:g}"
        )
    if abs(psi.values[0] - system.x0) >= delta:
        raise InputError("reference path must start within delta of x0")
    n_total = psi.n_steps * k
    grid = np.arange(n_total + 1) * config.dt
    reference = np.interp(grid, psi.times - psi.t0, psi.values)
    jobs = [
        (system, config, reference, delta, bridge, s, min(s + BATCH_SIZE, n))
        for s in range(0, n, BATCH_SIZE)
    ]
    weights = np.concatenate(run_batches(_tube_batch, jobs, workers))
    half = Z99 * float(weights.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return MonteCarloEstimate(float(weights.mean()), half)


def _quad(f: Callable[[float], float], a: float, b: float) -> float:
    if a == b:
        return 0.0
    val, err, _info, *message = quad(
        f, a, b, epsabs=1e-300, epsrel=1e-11, limit=200, full_output=1
    )
    if message or not math.isfinite(val) or err > QUAD_RTOL * abs(val):
        raise QuadratureFailure(
            f"quadrature on [{a:g}, {b:g}] reached error {err:.3g} for value {val:.6g}"
        )
    return float(val)


def mean_exit_time_bvp(system: SdeSystem, halfwidth: float, x_eval: float) -> float:
    """Mean exit time from (x0 - h, x0 + h) started at ``x_eval``.

    Solves ``(c^2/2) u'' + b u' = -1`` with ``u = 0`` on the boundary by the
    integrating-factor double quadrature.
    """
    _check_positive(halfwidth=halfwidth)
    lo, hi = system.x0 - halfwidth, system.x0 + halfwidth
    if not lo < x_eval < hi:
        raise InputError(f"x_eval={x_eval:g} lies outside ({lo:g}, {hi:g})")
    two_c2 = 2.0 / system.c**2
    U = system.drift.antiderivative
    grid = np.linspace(lo, hi, SUPREMUM_GRID)
    u_min = float(np.min(U(grid)))

    def inner(y: float) -> float:
        uy = U(y)
        return _quad(lambda z: math.exp(two_c2 * (U(z) - uy)), lo, y)

    def scale(y: float) -> float:
        return math.exp(-two_c2 * (U(y) - u_min))

    with np.errstate(over="raise"):
        try:
            g_total = _quad(inner, lo, hi)
            g_part = _quad(inner, lo, x_eval)
            s_total = _quad(scale, lo, hi)
            s_part = _quad(scale, lo, x_eval)
        except (OverflowError, FloatingPointError) as e:
            raise QuadratureFailure(f"integrand overflow: {e}") from e
    return two_c2 * (s_part / s_total * g_total - g_part)


class RegionSuprema(NamedTuple):
    h0: float
    h1: float
    h2: float


@dataclass(frozen=True)
class BoundConstants:
    h0: float
    h1: float
    h2: float
    c0: float
    c1: float
    k0: float
    k1: float
    k2: float
    log_k0: float


def _abs_sup(coeffs: tuple[float, ...] | np.ndarray, lo: float, hi: float) -> float:
    grid = np.linspace(lo, hi, SUPREMUM_GRID)
    dense = float(np.max(np.abs(horner(coeffs, grid))))
    return max(dense, interval_abs_sup(coeffs, lo, hi))


def _suprema(system: SdeSystem, lo: float, hi: float, delta: float) -> RegionSuprema:
    drift = system.drift
    shifted = np.array(drift.integral, dtype=float)
    shifted[0] -= horner(drift.integral, system.xf)
    h0 = _abs_sup(shifted, system.xf - delta, system.xf + delta)
    h1 = _abs_sup(P.polymul(drift.coefficients, drift.d1), lo - delta, hi + delta)
    h2 = _abs_sup(drift.d2, lo - delta, hi + delta)
    return RegionSuprema(h0, h1, h2)


def tube_region_constants(system: SdeSystem, psi: Path, delta: float) -> RegionSuprema:
    """Drift suprema over the tube around ``psi`` (its hull widened by delta)."""
    _check_positive(delta=delta)
    lo, hi = system.domain
    if psi.values.min() < lo or psi.values.max() > hi:
        raise InputError("reference path leaves the domain")
    return _suprema(system, float(psi.values.min()), float(psi.values.max()), delta)


def lower_bound_constants(system: SdeSystem, delta: float) -> BoundConstants:
    """Constants of the exponential lower bound along the straight line x0 -> xf."""
    check_tube(system, delta)
    c2 = system.c**2
    x0, xf = system.x0, system.xf
    h = _suprema(system, min(x0, xf), max(x0, xf), delta)
    span = xf - x0
    mean_b = (horner(system.drift.integral, xf) - horner(system.drift.integral, x0)) / span
    b_squared = P.polyint(P.polymul(system.drift.coefficients, system.drift.coefficients))
    mean_b2 = (horner(b_squared, xf) - horner(b_squared, x0)) / span
    c1 = (h.h1 + system.kappa * c2 * h.h2) * delta / c2
    log_k0 = -h.h0 / c2 + span / c2 * mean_b
    return BoundConstants(
        h0=h.h0,
        h1=h.h1,
        h2=h.h2,
        c0=math.exp(-h.h0 / c2),
        c1=c1,
        k0=math.exp(log_k0),
        k1=(span**2 + 2.0 * abs(span) * delta) / (2.0 * c2),
        k2=0.5 * mean_b2 / c2 + c1,
        log_k0=log_k0,
    )


def log_theta(t: float, constants: BoundConstants, c: float, delta: float) -> float:
    return (
        constants.log_k0
        - constants.k1 / t
        - constants.k2 * t
        + _log_mu1(c, delta, t)
    )


def theta_bound(t: float, constants: BoundConstants, c: float, delta: float) -> float:
    """``k0 exp(-k1/t - k2 t) mu1(t)``; 0 where the value underflows."""
    if not (math.isfinite(t) and t > 0.0):
        raise InputError(f"t must be positive, got {t!r}")
    return math.exp(log_theta(t, constants, c, delta))


class ThetaMaximum(NamedTuple):
    t: float
    value: float


def maximize_theta(
    constants: BoundConstants, c: float, delta: float, tol: float = 1e-8
) -> ThetaMaximum:
    """Coarse log-grid scan over [1e-4, 1e3], then bounded Brent in log t."""
    ts = np.geomspace(*THETA_BRACKET, 400)
    values = [log_theta(float(t), constants, c, delta) for t in ts]
    k = int(np.argmax(values))
    lo = math.log(ts[max(k - 1, 0)])
    hi = math.log(ts[min(k + 1, len(ts) - 1)])
    best = minimize_scalar(
        lambda s: -log_theta(math.exp(s), constants, c, delta),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol},
    )
    t_best = math.exp(best.x)
    if -best.fun < values[k]:
        t_best = float(ts[k])
    return ThetaMaximum(t_best, theta_bound(t_best, constants, c, delta))


def straight_line_lower_bound(system: SdeSystem, delta: float, T: float) -> float:
    """``k0 exp(-k1/T - k2 T)`` times the full Brownian series at T."""
    _check_positive(T=T)
    k = lower_bound_constants(system, delta)
    return math.exp(k.log_k0 - k.k1 / T - k.k2 * T) * brownian_tube_probability(
        system.c, delta, T
    )


def approximate_tube_probability(system: SdeSystem, psi: Path, delta: float) -> float:
    """Leading-order estimate ``4/pi exp(-S_OM/c^2 - pi^2 c^2 T / (8 delta^2))``."""
    _check_positive(delta=delta)
    s_om = om_action(psi, system).total
    exponent = -s_om / system.c**2 - _decay_rate(system.c, delta) * psi.duration
    return min(1.0, 4.0 / math.pi * math.exp(exponent))
