"""Drift models, system definition and the effective path potential.

Drifts are polynomials ``b(x) = sum a_i x**i`` so that b', b'' and the
antiderivative are exact. Evaluation uses Horner's rule with plain
arithmetic, which works unchanged for Python floats (fast scalar loops such
as the RK4 shooter) and numpy arrays (vectorised ensembles).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from .errors import (
    BadNoise,
    DomainTooSmall,
    InputError,
    InvalidTube,
    MetastabilityViolation,
)

logger = logging.getLogger(__name__)

MAX_DEGREE = 10
METASTABILITY_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class DriftPreset(str, Enum):
    """Named drifts available from config files."""

    BROWNIAN = "brownian"
    OU = "ou"
    DOUBLE_WELL = "double-well"


def horner(coeffs: Sequence[float], x: Any) -> Any:
    """Evaluate ``sum coeffs[i] * x**i``; ``x`` may be a float or an ndarray."""
    acc: Any = 0.0
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def _as_tuple(coeffs: Any) -> tuple[float, ...]:
    out = tuple(float(a) for a in np.atleast_1d(coeffs))
    return out if out else (0.0,)


class DriftEvaluation(NamedTuple):
    b: float
    db: float
    d2b: float
    antiderivative: float


@dataclass(frozen=True)
class DriftModel:
    """Polynomial drift ``b(x)`` with coefficients a_0..a_m (m <= 10)."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = _as_tuple(self.coefficients)
        if len(coeffs) - 1 > MAX_DEGREE:
            raise InputError(f"drift degree {len(coeffs) - 1} exceeds {MAX_DEGREE}")
        if not all(math.isfinite(a) for a in coeffs):
            raise InputError(f"drift coefficients must be finite: {coeffs}")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_preset(cls, preset: DriftPreset | str, theta: float = 1.0) -> DriftModel:
        preset = DriftPreset(preset)
        if preset is DriftPreset.BROWNIAN:
            return cls((0.0,))
        if preset is DriftPreset.OU:
            return cls((0.0, -float(theta)))
        return cls((0.0, 1.0, 0.0, -1.0))

    @cached_property
    def d1(self) -> tuple[float, ...]:
        return _as_tuple(P.polyder(self.coefficients))

    @cached_property
    def d2(self) -> tuple[float, ...]:
        return _as_tuple(P.polyder(self.coefficients, 2))

    @cached_property
    def integral(self) -> tuple[float, ...]:
        return _as_tuple(P.polyint(self.coefficients))

    @property
    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.coefficients)

    def b(self, x: Any) -> Any:
        return horner(self.coefficients, x)

    def db(self, x: Any) -> Any:
        return horner(self.d1, x)

    def d2b(self, x: Any) -> Any:
        return horner(self.d2, x)

    def antiderivative(self, x: Any, origin: float = 0.0) -> Any:
        """``U(x) = integral of b from origin to x``."""
        return horner(self.integral, x) - horner(self.integral, origin)


def drift_eval(model: DriftModel, x: float, origin: float = 0.0) -> DriftEvaluation:
    """Exact (b, b', b'', U) at ``x``; U is taken relative to ``origin``."""
    if not math.isfinite(x):
        raise InputError(f"drift evaluation point must be finite, got {x!r}")
    return DriftEvaluation(
        model.b(x), model.db(x), model.d2b(x), model.antiderivative(x, origin)
    )


@dataclass(frozen=True)
class SdeSystem:
    """``dX = b(X)dt + c dB`` on D = (x0 - l, x0 + l) with target xf."""

    drift: DriftModel
    c: float
    l: float
    x0: float
    xf: float
    kappa: float = 0.5

    @property
    def span(self) -> float:
        return abs(self.xf - self.x0)

    @property
    def domain(self) -> tuple[float, float]:
        return (self.x0 - self.l, self.x0 + self.l)

    @property
    def is_driftless(self) -> bool:
        return self.drift.is_zero

    def drift_eval(self, x: float) -> DriftEvaluation:
        return drift_eval(self.drift, x, origin=self.x0)

    @cached_property
    def el_rhs_coeffs(self) -> tuple[float, ...]:
        # b b' + (c^2/2) b''
        bb = P.polymul(self.drift.coefficients, self.drift.d1)
        return _as_tuple(P.polyadd(bb, 0.5 * self.c**2 * np.asarray(self.drift.d2)))

    @cached_property
    def el_rhs_slope_coeffs(self) -> tuple[float, ...]:
        return _as_tuple(P.polyder(self.el_rhs_coeffs))

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.x0 + self.xf)

    @cached_property
    def el_flow_symmetric(self) -> bool:
        """True when ``el_rhs(m + y) = -el_rhs(m - y)`` about the midpoint m.

        Minimizers then come in pairs related by ``psi(t) -> 2m - psi(T - t)``
        and a self-paired one crosses m at T/2.
        """
        shifted = Polynomial(self.el_rhs_coeffs)(Polynomial([self.midpoint, 1.0])).coef
        scale = max(1.0, float(np.max(np.abs(shifted))))
        return bool(np.all(np.abs(shifted[0::2]) <= SYMMETRY_TOL * scale))

    @cached_property
    def potential_coeffs(self) -> tuple[float, ...]:
        # -1/2 b^2 - (c^2/2) b'
        b2 = P.polymul(self.drift.coefficients, self.drift.coefficients)
        return _as_tuple(
            P.polysub(-0.5 * b2, 0.5 * self.c**2 * np.asarray(self.drift.d1))
        )


@dataclass(frozen=True)
class TubeSpec:
    delta: float

    @classmethod
    def for_system(cls, system: SdeSystem, delta: float) -> TubeSpec:
        check_tube(system, delta)
        return cls(float(delta))


def check_tube(system: SdeSystem, delta: float) -> float:
    if not (math.isfinite(delta) and 0.0 < delta < system.span):
        raise InvalidTube(
            f"tube radius must satisfy 0 < delta < |xf - x0| = {system.span:g}, "
            f"got {delta!r}"
        )
    return float(delta)


def validate_system(system: SdeSystem) -> SdeSystem:
    """Check every SdeSystem invariant and return the system unchanged."""
    if not (math.isfinite(system.c) and system.c > 0.0):
        raise BadNoise(f"noise intensity must be positive, got c={system.c!r}")
    for name in ("l", "x0", "xf", "kappa"):
        if not math.isfinite(getattr(system, name)):
            raise InputError(f"{name} must be finite")
    if not 0.0 <= system.kappa <= 1.0:
        raise InputError(f"kappa must lie in [0, 1], got {system.kappa}")
    if system.l <= 0.0:
        raise DomainTooSmall(f"domain half-width must be positive, got l={system.l}")
    if system.x0 == system.xf:
        raise InputError("x0 and xf must be distinct metastable states")
    if system.span >= system.l:
        raise DomainTooSmall(
            f"|xf - x0| = {system.span:g} must be smaller than l = {system.l:g}"
        )
    if system.span / system.l > 0.5:
        logger.warning(
            "|xf - x0| / l = %.3f; results assume the domain is much wider "
            "than the transition span",
            system.span / system.l,
        )
    for label, point in (("x0", system.x0), ("xf", system.xf)):
        value = system.drift.b(point)
        if abs(value) > METASTABILITY_TOL:
            raise MetastabilityViolation(
                f"b({label}={point:g}) = {value:.3g} is not a drift root"
            )
    if system.is_driftless:
        logger.warning("zero drift: every point is an equilibrium (pure Brownian case)")
    return system


def path_potential(system: SdeSystem, x: Any) -> Any:
    """Effective potential ``U_eff = -b^2/2 - (c^2/2) b'``.

    ``-U_eff'`` is the right-hand side of the Euler-Lagrange equation of the
    OM action, so ``v**2/2 + U_eff(x)`` is conserved along minimizers.
    """
    if np.ndim(x) == 0 and not math.isfinite(float(x)):
        raise InputError(f"potential evaluation point must be finite, got {x!r}")
    return horner(system.potential_coeffs, x)


def el_rhs_value(system: SdeSystem, x: Any) -> Any:
    return horner(system.el_rhs_coeffs, x)


def interval_abs_sup(coeffs: Sequence[float], lo: float, hi: float) -> float:
    """Exact ``sup |p(x)|`` over [lo, hi]: endpoints plus real critical points."""
    candidates = [lo, hi]
    deriv = P.polyder(coeffs)
    if len(deriv) and np.any(deriv != 0.0):
        for root in P.polyroots(np.trim_zeros(np.asarray(deriv), "b")):
            if abs(root.imag) < 1e-12 and lo <= root.real <= hi:
                candidates.append(float(root.real))
    return float(max(abs(horner(coeffs, x)) for x in candidates))
