"""Singular period integrals of the reduced oscillator.

Quantities computed here: the quarter period T(v) of the bounded
oscillation, the lag H(v) between the turning point and the shooting-map
zero, the zero-hit horizons T_k(v) = (2k-1) T(v) + H(v), the implicit time
map t(y; v), and the finite escape time of unbounded trajectories.

All integrands have an inverse-square-root singularity at the turning
point.  Because the turning point is a *simple* root of G(z) + v^2, we
deflate that root from the quartic analytically and substitute
z = y(v) (1 - s^2); the transformed integrands are smooth on [0, 1] and
free of the catastrophic cancellation that direct evaluation of
G(z) + v^2 suffers near its zero.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .model import (
    ETA_CRITICAL,
    interior_minimum,
    potential,
    regime,
    smallest_positive_root,
)

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


def deflated_coeffs(v: float, eta: float):
    """Turning point y(v) and coefficients of the deflated cubic R.

    With p = z / y(v), the quartic P(p) = (G(y(v) p) + v^2) / y(v)^2
    satisfies P(p) = (1 - p) R(p) with R > 0 on [0, 1]; R is returned as
    the coefficient triple (a, b, c) of R(p) = -(a p^3 + b p^2 + c (p+1)).
    """
    yv = smallest_positive_root(v, eta)
    a = 0.25 * yv * yv
    b = a + 2.0 * eta * yv
    c = b + 4.0 * eta * eta - 1.0
    return yv, (a, b, c)


def _R(p, coeffs):
    a, b, c = coeffs
    return -(((a * p + b) * p + c) * p + c)


def _turning_integrand(s, coeffs):
    """2 / sqrt(R(1 - s^2)): the density of time in the s variable."""
    p = 1.0 - s * s
    return 2.0 / np.sqrt(_R(p, coeffs))


def _check_oscillatory(v: float, eta: float) -> float:
    """Return |v| after validating 0 < |v| < v0 (and eta < 1/2)."""
    if v == 0:
        raise ValueError("v = 0: the trajectory is identically zero")
    if eta >= ETA_CRITICAL:
        raise ValueError("eta >= 1/2: no bounded oscillation exists")
    reg = regime(eta)
    av = abs(v)
    if av >= reg.v_zero:
        raise ValueError(f"|v| = {av} >= v0 = {reg.v_zero}: not oscillatory")
    return av


def quarter_period(v: float, eta: float) -> float:
    """T(v): time for the oscillation to climb from 0 to its turning point."""
    av = _check_oscillatory(v, eta)
    _, coeffs = deflated_coeffs(av, eta)
    with warnings.catch_warnings():
        # Near |v| = v0 the deflated integrand is log-divergent and the
        # absolute target is unreachable; relative accuracy survives.
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(_turning_integrand, 0.0, 1.0, args=(coeffs,), **_QUAD_OPTS)
    return val


def lag(v: float, eta: float) -> float:
    """H(v): time from the level y = |v| up to the turning point."""
    av = _check_oscillatory(v, eta)
    yv, coeffs = deflated_coeffs(av, eta)
    s_v = math.sqrt(max(1.0 - av / yv, 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(_turning_integrand, 0.0, s_v, args=(coeffs,), **_QUAD_OPTS)
    return val


def zero_hit_time(k: int, v: float, eta: float) -> float:
    """T_k(v) = (2k-1) T(v) + H(v): the k-th horizon with x_v(T) = 0.

    Returns +inf whenever no bounded oscillation exists (|v| >= v0,
    including equality, or eta >= 1/2): the shooting map never returns to
    zero for those velocities.
    """
    if k < 1 or int(k) != k:
        raise ValueError(f"k must be a positive integer, got {k}")
    if v == 0:
        raise ValueError("v = 0: x is identically zero, every time qualifies")
    if eta >= ETA_CRITICAL:
        return math.inf
    av = abs(v)
    if av >= regime(eta).v_zero:
        return math.inf
    return (2 * k - 1) * quarter_period(av, eta) + lag(av, eta)


def implicit_time(y_target: float, v: float, eta: float) -> float:
    """Time for the first-quarter branch to reach y_target from 0 at speed |v|."""
    if v == 0:
        raise ValueError("v = 0: the trajectory never leaves 0")
    if y_target < 0:
        raise ValueError("y_target must be nonnegative")
    if y_target == 0:
        return 0.0
    av = abs(v)
    reg = regime(eta)
    oscillatory = reg.v_zero is not None and av < reg.v_zero
    if oscillatory:
        yv, coeffs = deflated_coeffs(av, eta)
        if y_target > yv * (1.0 + 1e-12):
            raise ValueError(
                f"y_target = {y_target} beyond the turning point y(v) = {yv}"
            )
        p = min(y_target / yv, 1.0)
        s = math.sqrt(max(1.0 - p, 0.0))
        total, _ = quad(_turning_integrand, 0.0, 1.0, args=(coeffs,), **_QUAD_OPTS)
        upper, _ = quad(_turning_integrand, 0.0, s, args=(coeffs,), **_QUAD_OPTS)
        return total - upper
    if reg.v_zero is not None and av == reg.v_zero and y_target >= reg.y_star:
        raise ValueError("y_target is not reached at the critical velocity")
    vsq = v * v
    pts = None
    if reg.y_star is not None and 0.0 < reg.y_star < y_target:
        pts = [reg.y_star]
    val, _ = quad(
        lambda z: 1.0 / math.sqrt(potential(z, eta) + vsq),
        0.0,
        y_target,
        points=pts,
        **_QUAD_OPTS,
    )
    return val


def escape_time(v: float, eta: float) -> float:
    """Blow-up time of an unbounded trajectory: int_0^inf dz / sqrt(G + v^2).

    Requires a velocity outside the oscillatory band; at |v| = v0 exactly
    the integral diverges and +inf is returned.
    """
    if v == 0:
        raise ValueError("v = 0: the trajectory never escapes")
    av = abs(v)
    reg = regime(eta)
    if reg.v_zero is not None:
        if av < reg.v_zero:
            raise ValueError(f"|v| = {av} < v0 = {reg.v_zero}: oscillatory, no escape")
        if av == reg.v_zero:
            return math.inf
    vsq = v * v
    ys = reg.y_star if reg.y_star is not None else 0.0
    cut = max(10.0, 4.0 * ys)
    pts = [reg.y_star] if reg.y_star else None
    with warnings.catch_warnings():
        # Just outside the oscillatory band the integrand has a sharp
        # near-singular peak at y_star; the requested absolute tolerance
        # is then unreachable and quad warns while still delivering full
        # relative accuracy.
        warnings.simplefilter("ignore", IntegrationWarning)
        head, _ = quad(
            lambda z: 1.0 / math.sqrt(potential(z, eta) + vsq),
            0.0,
            cut,
            points=pts,
            **_QUAD_OPTS,
        )
    # Tail via z = 1/u: the transformed integrand is regular at u = 0.
    e2 = 4.0 * eta * eta - 1.0
    tail, _ = quad(
        lambda u: 1.0 / math.sqrt(0.25 + 2.0 * eta * u + e2 * u * u + vsq * u**4),
        0.0,
        1.0 / cut,
        **_QUAD_OPTS,
    )
    return head + tail


def _richardson_limit(values):
    """Limit of f(h), f(h/10), f(h/100) assuming f = L + a h + b h^2 + ..."""
    f0, f1, f2 = values
    r0 = (10.0 * f1 - f0) / 9.0
    r1 = (10.0 * f2 - f1) / 9.0
    return (100.0 * r1 - r0) / 99.0


@dataclass
class PeriodTable:
    """Cached samples of T and H on (0, v0) with monotone interpolation.

    Used to bracket root-finding problems on the zero-hit horizons; final
    refinement always goes back to the exact quadratures.
    """

    eta: float
    v_samples: np.ndarray
    T_values: np.ndarray
    H_values: np.ndarray
    T1_limit_at_zero: float
    T_limit_at_zero: float
    H_limit_at_zero: float
    _t1_interp: PchipInterpolator = field(repr=False, default=None)

    @classmethod
    def build(cls, eta: float, n_samples: int = 80) -> "PeriodTable":
        reg = regime(eta)
        if reg.v_zero is None:
            raise ValueError("PeriodTable exists only for eta < 1/2")
        v0 = reg.v_zero
        frac = np.concatenate(
            [
                np.linspace(1e-3, 0.97, n_samples),
                1.0 - np.geomspace(2e-2, 1e-9, 40),
            ]
        )
        frac = np.unique(frac)
        vs = v0 * frac
        T = np.array([quarter_period(v, eta) for v in vs])
        H = np.array([lag(v, eta) for v in vs])
        probes = [v0 * 1e-2, v0 * 1e-3, v0 * 1e-4]
        T_lim = _richardson_limit([quarter_period(v, eta) for v in probes])
        H_lim = _richardson_limit([lag(v, eta) for v in probes])
        table = cls(eta, vs, T, H, T_lim + H_lim, T_lim, H_lim)
        table._t1_interp = PchipInterpolator(vs, T + H)
        return table

    def t1(self, v: float) -> float:
        """Exact first zero-hit horizon T_1(v)."""
        return zero_hit_time(1, v, self.eta)

    def solve_t1(self, t: float) -> float:
        """The unique v in (0, v0) with T_1(v) = t; requires t > T_1(0+)."""
        if t <= self.T1_limit_at_zero:
            raise ValueError(
                f"t = {t} <= T1(0+) = {self.T1_limit_at_zero}: no zero-hit at this horizon"
            )
        t1s = self.T_values + self.H_values
        idx = int(np.searchsorted(t1s, t))
        lo = self.v_samples[max(idx - 1, 0)]
        if idx >= len(self.v_samples):
            # Beyond the sampled range: push the bracket toward v0.
            v0 = regime(self.eta).v_zero
            hi = v0 * (1.0 - 1e-13)
            while self.t1(hi) < t:
                hi = v0 - 0.5 * (v0 - hi)
        else:
            hi = self.v_samples[idx]
        if self.t1(lo) > t:
            lo = self.v_samples[0] * 1e-6
        return brentq(lambda v: self.t1(v) - t, lo, hi, xtol=1e-15, rtol=8.9e-16)


@lru_cache(maxsize=32)
def period_table(eta: float) -> PeriodTable:
    return PeriodTable.build(eta)
