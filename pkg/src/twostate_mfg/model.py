"""Closed-form scalar quantities of the reduced two-state crowd game.

The forward-backward equilibrium system reduces to a single second-order
oscillator for the value gap, with a quartic potential G whose critical
structure (controlled by the background jump rate eta) decides whether the
game can have multiple equilibria.  Everything downstream -- period
integrals, characteristic paths, equilibrium enumeration -- is built on the
quantities defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

ETA_CRITICAL = 0.5


@dataclass(frozen=True)
class ModelParams:
    """One game instance: background jump rate, horizon, initial split."""

    eta: float
    horizon: float
    theta_bar: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0.0 <= self.theta_bar <= 1.0:
            raise ValueError(f"theta_bar must lie in [0, 1], got {self.theta_bar}")

    @property
    def target(self) -> float:
        """Terminal value 2*theta_bar - 1 that the shooting map must hit."""
        return 2.0 * self.theta_bar - 1.0


class RegimeKind(Enum):
    UNIQUE_FOR_ALL = "unique_for_all"
    POSSIBLY_MULTIPLE = "possibly_multiple"


@dataclass(frozen=True)
class Regime:
    """Critical structure of the potential at a given eta.

    y_star and v_zero are populated only below the critical rate 1/2, where
    the potential has an interior minimum and bounded oscillations exist.
    x_threshold is the terminal value separating the always-unique boundary
    data from the possibly-multiple band.
    """

    kind: RegimeKind
    y_star: Optional[float]
    v_zero: Optional[float]
    x_threshold: float


def potential(y, eta):
    """G(y) = y^4/4 + 2*eta*|y|^3 + 4*eta^2*y^2 - y^2 (even in y)."""
    return 0.25 * y**4 + 2.0 * eta * np.abs(y) ** 3 + (4.0 * eta * eta - 1.0) * y**2


def potential_derivative(y, eta):
    """dG/dy on the y >= 0 branch: y^3 + 6*eta*y^2 + 8*eta^2*y - 2y."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("potential_derivative is defined for y >= 0")
    out = y**3 + 6.0 * eta * y**2 + (8.0 * eta * eta - 2.0) * y
    return out if out.ndim else float(out)


def interior_minimum(eta: float) -> float:
    """Location sqrt(eta^2 + 2) - 3*eta of the interior minimum of G."""
    return math.sqrt(eta * eta + 2.0) - 3.0 * eta


def x_threshold(eta: float) -> float:
    """Terminal-data threshold 1 - eta^2 - eta*sqrt(eta^2 + 2)."""
    return 1.0 - eta * eta - eta * math.sqrt(eta * eta + 2.0)


def regime(eta: float) -> Regime:
    """Classify eta and return the critical quantities of G."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    if eta >= ETA_CRITICAL:
        return Regime(RegimeKind.UNIQUE_FOR_ALL, None, None, x_threshold(eta))
    ys = interior_minimum(eta)
    v0 = math.sqrt(-potential(ys, eta))
    return Regime(RegimeKind.POSSIBLY_MULTIPLE, ys, v0, x_threshold(eta))


def smallest_positive_root(v: float, eta: float) -> float:
    """Smallest z > 0 with G(z) + v^2 = 0 (the oscillation turning point).

    Only defined for eta < 1/2 and 0 < |v| < v0; the root is simple and
    lies on the decreasing branch of G, strictly between |v| and the
    interior minimum.
    """
    if eta >= ETA_CRITICAL:
        raise ValueError("no positive root: G is increasing for eta >= 1/2")
    if v == 0:
        raise ValueError("v = 0: the root degenerates to 0")
    reg = regime(eta)
    av = abs(v)
    if av >= reg.v_zero:
        raise ValueError(
            f"|v| = {av} >= v0 = {reg.v_zero}: G(y) + v^2 has no positive root"
        )
    vsq = v * v
    if av < 1e-10:
        # The bracket test value (v^2/2 + 2*eta*|v|)^2 can underflow here;
        # the expansion y = (|v|/w)(1 + eta |v| / w^3), w^2 = 1 - 4 eta^2,
        # has relative error O(v^2) and is exact to double precision.
        w2 = 1.0 - 4.0 * eta * eta
        return (av / math.sqrt(w2)) * (1.0 + eta * av / w2**1.5)
    # G(|v|) + v^2 = (v^2/2 + 2*eta*|v|)^2 > 0 and G(y_star) + v^2 = v^2 - v0^2 < 0,
    # so [|v|, y_star] brackets the root; both signs can be lost to rounding
    # at the extreme ends, where the root degenerates to the endpoint.
    fa = potential(av, eta) + vsq
    fb = potential(reg.y_star, eta) + vsq
    if fa <= 0.0:
        return av
    if fb >= 0.0:
        return reg.y_star
    return brentq(
        lambda z: potential(z, eta) + vsq,
        av,
        reg.y_star,
        xtol=1e-15,
        rtol=8.9e-16,
    )
