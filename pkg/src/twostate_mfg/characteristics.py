"""Time-domain characteristic paths y_v(t) and the shooting map x_v(t).

Two independent routes are provided on purpose:

* ``QuadPath`` / ``eval_x`` / ``eval_state`` invert the time quadratures
  (the method of record for equilibrium enumeration and the entropy field);
* ``integrate_path`` / ``shooting_terminal`` / ``first_zero_of_x`` march the
  second-order ODE directly with a fixed-step RK4 scheme and never touch
  the quadrature module's numbers beyond metadata.

Cross-agreement of the two routes is part of the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .model import ETA_CRITICAL, potential, regime
from . import quadrature
from .quadrature import _R, deflated_coeffs

_BLOWUP_CLAMP = 1e6


class BlowUpError(RuntimeError):
    """Raised when a non-oscillatory path escapes before the requested time."""

    def __init__(self, message: str, escape_time: float):
        super().__init__(message)
        self.escape_time = escape_time


@dataclass
class CharacteristicPath:
    """One sampled trajectory (y, y', x) with branch metadata."""

    v: float
    eta: float
    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    x: np.ndarray
    oscillatory: bool
    period_quarter: Optional[float] = None
    escape: Optional[float] = None


def acceleration(y, eta):
    """Right-hand side of y'' = -y + y^3/2 + 3*eta*|y|*y + 4*eta^2*y."""
    return (0.5 * y * y + 3.0 * eta * np.abs(y) + 4.0 * eta * eta - 1.0) * y


def shooting_value(y, ydot, eta):
    """x = y|y|/2 + 2*eta*y + y' (the reduced terminal constraint)."""
    return 0.5 * y * np.abs(y) + 2.0 * eta * y + ydot


def _is_oscillatory(v: float, eta: float) -> bool:
    reg = regime(eta)
    return reg.v_zero is not None and 0.0 < abs(v) < reg.v_zero


# ---------------------------------------------------------------------------
# Quadrature-backed evaluation


def _panel_cumulative(edges: np.ndarray, f) -> np.ndarray:
    """Cumulative integral of f over consecutive panels, 8-point Gauss each."""
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a = edges[:-1]
    h = np.diff(edges)
    pts = a[:, None] + 0.5 * h[:, None] * (nodes[None, :] + 1.0)
    vals = f(pts)
    panel = 0.5 * h * (vals * weights[None, :]).sum(axis=1)
    out = np.empty(len(edges))
    out[0] = 0.0
    np.cumsum(panel, out=out[1:])
    return out


class QuadPath:
    """Quadrature-backed evaluator of (y_v, y_v', x_v)(t) for one velocity.

    Oscillatory velocities build a cumulative time table on the first
    quarter (in the deflated turning-point variable) and extend it by the
    four-branch periodic reflection; non-oscillatory velocities invert the
    cumulative time integral on a node set clustered near the potential's
    interior minimum, growing the table lazily as larger times are asked
    for.
    """

    def __init__(self, v: float, eta: float, n_panels: int = 192):
        self.v = float(v)
        self.eta = float(eta)
        self.sign = 1.0 if v >= 0 else -1.0
        self.oscillatory = _is_oscillatory(v, eta)
        self.trivial = v == 0.0
        self.escape: Optional[float] = None
        if self.trivial:
            return
        if self.oscillatory:
            av = abs(v)
            yv, coeffs = deflated_coeffs(av, eta)
            self.y_turn = yv
            self._coeffs = coeffs
            s = np.linspace(0.0, 1.0, n_panels + 1)
            sigma = _panel_cumulative(
                s, lambda u: 2.0 / np.sqrt(_R(1.0 - u * u, coeffs))
            )
            self.T = float(sigma[-1])
            self._s_of_sigma = PchipInterpolator(sigma, s)
            s_v = math.sqrt(max(1.0 - av / yv, 0.0))
            self.H = float(PchipInterpolator(s, sigma)(s_v))
        else:
            self._z_nodes: Optional[np.ndarray] = None
            self._t_nodes: Optional[np.ndarray] = None
            self._t_top = 0.0
            self._z_top = 1.0
            self._ensure_time(1.0)

    # -- non-oscillatory table ------------------------------------------------

    def _node_layout(self, z_top: float) -> np.ndarray:
        eta = self.eta
        # Dense head (all the time is spent at small y) plus a geometric
        # tail; a plain linspace would starve the head once z_top is large.
        head_top = min(z_top, 20.0)
        # Below |v| the integrand is flat (~1/|v|); above it the climb is
        # logarithmic in z, so geometric spacing keeps every decade
        # resolved no matter how small the launch speed is.
        z0 = min(max(abs(self.v), 1e-30), 0.25 * head_top)
        base = np.concatenate(
            [
                np.linspace(0.0, z0, 600),
                np.geomspace(z0, head_top, 3000)[1:],
            ]
        )
        if z_top > head_top:
            base = np.concatenate(
                [base, np.geomspace(head_top, z_top, 200)[1:]]
            )
        reg = regime(eta)
        if reg.y_star is not None and reg.y_star < z_top:
            # Cluster around the near-double root that appears as |v| -> v0+.
            ys = reg.y_star
            d = np.geomspace(1e-12, max(ys, z_top - ys), 160)
            extra = np.concatenate([ys - d, ys + d, [ys]])
            extra = extra[(extra > 0.0) & (extra < z_top)]
            base = np.concatenate([base, extra])
        return np.unique(base)

    def _ensure_time(self, t_cap: float) -> None:
        reg = regime(self.eta)
        at_critical = reg.v_zero is not None and abs(self.v) == reg.v_zero
        while self._t_top < t_cap:
            if at_critical:
                # y -> y_star asymptotically; approach it geometrically.
                gap = reg.y_star - self._z_top if self._z_top < reg.y_star else 0.0
                if self._z_top >= reg.y_star or gap < 1e-13:
                    # Time diverges like -log(gap); table already deep enough
                    # for any practical horizon.
                    break
                z_top = reg.y_star - 0.25 * gap if self._z_top > 0.5 * reg.y_star else 0.5 * reg.y_star
            else:
                z_top = self._z_top * 2.0
                if z_top > 1e9:
                    raise BlowUpError(
                        f"path v={self.v} escapes near t={self._t_top}",
                        self._t_top,
                    )
            vsq = self.v * self.v
            eta = self.eta
            if at_critical:
                nodes = np.unique(
                    np.concatenate(
                        [
                            np.linspace(0.0, 0.9 * reg.y_star, 400),
                            reg.y_star - np.geomspace(0.1 * reg.y_star, reg.y_star - z_top, 400),
                        ]
                    )
                )
            else:
                nodes = self._node_layout(z_top)
            t = _panel_cumulative(
                nodes, lambda z: 1.0 / np.sqrt(potential(z, eta) + vsq)
            )
            self._z_nodes, self._t_nodes = nodes, t
            self._t_top = float(t[-1])
            self._z_top = float(nodes[-1])
            if at_critical and self._t_top >= t_cap:
                break
        # Interpolate log z against t: z spans many decades and the log is
        # nearly linear in t at both ends, so this keeps full relative
        # accuracy where plain-z interpolation would not.  Below the first
        # positive node the motion is linear in t to within O((z/v)^2).
        self._t_first = float(self._t_nodes[1])
        self._z_first = float(self._z_nodes[1])
        self._logz_of_t = PchipInterpolator(
            self._t_nodes[1:], np.log(self._z_nodes[1:])
        )

    # -- evaluation -----------------------------------------------------------

    def state(self, t):
        """(y, ydot) at the requested times (scalar or array)."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < 0):
            raise ValueError("times must be nonnegative")
        if self.trivial:
            y = np.zeros_like(t)
            yd = np.zeros_like(t)
        elif self.oscillatory:
            y, yd = self._state_oscillatory(t)
        else:
            y, yd = self._state_escaping(t)
        if scalar:
            return float(y[0]), float(yd[0])
        return y, yd

    def _state_oscillatory(self, t):
        T = self.T
        tau = np.mod(t, 4.0 * T)
        q = np.clip((tau // T).astype(int), 0, 3)
        local = np.choose(q, [tau, 2.0 * T - tau, tau - 2.0 * T, 4.0 * T - tau])
        s = self._s_of_sigma(np.clip(T - local, 0.0, T))
        s = np.clip(s, 0.0, 1.0)
        p = 1.0 - s * s
        y_abs = self.y_turn * p
        yd_abs = self.y_turn * s * np.sqrt(np.maximum(_R(p, self._coeffs), 0.0))
        ysign = np.where(q < 2, 1.0, -1.0) * self.sign
        dsign = np.where((q == 0) | (q == 3), 1.0, -1.0) * self.sign
        return ysign * y_abs, dsign * yd_abs

    def _state_escaping(self, t):
        t_max = float(np.max(t)) if t.size else 0.0
        self._ensure_time(t_max)
        if t_max > self._t_top:
            raise BlowUpError(
                f"path v={self.v} escapes at t={self._t_top} < requested {t_max}",
                self._t_top,
            )
        z = np.where(
            t <= self._t_first,
            self._z_first * t / self._t_first,
            np.exp(self._logz_of_t(np.maximum(t, self._t_first))),
        )
        yd_abs = np.sqrt(np.maximum(potential(z, self.eta) + self.v * self.v, 0.0))
        return self.sign * z, self.sign * yd_abs

    def x(self, t):
        y, yd = self.state(t)
        return shooting_value(y, yd, self.eta)


@lru_cache(maxsize=4096)
def _cached_path(v: float, eta: float) -> QuadPath:
    return QuadPath(v, eta)


def eval_state(v: float, eta: float, t):
    """(y_v, y_v')(t) via the quadrature route."""
    return _cached_path(float(v), float(eta)).state(t)


def eval_x(v: float, eta: float, t):
    """x_v(t) via the quadrature route (odd in v)."""
    return _cached_path(float(v), float(eta)).x(t)


# ---------------------------------------------------------------------------
# Direct ODE integration (independent route)


def _rk4_step(y, w, h, eta):
    k1y, k1w = w, acceleration(y, eta)
    k2y, k2w = w + 0.5 * h * k1w, acceleration(y + 0.5 * h * k1y, eta)
    k3y, k3w = w + 0.5 * h * k2w, acceleration(y + 0.5 * h * k2y, eta)
    k4y, k4w = w + h * k3w, acceleration(y + h * k3y, eta)
    return (
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )


def integrate_path(
    v: float, eta: float, t_max: float, step: float = 1e-3
) -> CharacteristicPath:
    """March the characteristic ODE with fixed-step RK4 from (0, v).

    The |y| kink in the right-hand side is C^1, so no event handling is
    needed; energy drift is the accuracy monitor and is asserted in tests.
    Raises BlowUpError (with the quadrature escape time attached) when a
    non-oscillatory path leaves the integration window before t_max.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(int(math.ceil(t_max / step)), 1)
    h = t_max / n
    t = np.linspace(0.0, t_max, n + 1)
    y = np.empty(n + 1)
    w = np.empty(n + 1)
    y[0], w[0] = 0.0, v
    cap = 10.0 * max(4.0, math.sqrt(2.0) + abs(v))
    for i in range(n):
        y[i + 1], w[i + 1] = _rk4_step(y[i], w[i], h, eta)
        if abs(y[i + 1]) > cap:
            esc = quadrature.escape_time(v, eta) if v != 0 else math.inf
            raise BlowUpError(
                f"path v={v} blows up near t={t[i + 1]:.6g} (escape time {esc:.6g})",
                esc,
            )
    osc = _is_oscillatory(v, eta)
    return CharacteristicPath(
        v=v,
        eta=eta,
        t=t,
        y=y,
        ydot=w,
        x=shooting_value(y, w, eta),
        oscillatory=osc,
        period_quarter=quadrature.quarter_period(v, eta) if osc else None,
        escape=None if osc or v == 0 else quadrature.escape_time(v, eta),
    )


def shooting_terminal(
    vs: np.ndarray, horizon: float, eta: float, step: float = 2e-3
) -> np.ndarray:
    """x_v(horizon) for a whole velocity grid at once (RK4, vectorized).

    Paths that blow up before the horizon are reported as sign(v) * inf,
    consistent with the divergence of the shooting map there.  This is the
    brute-force oracle behind the equilibrium-count checks.
    """
    vs = np.asarray(vs, dtype=float)
    n = max(int(math.ceil(horizon / step)), 1)
    h = horizon / n
    y = np.zeros_like(vs)
    w = vs.copy()
    escaped = np.zeros(vs.shape, dtype=bool)
    for _ in range(n):
        y, w = _rk4_step(y, w, h, eta)
        newly = np.abs(y) > 50.0
        escaped |= newly
        y = np.clip(y, -_BLOWUP_CLAMP, _BLOWUP_CLAMP)
        w = np.clip(w, -_BLOWUP_CLAMP, _BLOWUP_CLAMP)
    x = shooting_value(y, w, eta)
    return np.where(escaped, np.where(vs >= 0, np.inf, -np.inf), x)


def _hermite_root(t0, t1, f0, f1, d0, d1):
    """Root of the cubic Hermite interpolant on a sign-change bracket."""
    h = t1 - t0

    def interp(t):
        s = (t - t0) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1

    return brentq(interp, t0, t1, xtol=1e-14)


def first_zero_of_x(v: float, eta: float, step: float = 1e-3) -> float:
    """First time the integrated path's shooting value hits 0.

    Detected by event tracking on the ODE march (independent of the
    zero-hit quadrature, which tests compare against); returns +inf for
    velocities whose shooting value never returns to zero.
    """
    if v == 0:
        raise ValueError("v = 0: x is identically zero")
    if not _is_oscillatory(v, eta):
        return math.inf
    # Quadrature value used for a safety cap only; the detected time is
    # produced by the ODE march below.
    cap = 1.5 * quadrature.zero_hit_time(1, v, eta)
    n = int(math.ceil(cap / step))
    h = cap / n
    y, w = 0.0, v
    t_prev, x_prev = 0.0, v
    d_prev = (abs(y) + 2.0 * eta) * w + acceleration(y, eta)
    for i in range(n):
        y, w = _rk4_step(y, w, h, eta)
        t_cur = (i + 1) * h
        x_cur = shooting_value(y, w, eta)
        d_cur = (abs(y) + 2.0 * eta) * w + acceleration(y, eta)
        if x_cur == 0.0:
            return t_cur
        if (x_prev > 0) != (x_cur > 0):
            return _hermite_root(t_prev, t_cur, x_prev, x_cur, d_prev, d_cur)
        t_prev, x_prev, d_prev = t_cur, x_cur, d_cur
    raise RuntimeError(f"no zero of x found for v={v} within t={cap}")
