"""Entropy solution of the scalar conservation law behind the master field.

The value gap Y(x, t) (cost difference between the two states when the
population imbalance is x) solves a scalar conservation law whose
characteristics are exactly the shooting paths x_v(t): the entropy solution
is Y(x, t) = y_v(t) where v = v(x, t) is the unique stopped-branch velocity
with x_v(t) = x.  A stationary shock forms on the symmetry axis x = 0 once
the fastest characteristic family returns to the axis; its admissibility
(Rankine-Hugoniot and Lax) is checked numerically here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .model import regime
from . import characteristics as ch
from . import quadrature as q


def flux(x, Y, eta):
    """Flux of the value-gap conservation law at imbalance x."""
    return 2.0 * eta * x * Y + 0.5 * x * Y * np.abs(Y) - 0.5 * Y * Y - 0.5 * x * x


def invert_velocity(x: float, t: float, eta: float) -> float:
    """The stopped-branch velocity v with x_v(t) = x (exact bisection).

    For x > 0 the admissible branch is {v : t < T1(v)} together with the
    non-oscillatory velocities; on it v -> x_v(t) is strictly increasing
    from 0, so the root is found by monotone bisection with a brentq
    polish.  Negative x goes through oddness; x = 0 maps to v = 0 (only
    meaningful before the shock forms).
    """
    if x == 0.0:
        return 0.0
    if t <= 0.0:
        raise ValueError("t must be positive")
    sgn = 1.0 if x > 0 else -1.0
    xa = abs(x)
    reg = regime(eta)
    lo = 0.0
    if reg.v_zero is not None:
        table = q.period_table(eta)
        if t > table.T1_limit_at_zero:
            lo = table.solve_t1(t)

    def f(u):
        try:
            return float(ch.eval_x(u, eta, t)) - xa
        except ch.BlowUpError:
            return math.inf

    hi = max(2.0 * lo + 0.5, 1.0)
    while f(hi) < 0:
        hi = lo + 2.0 * (hi - lo)
    a, b = lo, hi
    for _ in range(80):
        m = 0.5 * (a + b)
        if f(m) < 0:
            a = m
        else:
            b = m
    fb = f(b)
    # The 80 bisection steps above already localize the root to ~1e-24
    # relative; the brentq polish can legitimately fail on a degenerate
    # (zero or same-sign-by-rounding) bracket, in which case the midpoint
    # is already fully converged.
    root = 0.5 * (a + b)
    if math.isfinite(fb):
        try:
            root = brentq(f, a, b, xtol=1e-14)
        except ValueError:
            pass
    return sgn * root


def eval_entropy_Y(x: float, t: float, eta: float) -> float:
    """Entropy solution Y(x, t) by exact stopped-branch inversion."""
    v = invert_velocity(x, t, eta)
    if v == 0.0:
        return 0.0
    y, _ = ch.eval_state(v, eta, t)
    return float(y)


def shock_onset_time(eta: float) -> float:
    """Time the axis shock forms: the small-velocity zero-hit limit T1(0+).

    Infinite for eta >= 1/2 (no characteristic ever returns to the axis).
    """
    reg = regime(eta)
    if reg.v_zero is None:
        return math.inf
    return q.period_table(eta).T1_limit_at_zero


def detect_shock_onset(
    eta: float,
    t_max: float,
    x_probe: float = 1e-10,
    separation_tol: float = 1e-4,
    bisect_tol: float = 1e-6,
) -> float:
    """Shock onset measured from the field itself, no period integrals.

    Watches the one-sided trace Y(x_probe, t): before onset it vanishes
    with x_probe, after onset it jumps to the positive shock state.
    Bisection on the first time the trace exceeds ``separation_tol``.
    """

    def separated(t):
        return eval_entropy_Y(x_probe, t, eta) > separation_tol

    t_lo, t_hi = 1e-3, t_max
    if separated(t_lo):
        raise RuntimeError("probe already separated at the initial time")
    if not separated(t_hi):
        return math.inf
    while t_hi - t_lo > bisect_tol:
        t_mid = 0.5 * (t_lo + t_hi)
        if separated(t_mid):
            t_hi = t_mid
        else:
            t_lo = t_mid
    return 0.5 * (t_lo + t_hi)


@dataclass
class ShockDiagnostics:
    """Admissibility audit of the stationary axis shock at one time."""

    t: float
    Y_plus: float
    Y_minus: float
    rankine_hugoniot_residual: float
    lax_slack_left: np.ndarray
    lax_slack_right: np.ndarray
    c_grid: np.ndarray


def shock_diagnostics(t: float, eta: float, n_c: int = 101) -> ShockDiagnostics:
    """Shock states and entropy-admissibility slacks at time t > onset.

    The one-sided traces are Y(0+, t) = y_{v*}(t) with T1(v*) = t and
    Y(0-, t) = -Y(0+, t).  The Rankine-Hugoniot residual is the jump in
    flux divided by the jump in state (the shock is stationary, so it
    should vanish); the Lax slacks are the Oleinik chord inequalities
    s(c) = [g(Y+) - g(c)]/(Y+ - c) type one-sided speeds, reported as
    nonnegative-if-admissible numbers on an interior grid of intermediate
    states c.
    """
    onset = shock_onset_time(eta)
    if not (t > onset):
        raise ValueError(f"t = {t} is not past the shock onset {onset}")
    table = q.period_table(eta)
    v_star = table.solve_t1(t)
    y_plus, _ = ch.eval_state(v_star, eta, t)
    y_plus = float(y_plus)
    y_minus = -y_plus
    g_plus = flux(0.0, y_plus, eta)
    g_minus = flux(0.0, y_minus, eta)
    rh = (g_plus - g_minus) / (y_plus - y_minus)
    c = np.linspace(y_minus, y_plus, n_c)[1:-1]
    gc = flux(0.0, c, eta)
    # Admissible stationary shock: chord speeds from the left state are
    # >= 0 and chord speeds to the right state are <= 0.
    left = (gc - g_minus) / (c - y_minus)
    right = -(g_plus - gc) / (y_plus - c)
    return ShockDiagnostics(
        t=t,
        Y_plus=y_plus,
        Y_minus=y_minus,
        rankine_hugoniot_residual=float(rh),
        lax_slack_left=left,
        lax_slack_right=right,
        c_grid=c,
    )


@dataclass
class EntropyField:
    """Sampled entropy solution on a tensor grid, with shock metadata."""

    eta: float
    x: np.ndarray
    t: np.ndarray
    Y: np.ndarray  # shape (len(t), len(x))
    onset: float


def build_field(
    eta: float,
    t_max: float,
    nx: int = 401,
    nt: int = 400,
    n_fan: int = 600,
) -> EntropyField:
    """Entropy solution sampled on [-1, 1] x (0, t_max].

    Built by a characteristic fan sweep: one quadrature path per fan
    velocity, then for each time row a monotone interpolation of the
    surviving branch x_v(t) -> y_v(t), rather than a per-point inversion.
    The x = 0 column is 0 before onset and NaN after (the shock location);
    x < 0 follows by oddness.
    """
    x_grid = np.linspace(-1.0, 1.0, nx)
    t_grid = np.linspace(t_max / nt, t_max, nt)
    onset = shock_onset_time(eta)
    reg = regime(eta)

    # Fan velocities: dense near 0 and near the oscillatory ceiling, plus a
    # non-oscillatory tail wide enough to cover x = 1 at the earliest time.
    v_hi_needed = invert_velocity(1.0, float(t_grid[0]), eta)
    if reg.v_zero is not None:
        v0 = reg.v_zero
        inner = v0 * np.concatenate(
            [
                np.geomspace(1e-6, 0.1, n_fan // 6),
                np.linspace(0.1, 0.9, n_fan // 2, endpoint=False),
                1.0 - np.geomspace(0.1, 1e-7, n_fan // 3),
            ]
        )
        outer = np.array([])
        if v_hi_needed > v0:
            outer = v0 + np.geomspace(1e-6, (v_hi_needed - v0) * 1.05 + 1e-6, n_fan // 3)
        fan = np.unique(np.concatenate([inner, outer]))
    else:
        fan = np.unique(
            np.concatenate(
                [
                    np.geomspace(1e-6, 0.1, n_fan // 6),
                    np.linspace(0.1, v_hi_needed * 1.05, n_fan),
                ]
            )
        )

    table = q.period_table(eta) if reg.v_zero is not None else None

    # Evaluate every fan path on the whole time grid at once (NaN past a
    # path's escape time), then interpolate row by row.
    n_v = len(fan)
    X_fan = np.full((n_v, nt), np.nan)
    Y_fan = np.full((n_v, nt), np.nan)
    for k, v in enumerate(fan):
        p = ch.QuadPath(v, eta)
        try:
            yv, yd = p.state(t_grid)
            sl = slice(None)
        except ch.BlowUpError as err:
            alive = t_grid < err.escape_time * (1.0 - 1e-9)
            if not np.any(alive):
                continue
            sl = alive
            yv, yd = p.state(t_grid[alive])
        X_fan[k, sl] = ch.shooting_value(yv, yd, eta)
        Y_fan[k, sl] = yv

    Y = np.full((nt, nx), np.nan)
    pos = x_grid > 0.0
    x_pos = x_grid[pos]
    zero_col = np.where(x_grid == 0.0)[0]
    for i, t in enumerate(t_grid):
        v_floor = 0.0
        if table is not None and t > table.T1_limit_at_zero:
            v_floor = table.solve_t1(float(t))
        alive = (fan > v_floor) & np.isfinite(X_fan[:, i])
        xs = X_fan[alive, i]
        ys = Y_fan[alive, i]
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        keep = np.concatenate([[True], np.diff(xs) > 1e-13])
        xs, ys = xs[keep], ys[keep]
        # Anchor the fan at the axis: Y(0+) is 0 before onset, the shock
        # state after.
        if v_floor == 0.0:
            x0, y0 = 0.0, 0.0
        else:
            ystar, ydstar = ch.eval_state(v_floor, eta, float(t))
            x0, y0 = 0.0, float(ystar)
        if xs[0] > x0:
            xs = np.concatenate([[x0], xs])
            ys = np.concatenate([[y0], ys])
        interp = PchipInterpolator(xs, ys, extrapolate=False)
        row = interp(x_pos)
        Y[i, pos] = row
        Y[i, ~pos & (x_grid < 0)] = -interp(-x_grid[~pos & (x_grid < 0)])
        if zero_col.size:
            Y[i, zero_col[0]] = 0.0 if t <= onset else np.nan
    return EntropyField(eta=eta, x=x_grid, t=t_grid, Y=Y, onset=onset)


def pde_residual_audit(
    field: EntropyField, exclusion_halfwidth: float = 0.05
) -> float:
    """Max |Y_t + d/dx g(x, Y)| by centered differences away from the shock.

    Grid points within ``exclusion_halfwidth`` of the axis are masked, as
    are any non-finite neighbors; the return value is the largest residual
    over the remaining interior points.
    """
    x, t, Y = field.x, field.t, field.Y
    dx = x[1] - x[0]
    dt = t[1] - t[0]
    g = flux(x[None, :], Y, field.eta)
    Yt = (Y[2:, 1:-1] - Y[:-2, 1:-1]) / (2.0 * dt)
    gx = (g[1:-1, 2:] - g[1:-1, :-2]) / (2.0 * dx)
    resid = np.abs(Yt + gx)
    ok = np.isfinite(resid)
    ok &= np.abs(x[None, 1:-1]) > exclusion_halfwidth
    if not np.any(ok):
        raise RuntimeError("audit mask is empty")
    return float(np.max(resid[ok]))


def reconstruct_state_costs(
    t: float, theta: float, eta: float, horizon: float, n_points: int = 512
):
    """Master-field costs (U0, U1) at (t, theta) via the entropy selection.

    Plays the game started at (t, theta): the entropy-selected equilibrium
    of the remaining-horizon problem is recovered and its value functions
    at time 0 of that subgame are returned.
    """
    from .model import ModelParams
    from . import mfg

    params = ModelParams(eta=eta, horizon=horizon - t, theta_bar=theta)
    v = mfg.solve_stopped(params)
    sol = mfg.recover_trajectories(v, params, n_points=n_points)
    return float(sol.u0[0]), float(sol.u1[0])
