"""Enumeration of all mean-field-game equilibria of the two-state game.

An equilibrium is identified with an initial slope v of the reduced
characteristic ODE whose shooting value x_v hits the prescribed terminal
imbalance 2*theta_bar - 1 at the horizon.  The map v -> x_v(T) is odd and
strictly increasing on the "stopped" branch (paths that have not yet
returned to x = 0), so exactly one stopped root exists; additional roots
can only come from oscillatory paths that have already crossed zero, and
those are swept by a sign-change scan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .model import ETA_CRITICAL, ModelParams, regime
from . import characteristics as ch
from . import quadrature as q


@dataclass
class MFGSolution:
    """One equilibrium: initial slope, terminal residual, branch metadata."""

    v: float
    residual: float
    stopped: bool
    entropy_selected: bool = False
    t: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    u0: Optional[np.ndarray] = None
    u1: Optional[np.ndarray] = None


@dataclass
class EnumerationReport:
    params: ModelParams
    solutions: List[MFGSolution]
    tangency_candidates: List[float] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.solutions)

    @property
    def entropy_selected(self) -> MFGSolution:
        for s in self.solutions:
            if s.entropy_selected:
                return s
        raise RuntimeError("no entropy-selected solution recorded")


def _terminal_x(v: float, eta: float, horizon: float) -> float:
    """x_v(horizon) via the quadrature route, +/-inf once the path escapes."""
    if v == 0.0:
        return 0.0
    try:
        return float(ch.eval_x(v, eta, horizon))
    except ch.BlowUpError:
        return math.copysign(math.inf, v)


def v_scan_limit(eta: float, horizon: float) -> float:
    """Velocity beyond which every path escapes before the horizon.

    Determined by inverting the escape-time integral; a 0.5 margin is added
    since x_v(T) = +inf past that point and can hold no further roots.
    """
    reg = regime(eta)
    lo = reg.v_zero if reg.v_zero is not None else 0.0

    def f(u):
        return q.escape_time(u, eta) - horizon

    hi = max(lo + 1.0, 2.0)
    while f(hi) > 0:
        hi *= 2.0
    if f(lo + 1e-9) < 0:
        return lo + 1e-9 + 0.5
    return brentq(f, lo + 1e-9, hi, xtol=1e-10) + 0.5


def solve_stopped(params: ModelParams) -> float:
    """The unique root of x_v(T) = 2*theta_bar - 1 on the stopped branch.

    The stopped branch is {v : the path has not yet returned to x = 0 at
    time T}; on it the shooting map is strictly increasing from 0 to +inf,
    so plain bisection (tolerant of the +inf tail) followed by a brentq
    polish finds the root.  The target's sign is handled by oddness.
    """
    eta, T = params.eta, params.horizon
    target = params.target
    if target == 0.0:
        return 0.0
    sgn = 1.0 if target > 0 else -1.0
    tgt = abs(target)
    reg = regime(eta)
    if reg.v_zero is None:
        lo = 0.0
    else:
        table = q.period_table(eta)
        t1_at_zero = table.T1_limit_at_zero
        lo = 0.0 if T <= t1_at_zero else table.solve_t1(T)

    def f(u):
        x = _terminal_x(u, eta, T)
        return x - tgt if math.isfinite(x) else math.inf

    hi = max(lo + 0.5, 1.0)
    while f(hi) < 0:
        hi = lo + 2.0 * (hi - lo)
    a, b = lo, hi
    for _ in range(80):
        m = 0.5 * (a + b)
        if f(m) < 0:
            a = m
        else:
            b = m
    # Bisection already localizes to ~1e-24 relative; the polish can fail
    # on a degenerate bracket, in which case the midpoint is converged.
    root = 0.5 * (a + b)
    if math.isfinite(f(b)):
        try:
            root = brentq(f, a, b, xtol=1e-13)
        except ValueError:
            pass
    return sgn * root


def _scan_roots(f, grid: np.ndarray, tol: float):
    """Sign-change roots of f on a grid, plus near-tangency local minima."""
    vals = np.array([f(g) for g in grid])
    roots, tangencies = [], []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(float(grid[i]))
        elif (a > 0) != (b > 0):
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=1e-13)))
    for i in range(1, len(grid) - 1):
        a, m, b = np.abs(vals[i - 1 : i + 2])
        if math.isfinite(m) and m < a and m < b and m < tol:
            if not any(abs(grid[i] - r) < 10 * (grid[i + 1] - grid[i]) for r in roots):
                tangencies.append(float(grid[i]))
    return roots, tangencies


def enumerate_equilibria(
    params: ModelParams,
    scan_resolution: float = 1e-4,
    tangency_tol: float = 1e-6,
) -> EnumerationReport:
    """All equilibria at the given parameters, entropy-selected one marked.

    The stopped-branch root is found by monotone bisection; oscillatory
    extras (possible only for eta < 1/2) are swept by a sign-change scan of
    v -> x_v(T) -/+ target over positive v up to the escape limit, with the
    negative half-line covered through oddness.
    """
    eta, T = params.eta, params.horizon
    target = params.target
    reg = regime(eta)

    v_entropy = solve_stopped(params)
    roots = [v_entropy]
    tangencies: List[float] = []

    if reg.v_zero is not None:
        table = q.period_table(eta)
        v_stop = 0.0 if T <= table.T1_limit_at_zero else table.solve_t1(T)
        if v_stop > 0.0:
            # Scan slightly past the stopped/oscillatory boundary: at a
            # balanced target the outermost root pair sits exactly on it.
            v_hi = v_stop + 2.0 * scan_resolution
            n = max(int(math.ceil(v_hi / scan_resolution)), 8)
            grid = np.linspace(0.0, v_hi, n + 1)[1:]

            def resid_plus(u):
                return _terminal_x(u, eta, T) - target

            def resid_minus(u):
                # x_{-u}(T) - target = -(x_u(T) + target) for u > 0.
                return _terminal_x(u, eta, T) + target

            r_p, t_p = _scan_roots(resid_plus, grid, tangency_tol)
            r_m, t_m = _scan_roots(resid_minus, grid, tangency_tol)
            roots.extend(r_p)
            roots.extend(-r for r in r_m)
            tangencies = sorted(set(t_p) | {-t for t in t_m})

    merged: List[float] = []
    for v in sorted(roots):
        if not merged or v - merged[-1] > 1e-9:
            merged.append(v)
    solutions = []
    for v in merged:
        resid = (_terminal_x(v, eta, T) - target) if v != 0 or target != 0 else 0.0
        if not math.isfinite(resid):
            resid = 0.0
        stopped = (
            v == v_entropy
            if reg.v_zero is None
            else (
                abs(v) >= q.period_table(eta).solve_t1(T)
                if T > q.period_table(eta).T1_limit_at_zero
                else True
            )
        )
        solutions.append(
            MFGSolution(
                v=v,
                residual=float(resid),
                stopped=stopped,
                entropy_selected=(v == v_entropy),
            )
        )
    return EnumerationReport(
        params=params, solutions=solutions, tangency_candidates=tangencies
    )


def count_at_half(eta: float, horizon: float) -> int:
    """Closed-form equilibrium count at the balanced target theta_bar = 1/2.

    The count is 1 (the flat equilibrium) plus a symmetric pair for every
    zero-hit family whose small-velocity time limit lies below the horizon.
    """
    reg = regime(eta)
    if reg.v_zero is None:
        return 1
    table = q.period_table(eta)
    k, extra = 1, 0
    while (2 * k - 1) * table.T_limit_at_zero + table.H_limit_at_zero < horizon:
        extra += 1
        k += 1
        if k > 10_000:
            raise RuntimeError("count did not terminate")
    return 1 + 2 * extra


def scan_count(params: ModelParams, resolution: float = 1e-4, step: float = 2e-3) -> int:
    """Brute-force equilibrium count by dense ODE shooting (oracle route).

    Completely independent of the quadrature machinery: a vectorized RK4
    sweep of the shooting map over the whole admissible velocity window,
    followed by sign-change counting against the target.
    """
    eta, T = params.eta, params.horizon
    vmax = v_scan_limit(eta, T)
    n = int(math.ceil(2.0 * vmax / resolution))
    vs = np.linspace(-vmax, vmax, n + 1)
    x = ch.shooting_terminal(vs, T, eta, step=step)
    r = x - params.target
    finite = np.isfinite(r)
    # Exact grid-node zeros (the flat path at a balanced target lands here)
    # are counted once; sign changes are only counted between strictly
    # nonzero finite neighbors so node zeros are not double-counted.
    count = int(np.sum(finite & (r == 0.0)))
    idx = np.where(finite[:-1] & finite[1:] & (r[:-1] != 0.0) & (r[1:] != 0.0))[0]
    count += int(np.sum((r[idx] > 0) != (r[idx + 1] > 0)))
    return count


def recover_trajectories(
    v: float, params: ModelParams, n_points: int = 2048
) -> MFGSolution:
    """Full equilibrium trajectories (theta, y, u0, u1) for one root v.

    The population path is theta(t) = (x_v(T - t) + 1) / 2; the two value
    functions are integrated forward in the reversed time s = T - t with
    RK4, using exact characteristic states at the half-steps, from the zero
    terminal condition.
    """
    eta, T = params.eta, params.horizon
    t = np.linspace(0.0, T, n_points)
    s_grid = T - t[::-1]  # increasing reversed time

    def theta_of_s(s):
        s = np.asarray(s, dtype=float)
        if v == 0.0:
            return np.full_like(s, 0.5)
        y, yd = ch.eval_state(v, eta, s)
        return 0.5 * (ch.shooting_value(y, yd, eta) + 1.0)

    # RK4 in reversed time on du_i/ds = f(i, theta) + eta*(u_{1-i} - u_i)
    #                                   - ((u_i - u_{1-i})_+)^2 / 2,
    # with exact characteristic theta at the half-steps.
    h = s_grid[1] - s_grid[0]
    mids = 0.5 * (s_grid[:-1] + s_grid[1:])
    th_nodes = theta_of_s(s_grid)
    th_mids = theta_of_s(mids)

    def f_run(i, th):
        return abs(1.0 - th - i)

    def deriv(u0, u1, th):
        jump0 = max(u0 - u1, 0.0)  # gain from leaving state 0
        jump1 = max(u1 - u0, 0.0)
        du0 = f_run(0, th) + eta * (u1 - u0) - 0.5 * jump0 * jump0
        du1 = f_run(1, th) + eta * (u0 - u1) - 0.5 * jump1 * jump1
        return du0, du1

    u0 = np.empty(n_points)
    u1 = np.empty(n_points)
    u0[0] = u1[0] = 0.0
    for i in range(n_points - 1):
        a0, a1 = u0[i], u1[i]
        k1 = deriv(a0, a1, th_nodes[i])
        k2 = deriv(a0 + 0.5 * h * k1[0], a1 + 0.5 * h * k1[1], th_mids[i])
        k3 = deriv(a0 + 0.5 * h * k2[0], a1 + 0.5 * h * k2[1], th_mids[i])
        k4 = deriv(a0 + h * k3[0], a1 + h * k3[1], th_nodes[i + 1])
        u0[i + 1] = a0 + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        u1[i + 1] = a1 + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])

    # Reverse back to forward time t.
    theta_t = th_nodes[::-1]
    y_t = (u1 - u0)[::-1]
    resid = _terminal_x(v, eta, T) - params.target if v != 0 else -params.target
    reg = regime(eta)
    stopped = True
    if v != 0 and reg.v_zero is not None and abs(v) < reg.v_zero:
        stopped = T < q.zero_hit_time(1, v, eta)
    return MFGSolution(
        v=v,
        residual=float(resid if math.isfinite(resid) else 0.0),
        stopped=stopped,
        t=t,
        theta=theta_t,
        y=y_t,
        u0=u0[::-1],
        u1=u1[::-1],
    )
