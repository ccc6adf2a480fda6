"""Backward solution of the (N+1)-player HJB system on the measure grid.

The focal player's value V(t, i, theta) lives on the empirical measure of
the N other players, theta in {0, 1/N, ..., 1} (fraction of the others at
state 0 in V's own orientation: here theta_k = k/N indexes the grid and
V1[k] = V(t, 1, theta_k)).  The exchange symmetry V(t, 0, theta) =
V(t, 1, 1 - theta) lets the whole system be expressed through V1 and its
index reversal; the solve marches backward in time with RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams


@dataclass
class ValueGrid:
    """Backward-solved values V(t, 1, theta_k) and the symmetry view."""

    n_others: int
    eta: float
    horizon: float
    t_mesh: np.ndarray  # increasing, t_mesh[-1] = horizon
    V1: np.ndarray  # shape (len(t_mesh), N + 1)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_others + 1) / self.n_others

    @property
    def V0_view(self) -> np.ndarray:
        """V(t, 0, theta) = V(t, 1, 1 - theta): index reversal of V1."""
        return self.V1[:, ::-1]

    @property
    def Y(self) -> np.ndarray:
        """Value gap Y(t, theta) = V(t, 1, theta) - V(t, 0, theta)."""
        return self.V1 - self.V0_view


@dataclass
class PolicyGrid:
    """Optimal jump intensities alpha(t, i, theta_k) >= 0."""

    n_others: int
    t_mesh: np.ndarray
    alpha0: np.ndarray  # control used while at state 0
    alpha1: np.ndarray  # control used while at state 1


class InstabilityError(RuntimeError):
    pass


def _rhs(V1: np.ndarray, N: int, eta: float) -> np.ndarray:
    """-dV1/dt for the symmetry-reduced system, fully vectorized.

    With R = V1 reversed (the state-0 values), the focal terms use the
    optimized controls a1 = (V1 - R)+ (jump away from 1) and a0 = (R - V1)+
    (the others' jump intensity out of state 0 at the mirrored point); the
    neighbor terms carry coefficients N(1-theta) and N*theta which vanish
    at the respective boundaries, so the out-of-range shifts are weighted
    by zero and can be padded arbitrarily.
    """
    R = V1[::-1]
    theta = np.arange(N + 1) / N
    a1 = np.maximum(V1 - R, 0.0)
    a0 = np.maximum(R - V1, 0.0)
    up = np.zeros_like(V1)
    up[:-1] = V1[1:] - V1[:-1]
    down = np.zeros_like(V1)
    down[1:] = V1[:-1] - V1[1:]
    # Others currently at state 1 (fraction 1-theta) jump to 0 at rate
    # a1(theta) + eta, raising theta by 1/N; others at 0 use a0 evaluated
    # at the measure they see, theta - 1/N on this grid.
    rate_up = np.zeros_like(V1)
    rate_up[:-1] = a1[:-1] + eta
    rate_down = np.zeros_like(V1)
    rate_down[1:] = a0[:-1] + eta
    return (
        theta
        - 0.5 * a1 * a1
        + eta * (R - V1)
        + N * (1.0 - theta) * rate_up * up
        + N * theta * rate_down * down
    )


def default_steps(n_others: int, params: ModelParams) -> int:
    """Stability budget: step <= 0.1 / (N * (2T + eta))."""
    T, eta = params.horizon, params.eta
    return max(int(math.ceil(T * n_others * (2.0 * T + eta) / 0.1)), 10)


def solve_hjb(
    n_others: int, params: ModelParams, steps: int | None = None
) -> ValueGrid:
    """Backward RK4 march of the reduced HJB system from zero terminal data.

    Raises InstabilityError if any value leaves [0, T - t] by more than
    1e-6 (the analytic bound), advising a finer step.
    """
    if n_others < 1:
        raise ValueError("need at least one other player")
    N, T, eta = n_others, params.horizon, params.eta
    if steps is None:
        steps = default_steps(n_others, params)
    t_mesh = np.linspace(0.0, T, steps + 1)
    h = T / steps
    V = np.zeros((steps + 1, N + 1))
    v = np.zeros(N + 1)
    # March in remaining time s = T - t; dV/ds = _rhs.
    for m in range(steps, 0, -1):
        k1 = _rhs(v, N, eta)
        k2 = _rhs(v + 0.5 * h * k1, N, eta)
        k3 = _rhs(v + 0.5 * h * k2, N, eta)
        k4 = _rhs(v + h * k3, N, eta)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = T - t_mesh[m - 1]
        if np.any(v < -1e-6) or np.any(v > s + 1e-6) or not np.all(np.isfinite(v)):
            raise InstabilityError(
                f"value left [0, T-t] at t={t_mesh[m - 1]:.6g} with "
                f"{steps} steps; refine the time step"
            )
        V[m - 1] = v
    return ValueGrid(n_others=N, eta=eta, horizon=T, t_mesh=t_mesh, V1=V)


def extract_policy(grid: ValueGrid) -> PolicyGrid:
    """alpha(t, i, theta) = (V(t,i,theta) - V(t,1-i,theta))+ on the grid."""
    Y = grid.Y
    return PolicyGrid(
        n_others=grid.n_others,
        t_mesh=grid.t_mesh,
        alpha1=np.maximum(Y, 0.0),
        alpha0=np.maximum(-Y, 0.0),
    )


@dataclass
class MajorityReport:
    """Worst violations of the majority-following sign structure."""

    worst_sign_violation: float
    worst_gap_monotonicity_violation: float
    worst_lower_bound_violation: float
    worst_upper_bound_violation: float

    def clean(self, tol: float = 1e-9) -> bool:
        return (
            self.worst_sign_violation <= tol
            and self.worst_gap_monotonicity_violation <= tol
            and self.worst_lower_bound_violation <= tol
            and self.worst_upper_bound_violation <= tol
        )


def verify_majority(grid: ValueGrid) -> MajorityReport:
    """Check the sign structure of the value gap (background rate 0 only).

    Y(t, theta) >= 0 for theta >= 1/2 and <= 0 for theta <= 1/2 (so the
    minority, not the majority, pays to move), W(t, theta) = V1(theta) -
    V1(theta - 1/N) > 0 for theta > 1/2, and 0 <= V <= T - t throughout.
    """
    if grid.eta != 0.0:
        raise ValueError("sign structure is asserted only at eta = 0")
    theta = grid.theta
    Y = grid.Y
    sign_viol = max(
        float(np.max(-Y[:, theta >= 0.5], initial=0.0)),
        float(np.max(Y[:, theta <= 0.5], initial=0.0)),
    )
    W = np.diff(grid.V1, axis=1)  # W[:, k-1] = V1[k] - V1[k-1]
    upper_half = theta[1:] > 0.5
    w_viol = float(np.max(-W[:, upper_half], initial=0.0))
    s = grid.horizon - grid.t_mesh
    lo_viol = float(np.max(-grid.V1, initial=0.0))
    up_viol = float(np.max(grid.V1 - s[:, None], initial=0.0))
    return MajorityReport(
        worst_sign_violation=sign_viol,
        worst_gap_monotonicity_violation=w_viol,
        worst_lower_bound_violation=lo_viol,
        worst_upper_bound_violation=up_viol,
    )


def compare_to_master(
    grid: ValueGrid,
    exclusion: float = 0.1,
    times: tuple = (0.0,),
) -> float:
    """Sup over |theta - 1/2| > exclusion of |V(t,1,theta) - U(t,1,theta)|.

    U is reconstructed from the entropy-selected equilibrium of the game
    restarted at (t, theta); only the listed times are compared (each one
    costs an equilibrium solve per grid point).
    """
    from . import entropy as en

    if grid.eta != 0.0:
        raise ValueError("the convergence comparison is stated at eta = 0")
    theta = grid.theta
    keep = np.abs(theta - 0.5) > exclusion
    sup = 0.0
    for t in times:
        it = int(np.argmin(np.abs(grid.t_mesh - t)))
        for k in np.where(keep)[0]:
            _, u1 = en.reconstruct_state_costs(
                float(grid.t_mesh[it]), float(theta[k]), grid.eta, grid.horizon
            )
            sup = max(sup, abs(float(grid.V1[it, k]) - u1))
    return sup
