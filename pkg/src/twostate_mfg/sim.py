"""Exact CTMC simulation of the (N+1)-player game under feedback policies.

Jumps are sampled by thinning against the uniform per-player rate bound
2*horizon + eta (valid because the value gap, hence every optimal control,
is bounded by 2T): propose exponential inter-event times at the total
bound rate, pick a player uniformly, accept with probability
(alpha + eta) / bound.  The scheme is statistically exact and bit-
reproducible per (seed, run) stream.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .hjb import PolicyGrid


class Policy:
    """Feedback control alpha(t, own_state, theta_others) >= 0."""

    def rate(self, t: float, state: int, k_others_at_zero: int) -> float:
        raise NotImplementedError


class NashPolicy(Policy):
    """Nash feedback from a solved HJB grid, piecewise constant in time.

    Lookups use the focal-excluded measure: k_others_at_zero out of N
    others, matching the grid's state variable.  Time lookup takes the
    left mesh endpoint.
    """

    def __init__(self, grid: PolicyGrid):
        self.grid = grid
        self._mesh = grid.t_mesh

    def rate(self, t: float, state: int, k_others_at_zero: int) -> float:
        i = bisect.bisect_right(self._mesh, t) - 1
        i = min(max(i, 0), len(self._mesh) - 1)
        table = self.grid.alpha1 if state == 1 else self.grid.alpha0
        return float(table[i, k_others_at_zero])


class EntropyPolicy(Policy):
    """Decentralized control from the entropy-selected equilibrium.

    alpha(t, i) = (u(t,i) - u(t,1-i))+ along the selected mean-field
    trajectory, independent of the empirical measure.
    """

    def __init__(self, t_mesh: np.ndarray, y: np.ndarray):
        # y(t) = u(t,1) - u(t,0); positive gap means state 1 pays to leave.
        self._t = np.asarray(t_mesh, dtype=float)
        self._y = np.asarray(y, dtype=float)

    def rate(self, t: float, state: int, k_others_at_zero: int) -> float:
        y = float(np.interp(t, self._t, self._y))
        return max(y, 0.0) if state == 1 else max(-y, 0.0)


class ConstantPolicy(Policy):
    """Fixed control level regardless of time and state (test harness)."""

    def __init__(self, level: float = 0.0):
        self.level = float(level)

    def rate(self, t: float, state: int, k_others_at_zero: int) -> float:
        return self.level


@dataclass
class SimConfig:
    n_players: int
    policy: Policy
    eta: float
    horizon: float
    initial_at_zero: Optional[int] = None  # deterministic count at state 0
    theta_bar: Optional[float] = None  # IID alternative
    n_runs: int = 1
    seed: int = 0
    n_report: int = 101

    def __post_init__(self):
        if self.n_players < 1 or self.n_runs < 1:
            raise ValueError("need at least one player and one run")
        if (self.initial_at_zero is None) == (self.theta_bar is None):
            raise ValueError("specify exactly one of initial_at_zero / theta_bar")
        if self.initial_at_zero is not None and not (
            0 <= self.initial_at_zero <= self.n_players
        ):
            raise ValueError("initial count out of range")

    @property
    def rate_bound(self) -> float:
        return 2.0 * self.horizon + self.eta


@dataclass
class RunPath:
    events: List[Tuple[float, int, int]]  # (time, player, new state)
    theta_report: np.ndarray  # all-players fraction at state 0 on the mesh
    terminal_theta: float


@dataclass
class SimResult:
    config: SimConfig
    report_mesh: np.ndarray
    runs: List[RunPath]

    @property
    def terminal_thetas(self) -> np.ndarray:
        return np.array([r.terminal_theta for r in self.runs])

    @property
    def side_counts(self) -> Tuple[int, int, int]:
        tt = self.terminal_thetas
        return (
            int(np.sum(tt > 0.5)),
            int(np.sum(tt < 0.5)),
            int(np.sum(tt == 0.5)),
        )


def _one_run(config: SimConfig, run_index: int) -> RunPath:
    n = config.n_players
    eta, T = config.eta, config.horizon
    bound = config.rate_bound
    rng = np.random.default_rng([config.seed, run_index])
    # states: 1 means "at state 0" for counting convenience? No -- keep the
    # game's labels: state[j] in {0, 1}; theta counts zeros.
    if config.initial_at_zero is not None:
        state = np.zeros(n, dtype=int)
        state[: config.initial_at_zero] = 0
        state[config.initial_at_zero :] = 1
    else:
        state = (rng.random(n) >= config.theta_bar).astype(int)
    k_zero = int(np.sum(state == 0))
    events: List[Tuple[float, int, int]] = []
    mesh = np.linspace(0.0, T, config.n_report)
    theta_report = np.empty(config.n_report)
    next_report = 0
    t = 0.0
    total_bound = n * bound
    while True:
        t_next = t + rng.exponential(1.0 / total_bound) if total_bound > 0 else math.inf
        while next_report < config.n_report and mesh[next_report] < min(t_next, T) + 1e-18:
            theta_report[next_report] = k_zero / n
            next_report += 1
        if t_next >= T:
            break
        t = t_next
        j = int(rng.integers(n))
        # Focal-excluded measure on the N-denominator grid.
        k_others = k_zero - (1 if state[j] == 0 else 0)
        alpha = config.policy.rate(t, int(state[j]), k_others)
        accept_p = (alpha + eta) / bound if bound > 0 else 0.0
        if rng.random() < accept_p:
            state[j] = 1 - state[j]
            k_zero += 1 if state[j] == 0 else -1
            events.append((t, j, int(state[j])))
    while next_report < config.n_report:
        theta_report[next_report] = k_zero / n
        next_report += 1
    return RunPath(events=events, theta_report=theta_report, terminal_theta=k_zero / n)


def simulate(config: SimConfig) -> SimResult:
    """Run all requested paths; each run has its own (seed, run) stream."""
    runs = [_one_run(config, r) for r in range(config.n_runs)]
    return SimResult(
        config=config,
        report_mesh=np.linspace(0.0, config.horizon, config.n_report),
        runs=runs,
    )


def majority_gap_monotone(result: SimResult) -> bool:
    """Whether |theta - 1/2| is pathwise non-decreasing in every run."""
    for r in result.runs:
        gap = np.abs(r.theta_report - 0.5)
        if np.any(np.diff(gap) < -1e-15):
            return False
    return True


@dataclass
class SelectionStats:
    n_runs: int
    above_fraction: float
    below_fraction: float
    exactly_half_fraction: float
    ci99_low: float
    ci99_high: float
    mean_theta_above: Optional[float]
    mean_theta_below: Optional[float]


def selection_stats(result: SimResult) -> SelectionStats:
    """Side fractions with a 99% binomial interval around 1/2.

    The interval is the normal approximation for the above-half fraction
    under the equal-charging hypothesis p = 1/2 (ties excluded from the
    denominator when present).
    """
    above, below, ties = result.side_counts
    n = len(result.runs)
    decided = above + below
    z = 2.5758293035489004  # 99% two-sided normal quantile
    if decided > 0:
        half_width = z * math.sqrt(0.25 / decided)
        frac = above / decided
    else:
        half_width, frac = 0.0, 0.5
    tt = result.terminal_thetas
    return SelectionStats(
        n_runs=n,
        above_fraction=above / n,
        below_fraction=below / n,
        exactly_half_fraction=ties / n,
        ci99_low=0.5 - half_width,
        ci99_high=0.5 + half_width,
        mean_theta_above=float(np.mean(tt[tt > 0.5])) if above else None,
        mean_theta_below=float(np.mean(tt[tt < 0.5])) if below else None,
    )


def first_jump_times(
    n_samples: int, rate: float, horizon: float, seed: int = 0
) -> np.ndarray:
    """First accepted jump time of a single constant-rate player, by thinning.

    Used as the exactness control: the output must be Exp(rate) censored at
    the horizon.  Samples that never jump are returned as +inf.
    """
    bound = 2.0 * horizon + rate
    out = np.empty(n_samples)
    for s in range(n_samples):
        rng = np.random.default_rng([seed, s])
        t = 0.0
        while True:
            t += rng.exponential(1.0 / bound)
            if t >= horizon:
                out[s] = math.inf
                break
            if rng.random() < rate / bound:
                out[s] = t
                break
    return out
