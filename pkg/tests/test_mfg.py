import math

import numpy as np
import pytest

from twostate_mfg.model import ModelParams, regime, x_threshold
from twostate_mfg import characteristics as ch
from twostate_mfg import mfg
from twostate_mfg import quadrature as q


def test_count_at_half_zero_coupling():
    # Zero-hit limits are odd multiples of pi/2, so 1, 3, 5 solutions.
    assert mfg.count_at_half(0.0, 1.0) == 1
    assert mfg.count_at_half(0.0, 3.0) == 3
    assert mfg.count_at_half(0.0, 5.0) == 5
    assert mfg.count_at_half(0.6, 50.0) == 1


def test_enumerate_matches_closed_form_and_scan_at_half():
    for T in (1.0, 3.0, 5.0):
        params = ModelParams(eta=0.0, horizon=T, theta_bar=0.5)
        n = mfg.count_at_half(0.0, T)
        assert mfg.enumerate_equilibria(params, scan_resolution=1e-3).count == n
        assert mfg.scan_count(params, resolution=2e-3) == n


@pytest.mark.parametrize(
    "eta,T,theta_bar",
    [(0.1, 3.0, 0.7), (0.1, 6.0, 0.55), (0.25, 4.0, 0.5), (0.4, 7.0, 0.52),
     (0.6, 3.0, 0.7), (0.0, 4.5, 0.62)],
)
def test_enumerate_agrees_with_brute_force_scan(eta, T, theta_bar):
    params = ModelParams(eta=eta, horizon=T, theta_bar=theta_bar)
    report = mfg.enumerate_equilibria(params, scan_resolution=1e-3)
    assert report.count == mfg.scan_count(params, resolution=1e-3)
    for sol in report.solutions:
        assert abs(sol.residual) < 1e-10


def test_solutions_are_odd_at_balanced_target():
    params = ModelParams(eta=0.1, horizon=6.0, theta_bar=0.5)
    report = mfg.enumerate_equilibria(params, scan_resolution=1e-3)
    vs = sorted(s.v for s in report.solutions)
    assert vs == pytest.approx([-v for v in reversed(vs)], abs=1e-9)
    assert 0.0 in vs


def test_entropy_selected_is_the_stopped_root():
    params = ModelParams(eta=0.1, horizon=6.0, theta_bar=0.55)
    report = mfg.enumerate_equilibria(params, scan_resolution=1e-3)
    sel = report.entropy_selected
    assert sel.stopped
    assert sel.v == max(s.v for s in report.solutions)
    # The stopped root survives past its own first zero-hit horizon.
    assert q.zero_hit_time(1, sel.v, 0.1) > params.horizon


def test_unique_regime_single_root_any_target():
    rng = np.random.default_rng(2)
    for _ in range(10):
        eta = float(rng.uniform(0.5, 1.2))
        T = float(rng.uniform(0.5, 6.0))
        tb = float(rng.uniform(0.0, 1.0))
        params = ModelParams(eta=eta, horizon=T, theta_bar=tb)
        report = mfg.enumerate_equilibria(params)
        assert report.count == 1
        assert abs(report.solutions[0].residual) < 1e-10


def test_threshold_excludes_multiplicity():
    # Targets at/above the threshold admit exactly one equilibrium even in
    # the multiplicity-prone band eta < 1/2.
    eta = 0.1
    thr = x_threshold(eta)
    for T in (1.0, 3.0, 6.0):
        for tb in ((1 + thr) / 2, (1 + thr) / 2 + 0.02):
            params = ModelParams(eta=eta, horizon=T, theta_bar=tb)
            assert mfg.enumerate_equilibria(params).count == 1


def test_solve_stopped_signs_and_zero():
    params = ModelParams(eta=0.1, horizon=2.0, theta_bar=0.5)
    assert mfg.solve_stopped(params) == 0.0
    up = mfg.solve_stopped(ModelParams(eta=0.1, horizon=2.0, theta_bar=0.8))
    dn = mfg.solve_stopped(ModelParams(eta=0.1, horizon=2.0, theta_bar=0.2))
    assert up > 0 and dn == pytest.approx(-up, abs=1e-12)


def test_recover_trajectories_consistency():
    params = ModelParams(eta=0.1, horizon=3.0, theta_bar=0.7)
    v = mfg.solve_stopped(params)
    sol = mfg.recover_trajectories(v, params, n_points=2048)
    # Boundary data: theta starts at the prescribed fraction, values vanish
    # at the horizon.
    assert sol.theta[0] == pytest.approx(0.7, abs=1e-12)
    assert sol.u0[-1] == 0.0 and sol.u1[-1] == 0.0
    assert sol.y[-1] == 0.0
    # The recovered value gap reproduces the characteristic state.
    yq, _ = ch.eval_state(v, 0.1, params.horizon - sol.t[::128])
    assert np.max(np.abs(sol.y[::128] - yq)) < 1e-7
    # theta stays a probability and matches the characteristic x.
    assert np.all((sol.theta >= 0) & (sol.theta <= 1))
    xq = ch.eval_x(v, 0.1, params.horizon - sol.t[::128])
    assert np.max(np.abs(2 * sol.theta[::128] - 1 - xq)) < 1e-12


def test_recover_trajectories_flat_equilibrium():
    params = ModelParams(eta=0.2, horizon=1.0, theta_bar=0.5)
    sol = mfg.recover_trajectories(0.0, params)
    assert np.allclose(sol.theta, 0.5)
    assert np.allclose(sol.y, 0.0)
    # Flat game: both states pay 1/2 per unit time, no control.
    assert sol.u0[0] == pytest.approx(0.5, abs=1e-10)
    assert sol.u1[0] == pytest.approx(0.5, abs=1e-10)


def test_recovered_values_solve_the_value_odes():
    # Finite-difference check of -du_i/dt = f(i, theta) - eta (u_i - u_{1-i})
    #                                       - ((u_i - u_{1-i})_+)^2 / 2.
    params = ModelParams(eta=0.3, horizon=2.0, theta_bar=0.8)
    v = mfg.solve_stopped(params)
    sol = mfg.recover_trajectories(v, params, n_points=4096)
    t, u0, u1, th = sol.t, sol.u0, sol.u1, sol.theta
    h = t[1] - t[0]
    du0 = (u0[2:] - u0[:-2]) / (2 * h)
    du1 = (u1[2:] - u1[:-2]) / (2 * h)
    y = u1 - u0
    rhs0 = -((1 - th) - 0.3 * (u0 - u1) - 0.5 * np.maximum(u0 - u1, 0.0) ** 2)
    rhs1 = -(th - 0.3 * (u1 - u0) - 0.5 * np.maximum(u1 - u0, 0.0) ** 2)
    assert np.max(np.abs(du0 - rhs0[1:-1])) < 1e-5
    assert np.max(np.abs(du1 - rhs1[1:-1])) < 1e-5


def test_scan_limit_is_past_all_roots():
    eta, T = 0.1, 3.0
    vmax = mfg.v_scan_limit(eta, T)
    assert q.escape_time(vmax, eta) < T
