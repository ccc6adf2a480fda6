import math

import numpy as np
import pytest

from twostate_mfg.model import potential, regime
from twostate_mfg import characteristics as ch
from twostate_mfg import quadrature as q


def _random_test_matrix(n, seed):
    """(v, eta) pairs covering oscillatory and escaping branches."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        eta = float(rng.choice([0.0, 0.1, 0.25, 0.4, 0.6]))
        reg = regime(eta)
        if reg.v_zero is not None and rng.random() < 0.7:
            v = float(rng.uniform(0.05, 0.98) * reg.v_zero)
        else:
            lo = reg.v_zero * 1.05 if reg.v_zero is not None else 0.05
            v = float(rng.uniform(lo, lo + 1.0))
        if rng.random() < 0.5:
            v = -v
        out.append((v, eta))
    return out


def _oscillatory_test_matrix(n, seed):
    """(v, eta) pairs whose paths stay bounded for all time."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        eta = float(rng.choice([0.0, 0.1, 0.25, 0.4]))
        v = float(rng.uniform(0.05, 0.98) * regime(eta).v_zero)
        if rng.random() < 0.5:
            v = -v
        out.append((v, eta))
    return out


def test_energy_conservation_along_integrated_paths():
    # First integral: ydot^2 - G(y) = v^2 along every path up to t = 20
    # (only oscillatory paths exist that long).
    for v, eta in _oscillatory_test_matrix(20, seed=3):
        path = ch.integrate_path(v, eta, 20.0, step=1e-3)
        drift = path.ydot**2 - potential(path.y, eta) - v * v
        assert np.max(np.abs(drift)) < 1e-8


def test_energy_conservation_on_escaping_paths():
    # Escaping paths checked on a bounded window with a finer step.
    for v, eta in [(0.9, 0.1), (1.4, 0.0), (0.3, 0.6), (-1.1, 0.25)]:
        t_max = 0.8 * q.escape_time(v, eta)
        path = ch.integrate_path(v, eta, t_max, step=2e-4)
        drift = path.ydot**2 - potential(path.y, eta) - v * v
        assert np.max(np.abs(drift)) < 1e-8


def test_quadrature_and_ode_routes_agree():
    rng = np.random.default_rng(11)
    for v, eta in _random_test_matrix(30, seed=5):
        t_max = 12.0
        if regime(eta).v_zero is None or abs(v) >= regime(eta).v_zero:
            t_max = min(t_max, 0.8 * q.escape_time(v, eta))
        path = ch.integrate_path(v, eta, t_max, step=2e-4)
        idx = rng.integers(1, len(path.t), size=5)
        yq, ydq = ch.eval_state(v, eta, path.t[idx])
        assert np.max(np.abs(yq - path.y[idx])) < 1e-7
        assert np.max(np.abs(ydq - path.ydot[idx])) < 1e-7


def test_paths_are_odd_in_velocity():
    for v, eta in [(0.4, 0.1), (0.2, 0.25), (1.2, 0.0)]:
        t_hi = 6.0
        reg = regime(eta)
        if reg.v_zero is None or abs(v) >= reg.v_zero:
            t_hi = min(t_hi, 0.9 * q.escape_time(v, eta))
        ts = np.linspace(0.0, t_hi, 40)
        yp, ydp = ch.eval_state(v, eta, ts)
        ym, ydm = ch.eval_state(-v, eta, ts)
        assert np.allclose(yp, -ym, atol=1e-12)
        assert np.allclose(ydp, -ydm, atol=1e-12)
        assert np.allclose(ch.eval_x(v, eta, ts), -ch.eval_x(-v, eta, ts), atol=1e-12)


def test_oscillatory_periodicity_and_antiperiodicity():
    v, eta = 0.5, 0.1
    p = ch.QuadPath(v, eta)
    T = p.T
    ts = np.linspace(0.0, 2.0, 23)
    assert np.allclose(p.x(ts + 4 * T), p.x(ts), atol=1e-9)
    assert np.allclose(p.x(ts + 2 * T), -p.x(ts), atol=1e-9)
    y0, _ = p.state(ts)
    y1, _ = p.state(ts + 4 * T)
    assert np.allclose(y0, y1, atol=1e-9)


def test_quarter_structure_turning_point():
    v, eta = 0.6, 0.1
    p = ch.QuadPath(v, eta)
    y_turn, yd_turn = p.state(p.T)
    assert y_turn == pytest.approx(p.y_turn, abs=1e-10)
    assert yd_turn == pytest.approx(0.0, abs=1e-8)
    # Signs over the four quarters.
    y_q, yd_q = p.state(np.array([0.5, 1.5, 2.5, 3.5]) * p.T)
    assert np.all(np.sign(y_q) == [1, 1, -1, -1])
    assert np.all(np.sign(yd_q) == [1, -1, -1, 1])


def test_first_zero_matches_zero_hit_quadrature():
    for v, eta in [(0.2, 0.0), (0.45, 0.1), (0.7, 0.1), (0.15, 0.25)]:
        t_ode = ch.first_zero_of_x(v, eta, step=5e-4)
        t_quad = q.zero_hit_time(1, v, eta)
        assert t_ode == pytest.approx(t_quad, abs=1e-8)
    assert ch.first_zero_of_x(0.5, 0.6) == math.inf
    assert ch.first_zero_of_x(regime(0.1).v_zero * 1.2, 0.1) == math.inf


def test_blowup_detection_and_escape_metadata():
    eta = 0.1
    v = regime(eta).v_zero * 1.3
    t_esc = q.escape_time(v, eta)
    with pytest.raises(ch.BlowUpError) as err:
        ch.integrate_path(v, eta, t_esc + 1.0, step=1e-4)
    assert err.value.escape_time == pytest.approx(t_esc, rel=1e-6)
    p = ch.QuadPath(v, eta)
    with pytest.raises(ch.BlowUpError):
        p.state(t_esc + 0.5)


def test_shooting_terminal_matches_scalar_integration():
    eta, T = 0.1, 2.5
    vs = np.array([-0.8, -0.3, 0.0, 0.2, 0.6, 1.5])
    batch = ch.shooting_terminal(vs, T, eta, step=5e-4)
    for v, xb in zip(vs, batch):
        if v == 0.0:
            assert xb == 0.0
            continue
        if math.isinf(xb):
            assert q.escape_time(v, eta) < T
            continue
        path = ch.integrate_path(v, eta, T, step=5e-4)
        assert xb == pytest.approx(path.x[-1], abs=1e-9)


def test_shooting_terminal_escape_sentinels():
    eta, T = 0.1, 6.0
    vs = np.array([-2.5, 2.5])
    out = ch.shooting_terminal(vs, T, eta)
    assert out[0] == -math.inf and out[1] == math.inf


def test_stopped_branch_monotone_in_velocity():
    # On {v : T < T1(v)} the map v -> x_v(T) is strictly increasing.
    eta, T = 0.1, 3.0
    v_lo = q.period_table(eta).solve_t1(T)
    vs = np.linspace(v_lo * 1.001, v_lo + 0.4, 60)
    xs = [float(ch.eval_x(v, eta, T)) for v in vs]
    assert np.all(np.diff(xs) > 0)
