import math

import numpy as np
import pytest

from twostate_mfg.model import regime, smallest_positive_root
from twostate_mfg import quadrature as q


# High-precision reference values (60-digit arithmetic, independent
# tanh-sinh integration of the period integrals after deflating the
# turning-point root): (v, eta) -> (y(v), T(v), H(v)).
PERIOD_ORACLE = {
    (0.3, 0.1): ("0.321671164757845671", "1.71498392600185776", "0.409176986350296309"),
    (0.6, 0.1): ("0.725986694849342142", "2.07911601637851124", "0.846496223460812264"),
    (0.72, 0.1): ("1.0294322341891487", "3.11324765101396531", "1.90607721162427195"),
    (0.2, 0.25): ("0.257152746776176887", "2.09823458961468258", "0.930707668083331309"),
    (0.05, 0.4): ("0.0940662837880934892", "3.07868545704543957", "2.01379968996623162"),
    (0.5, 0.0): ("0.517638090205041525", "1.65663817023659417", "0.28107713630831076"),
    (0.9, 0.0): ("1.06217710919218429", "2.09202039988734618", "0.823137046007963016"),
}

ESCAPE_ORACLE = {
    (0.9, 0.1): "3.70922694813921128",
    (1.5, 0.1): "2.38352284812098474",
    (0.4, 0.6): "2.69034909138318191",
    (1.1, 0.0): "3.98357329637396679",
}


@pytest.mark.parametrize("key", sorted(PERIOD_ORACLE))
def test_period_integrals_against_high_precision_reference(key):
    v, eta = key
    y_ref, T_ref, H_ref = (float(s) for s in PERIOD_ORACLE[key])
    assert smallest_positive_root(v, eta) == pytest.approx(y_ref, rel=1e-13)
    assert q.quarter_period(v, eta) == pytest.approx(T_ref, rel=1e-11)
    assert q.lag(v, eta) == pytest.approx(H_ref, rel=1e-11)


@pytest.mark.parametrize("key", sorted(ESCAPE_ORACLE))
def test_escape_time_against_high_precision_reference(key):
    v, eta = key
    assert q.escape_time(v, eta) == pytest.approx(float(ESCAPE_ORACLE[key]), rel=1e-10)


@pytest.mark.parametrize("eta", [0.0, 0.1, 0.25, 0.4])
def test_small_velocity_limits_match_linearization(eta):
    # Linearized oscillator frequency omega = sqrt(1 - 4 eta^2):
    # T(0+) = pi / (2 omega), H(0+) = (pi/2 - arcsin(omega)) / omega.
    w = math.sqrt(1.0 - 4.0 * eta * eta)
    v = 1e-7 * regime(eta).v_zero
    assert q.quarter_period(v, eta) == pytest.approx(math.pi / (2 * w), abs=1e-6)
    assert q.lag(v, eta) == pytest.approx((math.pi / 2 - math.asin(w)) / w, abs=1e-6)


@pytest.mark.parametrize("eta", [0.0, 0.1, 0.25, 0.4])
def test_periods_monotone_in_velocity(eta):
    v0 = regime(eta).v_zero
    vs = np.linspace(0.01, 0.999, 50) * v0
    T = np.array([q.quarter_period(v, eta) for v in vs])
    H = np.array([q.lag(v, eta) for v in vs])
    assert np.all(np.diff(T) > 0)
    assert np.all(np.diff(H) > 0)


def test_zero_hit_times_are_period_combinations():
    v, eta = 0.4, 0.1
    T, H = q.quarter_period(v, eta), q.lag(v, eta)
    for k in (1, 2, 5):
        assert q.zero_hit_time(k, v, eta) == pytest.approx((2 * k - 1) * T + H)
    assert q.zero_hit_time(1, -v, eta) == q.zero_hit_time(1, v, eta)
    with pytest.raises(ValueError):
        q.zero_hit_time(0, v, eta)


def test_zero_hit_infinite_outside_band():
    v0 = regime(0.1).v_zero
    assert q.zero_hit_time(1, v0, 0.1) == math.inf
    assert q.zero_hit_time(1, 2.0, 0.1) == math.inf
    assert q.zero_hit_time(1, 0.5, 0.6) == math.inf


def test_escape_time_infinite_at_band_edge_and_rejects_inside():
    v0 = regime(0.1).v_zero
    assert q.escape_time(v0, 0.1) == math.inf
    with pytest.raises(ValueError):
        q.escape_time(0.5 * v0, 0.1)
    # Escape time decreases as the launch speed grows.
    ts = [q.escape_time(v, 0.1) for v in (0.8, 1.0, 1.5, 2.5)]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_implicit_time_inverts_the_oscillation():
    v, eta = 0.45, 0.1
    yv = smallest_positive_root(v, eta)
    for frac in (0.2, 0.6, 0.95):
        t = q.implicit_time(frac * yv, v, eta)
        assert 0 < t < q.quarter_period(v, eta)
    assert q.implicit_time(yv, v, eta) == pytest.approx(q.quarter_period(v, eta))


def test_period_table_inverts_first_zero_hit():
    table = q.period_table(0.1)
    for v in (0.1, 0.3, 0.5, 0.7):
        t1 = table.t1(v)
        assert t1 == pytest.approx(q.zero_hit_time(1, v, 0.1), rel=1e-12)
        assert table.solve_t1(t1) == pytest.approx(v, rel=1e-9)


def test_period_table_small_velocity_limits():
    table = q.period_table(0.1)
    w = math.sqrt(1.0 - 0.04)
    assert table.T_limit_at_zero == pytest.approx(math.pi / (2 * w), abs=1e-8)
    assert table.H_limit_at_zero == pytest.approx(
        (math.pi / 2 - math.asin(w)) / w, abs=1e-8
    )
    assert table.T1_limit_at_zero == pytest.approx(
        table.T_limit_at_zero + table.H_limit_at_zero, abs=1e-8
    )
