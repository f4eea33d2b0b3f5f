import numpy as np
import pytest

from dqform import quat as qt
from dqform.cluster import Cluster3RState, forward_3r, robots_from_cluster_3r
from dqform.gains import (
    GainSchedule2R,
    GainSchedule3R,
    Inertia,
    fixed_gains_2r,
    fixed_gains_3r,
    formation_inertia,
    inertia_3r,
    inertia_envelope_extrema,
    interp_gains,
    lambda_from_distance,
    lambda_from_inertia,
    scheduled_gains_2r,
    scheduled_gains_3r,
)

SCHED2 = GainSchedule2R()
SCHED3 = GainSchedule3R()


def test_lambda_from_distance_endpoints_and_middle():
    assert lambda_from_distance(10.0, SCHED2) == 0.0
    assert lambda_from_distance(50.0, SCHED2) == 1.0
    assert lambda_from_distance(30.0, SCHED2) == pytest.approx(0.5, abs=0)


def test_lambda_from_distance_clamps():
    assert lambda_from_distance(5.0, SCHED2) == 0.0
    assert lambda_from_distance(80.0, SCHED2) == 1.0


def test_interp_gains_endpoints_and_middle():
    assert interp_gains(0.0, 50.0, 300.0) == 50.0
    assert interp_gains(1.0, 50.0, 300.0) == 300.0
    assert interp_gains(0.5, 50.0, 300.0) == 175.0


def test_interp_gains_monotone_and_rejects():
    lam = np.linspace(0, 1, 11)
    vals = interp_gains(lam, 50.0, 300.0)
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        interp_gains(1.2, 50.0, 300.0)
    with pytest.raises(ValueError):
        interp_gains(-0.1, 50.0, 300.0)


def test_inertia_equilateral_example():
    st = forward_3r(np.zeros(3), np.array([1.0, 0, 0]), np.array([0.5, 0.866025, 0.0]))
    inertia = inertia_3r(st)
    assert inertia.ix == pytest.approx(0.5, abs=1e-6)
    assert inertia.iy == pytest.approx(0.5, abs=1e-6)
    assert inertia.iz == pytest.approx(1.0, abs=1e-6)


def test_inertia_collinear_synthetic():
    # robots on the body x-axis cannot come from forward_3r; probe the
    # position-level helper directly
    pos = np.array([[-1.0, 0, 0], [0.5, 0, 0], [0.5, 0, 0]])
    inertia = formation_inertia(pos, np.zeros(3), np.eye(3))
    assert inertia.ix == 0.0
    assert inertia.iy == pytest.approx(inertia.iz, abs=0)


def test_inertia_quadratic_scaling():
    rng = np.random.default_rng(60)
    st = Cluster3RState(
        p=np.zeros(3), rot=np.eye(3), d2=30.0, d3=40.0, alpha=1.0
    )
    base = inertia_3r(st)
    s = 2.5
    scaled = inertia_3r(Cluster3RState(p=st.p, rot=st.rot, d2=s * 30.0, d3=s * 40.0, alpha=1.0))
    np.testing.assert_allclose(scaled.as_array, s**2 * base.as_array, rtol=1e-12)


def test_inertia_rigid_motion_invariance():
    rng = np.random.default_rng(61)
    st = Cluster3RState(
        p=rng.standard_normal(3) * 10,
        rot=qt.rot_matrix(qt.random_unit_quat(rng)),
        d2=35.0, d3=25.0, alpha=1.2,
    )
    a = inertia_3r(st)
    q = qt.random_unit_quat(rng)
    st2 = Cluster3RState(
        p=qt.rotate(q, st.p) + np.array([5.0, -2.0, 1.0]),
        rot=qt.rot_matrix(q) @ st.rot,
        d2=st.d2, d3=st.d3, alpha=st.alpha,
    )
    np.testing.assert_allclose(inertia_3r(st2).as_array, a.as_array, atol=1e-10)


def test_inertia_planar_identity():
    rng = np.random.default_rng(62)
    for _ in range(20):
        st = Cluster3RState(
            p=rng.standard_normal(3),
            rot=qt.rot_matrix(qt.random_unit_quat(rng)),
            d2=rng.uniform(20, 50), d3=rng.uniform(20, 50),
            alpha=rng.uniform(0.6, 2.5),
        )
        inertia = inertia_3r(st)
        assert inertia.iz == pytest.approx(inertia.ix + inertia.iy, abs=1e-10)


def test_envelope_extrema_against_position_oracle():
    # independent oracle: rebuild robots and take moments from positions
    lo, hi = inertia_envelope_extrema()
    corners = {
        "rollyaw_hi": (50.0, 50.0, np.deg2rad(150.0)),
        "rollyaw_lo": (20.0, 20.0, np.deg2rad(30.0)),
        "iy_hi": (20.0, 50.0, np.deg2rad(150.0)),
        "iy_lo": (20.0, 20.0, np.deg2rad(150.0)),
    }
    vals = {}
    for name, (d2, d3, al) in corners.items():
        st = Cluster3RState(p=np.zeros(3), rot=np.eye(3), d2=d2, d3=d3, alpha=al)
        vals[name] = inertia_3r(st)
    assert hi[0] == pytest.approx(vals["rollyaw_hi"].ix, rel=1e-12)
    assert lo[0] == pytest.approx(vals["rollyaw_lo"].ix, rel=1e-12)
    assert hi[2] == pytest.approx(vals["rollyaw_hi"].iz, rel=1e-12)
    assert lo[2] == pytest.approx(vals["rollyaw_lo"].iz, rel=1e-12)
    assert hi[1] == pytest.approx(vals["iy_hi"].iy, rel=1e-12)
    assert lo[1] == pytest.approx(vals["iy_lo"].iy, rel=1e-12)


def test_scheduled_gains_3r_endpoints():
    lo, hi = SCHED3.i_min, SCHED3.i_max
    g_hi = scheduled_gains_3r(Inertia(*hi), SCHED3)
    np.testing.assert_allclose(np.diagonal(g_hi.k_omega_i), [2.5, 3.2, 0.8], atol=0)
    g_lo = scheduled_gains_3r(Inertia(*lo), SCHED3)
    np.testing.assert_allclose(np.diagonal(g_lo.k_omega_i), [0.5, 0.32, 0.08], atol=0)


def test_scheduled_gains_3r_kp_half_ki():
    rng = np.random.default_rng(63)
    inertia = Inertia(
        ix=rng.uniform(*[SCHED3.i_min[0], SCHED3.i_max[0]]),
        iy=rng.uniform(*[SCHED3.i_min[1], SCHED3.i_max[1]]),
        iz=rng.uniform(*[SCHED3.i_min[2], SCHED3.i_max[2]]),
    )
    g = scheduled_gains_3r(inertia, SCHED3)
    np.testing.assert_allclose(g.k_omega_p, g.k_omega_i / 2.0, atol=0)


def test_scheduled_gains_3r_bounds_envelope():
    # attitude eigenvalues stay within [min endpoint / 2, max endpoint]
    rng = np.random.default_rng(64)
    for _ in range(50):
        inertia = Inertia(
            ix=rng.uniform(1.0, 10000.0), iy=rng.uniform(1.0, 10000.0),
            iz=rng.uniform(1.0, 10000.0),
        )
        g = scheduled_gains_3r(inertia, SCHED3)
        ki = np.diagonal(g.k_omega_i)
        kp = np.diagonal(g.k_omega_p)
        assert np.all(ki >= np.array([0.5, 0.32, 0.08]) - 1e-15)
        assert np.all(ki <= np.array([2.5, 3.2, 0.8]) + 1e-15)
        assert np.all(kp >= np.array([0.5, 0.32, 0.08]) / 2 - 1e-15)


def test_schedule_lipschitz_continuity():
    # finite-difference slope of each scheduled gain bounded by
    # (k2 - k1)/(sqrt(Imax) - sqrt(Imin)) per unit sqrt(I)
    sched = SCHED3
    for axis in range(3):
        lo, hi = sched.i_min[axis], sched.i_max[axis]
        bound = (sched.ki2[axis] - sched.ki1[axis]) / (np.sqrt(hi) - np.sqrt(lo))
        s = np.linspace(np.sqrt(lo) * 0.8, np.sqrt(hi) * 1.2, 2000)
        vals = np.empty_like(s)
        for k, sv in enumerate(s):
            i = [1.0, 1.0, 1.0]
            i[axis] = sv**2
            vals[k] = np.diagonal(scheduled_gains_3r(Inertia(*i), sched).k_omega_i)[axis]
        slopes = np.abs(np.diff(vals) / np.diff(s))
        assert np.max(slopes) <= bound * (1 + 1e-9)


def test_scheduled_gains_2r_table():
    g = scheduled_gains_2r(10.0, SCHED2)
    np.testing.assert_allclose(np.diagonal(g.k_omega_p), 10.0, atol=0)
    np.testing.assert_allclose(np.diagonal(g.k_omega_i), 50.0, atol=0)
    g = scheduled_gains_2r(50.0, SCHED2)
    np.testing.assert_allclose(np.diagonal(g.k_omega_p), 60.0, atol=0)
    np.testing.assert_allclose(np.diagonal(g.k_omega_i), 300.0, atol=0)
    g = scheduled_gains_2r(30.0, SCHED2)
    np.testing.assert_allclose(np.diagonal(g.k_omega_i), 175.0, atol=0)
    np.testing.assert_allclose(np.diagonal(g.k_omega_p), 35.0, atol=0)


def test_fixed_gain_baselines():
    g2 = fixed_gains_2r(SCHED2)
    np.testing.assert_allclose(np.diagonal(g2.k_omega_p), 35.0, atol=0)
    np.testing.assert_allclose(np.diagonal(g2.k_omega_i), 175.0, atol=0)
    g3 = fixed_gains_3r(SCHED3)
    np.testing.assert_allclose(np.diagonal(g3.k_omega_i), [1.5, 1.76, 0.44], atol=1e-15)
    np.testing.assert_allclose(np.diagonal(g3.k_omega_p), [0.75, 0.88, 0.22], atol=1e-15)


def test_schedule_validation():
    with pytest.raises(ValueError):
        GainSchedule2R(d_min=50.0, d_max=10.0)
    with pytest.raises(ValueError):
        GainSchedule2R(ki1=-1.0)
    with pytest.raises(ValueError):
        GainSchedule3R(ki1=(0.0, 0.3, 0.1))


def test_lambda_from_inertia_clamped():
    lam = lambda_from_inertia(Inertia(1e-6, 1e-6, 1e-6), SCHED3)
    np.testing.assert_allclose(lam, 0.0, atol=0)
    lam = lambda_from_inertia(Inertia(1e8, 1e8, 1e8), SCHED3)
    np.testing.assert_allclose(lam, 1.0, atol=0)
