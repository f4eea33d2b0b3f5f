import numpy as np
import pytest

from dqform import quat as qt
from dqform.cluster import (
    Cluster3RState,
    ClusterVelocity3R,
    GeometryReference2R,
    GeometryReference3R,
    alpha_split,
    forward_2r,
    forward_3r,
    geometry_control_2r,
    geometry_control_3r,
    inverse_vel_2r,
    inverse_vel_3r,
    mn_coeffs,
    robots_from_cluster_3r,
)
from dqform.errors import DegenerateFormationError, SingularGeometryError


def random_3r_state(rng, n=None):
    """Nondegenerate cluster states inside the schedule envelope."""
    shape = () if n is None else (n,)
    return Cluster3RState(
        p=rng.uniform(-20, 20, shape + (3,)),
        rot=qt.rot_matrix(qt.random_unit_quat(rng, shape)),
        d2=rng.uniform(20.0, 50.0, shape),
        d3=rng.uniform(20.0, 50.0, shape),
        alpha=rng.uniform(np.deg2rad(30), np.deg2rad(150), shape),
    )


# ---------------------------------------------------------------------------
# 2R


def test_forward_2r_example():
    st = forward_2r(np.zeros(3), np.array([0.0, 0, 2.0]))
    np.testing.assert_allclose(st.p, [0, 0, 1], atol=0)
    np.testing.assert_allclose(st.z, [0, 0, 1], atol=0)
    assert st.d == pytest.approx(2.0, abs=0)


def test_forward_2r_swap_symmetry():
    rng = np.random.default_rng(40)
    r1 = rng.standard_normal((20, 3)) * 10
    r2 = r1 + rng.uniform(1, 5, (20, 1)) * qt.quat_normalize(rng.standard_normal((20, 4)))[:, 1:]
    a = forward_2r(r1, r2)
    b = forward_2r(r2, r1)
    np.testing.assert_allclose(a.p, b.p, atol=0)
    np.testing.assert_allclose(a.d, b.d, atol=1e-15)
    np.testing.assert_allclose(a.z, -b.z, atol=0)


def test_forward_2r_degenerate():
    with pytest.raises(DegenerateFormationError):
        forward_2r(np.ones(3), np.ones(3))


def test_inverse_vel_2r_rigid_translation():
    st = forward_2r(np.zeros(3), np.array([0.0, 0, 2.0]))
    v = np.array([0.3, -0.1, 0.7])
    r1dot, r2dot = inverse_vel_2r(st, v, np.zeros(3), 0.0)
    np.testing.assert_allclose(r1dot, v, atol=0)
    np.testing.assert_allclose(r2dot, v, atol=0)


def test_inverse_vel_2r_pure_stretch():
    st = forward_2r(np.zeros(3), np.array([0.0, 0, 2.0]))
    r1dot, r2dot = inverse_vel_2r(st, np.zeros(3), np.zeros(3), 1.0)
    np.testing.assert_allclose(r1dot, [0, 0, -0.5], atol=0)
    np.testing.assert_allclose(r2dot, [0, 0, 0.5], atol=0)


def test_inverse_vel_2r_spin_about_own_axis():
    st = forward_2r(np.zeros(3), np.array([0.0, 0, 2.0]))
    r1dot, r2dot = inverse_vel_2r(st, np.zeros(3), np.array([0.0, 0, 1.0]), 0.0)
    np.testing.assert_allclose(r1dot, np.zeros(3), atol=0)
    np.testing.assert_allclose(r2dot, np.zeros(3), atol=0)


def test_inverse_vel_2r_finite_difference():
    # reconstruction r1 = p - d/2 z, r2 = p + d/2 z, z rotating with omega
    rng = np.random.default_rng(41)
    h = 1e-6
    for _ in range(20):
        p = rng.standard_normal(3) * 5
        z = rng.standard_normal(3)
        z /= np.linalg.norm(z)
        d = rng.uniform(10, 50)
        st = forward_2r(p - 0.5 * d * z, p + 0.5 * d * z)
        v = rng.standard_normal(3)
        omega = rng.standard_normal(3)
        ddot = rng.standard_normal()

        def rec(t):
            zt = qt.rotate(qt.quat_exp(0.5 * t * omega), z)
            pt = p + t * v
            dt_ = d + t * ddot
            return pt - 0.5 * dt_ * zt, pt + 0.5 * dt_ * zt

        (r1p, r2p), (r1m, r2m) = rec(h), rec(-h)
        fd1, fd2 = (r1p - r1m) / (2 * h), (r2p - r2m) / (2 * h)
        a1, a2 = inverse_vel_2r(st, v, omega, ddot)
        np.testing.assert_allclose(a1, fd1, atol=1e-8)
        np.testing.assert_allclose(a2, fd2, atol=1e-8)


# ---------------------------------------------------------------------------
# 3R forward kinematics


def test_forward_3r_equilateral_example():
    st = forward_3r(
        np.zeros(3), np.array([1.0, 0, 0]), np.array([0.5, 0.866025, 0.0])
    )
    np.testing.assert_allclose(st.p, [0.5, 0.288675, 0], atol=1e-6)
    np.testing.assert_allclose(st.x_axis, [0.866025, 0.5, 0], atol=1e-6)
    np.testing.assert_allclose(st.z_axis, [0, 0, 1], atol=1e-6)
    np.testing.assert_allclose(st.y_axis, [-0.5, 0.866025, 0], atol=1e-6)
    assert st.d2 == pytest.approx(1.0, abs=1e-12)
    assert st.d3 == pytest.approx(1.0, abs=1e-6)
    assert st.alpha == pytest.approx(np.pi / 3, abs=1e-6)


def test_forward_3r_rigid_motion_equivariance():
    rng = np.random.default_rng(42)
    r1 = rng.standard_normal((20, 3)) * 10
    r2 = r1 + rng.uniform(20, 50, (20, 1)) * np.array([1.0, 0, 0])
    r3 = r1 + rng.uniform(20, 50, (20, 1)) * np.array([0.5, 0.8, 0.1])
    q = qt.random_unit_quat(rng, (20,))
    t = rng.standard_normal((20, 3))
    a = forward_3r(r1, r2, r3)
    b = forward_3r(qt.rotate(q, r1) + t, qt.rotate(q, r2) + t, qt.rotate(q, r3) + t)
    np.testing.assert_allclose(b.p, qt.rotate(q, a.p) + t, atol=1e-10)
    np.testing.assert_allclose(b.rot, qt.rot_matrix(q) @ a.rot, atol=1e-10)
    np.testing.assert_allclose(b.d2, a.d2, atol=1e-10)
    np.testing.assert_allclose(b.d3, a.d3, atol=1e-10)
    np.testing.assert_allclose(b.alpha, a.alpha, atol=1e-10)


def test_forward_3r_so3_membership():
    rng = np.random.default_rng(43)
    st = forward_3r(
        rng.standard_normal((50, 3)),
        rng.standard_normal((50, 3)) * 5 + 20,
        rng.standard_normal((50, 3)) * 5 - 20,
    )
    RtR = np.swapaxes(st.rot, -1, -2) @ st.rot
    np.testing.assert_allclose(RtR, np.broadcast_to(np.eye(3), RtR.shape), atol=1e-9)
    np.testing.assert_allclose(np.linalg.det(st.rot), 1.0, atol=1e-9)


def test_forward_3r_degenerate_cases():
    with pytest.raises(DegenerateFormationError):
        forward_3r(np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))
    # r1 exactly at the centroid of r2, r3 reflected arrangement
    r2 = np.array([1.0, 0.5, 0.0])
    r3 = np.array([-1.0, -0.5, 0.0])
    with pytest.raises(DegenerateFormationError):
        forward_3r((r2 + r3) / 2.0, r2, r3)


# ---------------------------------------------------------------------------
# alpha split and MN coefficients


def test_alpha_split_symmetric_example():
    sp = alpha_split(1.0, 1.0, np.pi / 3)
    assert sp.alpha2 == pytest.approx(np.pi / 6, abs=1e-12)
    assert sp.alpha3 == pytest.approx(np.pi / 6, abs=1e-12)
    assert sp.m == pytest.approx(0.866025, abs=1e-6)


def test_alpha_split_symmetric_m_closed_form():
    rng = np.random.default_rng(44)
    d = rng.uniform(5, 50, 50)
    alpha = rng.uniform(0.1, 3.0, 50)
    sp = alpha_split(d, d, alpha)
    np.testing.assert_allclose(sp.m, d * np.cos(alpha / 2.0), rtol=1e-12)


def test_alpha_split_sum_invariant():
    rng = np.random.default_rng(45)
    d2 = rng.uniform(1, 50, 200)
    d3 = rng.uniform(1, 50, 200)
    alpha = rng.uniform(0.05, 3.0, 200)
    sp = alpha_split(d2, d3, alpha)
    np.testing.assert_allclose(sp.alpha2 + sp.alpha3, alpha, atol=1e-12)
    m2 = (d2**2 + d3**2 + 2 * d2 * d3 * np.cos(alpha)) / 4.0
    np.testing.assert_allclose(sp.m**2, m2, rtol=1e-12)


def test_alpha_split_singular():
    with pytest.raises(SingularGeometryError):
        alpha_split(1.0, 1.0, np.pi)


def test_robots_roundtrip_equilateral():
    r1 = np.zeros(3)
    r2 = np.array([1.0, 0, 0])
    r3 = np.array([0.5, 0.866025, 0.0])
    st = forward_3r(r1, r2, r3)
    b1, b2, b3 = robots_from_cluster_3r(st)
    np.testing.assert_allclose(b1, r1, atol=1e-10)
    np.testing.assert_allclose(b2, r2, atol=1e-10)
    np.testing.assert_allclose(b3, r3, atol=1e-10)


def test_robots_roundtrip_random_states():
    rng = np.random.default_rng(46)
    st = random_3r_state(rng, 100)
    r1, r2, r3 = robots_from_cluster_3r(st)
    back = forward_3r(r1, r2, r3)
    np.testing.assert_allclose(back.p, st.p, atol=1e-9)
    np.testing.assert_allclose(back.rot, st.rot, atol=1e-9)
    np.testing.assert_allclose(back.d2, st.d2, atol=1e-9)
    np.testing.assert_allclose(back.d3, st.d3, atol=1e-9)
    np.testing.assert_allclose(back.alpha, st.alpha, atol=1e-9)


def test_robots_centroid_identity():
    rng = np.random.default_rng(47)
    st = random_3r_state(rng, 100)
    r1, r2, r3 = robots_from_cluster_3r(st)
    np.testing.assert_allclose((r1 + r2 + r3) / 3.0, st.p, atol=1e-12)


def test_robots_rotation_equivariance():
    rng = np.random.default_rng(48)
    st = random_3r_state(rng, 20)
    q = qt.random_unit_quat(rng, (20,))
    R = qt.rot_matrix(q)
    st2 = Cluster3RState(p=st.p, rot=R @ st.rot, d2=st.d2, d3=st.d3, alpha=st.alpha)
    a = robots_from_cluster_3r(st)
    b = robots_from_cluster_3r(st2)
    for ra, rb in zip(a, b):
        np.testing.assert_allclose(rb - st.p, qt.rotate(q, ra - st.p), atol=1e-10)


def _mn_fd(d2, d3, alpha, h=1e-6):
    """Central finite differences of sin(alpha_i), cos(alpha_i)."""

    def angles(d2_, d3_, a_):
        sp = alpha_split(d2_, d3_, a_)
        return np.array(
            [np.sin(sp.alpha2), np.cos(sp.alpha2), np.sin(sp.alpha3), np.cos(sp.alpha3)]
        )

    dsd2 = (angles(d2 + h, d3, alpha) - angles(d2 - h, d3, alpha)) / (2 * h)
    dsd3 = (angles(d2, d3 + h, alpha) - angles(d2, d3 - h, alpha)) / (2 * h)
    dsa = (angles(d2, d3, alpha + h) - angles(d2, d3, alpha - h)) / (2 * h)
    return dsd2, dsd3, dsa


def test_mn_coeffs_match_finite_differences():
    d2, d3, alpha = 30.0, 40.0, 1.0
    mn = mn_coeffs(d2, d3, alpha)
    dsd2, dsd3, dsa = _mn_fd(d2, d3, alpha)
    # (i,j) = (2,3): S(alpha2), C(alpha2); slot1 differentiates d_i = d2
    np.testing.assert_allclose(mn.m1_23, dsd2[0], rtol=1e-6)
    np.testing.assert_allclose(mn.m2_23, dsd3[0], rtol=1e-6)
    np.testing.assert_allclose(mn.m3_23, dsa[0], rtol=1e-6)
    np.testing.assert_allclose(mn.n1_23, dsd2[1], rtol=1e-6)
    np.testing.assert_allclose(mn.n2_23, dsd3[1], rtol=1e-6)
    np.testing.assert_allclose(mn.n3_23, dsa[1], rtol=1e-6)
    # (i,j) = (3,2): S(alpha3), C(alpha3); slot1 differentiates d_i = d3
    np.testing.assert_allclose(mn.m1_32, dsd3[2], rtol=1e-6)
    np.testing.assert_allclose(mn.m2_32, dsd2[2], rtol=1e-6)
    np.testing.assert_allclose(mn.m3_32, dsa[2], rtol=1e-6)
    np.testing.assert_allclose(mn.n1_32, dsd3[3], rtol=1e-6)
    np.testing.assert_allclose(mn.n2_32, dsd2[3], rtol=1e-6)
    np.testing.assert_allclose(mn.n3_32, dsa[3], rtol=1e-6)


def test_mn_coeffs_symmetric_swap():
    mn = mn_coeffs(25.0, 25.0, 0.8)
    assert mn.m1_23 == pytest.approx(mn.m1_32, rel=1e-12)
    assert mn.m2_23 == pytest.approx(mn.m2_32, rel=1e-12)
    assert mn.m3_23 == pytest.approx(mn.m3_32, rel=1e-12)
    assert mn.n1_23 == pytest.approx(mn.n1_32, rel=1e-12)
    assert mn.n2_23 == pytest.approx(mn.n2_32, rel=1e-12)
    assert mn.n3_23 == pytest.approx(mn.n3_32, rel=1e-12)


def test_mn_coeffs_small_alpha_limit():
    # d2 = d3 = d, alpha -> 0: sin(alpha_i) -> 0 while M3 stays finite (-> 1/2)
    d = 30.0
    mn = mn_coeffs(d, d, 1e-4)
    assert mn.m3_23 == pytest.approx(0.5, abs=1e-6)
    dsd2, dsd3, dsa = _mn_fd(d, d, 1e-4)
    np.testing.assert_allclose(mn.m3_23, dsa[0], rtol=1e-5)


# ---------------------------------------------------------------------------
# 3R inverse velocity map


def test_inverse_vel_3r_rigid_translation():
    rng = np.random.default_rng(49)
    st = random_3r_state(rng)
    v = np.array([0.1, 0.2, -0.3])
    vc = ClusterVelocity3R.from_rates(st, v, np.zeros(3), 0.0, 0.0, 0.0)
    for rdot in inverse_vel_3r(st, vc):
        np.testing.assert_allclose(rdot, v, atol=1e-14)


def test_inverse_vel_3r_centroid_identity():
    rng = np.random.default_rng(50)
    st = random_3r_state(rng, 100)
    vc = ClusterVelocity3R.from_rates(
        st,
        rng.standard_normal((100, 3)),
        rng.standard_normal((100, 3)),
        rng.standard_normal(100),
        rng.standard_normal(100),
        rng.standard_normal(100),
    )
    r1dot, r2dot, r3dot = inverse_vel_3r(st, vc)
    np.testing.assert_allclose((r1dot + r2dot + r3dot) / 3.0, vc.v, atol=1e-10)


def test_inverse_vel_3r_rigid_rotation_speeds():
    rng = np.random.default_rng(51)
    st = random_3r_state(rng)
    w = 0.7
    omega_i = w * st.z_axis
    vc = ClusterVelocity3R.from_rates(st, np.zeros(3), omega_i, 0.0, 0.0, 0.0)
    rdots = inverse_vel_3r(st, vc)
    robots = robots_from_cluster_3r(st)
    for r, rdot in zip(robots, rdots):
        np.testing.assert_allclose(
            np.linalg.norm(rdot), w * np.linalg.norm(r - st.p), rtol=1e-10
        )
        # and the full rigid-body velocity field
        np.testing.assert_allclose(rdot, np.cross(omega_i, r - st.p), atol=1e-10)


def test_inverse_vel_3r_finite_difference_oracle():
    # columns of the velocity map vs central differences of the reconstruction
    rng = np.random.default_rng(52)
    h = 1e-6
    for _ in range(10):
        st = random_3r_state(rng)

        def positions(p, rot, d2, d3, alpha):
            return np.concatenate(
                robots_from_cluster_3r(
                    Cluster3RState(p=p, rot=rot, d2=d2, d3=d3, alpha=alpha)
                )
            )

        def fd(dp=np.zeros(3), axis=None, dd2=0.0, dd3=0.0, da=0.0):
            def shift(s):
                rot = st.rot
                if axis is not None:
                    rot = qt.rot_matrix(qt.quat_exp(0.5 * s * axis)) @ rot
                return positions(
                    st.p + s * dp, rot, st.d2 + s * dd2, st.d3 + s * dd3, st.alpha + s * da
                )

            return (shift(h) - shift(-h)) / (2 * h)

        for k in range(3):
            e = np.eye(3)[k]
            # translation columns
            vc = ClusterVelocity3R.from_rates(st, e, np.zeros(3), 0, 0, 0)
            np.testing.assert_allclose(
                np.concatenate(inverse_vel_3r(st, vc)), fd(dp=e), rtol=0, atol=1e-5
            )
            # rotation columns (inertial axis e)
            vc = ClusterVelocity3R.from_rates(st, np.zeros(3), e, 0, 0, 0)
            ana = np.concatenate(inverse_vel_3r(st, vc))
            ref = fd(axis=e)
            np.testing.assert_allclose(
                np.linalg.norm(ana - ref) / np.linalg.norm(ref), 0.0, atol=1e-5
            )
        for name, kw in (("d2", dict(dd2=1.0)), ("d3", dict(dd3=1.0)), ("alpha", dict(da=1.0))):
            vc = ClusterVelocity3R.from_rates(
                st, np.zeros(3), np.zeros(3),
                kw.get("dd2", 0.0), kw.get("dd3", 0.0), kw.get("da", 0.0),
            )
            ana = np.concatenate(inverse_vel_3r(st, vc))
            ref = fd(**kw)
            err = np.linalg.norm(ana - ref) / max(np.linalg.norm(ref), 1e-12)
            assert err < 1e-5, f"{name} column mismatch: {err:.2e}"


def test_cluster_velocity_orthogonality():
    rng = np.random.default_rng(53)
    st = random_3r_state(rng, 50)
    vc = ClusterVelocity3R.from_rates(
        st, np.zeros((50, 3)), rng.standard_normal((50, 3)), 0.0, 0.0, 0.0
    )
    np.testing.assert_allclose(np.sum(vc.wx * st.x_axis, axis=-1), 0.0, atol=1e-9)
    np.testing.assert_allclose(np.sum(vc.wy * st.y_axis, axis=-1), 0.0, atol=1e-9)


# ---------------------------------------------------------------------------
# geometry controllers


def test_geometry_control_at_reference():
    assert geometry_control_2r(50.0, GeometryReference2R(d_d=50.0)) == 0.0


def test_geometry_control_proportional():
    assert geometry_control_2r(10.0, GeometryReference2R(d_d=50.0, k_d=0.1)) == pytest.approx(4.0)


def test_geometry_control_3r_zero_and_signs():
    ref = GeometryReference3R(d2_d=30.0, d3_d=40.0, alpha_d=1.0)
    d2dot, d3dot, adot = geometry_control_3r(30.0, 40.0, 1.0, ref)
    assert d2dot == 0.0 and d3dot == 0.0 and adot == 0.0
    d2dot, d3dot, adot = geometry_control_3r(20.0, 50.0, 0.5, ref)
    assert d2dot > 0 and d3dot < 0 and adot > 0


def test_geometry_control_exponential_halving():
    ref = GeometryReference2R(d_d=50.0, k_d=0.5)
    dt = 1e-3
    d = 10.0
    err0 = 40.0
    t_half = np.log(2.0) / ref.k_d
    t, crossings = 0.0, []
    target = err0 / 2.0
    prev_err, prev_t = err0, 0.0
    while len(crossings) < 3:
        d += dt * geometry_control_2r(d, ref)
        t += dt
        err = ref.d_d - d
        if err < target <= prev_err:
            # linear interpolation of the crossing instant
            frac = (prev_err - target) / (prev_err - err)
            crossings.append(prev_t + frac * dt)
            target /= 2.0
        prev_err, prev_t = err, t
    gaps = np.diff([0.0] + crossings)
    np.testing.assert_allclose(gaps, t_half, rtol=0.02)


def test_geometry_reference_validation():
    with pytest.raises(ValueError):
        GeometryReference2R(d_d=-1.0)
    with pytest.raises(ValueError):
        GeometryReference3R(d2_d=10, d3_d=10, alpha_d=np.deg2rad(200))
