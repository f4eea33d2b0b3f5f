"""Cluster-space kinematics and geometry control for 2R and 3R formations.

Forward kinematics aggregate robot positions into a formation pose plus
geometry parameters; the inverse velocity maps turn a commanded cluster
twist and geometry rates back into per-robot velocities. The full
stacked Jacobian inverse is never materialized: the velocity maps are
evaluated directly from the differentiated reconstruction, which keeps
the centroid identities exact.

Conventions:

* 2R: z = (r2 - r1)/|r2 - r1| (so r2 = r1 + d z holds literally), p is
  the midpoint, d the separation.
* 3R: p is the centroid; the frame columns are x toward the centroid
  from r1, z normal to the robot plane, y = z x x; geometry is
  (d2, d3, alpha) with d_i = |r_i - r1| and alpha the angle at r1.
* Angular velocities entering the velocity maps are inertial-frame
  (omega_i = R(q) omega_body).

All functions broadcast over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFormationError, SingularGeometryError
from .quat import Array, cross3, norm3

_D_DEGENERATE = 1e-6      # minimum robot separation, m
_COLLINEAR_REL = 1e-9     # |u2 x u3| threshold relative to d2*d3
_M_SINGULAR = 1e-9        # minimum alpha-split median length, m


@dataclass(frozen=True)
class Cluster2RState:
    """Two-robot formation: midpoint p, unit axis z, separation d."""

    p: Array   # (..., 3)
    z: Array   # (..., 3) unit
    d: Array   # (...,)


@dataclass(frozen=True)
class Cluster3RState:
    """Three-robot formation: centroid p, frame R = [x y z], geometry
    (d2, d3, alpha)."""

    p: Array     # (..., 3)
    rot: Array   # (..., 3, 3), columns x, y, z
    d2: Array    # (...,)
    d3: Array    # (...,)
    alpha: Array  # (...,) rad, in (0, pi)

    @property
    def x_axis(self) -> Array:
        return self.rot[..., :, 0]

    @property
    def y_axis(self) -> Array:
        return self.rot[..., :, 1]

    @property
    def z_axis(self) -> Array:
        return self.rot[..., :, 2]


@dataclass(frozen=True)
class AlphaSplit:
    """Decomposition alpha = alpha2 + alpha3 about the centroid direction,
    with the median-length parameter m."""

    alpha2: Array
    alpha3: Array
    m: Array


@dataclass(frozen=True)
class MNCoeffs:
    """Partial derivatives of sin(alpha_i) (M) and cos(alpha_i) (N) with
    respect to (d_i, d_j, alpha), for index pairs (2,3) and (3,2):

        d/dt sin(alpha_i) = M1*ddot_i + M2*ddot_j + M3*alphadot
        d/dt cos(alpha_i) = N1*ddot_i + N2*ddot_j + N3*alphadot
    """

    m1_23: Array
    m2_23: Array
    m3_23: Array
    n1_23: Array
    n2_23: Array
    n3_23: Array
    m1_32: Array
    m2_32: Array
    m3_32: Array
    n1_32: Array
    n2_32: Array
    n3_32: Array


@dataclass(frozen=True)
class ClusterVelocity3R:
    """Cluster-space velocity [v, omega x x, omega x y, d2dot, d3dot, alphadot]
    with omega the inertial-frame angular velocity of the formation frame."""

    v: Array        # (..., 3)
    wx: Array       # (..., 3) = omega x x
    wy: Array       # (..., 3) = omega x y
    d2dot: Array    # (...,)
    d3dot: Array    # (...,)
    alphadot: Array  # (...,)

    @classmethod
    def from_rates(
        cls, state: Cluster3RState, v: Array, omega_i: Array,
        d2dot: Array, d3dot: Array, alphadot: Array,
    ) -> "ClusterVelocity3R":
        omega_i = np.asarray(omega_i, dtype=np.float64)
        return cls(
            v=np.asarray(v, dtype=np.float64),
            wx=cross3(omega_i, state.x_axis),
            wy=cross3(omega_i, state.y_axis),
            d2dot=np.asarray(d2dot, dtype=np.float64),
            d3dot=np.asarray(d3dot, dtype=np.float64),
            alphadot=np.asarray(alphadot, dtype=np.float64),
        )


@dataclass(frozen=True)
class GeometryReference2R:
    """Desired separation and its proportional gain."""

    d_d: float
    k_d: float = 0.5

    def __post_init__(self):
        if not (self.d_d > 0 and self.k_d > 0):
            raise ValueError("GeometryReference2R requires d_d > 0 and k_d > 0")


@dataclass(frozen=True)
class GeometryReference3R:
    """Desired (d2, d3, alpha) and the proportional gains."""

    d2_d: float
    d3_d: float
    alpha_d: float
    k_d: float = 0.5
    k_alpha: float = 0.5

    def __post_init__(self):
        if not (self.d2_d > 0 and self.d3_d > 0 and self.k_d > 0 and self.k_alpha > 0):
            raise ValueError("GeometryReference3R requires positive distances and gains")
        if not 0.0 < self.alpha_d < np.pi:
            raise ValueError("alpha_d must lie in (0, pi)")


# ---------------------------------------------------------------------------
# Two-robot formation


def forward_2r(r1: Array, r2: Array) -> Cluster2RState:
    """Cluster state from robot positions; rejects coincident robots."""
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    u = r2 - r1
    d = norm3(u)
    if np.any(d <= _D_DEGENERATE):
        raise DegenerateFormationError(
            f"robots coincide (separation {float(np.min(d)):.3e} m)"
        )
    return Cluster2RState(p=0.5 * (r1 + r2), z=u / d[..., None], d=d)


def inverse_vel_2r(
    state: Cluster2RState, v: Array, omega_i: Array, ddot: Array
) -> tuple[Array, Array]:
    """Robot velocities realizing (v, omega_i, ddot):

        r1dot = v - (ddot*z + d*omega_i x z)/2
        r2dot = v + (ddot*z + d*omega_i x z)/2
    """
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(ddot, dtype=np.float64)[..., None] * state.z + np.asarray(state.d)[
        ..., None
    ] * cross3(np.asarray(omega_i, dtype=np.float64), state.z)
    return v - 0.5 * h, v + 0.5 * h


# ---------------------------------------------------------------------------
# Three-robot formation


def forward_3r(r1: Array, r2: Array, r3: Array) -> Cluster3RState:
    """Cluster state from robot positions.

    Rejects collinear robots (plane normal below 1e-9 * d2 * d3) and r1 at
    the centroid (frame x-axis undefined).
    """
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    r3 = np.asarray(r3, dtype=np.float64)
    u2 = r2 - r1
    u3 = r3 - r1
    d2 = norm3(u2)
    d3 = norm3(u3)
    if np.any(d2 <= _D_DEGENERATE) or np.any(d3 <= _D_DEGENERATE):
        raise DegenerateFormationError("robots coincide")
    z1 = cross3(u2, u3)
    nz = norm3(z1)
    if np.any(nz <= _COLLINEAR_REL * d2 * d3):
        raise DegenerateFormationError("collinear robots: formation plane undefined")
    p = (r1 + r2 + r3) / 3.0
    x1 = p - r1
    nx = norm3(x1)
    if np.any(nx <= _COLLINEAR_REL * np.maximum(d2, d3)):
        raise DegenerateFormationError("first robot at the centroid: frame x-axis undefined")
    x = x1 / nx[..., None]
    z = z1 / nz[..., None]
    y = cross3(z, x)
    alpha = np.arctan2(nz, np.sum(u2 * u3, axis=-1))
    return Cluster3RState(p=p, rot=np.stack([x, y, z], axis=-1), d2=d2, d3=d3, alpha=alpha)


def alpha_split(d2: Array, d3: Array, alpha: Array) -> AlphaSplit:
    """Split the apex angle: sin(alpha_i) = d_j/(2m) sin(alpha),
    cos(alpha_i) = (d_j cos(alpha) + d_i)/(2m), recovered via atan2."""
    d2 = np.asarray(d2, dtype=np.float64)
    d3 = np.asarray(d3, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(d2 <= 0) or np.any(d3 <= 0):
        raise ValueError("distances must be positive")
    ca, sa = np.cos(alpha), np.sin(alpha)
    m = 0.5 * np.sqrt(d2 * d2 + d3 * d3 + 2.0 * d2 * d3 * ca)
    if np.any(m <= _M_SINGULAR):
        raise SingularGeometryError(
            "alpha split undefined: m ~ 0 (alpha ~ pi with d2 ~ d3)"
        )
    alpha2 = np.arctan2(d3 * sa, d3 * ca + d2)   # common 1/(2m) factor dropped
    alpha3 = np.arctan2(d2 * sa, d2 * ca + d3)
    return AlphaSplit(alpha2=alpha2, alpha3=alpha3, m=m)


def robots_from_cluster_3r(state: Cluster3RState) -> tuple[Array, Array, Array]:
    """Robot positions realizing the cluster state (inverse of forward_3r)."""
    sp = alpha_split(state.d2, state.d3, state.alpha)
    c2, s2 = np.cos(sp.alpha2), np.sin(sp.alpha2)
    c3, s3 = np.cos(sp.alpha3), np.sin(sp.alpha3)
    d2 = np.asarray(state.d2)[..., None]
    d3 = np.asarray(state.d3)[..., None]
    c2, s2, c3, s3 = c2[..., None], s2[..., None], c3[..., None], s3[..., None]
    x, y = state.x_axis, state.y_axis
    r1 = (
        state.p
        - (d2 * c2 + d3 * c3) / 3.0 * x
        - (d3 * s3 - d2 * s2) / 3.0 * y
    )
    r2 = r1 + d2 * (c2 * x - s2 * y)
    r3 = r1 + d3 * (c3 * x + s3 * y)
    return r1, r2, r3


def _mn_one_pair(di: Array, dj: Array, sa: Array, ca: Array, m: Array):
    """Partials of sin(alpha_i), cos(alpha_i) wrt (d_i, d_j, alpha)."""
    m2 = m * m
    denom = 8.0 * m2 * m
    a = di + dj * ca
    b = dj + di * ca
    m1 = -dj * sa * a / denom
    m2_ = sa * (4.0 * m2 - dj * b) / denom
    m3 = dj * (4.0 * m2 * ca + di * dj * sa * sa) / denom
    n1 = (4.0 * m2 - a * a) / denom
    n2 = (4.0 * m2 * ca - a * b) / denom
    n3 = dj * sa * (-4.0 * m2 + di * a) / denom
    return m1, m2_, m3, n1, n2, n3


def mn_coeffs(d2: Array, d3: Array, alpha: Array) -> MNCoeffs:
    """All twelve rate coefficients; each equals the central finite
    difference of sin(alpha_i) or cos(alpha_i) in its variable."""
    d2 = np.asarray(d2, dtype=np.float64)
    d3 = np.asarray(d3, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    m = alpha_split(d2, d3, alpha).m
    sa, ca = np.sin(alpha), np.cos(alpha)
    m1_23, m2_23, m3_23, n1_23, n2_23, n3_23 = _mn_one_pair(d2, d3, sa, ca, m)
    m1_32, m2_32, m3_32, n1_32, n2_32, n3_32 = _mn_one_pair(d3, d2, sa, ca, m)
    return MNCoeffs(
        m1_23, m2_23, m3_23, n1_23, n2_23, n3_23,
        m1_32, m2_32, m3_32, n1_32, n2_32, n3_32,
    )


def inverse_vel_3r(
    state: Cluster3RState, vc: ClusterVelocity3R
) -> tuple[Array, Array, Array]:
    """Robot velocities realizing a cluster velocity.

    Differentiates the reconstruction r2 - r1 = d2*(C2 x - S2 y),
    r3 - r1 = d3*(C3 x + S3 y), r1 = p - (u2 + u3)/3 with xdot = wx,
    ydot = wy; identical term-by-term to the expanded per-robot velocity
    equations, and r1dot + r2dot + r3dot = 3v holds by construction.
    """
    sp = alpha_split(state.d2, state.d3, state.alpha)
    c2, s2 = np.cos(sp.alpha2), np.sin(sp.alpha2)
    c3, s3 = np.cos(sp.alpha3), np.sin(sp.alpha3)
    mn = mn_coeffs(state.d2, state.d3, state.alpha)

    dd2, dd3, da = vc.d2dot, vc.d3dot, vc.alphadot
    s2dot = mn.m1_23 * dd2 + mn.m2_23 * dd3 + mn.m3_23 * da
    c2dot = mn.n1_23 * dd2 + mn.n2_23 * dd3 + mn.n3_23 * da
    s3dot = mn.m1_32 * dd3 + mn.m2_32 * dd2 + mn.m3_32 * da
    c3dot = mn.n1_32 * dd3 + mn.n2_32 * dd2 + mn.n3_32 * da

    x, y = state.x_axis, state.y_axis
    d2 = np.asarray(state.d2)[..., None]
    d3 = np.asarray(state.d3)[..., None]
    u2dot = (
        np.asarray(dd2)[..., None] * (c2[..., None] * x - s2[..., None] * y)
        + d2 * (c2dot[..., None] * x + c2[..., None] * vc.wx
                - s2dot[..., None] * y - s2[..., None] * vc.wy)
    )
    u3dot = (
        np.asarray(dd3)[..., None] * (c3[..., None] * x + s3[..., None] * y)
        + d3 * (c3dot[..., None] * x + c3[..., None] * vc.wx
                + s3dot[..., None] * y + s3[..., None] * vc.wy)
    )
    r1dot = vc.v - (u2dot + u3dot) / 3.0
    return r1dot, r1dot + u2dot, r1dot + u3dot


# ---------------------------------------------------------------------------
# Geometry controllers


def geometry_control_2r(d: Array, ref: GeometryReference2R) -> Array:
    """ddot = k_d (d_d - d)."""
    return ref.k_d * (ref.d_d - np.asarray(d, dtype=np.float64))


def geometry_control_3r(
    d2: Array, d3: Array, alpha: Array, ref: GeometryReference3R
) -> tuple[Array, Array, Array]:
    """(d2dot, d3dot, alphadot), proportional per variable."""
    return (
        ref.k_d * (ref.d2_d - np.asarray(d2, dtype=np.float64)),
        ref.k_d * (ref.d3_d - np.asarray(d3, dtype=np.float64)),
        ref.k_alpha * (ref.alpha_d - np.asarray(alpha, dtype=np.float64)),
    )
