"""Quaternion and dual-quaternion algebra.

Conventions used across the package:

* Quaternions are scalar-first float64 arrays ``[w, x, y, z]``; all
  functions broadcast over leading axes, so a ``(n, 4)`` array is a batch
  of n quaternions.
* A unit quaternion ``q`` maps body-frame vectors to the inertial frame:
  ``v_i = rotate(q, v_b) = R(q) @ v_b``.
* Dual quaternions are ``(..., 8)`` arrays, the first four components the
  principal (real) part, the last four the dual part. A rigid-body pose is
  ``q + eps * 0.5 * p_quat * q`` with ``p`` the inertial-frame position.
* Twists pair a body-frame angular velocity with an inertial-frame linear
  velocity; their pure-dual embedding is ``omega + eps * rotate(conj(q), v)``.

Matrices handed to/taken from external formats are row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

_EXP_TAYLOR_EPS = 1e-6   # below this, sin(n)/n uses its 2-term Taylor form
_UNIT_TOL = 1e-6         # rejection threshold for "must be unit" inputs


def cross3(a: Array, b: Array) -> Array:
    """Cross product on the trailing axis; avoids np.cross's axis shuffling,
    which dominates the cost on small batches."""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack(
        [ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1
    )


def norm3(v: Array) -> Array:
    """Euclidean norm on the trailing axis (fast path for 3-vectors)."""
    return np.sqrt(np.sum(v * v, axis=-1))


def quat(w: float, x: float, y: float, z: float) -> Array:
    """Build a quaternion from components (scalar first)."""
    return np.array([w, x, y, z], dtype=np.float64)


def quat_identity(shape: tuple[int, ...] = ()) -> Array:
    q = np.zeros(shape + (4,), dtype=np.float64)
    q[..., 0] = 1.0
    return q


def pure_quat(v: Array) -> Array:
    """Embed a 3-vector as a purely imaginary quaternion."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (4,), dtype=np.float64)
    out[..., 1:] = v
    return out


def quat_imag(q: Array) -> Array:
    """Imaginary (vector) part of a quaternion."""
    return np.asarray(q)[..., 1:]


def quat_mul(a: Array, b: Array) -> Array:
    """Hamilton product a*b (non-commutative, norm-multiplicative)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    v = aw * bv + bw * av + cross3(av, bv)
    return np.concatenate([w, v], axis=-1)


def quat_conj(q: Array) -> Array:
    q = np.asarray(q, dtype=np.float64)
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_norm(q: Array) -> Array:
    return np.linalg.norm(np.asarray(q, dtype=np.float64), axis=-1)


def quat_normalize(q: Array) -> Array:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_exp(v: Array) -> Array:
    """Exponential map: 3-vector -> unit quaternion.

    exp(v) = cos(|v|) + sin(|v|)/|v| * v, a rotation by 2|v| about v/|v|.
    The sin(|v|)/|v| factor switches to its Taylor form 1 - |v|^2/6 for
    |v| < 1e-6, removing the singularity at the identity.
    """
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    small = n < _EXP_TAYLOR_EPS
    safe = np.where(small, 1.0, n)
    s = np.where(small, 1.0 - n * n / 6.0, np.sin(safe) / safe)
    return np.concatenate([np.cos(n), s * v], axis=-1)


def _require_unit(q: Array, what: str) -> None:
    err = np.abs(quat_norm(q) - 1.0)
    if np.any(err > _UNIT_TOL):
        raise ValueError(
            f"{what} must be unit norm within {_UNIT_TOL:g} "
            f"(worst deviation {float(np.max(err)):.3e})"
        )


def rot_matrix(q: Array) -> Array:
    """Rotation matrix R(q) = I + 2*w*(v x) + 2*(v x)^2, shape (..., 3, 3).

    Rejects inputs whose norm deviates from 1 by more than 1e-6.
    """
    q = np.asarray(q, dtype=np.float64)
    _require_unit(q, "rot_matrix input")
    w = q[..., 0]
    x, y, z = q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    row0 = np.stack([1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)], axis=-1)
    row1 = np.stack([2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)], axis=-1)
    row2 = np.stack([2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def rotate(q: Array, v: Array) -> Array:
    """Adjoint action of a unit quaternion on a 3-vector: Im(q * v * q^*).

    Equals R(q) @ v; computed in the two-cross-product form.
    """
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * cross3(u, v)
    return v + w * t + cross3(u, t)


def quat_from_rot_matrix(R: Array) -> Array:
    """Unit quaternion with rot_matrix(q) == R, canonical sign w >= 0.

    Shepperd's branch selection: recover the largest of the four squared
    components first, so the division below is always well conditioned.
    """
    R = np.asarray(R, dtype=np.float64)
    t = R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2]
    d = np.stack(
        [
            1.0 + t,
            1.0 + 2.0 * R[..., 0, 0] - t,
            1.0 + 2.0 * R[..., 1, 1] - t,
            1.0 + 2.0 * R[..., 2, 2] - t,
        ],
        axis=-1,
    )
    branch = np.argmax(d, axis=-1)

    r01, r02, r10 = R[..., 0, 1], R[..., 0, 2], R[..., 1, 0]
    r12, r20, r21 = R[..., 1, 2], R[..., 2, 0], R[..., 2, 1]

    if np.all(branch == 0):
        # rotations under ~120 deg all land here; skip the candidate table
        big = 0.5 * np.sqrt(d[..., 0])
        s = 0.25 / big
        q = np.stack([big, (r21 - r12) * s, (r02 - r20) * s, (r10 - r01) * s], axis=-1)
        sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
        return quat_normalize(q * sign)

    big = 0.5 * np.sqrt(np.take_along_axis(d, branch[..., None], axis=-1)[..., 0])
    s = 0.25 / big
    cands = np.empty(R.shape[:-2] + (4, 4), dtype=np.float64)
    cands[..., 0, 0] = big
    cands[..., 0, 1] = (r21 - r12) * s
    cands[..., 0, 2] = (r02 - r20) * s
    cands[..., 0, 3] = (r10 - r01) * s
    cands[..., 1, 0] = (r21 - r12) * s
    cands[..., 1, 1] = big
    cands[..., 1, 2] = (r01 + r10) * s
    cands[..., 1, 3] = (r02 + r20) * s
    cands[..., 2, 0] = (r02 - r20) * s
    cands[..., 2, 1] = (r01 + r10) * s
    cands[..., 2, 2] = big
    cands[..., 2, 3] = (r12 + r21) * s
    cands[..., 3, 0] = (r10 - r01) * s
    cands[..., 3, 1] = (r02 + r20) * s
    cands[..., 3, 2] = (r12 + r21) * s
    cands[..., 3, 3] = big

    idx = branch[..., None, None]
    q = np.take_along_axis(cands, np.broadcast_to(idx, branch.shape + (1, 4)), axis=-2)[..., 0, :]
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return quat_normalize(q * sign)


def random_unit_quat(rng: np.random.Generator, shape: tuple[int, ...] = ()) -> Array:
    """Uniformly random unit quaternion(s) (normalized 4D Gaussian)."""
    q = rng.standard_normal(shape + (4,))
    return quat_normalize(q)


# ---------------------------------------------------------------------------
# Dual quaternions: (..., 8) arrays, [real | dual].


def dq(real: Array, dual: Array) -> Array:
    return np.concatenate(
        [np.asarray(real, dtype=np.float64), np.asarray(dual, dtype=np.float64)], axis=-1
    )


def dq_identity(shape: tuple[int, ...] = ()) -> Array:
    out = np.zeros(shape + (8,), dtype=np.float64)
    out[..., 0] = 1.0
    return out


def dq_real(x: Array) -> Array:
    return np.asarray(x)[..., :4]


def dq_dual(x: Array) -> Array:
    return np.asarray(x)[..., 4:]


def dq_mul(a: Array, b: Array) -> Array:
    """Dual-quaternion product under eps^2 = 0."""
    ar, ad = dq_real(a), dq_dual(a)
    br, bd = dq_real(b), dq_dual(b)
    return dq(quat_mul(ar, br), quat_mul(ar, bd) + quat_mul(ad, br))


def dq_conj(x: Array) -> Array:
    return dq(quat_conj(dq_real(x)), quat_conj(dq_dual(x)))


def dq_norm(x: Array) -> tuple[Array, Array]:
    """Norm as a dual number (principal, dual): sqrt(conj(x) * x).

    For a unit dual quaternion this is (1, 0): unit principal part and
    principal/dual orthogonality.
    """
    r, d = dq_real(x), dq_dual(x)
    np_ = quat_norm(r)
    return np_, np.sum(r * d, axis=-1) / np_


def make_pose(q: Array, p: Array) -> Array:
    """Pose dual quaternion q + eps * 0.5 * p_quat * q (p inertial)."""
    q = np.asarray(q, dtype=np.float64)
    _require_unit(q, "make_pose attitude")
    return dq(q, 0.5 * quat_mul(pure_quat(p), q))


def pose_quat(x: Array) -> Array:
    return dq_real(x)


def pose_translation(x: Array) -> Array:
    """Translation 2 * dual * conj(real); rejects non-pose input.

    The product must be purely imaginary; a real part above 1e-6 means the
    argument is not a rigid-body pose.
    """
    pbar = 2.0 * quat_mul(dq_dual(x), quat_conj(dq_real(x)))
    if np.any(np.abs(pbar[..., 0]) > 1e-6):
        raise ValueError(
            "corrupt pose: translation quaternion has real part "
            f"{float(np.max(np.abs(pbar[..., 0]))):.3e}"
        )
    return pbar[..., 1:]


def dq_adjoint(qt: Array, xt: Array) -> Array:
    """Adjoint of a unit dual quaternion on a pure-dual element.

    Closed form Ad_q(xP) + eps*(Ad_q(xD) + p x Ad_q(xP)) with p the
    inertial translation of the pose; equal to the sandwich product
    qt * xt * conj(qt).
    """
    q = dq_real(qt)
    p = pose_translation(qt)
    xp = quat_imag(dq_real(xt))
    xd = quat_imag(dq_dual(xt))
    out_p = rotate(q, xp)
    out_d = rotate(q, xd) + cross3(p, out_p)
    return dq(pure_quat(out_p), pure_quat(out_d))


@dataclass(frozen=True)
class Twist:
    """Angular velocity (body frame, rad/s) paired with linear velocity
    (inertial frame, m/s)."""

    omega: Array
    vel: Array

    def as_dq(self, q: Array) -> Array:
        return twist_dq(self.omega, self.vel, q)


def twist_dq(omega: Array, vel: Array, q: Array) -> Array:
    """Pure-dual twist embedding omega + eps * rotate(conj(q), vel)."""
    q = np.asarray(q, dtype=np.float64)
    _require_unit(q, "twist_dq attitude")
    return dq(pure_quat(omega), pure_quat(rotate(quat_conj(q), vel)))
