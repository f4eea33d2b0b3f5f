"""Pose and partial-attitude PI controllers with integrator dynamics.

Laws implemented (all gains 3x3 symmetric positive definite, broadcastable
over leading batch axes):

    omega = rotate(conj(dq_err), omega_d) - sign(dq0) * (K_wp @ dq + eta0 * K_wi @ eta)
    v     = v_d - K_vp @ dp - K_vi @ xi
    eta'  = eta * exp(dt/2 * (|dq0| * K_wi @ dq - sign(eta0) * K_eta @ eta))
    xi'   = xi + dt * (K_vi @ dp - K_xi @ xi)

sign(0) is taken as +1 (the selection that keeps the Lyapunov value
non-increasing and avoids chattering).

The xi update above is the stabilizing convention; the mirrored sign
variant (which is divergent) is kept behind ``flip_integrator_signs`` so
the sign choice stays auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularGeometryError
from .kinematics import PoseError, _check_dt
from .quat import (
    Array,
    Twist,
    cross3,
    norm3,
    quat_conj,
    quat_exp,
    quat_identity,
    quat_mul,
    quat_normalize,
    rotate,
)


def sign_pos(x: Array) -> Array:
    """sign with sign(0) := +1."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


def _apply(K: Array, v: Array) -> Array:
    """Matrix-vector product on the trailing axes, broadcasting leading ones."""
    return np.einsum("...ij,...j->...i", K, v)


def _diag3(k) -> Array:
    """diag matrices from gains: a trailing axis of length 3 is a per-axis
    triple; scalars and other shapes are isotropic (batched) gains."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim == 0:
        return np.diag([float(k)] * 3)
    if k.shape[-1] != 3:
        k = np.broadcast_to(k[..., None], k.shape + (3,))
    out = np.zeros(k.shape + (3,), dtype=np.float64)
    idx = np.arange(3)
    out[..., idx, idx] = k
    return out


@dataclass(frozen=True)
class GainSet:
    """The six controller gain matrices, each (..., 3, 3).

    Theorem-level validity (symmetry, uniform positive definiteness) is
    checked by :meth:`validate`, not at construction, so deliberately
    degenerate gain sets remain constructible in tests.
    """

    k_omega_p: Array
    k_omega_i: Array
    k_v_p: Array
    k_v_i: Array
    k_eta: Array
    k_xi: Array

    @classmethod
    def diag(cls, k_omega_p, k_omega_i, k_v_p, k_v_i, k_eta, k_xi) -> "GainSet":
        """Build from scalars or per-axis (..., 3) gain vectors."""
        return cls(
            _diag3(k_omega_p), _diag3(k_omega_i), _diag3(k_v_p),
            _diag3(k_v_i), _diag3(k_eta), _diag3(k_xi),
        )

    def _matrices(self):
        return (self.k_omega_p, self.k_omega_i, self.k_v_p,
                self.k_v_i, self.k_eta, self.k_xi)

    def validate(self, k_min: float | None = None, k_max: float | None = None) -> None:
        """Raise if any matrix is asymmetric or has eigenvalues outside
        [k_min, k_max] (k_min must be positive when given)."""
        for name, K in zip(
            ("k_omega_p", "k_omega_i", "k_v_p", "k_v_i", "k_eta", "k_xi"),
            self._matrices(),
        ):
            K = np.asarray(K, dtype=np.float64)
            asym = np.max(np.abs(K - np.swapaxes(K, -1, -2)))
            if asym > 1e-12:
                raise ValueError(f"{name} is asymmetric (max deviation {asym:.3e})")
            eigs = np.linalg.eigvalsh(K)
            lo, hi = float(np.min(eigs)), float(np.max(eigs))
            if k_min is not None and lo < k_min:
                raise ValueError(f"{name} eigenvalue {lo:.6g} below k_min={k_min:.6g}")
            if k_max is not None and hi > k_max:
                raise ValueError(f"{name} eigenvalue {hi:.6g} above k_max={k_max:.6g}")

    def eigenvalue_bounds(self) -> tuple[float, float]:
        """(min, max) eigenvalue over all six matrices."""
        lo, hi = np.inf, -np.inf
        for K in self._matrices():
            eigs = np.linalg.eigvalsh(np.asarray(K, dtype=np.float64))
            lo = min(lo, float(np.min(eigs)))
            hi = max(hi, float(np.max(eigs)))
        return lo, hi


@dataclass(frozen=True)
class ControllerState:
    """Integrator state: unit quaternion eta and translation integrator xi."""

    eta: Array  # (..., 4)
    xi: Array   # (..., 3)

    @classmethod
    def initial(cls, shape: tuple[int, ...] = ()) -> "ControllerState":
        """eta = identity, xi = 0."""
        return cls(eta=quat_identity(shape), xi=np.zeros(shape + (3,)))

    @property
    def eta0(self) -> Array:
        return self.eta[..., 0]

    @property
    def eta_vec(self) -> Array:
        return self.eta[..., 1:]


def pose_pi_control(
    err: PoseError, state: ControllerState, gains: GainSet, omega_d: Array, v_d: Array
) -> Twist:
    """Commanded twist for the full-pose PI law (omega body frame, v inertial)."""
    omega_d = np.asarray(omega_d, dtype=np.float64)
    v_d = np.asarray(v_d, dtype=np.float64)
    s = sign_pos(err.dq0)[..., None]
    fb = _apply(gains.k_omega_p, err.dq) + state.eta0[..., None] * _apply(
        gains.k_omega_i, state.eta_vec
    )
    omega = rotate(quat_conj(err.quat), omega_d) - s * fb
    v = v_d - _apply(gains.k_v_p, err.dp) - _apply(gains.k_v_i, state.xi)
    return Twist(omega=omega, vel=v)


def integrator_step(
    err: PoseError,
    state: ControllerState,
    gains: GainSet,
    dt: float,
    flip_integrator_signs: bool = False,
) -> ControllerState:
    """Advance (eta, xi) one step; eta takes the group exponential step.

    ``flip_integrator_signs`` selects the mirrored-sign variant of both
    integrators. That variant diverges; it exists only so the sign
    convention can be audited against the Lyapunov monotonicity check.
    """
    _check_dt(dt)
    g = np.abs(err.dq0)[..., None] * _apply(gains.k_omega_i, err.dq) - sign_pos(
        state.eta0
    )[..., None] * _apply(gains.k_eta, state.eta_vec)
    xi_dot = _apply(gains.k_v_i, err.dp) - _apply(gains.k_xi, state.xi)
    if flip_integrator_signs:
        g = -g
        xi_dot = -xi_dot
    eta = quat_normalize(quat_mul(state.eta, quat_exp(0.5 * dt * g)))
    return ControllerState(eta=eta, xi=state.xi + dt * xi_dot)


def lyapunov_value(err: PoseError | "PartialAttitudeError", state: ControllerState) -> Array:
    """V = (|dq|^2 + |dp|^2 + |eta|^2 + |xi|^2) / 2, zero only at the equilibrium."""
    dp = getattr(err, "dp", None)
    v = np.sum(np.asarray(err.dq) ** 2, axis=-1)
    if dp is not None:
        v = v + np.sum(np.asarray(dp) ** 2, axis=-1)
    v = v + np.sum(state.eta_vec**2, axis=-1) + np.sum(state.xi**2, axis=-1)
    return 0.5 * v


@dataclass(frozen=True)
class PartialAttitudeError:
    """Alignment error between a pointing axis z and a desired axis z_d.

    dq0 >= 0 always; (dq0, dq) is a unit quaternion. Its conjugate is the
    minimal rotation carrying z onto z_d (the direct rotation carries z_d
    onto z, which is the form the control law consumes).
    """

    dq0: Array  # (...,)
    dq: Array   # (..., 3)

    @property
    def quat(self) -> Array:
        return np.concatenate([np.asarray(self.dq0)[..., None], self.dq], axis=-1)


def partial_error(z: Array, z_d: Array) -> PartialAttitudeError:
    """dq0 = (1 + <z, z_d>)/|z + z_d|, dq = (z_d x z)/|z + z_d|.

    Antipodal pairs (<z, z_d> < -1 + 1e-8) are a singular configuration
    and rejected.
    """
    z = np.asarray(z, dtype=np.float64)
    z_d = np.asarray(z_d, dtype=np.float64)
    for name, vec in (("z", z), ("z_d", z_d)):
        n = np.linalg.norm(vec, axis=-1)
        if np.any(np.abs(n - 1.0) > 1e-6):
            raise ValueError(f"{name} must be a unit vector (|{name}| = {float(np.max(n)):.6g})")
    c = np.sum(z * z_d, axis=-1)
    if np.any(c < -1.0 + 1e-8):
        raise SingularGeometryError("z and z_d are antipodal; the alignment rotation is undefined")
    nw = norm3(z + z_d)
    return PartialAttitudeError(dq0=(1.0 + c) / nw, dq=cross3(z_d, z) / nw[..., None])


def partial_attitude_control(
    err: PartialAttitudeError,
    state: ControllerState,
    gains: GainSet,
    omega_d: Array,
    dt: float,
    flip_integrator_signs: bool = False,
) -> tuple[Array, ControllerState]:
    """Angular velocity aligning z with z_d, plus the advanced integrator.

    The returned omega is an inertial-frame rate: the 2R formation axis
    obeys zdot = omega x z, and no full attitude exists to re-express it in.
    xi is untouched (the partial controller has no translation channel).
    """
    _check_dt(dt)
    omega_d = np.asarray(omega_d, dtype=np.float64)
    s = sign_pos(err.dq0)[..., None]
    fb = _apply(gains.k_omega_p, err.dq) + state.eta0[..., None] * _apply(
        gains.k_omega_i, state.eta_vec
    )
    omega = rotate(quat_conj(err.quat), omega_d) - s * fb
    g = np.abs(err.dq0)[..., None] * _apply(gains.k_omega_i, err.dq) - sign_pos(
        state.eta0
    )[..., None] * _apply(gains.k_eta, state.eta_vec)
    if flip_integrator_signs:
        g = -g
    eta = quat_normalize(quat_mul(state.eta, quat_exp(0.5 * dt * g)))
    return omega, ControllerState(eta=eta, xi=state.xi)
