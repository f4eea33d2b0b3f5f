"""Closed-loop scenario simulation and Monte-Carlo batching.

Per control step (Algorithm order): corrupt each robot position with its
per-axis Gauss-Markov measurement noise, run forward kinematics on the
noisy positions, form the tracking errors against the scripted
reference, evaluate the (scheduled or fixed) gains, run the pose /
partial-attitude PI controller plus the proportional geometry
controller, map the cluster velocity through the inverse velocity map,
and advance the true robot positions as velocity-commanded single
integrators.

Runs in a batch are mutually independent and evaluated together on a
run-indexed array axis; run i of a batch is bit-identical to
``simulate_run(scenario, base_seed + i)`` because every run owns its own
noise stream. Statistics reduce over the run axis in a fixed order, so
results do not depend on any execution schedule.

Recorded series have length duration/dt + 1 (state at t=0 included);
the commanded-velocity channels at row k hold the command applied over
[t_k, t_k + dt) (the final row repeats the last command so every value
stays finite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quat as qt
from .cluster import (
    Cluster2RState,
    Cluster3RState,
    ClusterVelocity3R,
    GeometryReference3R,
    forward_3r,
    geometry_control_3r,
    inverse_vel_2r,
    inverse_vel_3r,
    robots_from_cluster_3r,
)
from .control import ControllerState, GainSet, integrator_step, lyapunov_value, partial_error, pose_pi_control
from .gains import (
    fixed_gains_2r,
    fixed_gains_3r,
    formation_inertia,
    lambda_from_inertia,
    scheduled_gains_2r,
    scheduled_gains_3r,
)
from .kinematics import PoseError
from .noise import GaussMarkovState, noise_block
from .quat import Array, cross3, norm3
from .scenario import Scenario, axis_vector, sample_scalar, sample_vector

_CHUNK = 4096
_SEP_TOL = 1e-6          # measured/true separation below this fails the run
_ANTIPODAL_TOL = 1e-4    # |z + z_d| below this fails the run (axis flipped)

CHANNELS_2R = (
    "px", "py", "pz", "d", "azimuth", "elevation", "azimuth_err", "elevation_err",
    "dq0", "dqx", "dqy", "dqz", "dpx", "dpy", "dpz",
    "v1x", "v1y", "v1z", "v2x", "v2y", "v2z", "lyapunov",
)
CHANNELS_3R = (
    "px", "py", "pz", "d2", "d3", "alpha", "roll_err", "pitch_err", "yaw_err",
    "dq0", "dqx", "dqy", "dqz", "dpx", "dpy", "dpz",
    "lambda_x", "lambda_y", "lambda_z",
    "v1x", "v1y", "v1z", "v2x", "v2y", "v2z", "v3x", "v3y", "v3z", "lyapunov",
)


@dataclass
class RunResult:
    """Full time series of one run."""

    time: Array
    channels: dict[str, Array]
    seed: int
    failed: bool = False
    fail_time: float | None = None


@dataclass
class BatchStats:
    """Per-timestep mean and unbiased std over the contributing runs."""

    time: Array
    mean: dict[str, Array]
    std: dict[str, Array]
    n_runs: int
    total_runs: int
    failed_seeds: list[int]


def pointing_angles(z: Array) -> tuple[Array, Array]:
    """Spherical pointing of a unit axis: azimuth = atan2(zy, zx),
    elevation = asin(zz). Near-vertical axes report azimuth 0."""
    z = np.asarray(z, dtype=np.float64)
    n = np.linalg.norm(z, axis=-1)
    if np.any(np.abs(n - 1.0) > 1e-6):
        raise ValueError("pointing_angles expects a unit vector")
    zz = np.clip(z[..., 2], -1.0, 1.0)
    vertical = np.abs(zz) > 1.0 - 1e-9
    azimuth = np.where(vertical, 0.0, np.arctan2(z[..., 1], np.where(vertical, 1.0, z[..., 0])))
    return azimuth, np.arcsin(zz)


def _wrap_angle(a: Array) -> Array:
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


def _euler_zyx(q: Array) -> tuple[Array, Array, Array]:
    """(roll, pitch, yaw) of R(q), ZYX convention."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2.0 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


def _rpy_quat(roll: float, pitch: float, yaw: float) -> Array:
    """Quaternion of the ZYX Euler angles (radians)."""
    qx = qt.quat_exp(np.array([0.5 * roll, 0.0, 0.0]))
    qy = qt.quat_exp(np.array([0.0, 0.5 * pitch, 0.0]))
    qz = qt.quat_exp(np.array([0.0, 0.0, 0.5 * yaw]))
    return qt.quat_mul(qz, qt.quat_mul(qy, qx))


# ---------------------------------------------------------------------------
# Reference sampling


def _reference_2r(s: Scenario):
    n = s.n_steps
    t = np.arange(n + 1) * s.dt
    ref = s.reference
    p_d = sample_vector(ref.position, t)
    d_d = sample_scalar(ref.distance, t)
    az = np.deg2rad(sample_scalar(ref.azimuth_deg, t))
    el = np.deg2rad(sample_scalar(ref.elevation_deg, t))
    z_d = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)
    v_d = np.diff(p_d, axis=0) / s.dt
    zdot = np.diff(z_d, axis=0) / s.dt
    omega_d = np.cross(z_d[:-1], zdot)  # minimal inertial rate with zdot = omega x z
    return t, p_d, v_d, d_d, z_d, omega_d, az, el


def _reference_3r(s: Scenario):
    n = s.n_steps
    t = np.arange(n + 1) * s.dt
    ref = s.reference
    p_d = sample_vector(ref.position, t)
    v_d = np.diff(p_d, axis=0) / s.dt
    d2_d = sample_scalar(ref.distance2, t)
    d3_d = sample_scalar(ref.distance3, t)
    alpha_d = np.deg2rad(sample_scalar(ref.alpha_deg, t))
    axis = axis_vector(ref.attitude_axis)
    theta = np.deg2rad(sample_scalar(ref.attitude_deg, t))
    q_d = qt.quat_exp(0.5 * theta[:, None] * axis)
    omega_d = (np.diff(theta) / s.dt)[:, None] * axis  # body rate; axis fixed
    return t, p_d, v_d, d2_d, d3_d, alpha_d, q_d, omega_d


# ---------------------------------------------------------------------------
# Engines


def _stats_or_series(collect_series, n, R, C):
    if collect_series:
        return np.empty((n + 1, R, C))
    return np.zeros((n + 1, C)), np.zeros((n + 1, C))


def _simulate_2r(s: Scenario, seeds: list[int], collect_series: bool):
    R = len(seeds)
    n = s.n_steps
    dt = s.dt
    sched = s.gains_2r
    adaptive = s.controller == "adaptive"
    t, p_d, v_d, d_d, z_d, omega_d, az_d, el_d = _reference_2r(s)

    init = s.initial
    az0 = az_d[0] + np.deg2rad(init.azimuth_offset_deg)
    el0 = el_d[0] + np.deg2rad(init.elevation_offset_deg)
    z0 = np.array([np.cos(el0) * np.cos(az0), np.cos(el0) * np.sin(az0), np.sin(el0)])
    d0 = d_d[0] + init.distance_offset
    p0 = p_d[0] + np.asarray(init.position_offset)
    r1 = np.tile(p0 - 0.5 * d0 * z0, (R, 1))
    r2 = np.tile(p0 + 0.5 * d0 * z0, (R, 1))

    state = ControllerState.initial((R,))
    gains_fixed = fixed_gains_2r(sched)
    noise = [GaussMarkovState.initialize(s.noise, (2, 3), seed) for seed in seeds]
    fail_step = np.full(R, -1, dtype=np.int64)
    alive = np.ones(R, dtype=bool)

    out = _stats_or_series(collect_series, n, R, len(CHANNELS_2R))
    X = np.empty((R, len(CHANNELS_2R)))
    noisebuf = np.empty((min(_CHUNK, n), R, 2, 3)) if n > 0 else None

    def mark_failed(bad):
        newly = alive & bad
        if np.any(newly):
            fail_step[newly] = k
            alive[newly] = False

    def record(k, cmd1, cmd2):
        # truth channels; frozen (finite) values persist for failed runs
        u = r2 - r1
        d_t = norm3(u)
        bad = d_t <= _SEP_TOL
        mark_failed(bad)
        z_t = np.where(bad[:, None], z_d[k], u / np.where(bad, 1.0, d_t)[:, None])
        p_t = 0.5 * (r1 + r2)
        nw = norm3(z_t + z_d[k])
        badw = nw <= _ANTIPODAL_TOL
        mark_failed(badw)
        z_err = np.where(badw[:, None], z_d[k], z_t)
        perr_t = partial_error(z_err, z_d[k])
        dp_t = p_t - p_d[k]
        err_t = PoseError(dq0=perr_t.dq0, dq=perr_t.dq, dp=dp_t)
        azimuth, elevation = pointing_angles(z_err)
        X[:, 0:3] = p_t
        X[:, 3] = d_t
        X[:, 4] = azimuth
        X[:, 5] = elevation
        X[:, 6] = _wrap_angle(azimuth - az_d[k])
        X[:, 7] = _wrap_angle(elevation - el_d[k])
        X[:, 8] = perr_t.dq0
        X[:, 9:12] = perr_t.dq
        X[:, 12:15] = dp_t
        X[:, 15:18] = cmd1
        X[:, 18:21] = cmd2
        X[:, 21] = lyapunov_value(err_t, state)
        if collect_series:
            out[k] = X
        else:
            out[0][k] += X.sum(axis=0)
            out[1][k] += (X * X).sum(axis=0)

    cmd1 = np.zeros((R, 3))
    cmd2 = np.zeros((R, 3))
    k = 0
    done = 0
    while done < n:
        L = min(_CHUNK, n - done)
        for i, st_noise in enumerate(noise):
            block, noise[i] = noise_block(st_noise, s.noise, dt, L)
            noisebuf[:L, i] = block
        for j in range(L):
            k = done + j
            nrow = noisebuf[j]
            r1m = r1 + nrow[:, 0]
            r2m = r2 + nrow[:, 1]
            u = r2m - r1m
            d_m = norm3(u)
            bad = d_m <= _SEP_TOL
            mark_failed(bad)
            d_m = np.where(bad, 1.0, d_m)
            z_m = np.where(bad[:, None], z_d[k], u / d_m[:, None])
            badw = norm3(z_m + z_d[k]) <= _ANTIPODAL_TOL
            mark_failed(badw)
            z_m = np.where(badw[:, None], z_d[k], z_m)
            p_m = 0.5 * (r1m + r2m)

            perr = partial_error(z_m, z_d[k])
            err = PoseError(dq0=perr.dq0, dq=perr.dq, dp=p_m - p_d[k])
            gains = scheduled_gains_2r(d_m, sched) if adaptive else gains_fixed
            # same PI law; for the 2R partial pose the commanded omega is
            # the inertial rate fed straight into the velocity map
            tw = pose_pi_control(err, state, gains, omega_d[k], v_d[k])
            ddot = s.k_d * (d_d[k] - d_m)
            st_m = Cluster2RState(p=p_m, z=z_m, d=d_m)
            cmd1, cmd2 = inverse_vel_2r(st_m, tw.vel, tw.omega, ddot)

            record(k, cmd1, cmd2)

            new_state = integrator_step(err, state, gains, dt)
            keep = alive[:, None]
            state = ControllerState(
                eta=np.where(keep, new_state.eta, state.eta),
                xi=np.where(keep, new_state.xi, state.xi),
            )
            r1 = np.where(keep, r1 + dt * cmd1, r1)
            r2 = np.where(keep, r2 + dt * cmd2, r2)
        done += L
    k = n
    record(n, cmd1, cmd2)
    return t, out, fail_step


def _safe_positions_3r(bad, r1m, r2m, r3m, safe1, safe2, safe3):
    m = bad[:, None]
    return (
        np.where(m, safe1, r1m),
        np.where(m, safe2, r2m),
        np.where(m, safe3, r3m),
    )


def _simulate_3r(s: Scenario, seeds: list[int], collect_series: bool):
    R = len(seeds)
    n = s.n_steps
    dt = s.dt
    sched = s.gains_3r
    adaptive = s.controller == "adaptive"
    t, p_d, v_d, d2_d, d3_d, alpha_d, q_d, omega_d = _reference_3r(s)

    init = s.initial
    q_off = _rpy_quat(*np.deg2rad(np.asarray(init.rpy_offset_deg)))
    q0 = qt.quat_mul(q_d[0], q_off)
    st0 = Cluster3RState(
        p=p_d[0] + np.asarray(init.position_offset),
        rot=qt.rot_matrix(q0),
        d2=d2_d[0] + init.d2_offset,
        d3=d3_d[0] + init.d3_offset,
        alpha=alpha_d[0] + np.deg2rad(init.alpha_offset_deg),
    )
    r1_0, r2_0, r3_0 = robots_from_cluster_3r(st0)
    r1 = np.tile(r1_0, (R, 1))
    r2 = np.tile(r2_0, (R, 1))
    r3 = np.tile(r3_0, (R, 1))
    safe1, safe2, safe3 = r1_0, r2_0, r3_0

    state = ControllerState.initial((R,))
    gains_fixed = fixed_gains_3r(sched)
    noise = [GaussMarkovState.initialize(s.noise, (3, 3), seed) for seed in seeds]
    fail_step = np.full(R, -1, dtype=np.int64)
    alive = np.ones(R, dtype=bool)

    out = _stats_or_series(collect_series, n, R, len(CHANNELS_3R))
    X = np.empty((R, len(CHANNELS_3R)))
    noisebuf = np.empty((min(_CHUNK, n), R, 3, 3)) if n > 0 else None

    def degenerate(a, b, c):
        u2 = b - a
        u3 = c - a
        d2 = norm3(u2)
        d3 = norm3(u3)
        nz = norm3(cross3(u2, u3))
        p = (a + b + c) / 3.0
        nx = norm3(p - a)
        return (
            (d2 <= _SEP_TOL)
            | (d3 <= _SEP_TOL)
            | (nz <= 1e-9 * d2 * d3)
            | (nx <= 1e-9 * np.maximum(d2, d3))
        )

    def mark_failed(bad):
        newly = alive & bad
        if np.any(newly):
            fail_step[newly] = k
            alive[newly] = False

    def record(k, cmd1, cmd2, cmd3, lam):
        bad = degenerate(r1, r2, r3)
        mark_failed(bad)
        a, b, c = _safe_positions_3r(bad, r1, r2, r3, safe1, safe2, safe3)
        st_t = forward_3r(a, b, c)
        q_t = qt.quat_from_rot_matrix(st_t.rot)
        dq_t = qt.quat_mul(qt.quat_conj(q_d[k]), q_t)
        dp_t = st_t.p - p_d[k]
        err_t = PoseError(dq0=dq_t[..., 0], dq=dq_t[..., 1:], dp=dp_t)
        roll, pitch, yaw = _euler_zyx(dq_t)
        X[:, 0:3] = st_t.p
        X[:, 3] = st_t.d2
        X[:, 4] = st_t.d3
        X[:, 5] = st_t.alpha
        X[:, 6] = roll
        X[:, 7] = pitch
        X[:, 8] = yaw
        X[:, 9] = dq_t[..., 0]
        X[:, 10:13] = dq_t[..., 1:]
        X[:, 13:16] = dp_t
        X[:, 16:19] = lam
        X[:, 19:22] = cmd1
        X[:, 22:25] = cmd2
        X[:, 25:28] = cmd3
        X[:, 28] = lyapunov_value(err_t, state)
        if collect_series:
            out[k] = X
        else:
            out[0][k] += X.sum(axis=0)
            out[1][k] += (X * X).sum(axis=0)

    cmd1 = np.zeros((R, 3))
    cmd2 = np.zeros((R, 3))
    cmd3 = np.zeros((R, 3))
    lam = np.zeros((R, 3))
    k = 0
    done = 0
    while done < n:
        L = min(_CHUNK, n - done)
        for i, st_noise in enumerate(noise):
            block, noise[i] = noise_block(st_noise, s.noise, dt, L)
            noisebuf[:L, i] = block
        for j in range(L):
            k = done + j
            nrow = noisebuf[j]
            r1m = r1 + nrow[:, 0]
            r2m = r2 + nrow[:, 1]
            r3m = r3 + nrow[:, 2]
            bad = degenerate(r1m, r2m, r3m)
            mark_failed(bad)
            r1m, r2m, r3m = _safe_positions_3r(bad, r1m, r2m, r3m, safe1, safe2, safe3)

            st_m = forward_3r(r1m, r2m, r3m)
            q_m = qt.quat_from_rot_matrix(st_m.rot)
            dq_m = qt.quat_mul(qt.quat_conj(q_d[k]), q_m)
            err = PoseError(dq0=dq_m[..., 0], dq=dq_m[..., 1:], dp=st_m.p - p_d[k])

            inertia = formation_inertia(
                np.stack([r1m, r2m, r3m], axis=-2), st_m.p, st_m.rot
            )
            lam = lambda_from_inertia(inertia, sched)
            gains = scheduled_gains_3r(inertia, sched) if adaptive else gains_fixed

            tw = pose_pi_control(err, state, gains, omega_d[k], v_d[k])
            omega_i = qt.rotate(q_m, tw.omega)
            ref_geom = GeometryReference3R(
                d2_d=float(d2_d[k]), d3_d=float(d3_d[k]), alpha_d=float(alpha_d[k]),
                k_d=s.k_d, k_alpha=s.k_alpha,
            )
            rates = geometry_control_3r(st_m.d2, st_m.d3, st_m.alpha, ref_geom)
            vc = ClusterVelocity3R.from_rates(st_m, tw.vel, omega_i, *rates)
            cmd1, cmd2, cmd3 = inverse_vel_3r(st_m, vc)

            record(k, cmd1, cmd2, cmd3, lam)

            new_state = integrator_step(err, state, gains, dt)
            keep = alive[:, None]
            state = ControllerState(
                eta=np.where(keep, new_state.eta, state.eta),
                xi=np.where(keep, new_state.xi, state.xi),
            )
            r1 = np.where(keep, r1 + dt * cmd1, r1)
            r2 = np.where(keep, r2 + dt * cmd2, r2)
            r3 = np.where(keep, r3 + dt * cmd3, r3)
        done += L
    k = n
    record(n, cmd1, cmd2, cmd3, lam)
    return t, out, fail_step


def _simulate(s: Scenario, seeds: list[int], collect_series: bool):
    if s.formation == "2r":
        return _simulate_2r(s, seeds, collect_series)
    return _simulate_3r(s, seeds, collect_series)


def channel_names(s: Scenario) -> tuple[str, ...]:
    return CHANNELS_2R if s.formation == "2r" else CHANNELS_3R


def simulate_run(scenario: Scenario, seed: int) -> RunResult:
    """One deterministic closed-loop run; bit-identical for equal inputs."""
    t, series, fail_step = _simulate(scenario, [seed], collect_series=True)
    names = channel_names(scenario)
    channels = {name: series[:, 0, i].copy() for i, name in enumerate(names)}
    failed = bool(fail_step[0] >= 0)
    return RunResult(
        time=t,
        channels=channels,
        seed=seed,
        failed=failed,
        fail_time=float(fail_step[0] * scenario.dt) if failed else None,
    )


def monte_carlo(
    scenario: Scenario,
    n_runs: int,
    base_seed: int,
    seeds: list[int] | None = None,
) -> BatchStats:
    """Batch statistics over runs seeded base_seed + i.

    Degenerate runs are excluded from the statistics and reported in
    failed_seeds; the surviving runs are re-aggregated cleanly.
    """
    if seeds is None:
        if n_runs < 2:
            raise ValueError("n_runs must be at least 2")
        seeds = [base_seed + i for i in range(n_runs)]
    elif len(seeds) < 2:
        raise ValueError("need at least 2 seeds")
    total = len(seeds)

    failed_seeds: list[int] = []
    use = list(seeds)
    for _ in range(2):
        t, acc, fail_step = _simulate(scenario, use, collect_series=False)
        bad = fail_step >= 0
        if not np.any(bad):
            break
        failed_seeds.extend(sd for sd, b in zip(use, bad) if b)
        use = [sd for sd, b in zip(use, bad) if not b]
        if len(use) < 2:
            raise RuntimeError(
                f"fewer than 2 runs survived; failed seeds: {sorted(failed_seeds)}"
            )
    else:
        raise RuntimeError("runs kept failing after exclusion; scenario is degenerate")

    R = len(use)
    s1, s2 = acc
    mean = s1 / R
    var = np.maximum((s2 - R * mean * mean) / (R - 1), 0.0)
    std = np.sqrt(var)
    names = channel_names(scenario)
    return BatchStats(
        time=t,
        mean={name: mean[:, i].copy() for i, name in enumerate(names)},
        std={name: std[:, i].copy() for i, name in enumerate(names)},
        n_runs=R,
        total_runs=total,
        failed_seeds=sorted(failed_seeds),
    )
