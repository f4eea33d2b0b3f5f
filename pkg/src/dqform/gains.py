"""Geometry-adaptive gain scheduling.

2R schedules interpolate on lambda = (d - d_min)/(d_max - d_min); 3R
schedules interpolate per axis on lambda = (sqrt(I) - sqrt(I_min)) /
(sqrt(I_max) - sqrt(I_min)) with the formation treated as three unit
point masses in its own frame. lambda is clamped to [0, 1] outside the
design envelope so the scheduled gains stay uniformly bounded.

Only the attitude gains are scheduled; the translation and leakage gains
are fixed configuration values. The default k_eta = 25 keeps the
Lyapunov value monotone per 1 ms step for scheduled k_i up to 300 (the
discrete split step needs k_eta/2 > dt * (k_i/2)^2 / 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cluster import Cluster3RState, alpha_split, robots_from_cluster_3r
from .control import GainSet
from .quat import Array

DEFAULT_K_V_P = 2.0
DEFAULT_K_V_I = 1.0
DEFAULT_K_ETA = 25.0
DEFAULT_K_XI = 1.0


@dataclass(frozen=True)
class GainSchedule2R:
    """Distance-scheduled attitude gains plus the fixed remaining gains."""

    d_min: float = 10.0
    d_max: float = 50.0
    kp1: float = 10.0
    ki1: float = 50.0
    kp2: float = 60.0
    ki2: float = 300.0
    k_v_p: float = DEFAULT_K_V_P
    k_v_i: float = DEFAULT_K_V_I
    k_eta: float = DEFAULT_K_ETA
    k_xi: float = DEFAULT_K_XI

    def __post_init__(self):
        if not self.d_min < self.d_max:
            raise ValueError("require d_min < d_max")
        for name in ("kp1", "ki1", "kp2", "ki2", "k_v_p", "k_v_i", "k_eta", "k_xi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def lambda_from_distance(d: Array, sched: GainSchedule2R) -> Array:
    """(d - d_min)/(d_max - d_min), clamped to [0, 1]."""
    d = np.asarray(d, dtype=np.float64)
    return np.clip((d - sched.d_min) / (sched.d_max - sched.d_min), 0.0, 1.0)


def interp_gains(lam: Array, g1: Array, g2: Array) -> Array:
    """Convex combination g1*(1 - lam) + g2*lam; lam must lie in [0, 1]."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0.0) or np.any(lam > 1.0):
        raise ValueError("lambda outside [0, 1]; clamp before interpolating")
    return np.asarray(g1) * (1.0 - lam) + np.asarray(g2) * lam


@dataclass(frozen=True)
class Inertia:
    """Formation moments about its own axes, unit point masses (kg m^2)."""

    ix: Array
    iy: Array
    iz: Array

    @property
    def as_array(self) -> Array:
        return np.stack(
            [np.asarray(self.ix), np.asarray(self.iy), np.asarray(self.iz)], axis=-1
        )


def formation_inertia(positions: Array, p: Array, rot: Array) -> Inertia:
    """Moments of unit point masses at body coordinates rot^T (r_i - p).

    positions has shape (..., n, 3); p (..., 3); rot (..., 3, 3).
    """
    rel = np.asarray(positions, dtype=np.float64) - np.asarray(p, dtype=np.float64)[..., None, :]
    body = np.einsum("...ji,...nj->...ni", np.asarray(rot, dtype=np.float64), rel)
    sq = body**2
    ix = np.sum(sq[..., 1] + sq[..., 2], axis=-1)
    iy = np.sum(sq[..., 0] + sq[..., 2], axis=-1)
    iz = np.sum(sq[..., 0] + sq[..., 1], axis=-1)
    return Inertia(ix=ix, iy=iy, iz=iz)


def inertia_3r(state: Cluster3RState) -> Inertia:
    """Formation inertia of a 3R cluster state."""
    r1, r2, r3 = robots_from_cluster_3r(state)
    return formation_inertia(np.stack([r1, r2, r3], axis=-2), state.p, state.rot)


def _inertia_from_geometry(d2: Array, d3: Array, alpha: Array) -> tuple[Array, Array, Array]:
    """(I_x, I_y, I_z) directly from geometry; the robots sit in the body
    x-y plane so I_z = I_x + I_y."""
    sp = alpha_split(d2, d3, alpha)
    c2, s2 = np.cos(sp.alpha2), np.sin(sp.alpha2)
    c3, s3 = np.cos(sp.alpha3), np.sin(sp.alpha3)
    x1 = -(d2 * c2 + d3 * c3) / 3.0
    y1 = (d2 * s2 - d3 * s3) / 3.0
    x2 = x1 + d2 * c2
    y2 = y1 - d2 * s2
    x3 = x1 + d3 * c3
    y3 = y1 + d3 * s3
    ix = y1 * y1 + y2 * y2 + y3 * y3
    iy = x1 * x1 + x2 * x2 + x3 * x3
    return ix, iy, ix + iy


@lru_cache(maxsize=8)
def inertia_envelope_extrema(
    d_min: float = 20.0,
    d_max: float = 50.0,
    alpha_min_deg: float = 30.0,
    alpha_max_deg: float = 150.0,
    n_grid: int = 101,
) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """Per-axis (I_min, I_max) by exhaustive grid search over the geometry
    envelope (the extrema are not stated anywhere in closed form)."""
    g = np.linspace(d_min, d_max, n_grid)
    a = np.linspace(np.deg2rad(alpha_min_deg), np.deg2rad(alpha_max_deg), n_grid)
    d2, d3, al = (x.ravel() for x in np.meshgrid(g, g, a, indexing="ij"))
    ix, iy, iz = _inertia_from_geometry(d2, d3, al)
    lo = (float(ix.min()), float(iy.min()), float(iz.min()))
    hi = (float(ix.max()), float(iy.max()), float(iz.max()))
    return lo, hi


@dataclass(frozen=True)
class GainSchedule3R:
    """Per-axis inertia-scheduled attitude gains plus the fixed remaining
    gains. i_min/i_max default to the grid-search extrema of the design
    envelope d in [20, 50] m, alpha in [30, 150] deg."""

    ki1: tuple[float, float, float] = (0.5, 0.32, 0.08)
    ki2: tuple[float, float, float] = (2.5, 3.2, 0.8)
    i_min: tuple[float, float, float] = field(default=None)  # type: ignore[assignment]
    i_max: tuple[float, float, float] = field(default=None)  # type: ignore[assignment]
    k_v_p: float = DEFAULT_K_V_P
    k_v_i: float = DEFAULT_K_V_I
    k_eta: float = DEFAULT_K_ETA
    k_xi: float = DEFAULT_K_XI

    def __post_init__(self):
        if self.i_min is None or self.i_max is None:
            lo, hi = inertia_envelope_extrema()
            if self.i_min is None:
                object.__setattr__(self, "i_min", lo)
            if self.i_max is None:
                object.__setattr__(self, "i_max", hi)
        if np.any(np.asarray(self.ki1) <= 0) or np.any(np.asarray(self.ki2) <= 0):
            raise ValueError("endpoint gains must be positive")
        if np.any(np.asarray(self.i_min) >= np.asarray(self.i_max)):
            raise ValueError("require i_min < i_max per axis")
        for name in ("k_v_p", "k_v_i", "k_eta", "k_xi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def lambda_from_inertia(inertia: Inertia, sched: GainSchedule3R) -> Array:
    """Per-axis (sqrt(I) - sqrt(I_min))/(sqrt(I_max) - sqrt(I_min)),
    clamped to [0, 1]; shape (..., 3)."""
    s = np.sqrt(inertia.as_array)
    lo = np.sqrt(np.asarray(sched.i_min))
    hi = np.sqrt(np.asarray(sched.i_max))
    return np.clip((s - lo) / (hi - lo), 0.0, 1.0)


def scheduled_gains_3r(inertia: Inertia, sched: GainSchedule3R) -> GainSet:
    """Diagonal K_wi from the per-axis interpolation, K_wp = K_wi / 2."""
    lam = lambda_from_inertia(inertia, sched)
    ki = interp_gains(lam, np.asarray(sched.ki1), np.asarray(sched.ki2))
    return GainSet.diag(ki / 2.0, ki, sched.k_v_p, sched.k_v_i, sched.k_eta, sched.k_xi)


def scheduled_gains_2r(d: Array, sched: GainSchedule2R) -> GainSet:
    """Scalar scheduled gains on the 2R distance; K_wp interpolates its own
    endpoint pair (kp mirrors ki/2 for the bundled tables)."""
    lam = lambda_from_distance(d, sched)
    ki = np.asarray(interp_gains(lam, sched.ki1, sched.ki2))
    kp = np.asarray(interp_gains(lam, sched.kp1, sched.kp2))
    # expand to explicit per-axis triples; a bare (3,) batch would otherwise
    # be ambiguous with a per-axis gain vector
    ki = np.broadcast_to(ki[..., None], ki.shape + (3,))
    kp = np.broadcast_to(kp[..., None], kp.shape + (3,))
    return GainSet.diag(kp, ki, sched.k_v_p, sched.k_v_i, sched.k_eta, sched.k_xi)


def fixed_gains_2r(sched: GainSchedule2R) -> GainSet:
    """Fixed-gain baseline: arithmetic mean of the endpoint gains."""
    return GainSet.diag(
        0.5 * (sched.kp1 + sched.kp2), 0.5 * (sched.ki1 + sched.ki2),
        sched.k_v_p, sched.k_v_i, sched.k_eta, sched.k_xi,
    )


def fixed_gains_3r(sched: GainSchedule3R) -> GainSet:
    """Fixed-gain baseline: per-axis arithmetic mean of the endpoint gains."""
    ki = 0.5 * (np.asarray(sched.ki1) + np.asarray(sched.ki2))
    return GainSet.diag(ki / 2.0, ki, sched.k_v_p, sched.k_v_i, sched.k_eta, sched.k_xi)
