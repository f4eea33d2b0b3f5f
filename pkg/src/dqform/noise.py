"""Band-limited measurement noise as a first-order Gauss-Markov process.

Discretized Ornstein-Uhlenbeck recurrence per channel:

    x+ = phi * x + sigma * sqrt(1 - phi^2) * w,   phi = exp(-dt / t_c)

with w standard normal. The stationary distribution has standard
deviation sigma and autocorrelation exp(-tau / t_c); channels start from
a stationary draw. Block generation goes through scipy's lfilter, which
evaluates the identical recurrence (bit-for-bit equal to stepping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .quat import Array


@dataclass(frozen=True)
class NoiseParams:
    """Per-axis standard deviation (m) and correlation time (s)."""

    sigma: float = 1.0
    t_c: float = 0.002

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not self.t_c > 0:
            raise ValueError("t_c must be positive")

    def phi(self, dt: float) -> float:
        return float(np.exp(-dt / self.t_c))

    def drive(self, dt: float) -> float:
        """Innovation gain sigma * sqrt(1 - phi^2)."""
        phi = self.phi(dt)
        return self.sigma * float(np.sqrt(1.0 - phi * phi))


@dataclass
class GaussMarkovState:
    """Current channel values plus the owning RNG stream."""

    value: Array
    rng: np.random.Generator

    @classmethod
    def initialize(
        cls, params: NoiseParams, shape: tuple[int, ...], seed: int
    ) -> "GaussMarkovState":
        """Start from the stationary distribution with a fresh stream."""
        rng = np.random.default_rng(seed)
        return cls(value=params.sigma * rng.standard_normal(shape), rng=rng)


def noise_step(
    state: GaussMarkovState, params: NoiseParams, dt: float
) -> tuple[Array, GaussMarkovState]:
    """One recurrence step; returns the new sample and the advanced state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    w = state.rng.standard_normal(np.shape(state.value))
    value = params.phi(dt) * state.value + params.drive(dt) * w
    return value, GaussMarkovState(value=value, rng=state.rng)


def noise_block(
    state: GaussMarkovState, params: NoiseParams, dt: float, n: int
) -> tuple[Array, GaussMarkovState]:
    """n consecutive steps at once, shape (n,) + channel shape.

    Identical sample stream to calling noise_step n times.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    shape = np.shape(state.value)
    w = state.rng.standard_normal((n,) + shape)
    phi = params.phi(dt)
    flat = w.reshape(n, -1)
    zi = (phi * np.asarray(state.value, dtype=np.float64)).reshape(1, -1)
    out, _ = lfilter([params.drive(dt)], [1.0, -phi], flat, axis=0, zi=zi)
    samples = out.reshape((n,) + shape)
    return samples, GaussMarkovState(value=samples[-1].copy(), rng=state.rng)
