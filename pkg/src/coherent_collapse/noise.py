"""Counter-based Brownian increments.

Every increment is a pure function of (master seed, trajectory, step,
channel): raw Philox output number ``step * n_channels + channel`` under the
key derived from ``(seed, trajectory)``, mapped to a standard normal by the
inverse CDF.  Trajectories therefore need no shared generator state and any
single increment can be regenerated on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_WORDS_PER_COUNTER = 4  # Philox4x64 emits four 64-bit words per counter value


def trajectory_key(seed: int, trajectory: int) -> np.ndarray:
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence([int(seed), int(trajectory)]).generate_state(
        2, np.uint64)


def _raw_words(key: np.ndarray, start: int, count: int) -> np.ndarray:
    c0, skip = divmod(start, _WORDS_PER_COUNTER)
    bitgen = np.random.Philox(key=key, counter=c0)
    return bitgen.random_raw(skip + count)[skip:]


def _to_normal(raw: np.ndarray) -> np.ndarray:
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


@dataclass(frozen=True)
class NoisePath:
    """Gaussian increments dB_k ~ Normal(0, dt) for one trajectory."""

    seed: int
    trajectory: int
    n_channels: int
    dt: float

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("need at least one noise channel")
        if not self.dt >= 0:
            raise ValueError("dt must be nonnegative")

    @property
    def key(self) -> np.ndarray:
        return trajectory_key(self.seed, self.trajectory)

    def standard_normals(self, n_steps: int, start_step: int = 0) -> np.ndarray:
        k = self.n_channels
        raw = _raw_words(self.key, start_step * k, n_steps * k)
        return _to_normal(raw).reshape(n_steps, k)

    def increments(self, n_steps: int, start_step: int = 0) -> np.ndarray:
        """Array of shape (n_steps, n_channels)."""
        return np.sqrt(self.dt) * self.standard_normals(n_steps, start_step)

    def at(self, step: int, channel: int) -> float:
        if not 0 <= channel < self.n_channels:
            raise IndexError(f"channel {channel} out of range")
        raw = _raw_words(self.key, step * self.n_channels + channel, 1)
        return float(np.sqrt(self.dt) * _to_normal(raw)[0])


def coarsen(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` steps (Brownian refinement coupling)."""
    n, k = increments.shape
    if n % factor:
        raise ValueError(f"{n} steps not divisible by {factor}")
    return increments.reshape(n // factor, factor, k).sum(axis=1)
