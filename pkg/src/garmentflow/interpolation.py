"""Noise-space interpolation between two generated garments.

Endpoint noises are matched slot-to-slot by a linear assignment on
pairwise distances accumulated over several integration times, then
blended per particle with spherical linear interpolation; the particle
count interpolates linearly and the blended noise is pushed through the
unguided sampler. Endpoints reproduce direct sampling bit-for-bit.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .flow import FlowModel, finalize, initial_noise, integrate
from .particles import GarmentParticles

CORRESPONDENCE_TIMES = 5  # evenly spaced integration times, including 0 and 1
ANTIPODAL_ANGLE = np.pi - 1e-6
PARALLEL_ANGLE = 1e-7


@dataclass
class InterpolationPath:
    noise_a: np.ndarray  # (Na, C) raw endpoint noise
    noise_b: np.ndarray  # (Nb, C)
    padded_a: np.ndarray  # (N, C), N = max(Na, Nb)
    padded_b: np.ndarray
    correspondence: np.ndarray  # perm: padded_b[correspondence] aligns to padded_a
    cond: Optional[np.ndarray] = None
    steps: int = 64

    @property
    def count_a(self) -> int:
        return self.noise_a.shape[0]

    @property
    def count_b(self) -> int:
        return self.noise_b.shape[0]

    def count_at(self, s: float) -> int:
        return int(round(self.count_a + s * (self.count_b - self.count_a)))


def _pad_noise(noise: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Pad to n rows by resampling the endpoint's own noise rows."""
    if noise.shape[0] == n:
        return noise.copy()
    rng = np.random.default_rng([seed & 0x7FFFFFFF, 0x9AD])
    extra = rng.integers(noise.shape[0], size=n - noise.shape[0])
    return np.concatenate([noise, noise[extra]], axis=0)


def assign_correspondence(model: FlowModel, noise_a, noise_b, cond=None,
                          steps: int = 64, k_times: int = CORRESPONDENCE_TIMES):
    """Match slots of two equal-size noises through their trajectories.

    Integrates both, accumulates pairwise squared distances at ``k_times``
    evenly spaced times (t = 0 included), and solves one assignment on the
    summed cost. With k_times = 1 this reduces to matching the raw noise.
    """
    noise_a = np.asarray(noise_a, dtype=np.float64)
    noise_b = np.asarray(noise_b, dtype=np.float64)
    if noise_a.shape != noise_b.shape:
        raise ValueError("correspondence requires equal point counts; pad first")
    if k_times < 1:
        raise ValueError("k_times must be >= 1")
    if k_times == 1:
        marks = [0]
    else:
        marks = sorted({int(round(f * steps)) for f in np.linspace(0.0, 1.0, k_times)})
    _, snaps_a = integrate(model, noise_a, cond=cond, steps=steps, snapshots=set(marks))
    _, snaps_b = integrate(model, noise_b, cond=cond, steps=steps, snapshots=set(marks))
    cost = np.zeros((noise_a.shape[0], noise_a.shape[0]))
    for m in marks:
        cost += kernels.pairwise_sqdist(snaps_a[m], snaps_b[m])
    return kernels.solve_assignment(cost)


def build_path(model: FlowModel, seed_a: int, seed_b: int, count_a: int,
               count_b: int, cond=None, steps: int = 64,
               k_times: int = CORRESPONDENCE_TIMES) -> InterpolationPath:
    noise_a, _ = initial_noise(model, count_a, seed_a)
    noise_b, _ = initial_noise(model, count_b, seed_b)
    n = max(count_a, count_b)
    padded_a = _pad_noise(noise_a, n, seed_a)
    padded_b = _pad_noise(noise_b, n, seed_b)
    corr = assign_correspondence(model, padded_a, padded_b, cond=cond,
                                 steps=steps, k_times=k_times)
    return InterpolationPath(
        noise_a=noise_a, noise_b=noise_b,
        padded_a=padded_a, padded_b=padded_b,
        correspondence=corr, cond=cond, steps=steps,
    )


def slerp(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """Row-wise spherical interpolation of (N, C) vectors.

    Near-antipodal rows fall back to linear interpolation renormalized to
    the linearly interpolated endpoint norms; near-parallel rows to plain
    linear interpolation.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    safe = np.maximum(na * nb, 1e-300)
    cosw = np.clip((a * b).sum(axis=1) / safe, -1.0, 1.0)
    omega = np.arccos(cosw)
    out = np.empty_like(a)

    parallel = omega < PARALLEL_ANGLE
    antipodal = omega > ANTIPODAL_ANGLE
    regular = ~(parallel | antipodal)

    if regular.any():
        w1 = (np.sin((1.0 - s) * omega[regular]) / np.sin(omega[regular]))[:, None]
        w2 = (np.sin(s * omega[regular]) / np.sin(omega[regular]))[:, None]
        out[regular] = w1 * a[regular] + w2 * b[regular]
    if parallel.any():
        out[parallel] = (1.0 - s) * a[parallel] + s * b[parallel]
    if antipodal.any():
        lin = (1.0 - s) * a[antipodal] + s * b[antipodal]
        target = (1.0 - s) * na[antipodal] + s * nb[antipodal]
        norms = np.maximum(np.linalg.norm(lin, axis=1), 1e-12)
        out[antipodal] = lin * (target / norms)[:, None]
    return out


def interpolate(model: FlowModel, path: InterpolationPath, s: float) -> GarmentParticles:
    """Sample the garment at blend position s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        noise = path.noise_a
    elif s == 1.0:
        noise = path.noise_b
    else:
        blended = slerp(path.padded_a, path.padded_b[path.correspondence], s)
        noise = blended[: path.count_at(s)]
    x = integrate(model, noise, cond=path.cond, steps=path.steps)
    return finalize(model, x)
