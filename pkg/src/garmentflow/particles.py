"""Particle data model and projection operators.

A garment is represented as an unordered set of 5D points: the first two
coordinates (u, v) live in the flattened pattern plane, the last three
(x, y, z) on the draped surface, all in centimeters. Each point carries a
boundary flag: 1 when its (u, v) lies on a panel outline, 0 inside. Flags
are crisp {0, 1} on dataset particles and continuous while flowing.
"""

from dataclasses import dataclass, field

import numpy as np

# Hard cap on particle count; full-scale configs use the larger value,
# desk-scale training and datasets default to the smaller one.
FULL_SCALE_MAX_POINTS = 8192
DEFAULT_MAX_POINTS = 256


@dataclass
class GarmentParticles:
    """Unordered 5D point samples (u, v, x, y, z) with per-point boundary flags."""

    points: np.ndarray  # (N, 5) float64, cm
    flags: np.ndarray  # (N,) float64 in [0, 1]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.flags = np.asarray(self.flags, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 5:
            raise ValueError(f"points must be (N, 5), got {self.points.shape}")
        if self.flags.shape != (self.points.shape[0],):
            raise ValueError("flags must align with points")
        n = self.points.shape[0]
        if not 1 <= n <= FULL_SCALE_MAX_POINTS:
            raise ValueError(f"particle count {n} outside [1, {FULL_SCALE_MAX_POINTS}]")
        if np.any(self.flags < 0) or np.any(self.flags > 1):
            raise ValueError("flags must lie in [0, 1]")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def channels(self) -> np.ndarray:
        """(N, 6) array with the flag appended as a sixth channel."""
        return np.concatenate([self.points, self.flags[:, None]], axis=1)

    @classmethod
    def from_channels(cls, arr, threshold_flags=False) -> "GarmentParticles":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError(f"expected (N, 6) channel array, got {arr.shape}")
        flags = arr[:, 5]
        if threshold_flags:
            flags = (flags > 0.5).astype(np.float64)
        else:
            flags = np.clip(flags, 0.0, 1.0)
        return cls(points=arr[:, :5].copy(), flags=flags)

    def permuted(self, perm) -> "GarmentParticles":
        perm = np.asarray(perm)
        return GarmentParticles(self.points[perm], self.flags[perm])

    def to_json_dict(self) -> dict:
        return {"points": self.points.tolist(), "flags": self.flags.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "GarmentParticles":
        return cls(np.asarray(data["points"], dtype=np.float64),
                   np.asarray(data["flags"], dtype=np.float64))


@dataclass
class Camera:
    """View projection of the drape space onto an image plane."""

    matrix: np.ndarray = field()  # (3, 2)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape != (3, 2):
            raise ValueError(f"camera matrix must be 3x2, got {self.matrix.shape}")
        if np.linalg.matrix_rank(self.matrix, tol=1e-9) < 2:
            raise ValueError("degenerate camera: matrix must have rank 2")

    @classmethod
    def preset(cls, name: str, azimuth_deg: float = 0.0) -> "Camera":
        """Axis-aligned presets plus a free-azimuth rotation about the y axis."""
        if name == "front":
            m = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
        elif name == "side":
            m = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]
        elif name == "top":
            m = [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]
        elif name == "azimuth":
            a = np.deg2rad(azimuth_deg)
            m = [[np.cos(a), 0.0], [0.0, 1.0], [-np.sin(a), 0.0]]
        else:
            raise ValueError(f"unknown camera preset {name!r}")
        return cls(np.asarray(m, dtype=np.float64))


def project_domain(particles: GarmentParticles) -> np.ndarray:
    """Pattern-plane coordinates (u, v), order-aligned with the particles."""
    return particles.points[:, :2].copy()


def project_image(particles: GarmentParticles) -> np.ndarray:
    """Draped 3D coordinates (x, y, z); flags do not participate."""
    return particles.points[:, 2:5].copy()


def project_silhouette(particles: GarmentParticles, camera: Camera) -> np.ndarray:
    """3D coordinates composed with the view projection: (N, 2)."""
    return project_image(particles) @ camera.matrix
