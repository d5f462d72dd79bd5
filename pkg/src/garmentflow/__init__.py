"""Garment particle toolkit.

A garment is a 5D point cloud coupling its flattened sewing pattern (u, v)
with its draped 3D surface (x, y, z), plus per-point boundary flags. The
package builds these particle sets from analytic garments, learns a flow
generator over them, edits generations against user observations via
objective-guided sampling, recovers vectorized sewing patterns, and scores
everything with set-level and pattern metrics. A CLI and an HTTP job
service expose the pipeline.
"""

from .particles import (
    Camera,
    GarmentParticles,
    project_domain,
    project_image,
    project_silhouette,
)

__all__ = [
    "Camera",
    "GarmentParticles",
    "project_domain",
    "project_image",
    "project_silhouette",
]

__version__ = "0.1.0"
