"""Panel sampling and packing: turn placed panels plus a drape map into particles.

Sampling emits every outline vertex plus evenly spaced boundary points
(flag 1) and a quasi-uniform interior set (flag 0), with the total count
tracking panel_area / area_per_point. Packing resolves padded overlaps by
pushing panel pairs apart along their center line, siblings before
child-parent pairs, within a bounded step budget.
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import polygons
from .particles import GarmentParticles

DEFAULT_PAD_CM = 5.0
DEFAULT_MAX_STEPS = 500
DEFAULT_BBOX = (-150.0, 150.0, -80.0, 220.0)  # (umin, umax, vmin, vmax)


class UnpackableError(ValueError):
    """A panel cannot fit inside the packing bounding box at all."""


class BboxViolation(ValueError):
    """Packed pattern exceeds the dataset bounding box; sample is filtered."""


@dataclass
class PanelPolygon:
    id: str
    label: str
    outline: np.ndarray  # (K, 2) simple polygon, local cm coords
    placement: np.ndarray  # (2,) translation into pattern space
    parent: Optional[str] = None
    pose: Optional[np.ndarray] = None  # (6,) drape translation + euler angles

    def __post_init__(self):
        self.outline = polygons.ensure_ccw(self.outline)
        self.placement = np.asarray(self.placement, dtype=np.float64).reshape(2)
        if self.pose is not None:
            self.pose = np.asarray(self.pose, dtype=np.float64).reshape(6)
        polygons.to_shapely(self.outline)  # validates simplicity and area

    @property
    def area(self) -> float:
        return abs(polygons.signed_area(self.outline))

    def placed_outline(self) -> np.ndarray:
        return self.outline + self.placement[None, :]


@dataclass
class PackingConfig:
    pad: float = DEFAULT_PAD_CM
    max_steps: int = DEFAULT_MAX_STEPS
    bbox: tuple = DEFAULT_BBOX
    step_scale: float = 1.0

    def __post_init__(self):
        if self.pad < 0:
            raise ValueError("pad must be >= 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class PackResult:
    panels: list
    converged: bool
    steps: int


def sample_panel(panel: PanelPolygon, area_per_point: float, seed: int = 0):
    """Sample one panel in its local frame.

    Returns (uv, flags): boundary samples first (flag 1, exactly on outline
    segments), then interior samples (flag 0, strictly inside). The total
    count tracks round(area / area_per_point) unless the mandatory boundary
    samples alone exceed it.
    """
    if area_per_point <= 0:
        raise ValueError("area_per_point must be positive")
    outline = panel.outline
    area = panel.area
    if area <= 0:
        raise ValueError(f"degenerate panel {panel.id!r}")
    h = float(np.sqrt(area_per_point))
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0x7FFFFFFF, _stable_id_hash(panel.id)]))

    boundary = []
    k = len(outline)
    for i in range(k):
        a, b = outline[i], outline[(i + 1) % k]
        length = float(np.linalg.norm(b - a))
        nseg = max(1, int(round(length / h)))
        for j in range(nseg):
            boundary.append(a + (j / nseg) * (b - a))
    boundary = np.asarray(boundary)

    n_target = max(1, int(round(area / area_per_point)))
    n_interior = max(0, n_target - len(boundary))
    interior = _interior_samples(outline, area, n_interior, h, rng)

    uv = np.concatenate([boundary, interior], axis=0) if len(interior) else boundary
    flags = np.concatenate([np.ones(len(boundary)), np.zeros(len(interior))])
    return uv, flags


def _interior_samples(outline, area, count, h, rng):
    if count == 0:
        return np.empty((0, 2))
    poly = polygons.to_shapely(outline)
    margin = min(0.25 * h, 0.25 * float(np.sqrt(area / count)))
    core = poly.buffer(-margin)
    if core.is_empty:
        core = poly.buffer(-0.25 * margin)
        if core.is_empty:
            return np.empty((0, 2))

    # Jittered grid sized for the interior target, then trim / top up.
    spacing = float(np.sqrt(area / count))
    xmin, ymin, xmax, ymax = poly.bounds
    xs = np.arange(xmin + 0.5 * spacing, xmax, spacing)
    ys = np.arange(ymin + 0.5 * spacing, ymax, spacing)
    if len(xs) and len(ys):
        gx, gy = np.meshgrid(xs, ys)
        cand = np.stack([gx.ravel(), gy.ravel()], axis=1)
        cand = cand + rng.uniform(-0.3 * spacing, 0.3 * spacing, size=cand.shape)
        import shapely

        keep = shapely.covers(core, shapely.points(cand))
        pts = cand[np.asarray(keep)]
    else:
        pts = np.empty((0, 2))

    if len(pts) > count:
        pick = rng.choice(len(pts), size=count, replace=False)
        pts = pts[np.sort(pick)]
    elif len(pts) < count:
        extra = _rejection_fill(core, (xmin, ymin, xmax, ymax), count - len(pts), rng)
        pts = np.concatenate([pts, extra], axis=0) if len(pts) else extra
    return pts


def _rejection_fill(core, bounds, count, rng, max_tries=200):
    import shapely

    xmin, ymin, xmax, ymax = bounds
    out = []
    for _ in range(max_tries):
        need = count - len(out)
        if need <= 0:
            break
        cand = rng.uniform([xmin, ymin], [xmax, ymax], size=(max(4 * need, 32), 2))
        keep = np.asarray(shapely.covers(core, shapely.points(cand)))
        out.extend(cand[keep][:need])
    return np.asarray(out) if out else np.empty((0, 2))


def _stable_id_hash(*ids) -> int:
    digest = hashlib.sha256("|".join(str(i) for i in ids).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _overlapping(a: PanelPolygon, b: PanelPolygon, pad: float) -> bool:
    pa, pb = a.placed_outline(), b.placed_outline()
    if pad > 0:
        return polygons.polygon_distance(pa, pb) < 2.0 * pad
    inter = polygons.to_shapely(pa).intersection(polygons.to_shapely(pb))
    return inter.area > 0


def _pair_order(panels):
    """Overlap-resolution order: siblings first, then child-parent, then the rest."""
    by_id = {p.id: i for i, p in enumerate(panels)}
    siblings, child_parent, rest = [], [], []
    for i in range(len(panels)):
        for j in range(i + 1, len(panels)):
            a, b = panels[i], panels[j]
            if a.parent == b.parent:
                siblings.append((i, j))
            elif a.parent == b.id or b.parent == a.id:
                child_parent.append((i, j))
            else:
                rest.append((i, j))
    # Parent links must be acyclic.
    for p in panels:
        seen = {p.id}
        cur = p.parent
        while cur is not None:
            if cur in seen:
                raise ValueError("cyclic parent links between panels")
            seen.add(cur)
            cur = panels[by_id[cur]].parent if cur in by_id else None
    return siblings + child_parent + rest


def pack_panels(panels, cfg: PackingConfig = None) -> PackResult:
    """Push overlapping padded panels apart until none overlap or steps run out."""
    cfg = cfg or PackingConfig()
    if not panels:
        raise ValueError("need at least one panel")
    umin, umax, vmin, vmax = cfg.bbox
    for p in panels:
        w = np.ptp(p.outline[:, 0])
        h = np.ptp(p.outline[:, 1])
        if w > (umax - umin) or h > (vmax - vmin):
            raise UnpackableError(f"panel {p.id!r} larger than the packing bbox")

    panels = [replace(p, placement=p.placement.copy()) for p in panels]
    pairs = _pair_order(panels)
    converged = False
    steps = 0
    for step in range(cfg.max_steps):
        moved = False
        for i, j in pairs:
            a, b = panels[i], panels[j]
            if not _overlapping(a, b, cfg.pad):
                continue
            moved = True
            ca = polygons.polygon_centroid(a.placed_outline())
            cb = polygons.polygon_centroid(b.placed_outline())
            d = cb - ca
            norm = np.linalg.norm(d)
            if norm < 1e-9:
                # Concentric centers: deterministic pseudo-random direction,
                # biased horizontal where the packing box has the most room.
                prng = np.random.default_rng(_stable_id_hash(a.id, b.id))
                ang = prng.uniform(-np.pi / 9, np.pi / 9)
                if prng.random() < 0.5:
                    ang += np.pi
                d = np.array([np.cos(ang), np.sin(ang)])
            else:
                d = d / norm
            lo_a, hi_a = polygons.projection_interval(a.placed_outline(), d)
            lo_b, hi_b = polygons.projection_interval(b.placed_outline(), d)
            depth = min(hi_a, hi_b) - max(lo_a, lo_b) + 2.0 * cfg.pad
            half = 0.5 * cfg.step_scale * max(depth, 0.0) + 1e-6
            a.placement -= d * half
            b.placement += d * half
        steps = step + 1
        if not moved:
            converged = True
            break
    in_bbox = all(polygons.bbox_contains(cfg.bbox, p.placed_outline()) for p in panels)
    return PackResult(panels=panels, converged=converged and in_bbox, steps=steps)


def build_particles(garment, area_per_point: float, seed: int = 0,
                    bbox=DEFAULT_BBOX) -> GarmentParticles:
    """Sample every packed panel and lift it through the garment's drape map.

    The garment must expose ``panels`` (packed placements) and
    ``drape_panel(panel_id, local_uv) -> (n, 3)``. Raises BboxViolation when
    the packed pattern leaves the dataset bounding box.
    """
    for panel in garment.panels:
        if not polygons.bbox_contains(bbox, panel.placed_outline()):
            raise BboxViolation(f"panel {panel.id!r} outside the dataset bbox")
    uv_all, xyz_all, flags_all = [], [], []
    for panel in garment.panels:
        uv_local, flags = sample_panel(panel, area_per_point, seed=seed)
        xyz = np.asarray(garment.drape_panel(panel.id, uv_local), dtype=np.float64)
        if xyz.shape != (len(uv_local), 3) or not np.isfinite(xyz).all():
            raise ValueError(f"drape evaluation failed for panel {panel.id!r}")
        uv_all.append(uv_local + panel.placement[None, :])
        xyz_all.append(xyz)
        flags_all.append(flags)
    points = np.concatenate(
        [np.concatenate(uv_all), np.concatenate(xyz_all)], axis=1
    )
    return GarmentParticles(points=points, flags=np.concatenate(flags_all))
