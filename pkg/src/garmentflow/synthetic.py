"""Procedural analytic garments: panels, closed-form drape maps, ground truth.

Four families on a fixed canonical body (cylindrical torso, cylindrical
arms), chosen so panel count, stitch structure, and drape topology all
vary:

* ``tube_skirt``     2 rectangles wrapped on a vertical cylinder.
* ``a_line_skirt``   3 trapezoids (front + split back) wrapped on a cone.
* ``two_panel_top``  2 notched rectangles on a cylinder with a flattened top.
* ``sleeved_top``    the top plus 2 sleeve tubes on horizontal arm cylinders.

Every stitched edge pair maps to coincident 3D curves of equal arc length,
so recovered seams can be checked against ground truth.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .construction import (
    DEFAULT_BBOX,
    BboxViolation,
    PackingConfig,
    PanelPolygon,
    build_particles,
    pack_panels,
)
from .particles import GarmentParticles
from .patterns import Edge, Panel, SewingPattern

FAMILIES = ("tube_skirt", "a_line_skirt", "two_panel_top", "sleeved_top")

LABEL_TOKEN_COUNT = 4
LABEL_VOCAB = 16

STITCH_GAP_LIMIT = 0.5  # cm, max seam-curve mismatch accepted at generation
DEFAULT_AREA_PER_POINT = 48.0  # cm^2 per particle at desk scale

PARAM_RANGES = {
    "tube_skirt": {"width": (40.0, 70.0), "height": (40.0, 80.0)},
    "a_line_skirt": {"width": (40.0, 60.0), "height": (40.0, 80.0), "flare": (0.30, 0.52)},
    "two_panel_top": {
        "width": (50.0, 80.0),
        "height": (35.0, 55.0),
        "neck_width": (10.0, 18.0),
        "neck_depth": (5.0, 10.0),
    },
    "sleeved_top": {
        "width": (50.0, 80.0),
        "height": (35.0, 55.0),
        "neck_width": (10.0, 18.0),
        "neck_depth": (5.0, 10.0),
        "sleeve_length": (25.0, 45.0),
        "sleeve_circumference": (20.0, 30.0),
    },
}

_TAPER_START = 0.6  # fraction of top height where the drape starts flattening


@dataclass
class ParametricGarment:
    family: str
    params: dict
    panels: list  # PanelPolygon, placements initialized or packed
    stitches: list  # ((panel_id, edge_idx), (panel_id, edge_idx))
    label_tokens: np.ndarray
    seed: int = 0
    packed: bool = False

    def panel_by_id(self, panel_id: str) -> PanelPolygon:
        for p in self.panels:
            if p.id == panel_id:
                return p
        raise KeyError(panel_id)

    def drape_panel(self, panel_id: str, local_uv) -> np.ndarray:
        """Analytic drape of panel-local (u, v) samples; (n, 3) cm."""
        return _drape(self.family, self.params, panel_id, np.asarray(local_uv, dtype=np.float64))

    def drape(self, packed_uv) -> np.ndarray:
        """Drape of packed pattern coordinates, resolving points to panels."""
        from . import polygons

        packed_uv = np.atleast_2d(np.asarray(packed_uv, dtype=np.float64))
        out = np.empty((len(packed_uv), 3))
        remaining = np.ones(len(packed_uv), dtype=bool)
        for panel in self.panels:
            local = packed_uv - panel.placement[None, :]
            poly = polygons.to_shapely(panel.outline).buffer(1e-9)
            import shapely

            inside = np.asarray(shapely.covers(poly, shapely.points(local))) & remaining
            if inside.any():
                out[inside] = self.drape_panel(panel.id, local[inside])
                remaining &= ~inside
        if remaining.any():
            raise ValueError("drape undefined outside the packed panels")
        return out


def sample_params(family: str, rng) -> dict:
    ranges = PARAM_RANGES[family]
    return {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in ranges.items()}


def generate_garment(family: str, params: dict, seed: int = 0) -> ParametricGarment:
    """Build a garment with initial placements projected from its drape poses."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    ranges = PARAM_RANGES[family]
    for key, (lo, hi) in ranges.items():
        if key not in params:
            raise ValueError(f"missing parameter {key!r} for {family}")
        if not lo <= params[key] <= hi:
            raise ValueError(f"{family}.{key}={params[key]} outside [{lo}, {hi}]")

    builder = {
        "tube_skirt": _build_tube_skirt,
        "a_line_skirt": _build_a_line_skirt,
        "two_panel_top": _build_two_panel_top,
        "sleeved_top": _build_sleeved_top,
    }[family]
    panels, stitches = builder(params)
    for p in panels:
        p.placement = p.pose[:2].copy()  # 2D projection of the drape translation
    garment = ParametricGarment(
        family=family,
        params=dict(params),
        panels=panels,
        stitches=stitches,
        label_tokens=_label_tokens(family, len(panels)),
        seed=seed,
    )
    _check_seams(garment)
    return garment


def _label_tokens(family: str, n_panels: int) -> np.ndarray:
    idx = FAMILIES.index(family)
    is_top = 1 if "top" in family else 0
    return np.array([idx, 4 + is_top, 6 + n_panels, 15], dtype=np.int64)


FAMILY_PANEL_COUNTS = {
    "tube_skirt": 2, "a_line_skirt": 3, "two_panel_top": 2, "sleeved_top": 4,
}


def family_label_tokens(family: str) -> np.ndarray:
    """Conditioning tokens of a family (fixed per family)."""
    return _label_tokens(family, FAMILY_PANEL_COUNTS[family])


def pack_garment(garment: ParametricGarment, cfg: PackingConfig = None):
    """Pack the garment's panels; returns (packed garment, PackResult)."""
    result = pack_panels(garment.panels, cfg)
    packed = ParametricGarment(
        family=garment.family,
        params=garment.params,
        panels=result.panels,
        stitches=garment.stitches,
        label_tokens=garment.label_tokens,
        seed=garment.seed,
        packed=result.converged,
    )
    return packed, result


# ---------------------------------------------------------------- families

def _rect(w_half, height):
    return np.array([[-w_half, 0.0], [w_half, 0.0], [w_half, height], [-w_half, height]])


def _build_tube_skirt(p):
    w_half, height = p["width"] / 2.0, p["height"]
    radius = p["width"] / np.pi
    outline = _rect(w_half, height)
    front = PanelPolygon("front", "skirt_front", outline, np.zeros(2), None,
                         pose=np.array([0.0, -height / 2.0, radius, 0, 0, 0]))
    back = PanelPolygon("back", "skirt_back", outline.copy(), np.zeros(2), "front",
                        pose=np.array([0.0, -height / 2.0, -radius, 0, np.pi, 0]))
    stitches = [(("front", 1), ("back", 1)), (("front", 3), ("back", 3))]
    return [front, back], stitches


def _build_a_line_skirt(p):
    w_half, height, flare = p["width"] / 2.0, p["height"], p["flare"]
    hem_half = w_half + height * np.tan(flare)
    radius = 2.0 * w_half / np.pi
    front = PanelPolygon(
        "front", "skirt_front",
        np.array([[-hem_half, 0.0], [hem_half, 0.0], [w_half, height], [-w_half, height]]),
        np.zeros(2), None,
        pose=np.array([0.0, -height / 2.0, radius, 0, 0, 0]))
    half = np.array([[0.0, 0.0], [hem_half, 0.0], [w_half, height], [0.0, height]])
    back_l = PanelPolygon("back_left", "skirt_back", half, np.zeros(2), "front",
                          pose=np.array([radius, -height / 2.0, -radius, 0, np.pi, 0]))
    back_r = PanelPolygon("back_right", "skirt_back", half.copy(), np.zeros(2), "front",
                          pose=np.array([-radius, -height / 2.0, -radius, 0, np.pi, 0]))
    stitches = [
        (("front", 1), ("back_left", 1)),
        (("front", 3), ("back_right", 1)),
        (("back_left", 3), ("back_right", 3)),
    ]
    return [front, back_l, back_r], stitches


def _top_outline(w_half, height, neck_w, neck_d):
    return np.array([
        [-w_half, 0.0],
        [w_half, 0.0],
        [w_half, height],
        [neck_w / 2.0, height],
        [neck_w / 4.0, height - neck_d],
        [-neck_w / 4.0, height - neck_d],
        [-neck_w / 2.0, height],
        [-w_half, height],
    ])


def _build_two_panel_top(p):
    w_half, height = p["width"] / 2.0, p["height"]
    radius = p["width"] / np.pi
    front = PanelPolygon(
        "front", "torso_front",
        _top_outline(w_half, height, p["neck_width"], p["neck_depth"]),
        np.zeros(2), None,
        pose=np.array([0.0, height / 2.0, radius, 0, 0, 0]))
    back = PanelPolygon(
        "back", "torso_back",
        _top_outline(w_half, height, p["neck_width"], 0.4 * p["neck_depth"]),
        np.zeros(2), "front",
        pose=np.array([0.0, height / 2.0, -radius, 0, np.pi, 0]))
    stitches = [
        (("front", 1), ("back", 1)),
        (("front", 7), ("back", 7)),
        (("front", 2), ("back", 2)),
        (("front", 6), ("back", 6)),
    ]
    return [front, back], stitches


def _build_sleeved_top(p):
    panels, stitches = _build_two_panel_top(p)
    sl, sc = p["sleeve_length"], p["sleeve_circumference"]
    radius = p["width"] / np.pi
    r_s = sc / (2.0 * np.pi)
    x_arm = radius + 2.0
    y_arm = p["height"] - r_s - 2.0
    outline = _rect(sc / 2.0, sl)
    right = PanelPolygon("sleeve_right", "sleeve", outline, np.zeros(2), "front",
                         pose=np.array([x_arm + sl / 2.0, y_arm, 0.0, 0, 0, np.pi / 2]))
    left = PanelPolygon("sleeve_left", "sleeve", outline.copy(), np.zeros(2), "front",
                        pose=np.array([-x_arm - sl / 2.0, y_arm, 0.0, 0, 0, -np.pi / 2]))
    panels.extend([right, left])
    stitches.extend([
        (("sleeve_right", 1), ("sleeve_right", 3)),
        (("sleeve_left", 1), ("sleeve_left", 3)),
    ])
    return panels, stitches


# ---------------------------------------------------------------- drape maps

def _drape(family, p, panel_id, uv):
    u, v = uv[:, 0], uv[:, 1]
    if family == "tube_skirt":
        return _drape_skirt(p["width"] / 2.0, 0.0, p["height"], panel_id, u, v)
    if family == "a_line_skirt":
        return _drape_skirt(p["width"] / 2.0, p["flare"], p["height"], panel_id, u, v)
    if family in ("two_panel_top", "sleeved_top"):
        if panel_id in ("front", "back"):
            return _drape_top_torso(p, panel_id, u, v)
        return _drape_sleeve(p, panel_id, u, v)
    raise ValueError(f"unknown family {family!r}")


def _drape_skirt(w_half, flare, height, panel_id, u, v):
    half_w = w_half + (height - v) * np.tan(flare)  # panel half width at height v
    radius = 2.0 * half_w / np.pi
    if panel_id == "front":
        theta = (u / half_w) * (np.pi / 2.0)
    elif panel_id == "back":  # tube skirt's single back panel
        theta = np.pi - (u / half_w) * (np.pi / 2.0)
    elif panel_id == "back_left":
        theta = np.pi - (u / half_w) * (np.pi / 2.0)
    elif panel_id == "back_right":
        theta = -np.pi + (u / half_w) * (np.pi / 2.0)
    else:
        raise KeyError(panel_id)
    return np.stack([radius * np.sin(theta), v - height, radius * np.cos(theta)], axis=1)


def _taper(v, height):
    """Flatten the cylinder toward the shoulder line; C^1 at the taper start."""
    v0 = _TAPER_START * height
    g = np.ones_like(v)
    hot = v > v0
    g[hot] = np.cos((np.pi / 2.0) * (v[hot] - v0) / (height - v0))
    return g


def _drape_top_torso(p, panel_id, u, v):
    w_half = p["width"] / 2.0
    radius = p["width"] / np.pi
    theta = (u / w_half) * (np.pi / 2.0)
    if panel_id == "back":
        theta = np.pi - theta
    z = radius * np.cos(theta) * _taper(v, p["height"])
    return np.stack([radius * np.sin(theta), v, z], axis=1)


def _drape_sleeve(p, panel_id, u, v):
    sc = p["sleeve_circumference"]
    radius = p["width"] / np.pi
    r_s = sc / (2.0 * np.pi)
    x_arm = radius + 2.0
    y_arm = p["height"] - r_s - 2.0
    psi = u * 2.0 * np.pi / sc
    if panel_id == "sleeve_right":
        x = x_arm + v
        z = r_s * np.sin(psi)
    elif panel_id == "sleeve_left":
        x = -x_arm - v
        z = -r_s * np.sin(psi)
    else:
        raise KeyError(panel_id)
    return np.stack([x, y_arm + r_s * np.cos(psi), z], axis=1)


# ----------------------------------------------------------- seam validation

def _edge_curve(garment, panel_id, edge_idx, samples=17):
    panel = garment.panel_by_id(panel_id)
    k = len(panel.outline)
    a, b = panel.outline[edge_idx], panel.outline[(edge_idx + 1) % k]
    s = np.linspace(0.0, 1.0, samples)[:, None]
    uv = a[None, :] + s * (b - a)[None, :]
    return garment.drape_panel(panel_id, uv), float(np.linalg.norm(b - a))


def _check_seams(garment):
    for (pa, ea), (pb, eb) in garment.stitches:
        curve_a, len_a = _edge_curve(garment, pa, ea)
        curve_b, len_b = _edge_curve(garment, pb, eb)
        if abs(len_a - len_b) > 0.01 * max(len_a, len_b):
            raise ValueError(f"stitch {pa}/{ea} vs {pb}/{eb}: arc lengths differ")
        gap_fwd = np.linalg.norm(curve_a - curve_b, axis=1).max()
        gap_rev = np.linalg.norm(curve_a - curve_b[::-1], axis=1).max()
        if min(gap_fwd, gap_rev) > STITCH_GAP_LIMIT:
            raise ValueError(f"stitch {pa}/{ea} vs {pb}/{eb}: seam gap too large")


def seam_gap(garment, samples=33) -> float:
    """Max 3D gap across all declared seams (diagnostic)."""
    worst = 0.0
    for (pa, ea), (pb, eb) in garment.stitches:
        curve_a, _ = _edge_curve(garment, pa, ea, samples)
        curve_b, _ = _edge_curve(garment, pb, eb, samples)
        fwd = np.linalg.norm(curve_a - curve_b, axis=1).max()
        rev = np.linalg.norm(curve_a - curve_b[::-1], axis=1).max()
        worst = max(worst, min(fwd, rev))
    return worst


# -------------------------------------------------------- ground-truth pattern

def ground_truth_pattern(garment: ParametricGarment,
                         max_panels: int = None, max_edges: int = None) -> SewingPattern:
    """Encode the packed garment's panels and seams as a sewing pattern."""
    if not garment.packed:
        raise ValueError("pack the garment before building its pattern")
    stitch_lookup = {}
    for pair in garment.stitches:
        (pa, ea), (pb, eb) = pair
        mid_a = _edge_curve(garment, pa, ea, 3)[0][1]
        mid_b = _edge_curve(garment, pb, eb, 3)[0][1]
        tag = 0.5 * (mid_a + mid_b)
        stitch_lookup[(pa, ea)] = tag
        stitch_lookup[(pb, eb)] = tag

    panel_index = {p.id: i for i, p in enumerate(garment.panels)}
    panels = []
    for p in garment.panels:
        placed = p.placed_outline()
        k = len(placed)
        edges = []
        for j in range(k):
            delta = placed[(j + 1) % k] - placed[j]
            tag = stitch_lookup.get((p.id, j))
            edges.append(Edge(
                delta=delta,
                stitch=1.0 if tag is not None else 0.0,
                tag=tag,
            ))
        pose = np.concatenate([placed[0], [p.pose[2]], p.pose[3:6]])
        panels.append(Panel(pose=pose, edges=edges))
    stitches = [
        ((panel_index[pa], ea), (panel_index[pb], eb))
        for (pa, ea), (pb, eb) in garment.stitches
    ]
    kwargs = {}
    if max_panels is not None:
        kwargs["max_panels"] = max_panels
    if max_edges is not None:
        kwargs["max_edges"] = max_edges
    return SewingPattern(panels=panels, stitches=stitches, **kwargs)


# ----------------------------------------------------------------- datasets

@dataclass
class DatasetSpec:
    n_garments: int
    family_mix: dict = None  # family -> weight; uniform over FAMILIES when None
    seed: int = 0
    area_per_point: float = DEFAULT_AREA_PER_POINT
    param_ranges: dict = None  # optional per-family overrides

    def __post_init__(self):
        if self.family_mix is None:
            self.family_mix = {f: 1.0 / len(FAMILIES) for f in FAMILIES}
        total = sum(self.family_mix.values())
        if not np.isclose(total, 1.0):
            raise ValueError("family mix weights must sum to 1")
        for fam in self.family_mix:
            if fam not in FAMILIES:
                raise ValueError(f"unknown family {fam!r}")


@dataclass
class DatasetSample:
    index: int
    family: str
    params: dict
    seed: int
    particles: GarmentParticles = None
    pattern: SewingPattern = None
    label_tokens: np.ndarray = None
    filtered: str = ""  # empty = kept, else reason


def build_sample(family, params, seed, area_per_point=DEFAULT_AREA_PER_POINT,
                 pack_cfg: PackingConfig = None):
    """Garment -> packed panels -> particles + ground-truth pattern."""
    garment = generate_garment(family, params, seed=seed)
    packed, result = pack_garment(garment, pack_cfg)
    if not result.converged:
        return None, "pack_failed", packed
    try:
        particles = build_particles(packed, area_per_point, seed=seed,
                                    bbox=(pack_cfg.bbox if pack_cfg else DEFAULT_BBOX))
    except BboxViolation:
        return None, "bbox", packed
    pattern = ground_truth_pattern(packed)
    sample = DatasetSample(
        index=-1, family=family, params=params, seed=seed,
        particles=particles, pattern=pattern, label_tokens=packed.label_tokens,
    )
    return sample, "", packed


def generate_dataset(spec: DatasetSpec, out_dir) -> dict:
    """Write manifest.json plus per-sample particles/pattern/meta files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    families = sorted(spec.family_mix)
    weights = np.array([spec.family_mix[f] for f in families])
    records = []
    for i in range(spec.n_garments):
        family = families[int(rng.choice(len(families), p=weights))]
        params = sample_params(family, rng)
        seed = int(rng.integers(2**31 - 1))
        sample, reason, packed = build_sample(
            family, params, seed, area_per_point=spec.area_per_point)
        rec = {
            "index": i,
            "family": family,
            "params": params,
            "seed": seed,
            "filtered": reason,
        }
        if sample is not None:
            sdir = out_dir / f"sample_{i:05d}"
            sdir.mkdir(exist_ok=True)
            (sdir / "particles.json").write_text(json.dumps(sample.particles.to_json_dict()))
            (sdir / "pattern.json").write_text(json.dumps(sample.pattern.to_json_dict()))
            meta = {
                "family": family,
                "params": params,
                "seed": seed,
                "packed": True,
                "label_tokens": sample.label_tokens.tolist(),
                "panels": [
                    {
                        "id": p.id,
                        "label": p.label,
                        "parent": p.parent,
                        "outline": p.outline.tolist(),
                        "placement": p.placement.tolist(),
                        "pose": p.pose.tolist(),
                    }
                    for p in packed.panels
                ],
                "stitches": [list(map(list, s)) for s in packed.stitches],
            }
            (sdir / "meta.json").write_text(json.dumps(meta))
            rec["path"] = sdir.name
            rec["n_points"] = sample.particles.count
        records.append(rec)
    manifest = {
        "n_garments": spec.n_garments,
        "seed": spec.seed,
        "area_per_point": spec.area_per_point,
        "family_mix": spec.family_mix,
        "samples": records,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def garment_from_meta(meta: dict) -> ParametricGarment:
    """Rebuild a packed garment (with stored placements) from its meta record."""
    panels = [
        PanelPolygon(
            id=p["id"], label=p["label"],
            outline=np.asarray(p["outline"]),
            placement=np.asarray(p["placement"]),
            parent=p["parent"],
            pose=np.asarray(p["pose"]),
        )
        for p in meta["panels"]
    ]
    return ParametricGarment(
        family=meta["family"],
        params=meta["params"],
        panels=panels,
        stitches=[tuple(map(tuple, s)) for s in meta["stitches"]],
        label_tokens=np.asarray(meta["label_tokens"], dtype=np.int64),
        seed=meta["seed"],
        packed=True,
    )
