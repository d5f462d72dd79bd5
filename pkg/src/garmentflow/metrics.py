"""Set-level generation metrics and pattern-quality metrics.

Generation metrics compare two collections of 3D point clouds under the
symmetric Chamfer distance: reference coverage, reference-to-nearest
distance, and leave-one-out nearest-neighbor classification (50% means the
sets are indistinguishable). Pattern metrics score panel counts, matched
panel polygon overlap, and reproduced seam pairs.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import polygons
from .distances import chamfer_symmetric, farthest_point_resample
from .particles import GarmentParticles, project_image
from .patterns import SewingPattern, panel_polygon_or_none

SURFACE_POINTS_FULL_SCALE = 8192
SURFACE_POINTS_DESK = 1024


@dataclass
class GenEvalReport:
    cov: float
    mmd: float
    one_nna: float
    n_generated: int
    n_reference: int
    nna_ties: bool = False

    def to_json_dict(self) -> dict:
        return {
            "cov": self.cov,
            "mmd": self.mmd,
            "one_nna": self.one_nna,
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
            "nna_ties": self.nna_ties,
        }


def _check_sets(sg, sr):
    if len(sg) == 0 or len(sr) == 0:
        raise ValueError("generated and reference sets must be nonempty")


def _cross_distances(sg, sr):
    out = np.empty((len(sg), len(sr)))
    for i, x in enumerate(sg):
        for j, y in enumerate(sr):
            out[i, j] = chamfer_symmetric(x, y)
    return out


def coverage(sg, sr) -> float:
    """Percent of reference clouds that are some generated cloud's nearest."""
    _check_sets(sg, sr)
    d = _cross_distances(sg, sr)
    matched = set(d.argmin(axis=1).tolist())
    return 100.0 * len(matched) / len(sr)


def mmd(sg, sr) -> float:
    """Mean distance from each reference cloud to its closest generated one."""
    _check_sets(sg, sr)
    d = _cross_distances(sg, sr)
    return float(d.min(axis=0).mean())


def one_nna(sg, sr) -> float:
    """Leave-one-out 1-NN classification accuracy over the union, percent."""
    value, _ = one_nna_with_ties(sg, sr)
    return value

def one_nna_with_ties(sg, sr):
    _check_sets(sg, sr)
    if len(sg) < 2 or len(sr) < 2:
        raise ValueError("1-NNA needs at least two clouds per set")
    clouds = list(sg) + list(sr)
    n = len(clouds)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = chamfer_symmetric(clouds[i], clouds[j])
    np.fill_diagonal(d, np.inf)
    # Stable tie-break: argmin picks the lowest index. Duplicate clouds
    # (zero distances) and multi-way minima get flagged.
    nn = d.argmin(axis=1)
    ties = bool(
        any((d[i] == d[i, nn[i]]).sum() > 1 for i in range(n))
        or any(d[i, nn[i]] == 0.0 for i in range(n))
    )
    same = 0
    for i in range(n):
        same += (i < len(sg)) == (nn[i] < len(sg))
    return 100.0 * same / n, ties


def evaluate_sets(sg, sr) -> GenEvalReport:
    nna, ties = one_nna_with_ties(sg, sr)
    return GenEvalReport(
        cov=coverage(sg, sr),
        mmd=mmd(sg, sr),
        one_nna=nna,
        n_generated=len(sg),
        n_reference=len(sr),
        nna_ties=ties,
    )


# -------------------------------------------------------------- cloud prep

def particle_cloud(particles: GarmentParticles, count: int = None,
                   seed: int = 0) -> np.ndarray:
    """Drape-space cloud of a particle set, optionally resampled to ``count``."""
    cloud = project_image(particles)
    if count is not None and len(cloud) != count:
        cloud = farthest_point_resample(cloud, count, seed=seed)
    return cloud


def surface_cloud(garment, count: int = SURFACE_POINTS_DESK, seed: int = 0) -> np.ndarray:
    """Area-uniform drape-surface samples of an analytic garment."""
    import shapely

    rng = np.random.default_rng(seed)
    panels = garment.panels
    areas = np.array([p.area for p in panels])
    weights = areas / areas.sum()
    counts = rng.multinomial(count, weights)
    chunks = []
    for panel, m in zip(panels, counts):
        if m == 0:
            continue
        poly = polygons.to_shapely(panel.outline)
        xmin, ymin, xmax, ymax = poly.bounds
        got = []
        while len(got) < m:
            cand = rng.uniform([xmin, ymin], [xmax, ymax], size=(4 * m + 32, 2))
            keep = np.asarray(shapely.covers(poly, shapely.points(cand)))
            got.extend(cand[keep][: m - len(got)])
        chunks.append(garment.drape_panel(panel.id, np.asarray(got)))
    return np.concatenate(chunks, axis=0)


# ----------------------------------------------------------- pattern metrics

def _matched_panel_pairs(pred: SewingPattern, gt: SewingPattern):
    """Greedy panel matching by centroid distance; returns (pred_i, gt_j) pairs."""
    pred_polys = [(i, panel_polygon_or_none(p)) for i, p in enumerate(pred.panels)]
    gt_polys = [(j, panel_polygon_or_none(p)) for j, p in enumerate(gt.panels)]
    cand = []
    for i, pp in pred_polys:
        if pp is None:
            continue
        cp = polygons.polygon_centroid(pp)
        for j, gp in gt_polys:
            if gp is None:
                continue
            cg = polygons.polygon_centroid(gp)
            cand.append((float(np.linalg.norm(cp - cg)), i, j))
    cand.sort()
    used_i, used_j, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j))
    return pairs


def panel_iou(pred: SewingPattern, gt: SewingPattern) -> float:
    """Mean matched-panel polygon IOU; unmatched or degenerate panels score 0."""
    n_pred = len(pred.valid_panels())
    n_gt = len(gt.valid_panels())
    denom = max(n_pred, n_gt)
    if denom == 0:
        return 0.0
    total = 0.0
    for i, j in _matched_panel_pairs(pred, gt):
        pp = panel_polygon_or_none(pred.panels[i])
        gp = panel_polygon_or_none(gt.panels[j])
        try:
            total += polygons.polygon_iou(pp, gp)
        except ValueError:
            warnings.warn("degenerate panel polygon contributes zero IOU")
    return total / denom


def panel_accuracy(preds, gts) -> float:
    """Percent of garments whose predicted valid-panel count matches."""
    if len(preds) != len(gts) or not preds:
        raise ValueError("prediction and ground-truth lists must align")
    hits = sum(
        1 for p, g in zip(preds, gts) if p.panel_count == g.panel_count
    )
    return 100.0 * hits / len(preds)


def stitch_accuracy(preds, gts) -> float:
    """Percent of ground-truth stitch pairs reproduced after panel matching."""
    if len(preds) != len(gts) or not preds:
        raise ValueError("prediction and ground-truth lists must align")
    total = 0
    hit = 0
    for pred, gt in zip(preds, gts):
        total += len(gt.stitches)
        if not pred.stitches:
            continue
        mapping = {i: j for i, j in _matched_panel_pairs(pred, gt)}
        mapped = set()
        for (pa, ea), (pb, eb) in pred.stitches:
            if pa in mapping and pb in mapping:
                mapped.add(frozenset(((mapping[pa], ea), (mapping[pb], eb))))
        for pair in gt.stitches:
            if frozenset(pair) in mapped:
                hit += 1
    if total == 0:
        return 100.0
    return 100.0 * hit / total
