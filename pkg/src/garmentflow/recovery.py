"""Training-free pattern recovery from particles: clustering + triangulation.

Particles are clustered into panels by density in the pattern plane, each
cluster is Delaunay-triangulated, triangles whose three vertices are all
boundary-flagged are carved away, and the outer boundary loop of what
remains becomes the panel outline (one polyline edge per segment). Seams
are inferred afterwards by pairing edges whose supporting particles sit at
the same place in drape space.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .particles import GarmentParticles, project_domain, project_image
from .patterns import Edge, Panel, SewingPattern

DBSCAN_EPS_FACTOR = 3.0  # eps = factor x median nearest-neighbor distance
DBSCAN_MIN_PTS = 5
STITCH_PAIR_MAX_GAP = 2.0  # cm between edge centers of an inferred seam
STITCH_SUPPORT_MAX_DIST = 2.0  # cm from a boundary particle to its edge


@dataclass
class ClusterResult:
    labels: np.ndarray  # per-particle cluster id, -1 for outliers
    k: int


def cluster_panels(particles: GarmentParticles, eps_factor: float = DBSCAN_EPS_FACTOR,
                   min_pts: int = DBSCAN_MIN_PTS) -> ClusterResult:
    """Density clustering of the pattern-plane projection.

    eps adapts to the sampling density (factor times the median
    nearest-neighbor spacing), so panels separated by the packing pad split
    cleanly at any reasonable sampling resolution.
    """
    uv = project_domain(particles)
    n = len(uv)
    if n < min_pts:
        raise ValueError(f"need at least {min_pts} particles")
    tree = cKDTree(uv)
    nn_dist, _ = tree.query(uv, k=2)
    eps = eps_factor * float(np.median(nn_dist[:, 1]))
    neighborhoods = tree.query_ball_point(uv, eps)

    labels = np.full(n, -2, dtype=np.int64)  # -2 unvisited, -1 outlier
    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if len(neighborhoods[i]) < min_pts:
            labels[i] = -1
            continue
        labels[i] = cluster
        frontier = list(neighborhoods[i])
        while frontier:
            j = frontier.pop()
            if labels[j] == -1:
                labels[j] = cluster
            if labels[j] != -2:
                continue
            labels[j] = cluster
            if len(neighborhoods[j]) >= min_pts:
                frontier.extend(neighborhoods[j])
        cluster += 1
    if cluster == 0:
        raise ValueError("density clustering found only outliers")
    return ClusterResult(labels=labels, k=cluster)


def _boundary_loop(points, triangles):
    """Outer boundary walk of a triangle set; returns vertex index loop."""
    edge_count = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary = [e for e, c in edge_count.items() if c == 1]
    if not boundary:
        return None
    adj = {}
    for a, b in boundary:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    # Start at the lowest-leftmost boundary vertex and walk, picking at each
    # vertex the unused edge that turns most counterclockwise; this traces
    # the outer face even past pinch vertices.
    start = min(adj, key=lambda i: (points[i, 0], points[i, 1]))
    used = set()
    loop = [start]
    prev_dir = np.array([0.0, -1.0])
    current = start
    previous = -1
    for _ in range(2 * len(boundary) + 1):
        candidates = []
        for nxt in adj[current]:
            if nxt == previous:
                continue  # immediate backtracking only as a last resort
            key = (min(current, nxt), max(current, nxt), current)
            if key in used:
                continue
            d = points[nxt] - points[current]
            norm = np.linalg.norm(d)
            if norm < 1e-12:
                continue
            d = d / norm
            ang = np.arctan2(
                prev_dir[0] * d[1] - prev_dir[1] * d[0],
                -(prev_dir @ d),
            )
            candidates.append((ang, nxt, d))
        if not candidates and previous >= 0:
            d = points[previous] - points[current]
            d = d / max(np.linalg.norm(d), 1e-12)
            candidates = [(np.pi, previous, d)]
        if not candidates:
            return None
        candidates.sort(key=lambda c: c[0])
        _, nxt, d = candidates[0]
        used.add((min(current, nxt), max(current, nxt), current))
        if nxt == start:
            return loop
        loop.append(nxt)
        prev_dir = -d
        previous = current
        current = nxt
    return None


def _largest_simple_loop(loop):
    """Split a weakly-simple walk at repeated vertices; keep the largest piece."""
    if loop is None or len(loop) < 3:
        return None
    seen = {}
    best = None
    stack_loop = list(loop)
    i = 0
    while i < len(stack_loop):
        v = stack_loop[i]
        if v in seen:
            j = seen[v]
            piece = stack_loop[j:i]
            if len(piece) >= 3 and (best is None or len(piece) > len(best)):
                best = piece
            del stack_loop[j:i]
            seen = {u: k for k, u in enumerate(stack_loop[: j + 1])}
            i = j + 1
            continue
        seen[v] = i
        i += 1
    if len(stack_loop) >= 3 and (best is None or len(stack_loop) > len(best)):
        best = stack_loop
    return best


def recover_delaunay(particles: GarmentParticles,
                     eps_factor: float = DBSCAN_EPS_FACTOR,
                     min_pts: int = DBSCAN_MIN_PTS) -> SewingPattern:
    """Geometry-only recovery: per-cluster triangulation with boundary carving.

    Output panels are polyline loops (one straight edge per boundary
    segment) with pattern-plane anchors; poses and stitches are not
    predicted by this variant and stay zeroed.
    """
    clusters = cluster_panels(particles, eps_factor=eps_factor, min_pts=min_pts)
    uv = project_domain(particles)
    flags = particles.flags
    panels = []
    max_edges = 3
    for c in range(clusters.k):
        idx = np.where(clusters.labels == c)[0]
        if len(idx) < 3:
            warnings.warn(f"cluster {c}: fewer than 3 particles, skipped")
            continue
        pts = uv[idx]
        try:
            tri = Delaunay(pts)
        except Exception:
            warnings.warn(f"cluster {c}: triangulation failed, skipped")
            continue
        on_boundary = flags[idx] > 0.5
        keep = ~np.all(on_boundary[tri.simplices], axis=1)
        kept = tri.simplices[keep]
        if len(kept) == 0:
            warnings.warn(f"cluster {c}: carving removed every triangle, skipped")
            continue
        loop = _largest_simple_loop(_boundary_loop(pts, kept))
        if loop is None:
            warnings.warn(f"cluster {c}: no usable boundary loop, skipped")
            continue
        verts = pts[loop]
        deltas = np.roll(verts, -1, axis=0) - verts
        edges = [Edge(delta=d) for d in deltas]
        pose = np.concatenate([verts[0], [0.0, 0.0, 0.0, 0.0]])
        panels.append(Panel(pose=pose, edges=edges))
        max_edges = max(max_edges, len(edges))
    if not panels:
        raise ValueError("no panel could be recovered")
    return SewingPattern(panels=panels, stitches=[],
                         max_panels=max(len(panels), 8), max_edges=max_edges)


def _edge_segments(panel: Panel):
    verts = panel.polygon()
    nxt = np.roll(verts, -1, axis=0)
    return verts, nxt


def infer_stitches(pattern: SewingPattern, particles: GarmentParticles,
                   max_gap: float = STITCH_PAIR_MAX_GAP,
                   support_dist: float = STITCH_SUPPORT_MAX_DIST):
    """Pair panel edges across panels whose seam curves coincide in 3D.

    Each boundary-flagged particle supports its nearest panel edge (within
    ``support_dist`` in the pattern plane); an edge's center is the mean
    drape position of its supporters. Mutually-nearest centers within
    ``max_gap`` become stitch pairs, a one-to-one matching.
    """
    uv = project_domain(particles)
    xyz = project_image(particles)
    boundary = particles.flags > 0.5
    uv_b, xyz_b = uv[boundary], xyz[boundary]
    if len(uv_b) == 0:
        return []

    edge_refs = []
    seg_a, seg_b = [], []
    for pi, panel in enumerate(pattern.panels):
        if not panel.valid:
            continue
        verts, nxt = _edge_segments(panel)
        for ei in range(len(panel.edges)):
            edge_refs.append((pi, ei))
            seg_a.append(verts[ei])
            seg_b.append(nxt[ei])
    if not edge_refs:
        return []
    seg_a = np.asarray(seg_a)
    seg_b = np.asarray(seg_b)

    # Distance from every boundary particle to every edge segment.
    d = seg_b - seg_a  # (E, 2)
    len2 = np.maximum((d ** 2).sum(1), 1e-12)
    rel = uv_b[:, None, :] - seg_a[None, :, :]  # (P, E, 2)
    t = np.clip((rel * d[None, :, :]).sum(-1) / len2[None, :], 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(uv_b[:, None, :] - proj, axis=-1)  # (P, E)
    nearest_edge = dist.argmin(axis=1)
    nearest_dist = dist[np.arange(len(uv_b)), nearest_edge]

    centers = np.full((len(edge_refs), 3), np.nan)
    for e in range(len(edge_refs)):
        sup = (nearest_edge == e) & (nearest_dist <= support_dist)
        if sup.any():
            centers[e] = xyz_b[sup].mean(axis=0)

    valid = ~np.isnan(centers[:, 0])
    pairs = []
    idxs = np.where(valid)[0]
    if len(idxs) < 2:
        return []
    cdist = np.linalg.norm(centers[idxs][:, None, :] - centers[idxs][None, :, :], axis=-1)
    np.fill_diagonal(cdist, np.inf)
    # Same-panel edges never pair (seams join distinct panels here).
    for a in range(len(idxs)):
        for b in range(len(idxs)):
            if edge_refs[idxs[a]][0] == edge_refs[idxs[b]][0]:
                cdist[a, b] = np.inf
    nn = cdist.argmin(axis=1)
    for a in range(len(idxs)):
        b = nn[a]
        if a < b and nn[b] == a and cdist[a, b] <= max_gap:
            pairs.append((edge_refs[idxs[a]], edge_refs[idxs[b]]))
    return pairs


def add_domain_noise(particles: GarmentParticles, level: float, seed: int = 0,
                     reference_extent: float = 300.0) -> GarmentParticles:
    """Perturb the pattern-plane coordinates with Gaussian noise.

    ``level`` is a fraction of the packing area's reference extent (the
    width of the default packing box), mimicking corrupted generations.
    """
    rng = np.random.default_rng(seed)
    pts = particles.points.copy()
    pts[:, :2] += rng.normal(0.0, level * reference_extent, size=(len(pts), 2))
    return GarmentParticles(points=pts, flags=particles.flags.copy())
