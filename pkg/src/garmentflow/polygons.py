"""2D polygon helpers shared by packing, sampling, recovery, and metrics.

Boolean operations and distances delegate to shapely (GEOS); the small
predicates (area, containment margins, simplicity sweep) are kept in
numpy so they can serve as independent cross-checks.
"""

import numpy as np
from shapely.geometry import Point, Polygon


def as_vertex_array(outline) -> np.ndarray:
    arr = np.asarray(outline, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError(f"outline must be (K>=3, 2), got {arr.shape}")
    # Drop an explicitly repeated closing vertex.
    if np.allclose(arr[0], arr[-1]):
        arr = arr[:-1]
        if arr.shape[0] < 3:
            raise ValueError("degenerate outline")
    return arr


def to_shapely(outline) -> Polygon:
    try:
        poly = Polygon(as_vertex_array(outline))
    except Exception as exc:  # GEOS construction errors on garbage coords
        raise ValueError(f"invalid polygon outline: {exc}") from exc
    if not poly.is_valid or poly.area <= 0:
        raise ValueError("outline is not a simple positive-area polygon")
    return poly


def signed_area(outline) -> float:
    v = as_vertex_array(outline)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ensure_ccw(outline) -> np.ndarray:
    v = as_vertex_array(outline)
    return v if signed_area(v) > 0 else v[::-1].copy()


def polygon_centroid(outline) -> np.ndarray:
    c = to_shapely(outline).centroid
    return np.array([c.x, c.y])


def contains_point(outline, point, strict=False) -> bool:
    poly = to_shapely(outline)
    p = Point(point)
    return poly.contains(p) if strict else poly.covers(p)


def distance_to_boundary(outline, point) -> float:
    """Distance from a point to the polygon outline (0 when on it)."""
    return float(to_shapely(outline).exterior.distance(Point(point)))


def polygon_distance(outline_a, outline_b) -> float:
    """Min distance between two polygons; 0 when they touch or overlap."""
    return float(to_shapely(outline_a).distance(to_shapely(outline_b)))


def polygon_iou(outline_a, outline_b) -> float:
    """Intersection-over-union of two simple polygons."""
    pa, pb = to_shapely(outline_a), to_shapely(outline_b)
    inter = pa.intersection(pb).area
    union = pa.union(pb).area
    return float(inter / union) if union > 0 else 0.0


def projection_interval(outline, direction):
    """Min/max of the outline's vertices projected on a unit direction."""
    v = as_vertex_array(outline)
    proj = v @ np.asarray(direction, dtype=np.float64)
    return float(proj.min()), float(proj.max())


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def polyline_loop_is_simple(vertices) -> bool:
    """True when the closed polyline has no self-intersection.

    Brute-force pairwise segment test: fine for recovered panel boundaries,
    and independent of the GEOS predicates used elsewhere.
    """
    v = as_vertex_array(vertices)
    n = len(v)
    if len(np.unique(v.round(decimals=9), axis=0)) != n:
        return False  # repeated vertex = pinch
    segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint with a neighbor
            if _segments_properly_intersect(*segs[i], *segs[j]):
                return False
    return True


def bbox_contains(bbox, outline, tol=0.0) -> bool:
    """bbox = (xmin, xmax, ymin, ymax)."""
    v = as_vertex_array(outline)
    xmin, xmax, ymin, ymax = bbox
    return bool(
        (v[:, 0] >= xmin - tol).all()
        and (v[:, 0] <= xmax + tol).all()
        and (v[:, 1] >= ymin - tol).all()
        and (v[:, 1] <= ymax + tol).all()
    )
