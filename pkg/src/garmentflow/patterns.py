"""Vectorized sewing-pattern representation and its fixed-shape tensor codec.

A pattern is a stack of up to ``max_panels`` panels, each a pose row plus
up to ``max_edges`` ordered edge rows of width 15:

    [c1(2) | c2(2) | delta(2) | arc | stitch | tag(3) | attach(3) | valid]

The pose row holds 6 values zero-padded to 15: the packed-plane anchor of
the panel's first vertex (2), its drape depth (1), and euler angles (3).
Edges chain by cumulative delta from the anchor, so decoded panels come
back placed in the packed pattern plane. Stitches pair edges through their
shared 3D tag (midpoint of the seam curve in drape space).
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import polygons

EDGE_DIM = 15
POSE_DIM = 6
DESK_MAX_PANELS = 8
DESK_MAX_EDGES = 8
FULL_SCALE_MAX_SLOTS = 37  # full-scale configs use 37 panels / 37 edges

# Edge row layout.
_C1 = slice(0, 2)
_C2 = slice(2, 4)
_DX = slice(4, 6)
_ARC = 6
_STITCH = 7
_TAG = slice(8, 11)
_ATTACH = slice(11, 14)
_VALID = 14

LOOP_SNAP_TOLERANCE = 0.5  # cm of closure residual we silently distribute
STITCH_TAG_MAX_GAP = 5.0  # cm between tags of a decodable stitch pair


class PatternOverflowError(ValueError):
    """More panels or edges than the tensor layout can hold."""


@dataclass
class Edge:
    delta: np.ndarray  # (2,) displacement from the previous endpoint
    control1: np.ndarray = None  # (2,) cubic control offsets, zero when straight
    control2: np.ndarray = None
    arc: float = 0.0
    stitch: float = 0.0
    tag: np.ndarray = None  # (3,) seam tag in drape space
    attach: np.ndarray = None  # (3,) boundary condition type, opaque
    valid: float = 1.0

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64).reshape(2)
        self.control1 = _vec(self.control1, 2)
        self.control2 = _vec(self.control2, 2)
        self.tag = _vec(self.tag, 3)
        self.attach = _vec(self.attach, 3)

    def row(self) -> np.ndarray:
        row = np.zeros(EDGE_DIM)
        row[_C1] = self.control1
        row[_C2] = self.control2
        row[_DX] = self.delta
        row[_ARC] = self.arc
        row[_STITCH] = self.stitch
        row[_TAG] = self.tag
        row[_ATTACH] = self.attach
        row[_VALID] = self.valid
        return row

    @classmethod
    def from_row(cls, row) -> "Edge":
        return cls(
            delta=row[_DX],
            control1=row[_C1],
            control2=row[_C2],
            arc=float(row[_ARC]),
            stitch=float(row[_STITCH]),
            tag=row[_TAG],
            attach=row[_ATTACH],
            valid=float(row[_VALID]),
        )


def _vec(value, size):
    if value is None:
        return np.zeros(size)
    return np.asarray(value, dtype=np.float64).reshape(size)


@dataclass
class Panel:
    pose: np.ndarray  # (6,) [anchor_u, anchor_v, depth, euler...]
    edges: List[Edge]
    valid: bool = True

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=np.float64).reshape(POSE_DIM)

    @property
    def anchor(self) -> np.ndarray:
        return self.pose[:2]

    def polygon(self) -> np.ndarray:
        """Placed vertex loop in the packed pattern plane."""
        deltas = np.stack([e.delta for e in self.edges])
        verts = self.anchor[None, :] + np.concatenate(
            [np.zeros((1, 2)), np.cumsum(deltas[:-1], axis=0)]
        )
        return verts

    def closure_residual(self) -> float:
        deltas = np.stack([e.delta for e in self.edges])
        return float(np.linalg.norm(deltas.sum(axis=0)))


StitchPair = Tuple[Tuple[int, int], Tuple[int, int]]  # ((panel, edge), (panel, edge))


@dataclass
class SewingPattern:
    panels: List[Panel]
    stitches: List[StitchPair] = field(default_factory=list)
    max_panels: int = DESK_MAX_PANELS
    max_edges: int = DESK_MAX_EDGES

    def __post_init__(self):
        if len(self.panels) > self.max_panels:
            raise PatternOverflowError(
                f"{len(self.panels)} panels exceed max_panels={self.max_panels}")
        for p in self.panels:
            if len(p.edges) > self.max_edges:
                raise PatternOverflowError(
                    f"panel with {len(p.edges)} edges exceeds max_edges={self.max_edges}")
            if p.valid and len(p.edges) >= 3 and p.closure_residual() > 1e-6:
                raise ValueError("valid panel edges must form a closed loop")

    @property
    def panel_count(self) -> int:
        return sum(1 for p in self.panels if p.valid)

    def valid_panels(self) -> List[Panel]:
        return [p for p in self.panels if p.valid]

    def to_json_dict(self) -> dict:
        return {
            "max_panels": self.max_panels,
            "max_edges": self.max_edges,
            "panels": [
                {
                    "pose": p.pose.tolist(),
                    "valid": bool(p.valid),
                    "edges": [
                        {
                            "delta": e.delta.tolist(),
                            "control": e.control1.tolist() + e.control2.tolist(),
                            "arc": e.arc,
                            "stitch": e.stitch,
                            "tag": e.tag.tolist(),
                            "attach": e.attach.tolist(),
                            "valid": e.valid,
                        }
                        for e in p.edges
                    ],
                }
                for p in self.panels
            ],
            "stitches": [list(map(list, s)) for s in self.stitches],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SewingPattern":
        panels = []
        for pd in data["panels"]:
            edges = [
                Edge(
                    delta=ed["delta"],
                    control1=ed["control"][:2],
                    control2=ed["control"][2:],
                    arc=ed.get("arc", 0.0),
                    stitch=ed.get("stitch", 0.0),
                    tag=ed.get("tag"),
                    attach=ed.get("attach"),
                    valid=ed.get("valid", 1.0),
                )
                for ed in pd["edges"]
            ]
            panels.append(Panel(pose=pd["pose"], edges=edges, valid=pd.get("valid", True)))
        stitches = [tuple(map(tuple, s)) for s in data.get("stitches", [])]
        return cls(
            panels=panels,
            stitches=stitches,
            max_panels=data.get("max_panels", DESK_MAX_PANELS),
            max_edges=data.get("max_edges", DESK_MAX_EDGES),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())


def encode_pattern(pattern: SewingPattern) -> np.ndarray:
    """Pack a pattern into its (max_panels, max_edges + 1, 15) tensor."""
    m, e = pattern.max_panels, pattern.max_edges
    tensor = np.zeros((m, e + 1, EDGE_DIM))
    if len(pattern.panels) > m:
        raise PatternOverflowError("too many panels")
    for i, panel in enumerate(pattern.panels):
        if len(panel.edges) > e:
            raise PatternOverflowError("too many edges")
        tensor[i, 0, :POSE_DIM] = panel.pose
        for j, edge in enumerate(panel.edges):
            tensor[i, j + 1] = edge.row()
    return tensor


def decode_pattern(tensor: np.ndarray) -> SewingPattern:
    """Best-effort inverse of ``encode_pattern`` for possibly noisy tensors.

    Validity/stitch/arc channels threshold at 0.5. A panel whose edge loop
    misses closure by more than ``LOOP_SNAP_TOLERANCE`` cm, or that carries
    an arc edge, is kept but marked invalid rather than silently repaired;
    smaller residuals are distributed evenly across the edge deltas.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 3 or tensor.shape[2] != EDGE_DIM:
        raise ValueError(f"expected (M, E+1, {EDGE_DIM}) tensor, got {tensor.shape}")
    max_panels, slots = tensor.shape[0], tensor.shape[1] - 1
    panels = []
    for i in range(max_panels):
        block = tensor[i]
        rows = []
        for j in range(1, slots + 1):
            if block[j, _VALID] <= 0.5:
                break  # valid edges occupy a prefix
            rows.append(block[j])
        if not rows:
            continue
        edges = [Edge.from_row(r) for r in rows]
        for edge in edges:
            edge.valid = 1.0
            edge.arc = 1.0 if edge.arc > 0.5 else 0.0
            edge.stitch = 1.0 if edge.stitch > 0.5 else 0.0
        panel = Panel(pose=block[0, :POSE_DIM].copy(), edges=edges, valid=True)
        if len(edges) < 3 or any(e.arc for e in edges):
            panel.valid = False
        else:
            residual = np.stack([e.delta for e in edges]).sum(axis=0)
            if np.linalg.norm(residual) > LOOP_SNAP_TOLERANCE:
                panel.valid = False
            elif np.linalg.norm(residual) > 0:
                share = residual / len(edges)
                for e in edges:
                    e.delta = e.delta - share
        panels.append(panel)
    return SewingPattern(
        panels=panels,
        stitches=_pair_stitches(panels),
        max_panels=max_panels,
        max_edges=slots,
    )


def _pair_stitches(panels) -> List[StitchPair]:
    """Greedy mutual-nearest pairing of stitch-flagged edges by 3D tag."""
    flagged = []
    for pi, panel in enumerate(panels):
        if not panel.valid:
            continue
        for ei, edge in enumerate(panel.edges):
            if edge.stitch > 0.5:
                flagged.append(((pi, ei), edge.tag))
    pairs = []
    used = set()
    candidates = []
    for a in range(len(flagged)):
        for b in range(a + 1, len(flagged)):
            d = float(np.linalg.norm(flagged[a][1] - flagged[b][1]))
            if d <= STITCH_TAG_MAX_GAP:
                candidates.append((d, a, b))
    for d, a, b in sorted(candidates):
        if a in used or b in used:
            continue
        used.add(a)
        used.add(b)
        pairs.append((flagged[a][0], flagged[b][0]))
    return pairs


def panel_polygon_or_none(panel: Panel) -> Optional[np.ndarray]:
    """Placed polygon of a valid panel; None when degenerate."""
    if not panel.valid or len(panel.edges) < 3:
        return None
    verts = panel.polygon()
    try:
        polygons.to_shapely(verts)
    except ValueError:
        return None
    return verts


def noisy_decode_iou(pattern: SewingPattern, sigma: float, seed: int = 0) -> float:
    """Mean panel IOU after encode -> additive-noise -> decode. Diagnostic."""
    from .metrics import panel_iou

    rng = np.random.default_rng(seed)
    tensor = encode_pattern(pattern)
    noisy = tensor + rng.normal(0.0, sigma, size=tensor.shape)
    return panel_iou(decode_pattern(noisy), pattern)
