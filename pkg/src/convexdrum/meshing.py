"""Conforming quality triangulations of convex polygons.

The polygon boundary is pre-split with a deterministic size function (graded
toward junction points when requested) and handed to Shewchuk's Triangle for
constrained Delaunay refinement with a 20 degree minimum-angle bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import triangle as tr

from .errors import MeshingError
from .geometry import BoundaryDecomposition, ConvexShape, decompose_boundary

MIN_ANGLE = 20.0


@dataclass(frozen=True)
class Grading:
    """``uniform`` or ``junction_graded`` with the local size ``h * ratio`` at junctions."""

    kind: str = "uniform"
    ratio: float = 1.0
    growth: float = 0.25

    @classmethod
    def junction_graded(cls, ratio: float, growth: float = 0.25) -> "Grading":
        if not 0 < ratio <= 1:
            raise MeshingError("grading ratio must lie in (0, 1]")
        return cls("junction_graded", float(ratio), float(growth))


UNIFORM = Grading()


@dataclass
class Mesh:
    """Triangulation with the boundary cycle tagged by polygon edge.

    ``boundary_edges`` lists node pairs in counterclockwise cyclic order;
    ``boundary_polygon_edge[i]`` is the polygon edge containing boundary edge
    ``i`` and ``boundary_tags[i]`` is ``("flat", id)`` or ``("arc", id)``.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_polygon_edge: np.ndarray
    boundary_tags: list = field(default_factory=list)
    shape: ConvexShape | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_boundary(self) -> np.ndarray:
        flag = np.zeros(self.n_nodes, dtype=bool)
        flag[self.boundary_edges.ravel()] = True
        return flag

    @property
    def boundary_nodes(self) -> np.ndarray:
        """Boundary node ids in counterclockwise order."""
        return self.boundary_edges[:, 0]

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.nodes[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
        return float(np.min(angles))

    def edges(self) -> np.ndarray:
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_nodes - len(self.edges()) + self.n_triangles

    def boundary_edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])


def _size_along(points: np.ndarray, junction_pts: np.ndarray, h: float, grading: Grading) -> np.ndarray:
    if grading.kind == "uniform" or len(junction_pts) == 0:
        return np.full(len(points), h)
    d = np.min(np.linalg.norm(points[:, None, :] - junction_pts[None, :, :], axis=2), axis=1)
    return np.minimum(h, h * grading.ratio + grading.growth * d)


def _split_edge(p: np.ndarray, q: np.ndarray, junction_pts, h, grading) -> np.ndarray:
    """Interior split points of segment ``p``-``q`` following the size function."""
    length = float(np.hypot(*(q - p)))
    t = np.linspace(0.0, 1.0, 513)
    # refine sampling near the ends where the size may be tiny
    t = np.unique(np.concatenate([t, np.geomspace(1e-9, 1e-2, 200), 1.0 - np.geomspace(1e-9, 1e-2, 200)]))
    pts = p[None, :] + t[:, None] * (q - p)[None, :]
    sizes = _size_along(pts, junction_pts, h, grading)
    dens = length / sizes
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    k = int(np.ceil(cum[-1] - 1e-9))
    if k <= 1:
        return np.empty((0, 2))
    targets = cum[-1] * np.arange(1, k) / k
    tt = np.interp(targets, cum, t)
    return p[None, :] + tt[:, None] * (q - p)[None, :]


def triangulate(shape: ConvexShape, h: float, grading: Grading = UNIFORM,
                decomposition: BoundaryDecomposition | None = None,
                min_angle: float = MIN_ANGLE) -> Mesh:
    """Quality triangulation of ``shape`` with target edge length ``h``.

    Raises
    ------
    MeshingError
        ``h`` out of range, or the refined mesh violates the angle bound.
    """
    diam = shape.diameter
    if not 0 < h <= diam / 4 * (1 + 1e-12):
        raise MeshingError(f"h={h} must lie in (0, diameter/4 = {diam / 4:.4g}]")
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    v = shape.vertices
    n = shape.n
    junction_pts = v[[j.vertex for j in decomposition.junctions]] if decomposition.junctions else np.empty((0, 2))

    pts = []
    seg_marker = []
    for i in range(n):
        p, q = v[i], v[(i + 1) % n]
        inner = _split_edge(p, q, junction_pts, h, grading)
        pts.append(p[None, :])
        pts.append(inner)
        seg_marker.extend([i] * (1 + len(inner)))
    pts = np.vstack(pts)
    m = len(pts)
    segs = np.column_stack([np.arange(m), (np.arange(m) + 1) % m])
    markers = np.array(seg_marker) + 2  # Triangle reserves markers 0 and 1

    max_area = np.sqrt(3.0) / 4.0 * h * h
    opts = f"pq{min_angle:.6f}a{max_area:.15f}Q"
    try:
        out = tr.triangulate({"vertices": pts, "segments": segs, "segment_markers": markers[:, None]}, opts)
    except Exception as exc:  # pragma: no cover - Triangle failure
        raise MeshingError(f"Triangle failed: {exc}") from exc
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    bsegs = np.asarray(out["segments"], dtype=np.int64)
    bmark = np.asarray(out["segment_markers"], dtype=np.int64).ravel() - 2

    # orient triangles counterclockwise
    p = nodes[tris]
    a2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    flip = a2 < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    bedges, bpoly = _order_boundary(nodes, bsegs, bmark, v)
    labels = decomposition.edge_labels()
    mesh = Mesh(nodes, tris, bedges, bpoly, [labels[e] for e in bpoly], shape)
    ma = mesh.min_angle()
    if ma < min_angle - 1e-6:
        raise MeshingError(f"refinement could not meet the {min_angle} degree bound (min angle {ma:.3f})")
    if np.any(mesh.triangle_areas() <= 0):
        raise MeshingError("degenerate triangle produced")
    return mesh


def _order_boundary(nodes, bsegs, bmark, poly):
    """Boundary segments as a counterclockwise cycle starting at polygon vertex 0."""
    nxt = {}
    for (a, b), mk in zip(bsegs, bmark):
        nxt.setdefault(int(a), []).append((int(b), int(mk)))
        nxt.setdefault(int(b), []).append((int(a), int(mk)))
    start = int(np.argmin(np.linalg.norm(nodes - poly[0], axis=1)))
    # first step goes along polygon edge 0
    choices = [c for c in nxt[start] if c[1] == 0]
    if not choices:
        raise MeshingError("boundary cycle does not start on polygon edge 0")
    order = [start]
    marks = []
    prev, cur, mk = start, choices[0][0], choices[0][1]
    marks.append(mk)
    while cur != start:
        order.append(cur)
        cand = [c for c in nxt[cur] if c[0] != prev]
        if len(cand) != 1:
            raise MeshingError("boundary is not a simple cycle")
        prev, (cur, mk) = cur, cand[0]
        marks.append(mk)
    if len(order) != len(bsegs):
        raise MeshingError("boundary cycle does not cover all boundary segments")
    order = np.array(order)
    return np.column_stack([order, np.roll(order, -1)]), np.array(marks)


# ---------------------------------------------------------------------------
# export


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text export with ``#nodes``, ``#triangles`` and ``#boundary_edges`` sections.

    Node lines are ``id x y boundary_flag``, triangle lines ``id a b c`` and
    boundary lines ``id a b kind tag_id polygon_edge``.
    """
    lines = [f"#nodes {mesh.n_nodes}"]
    flag = mesh.is_boundary
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {x:.17g} {y:.17g} {int(flag[i])}")
    lines.append(f"#triangles {mesh.n_triangles}")
    for i, (a, b, c) in enumerate(mesh.triangles):
        lines.append(f"{i} {a} {b} {c}")
    lines.append(f"#boundary_edges {len(mesh.boundary_edges)}")
    for i, ((a, b), (kind, tid), pe) in enumerate(zip(mesh.boundary_edges, mesh.boundary_tags, mesh.boundary_polygon_edge)):
        lines.append(f"{i} {a} {b} {kind} {tid} {pe}")
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> Mesh:
    section = None
    nodes, tris, bedges, tags, poly = [], [], [], [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            section = line.split()[0][1:]
            continue
        f = line.split()
        if section == "nodes":
            nodes.append((float(f[1]), float(f[2])))
        elif section == "triangles":
            tris.append((int(f[1]), int(f[2]), int(f[3])))
        elif section == "boundary_edges":
            bedges.append((int(f[1]), int(f[2])))
            tags.append((f[3], int(f[4])))
            poly.append(int(f[5]))
    return Mesh(np.array(nodes), np.array(tris, dtype=np.int64), np.array(bedges, dtype=np.int64),
                np.array(poly, dtype=np.int64), tags)


def mesh_to_json(mesh: Mesh) -> str:
    return json.dumps({
        "nodes": mesh.nodes.tolist(),
        "triangles": mesh.triangles.tolist(),
        "boundary_edges": mesh.boundary_edges.tolist(),
        "boundary_polygon_edge": mesh.boundary_polygon_edge.tolist(),
        "boundary_tags": [list(t) for t in mesh.boundary_tags],
    })


def save_mesh(mesh: Mesh, path) -> Path:
    path = Path(path)
    path.write_text(mesh_to_json(mesh) if path.suffix.lower() == ".json" else mesh_to_text(mesh))
    return path
