"""Convex plane domains: representation, hulls, boundary decomposition, synthesis.

Shapes are closed convex polygons with counterclockwise vertices.  Flat parts
of the boundary are detected from vertex turning angles; everything that is
not flat counts as strictly convex.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidShapeError

EPS_CONVEX_REL = 1e-10
EPS_FLAT = 1e-3
ELL_MIN_FRAC = 0.01


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class ConvexShape:
    """Immutable convex polygon, counterclockwise, last vertex joins the first.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Polygon vertices.  Validated on construction; invalid input raises
        :class:`InvalidShapeError` and is never repaired.
    """

    __slots__ = ("_v",)

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidShapeError("need an (n>=3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise InvalidShapeError("non-finite vertex coordinates")
        v.setflags(write=False)
        self._v = v
        self._validate()

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    @property
    def n(self) -> int:
        return self._v.shape[0]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        a, _ = area_centroid(self)
        return f"ConvexShape(n={self.n}, area={a:.6g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ConvexShape) and np.array_equal(self._v, other._v)

    def __hash__(self) -> int:
        return hash(self._v.tobytes())

    def _validate(self) -> None:
        v = self._v
        d = self.diameter
        if d <= 0:
            raise InvalidShapeError("degenerate polygon (zero diameter)")
        e = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(e[:, 0], e[:, 1])
        if lengths.min() <= 1e-12 * d:
            raise InvalidShapeError("duplicate consecutive vertices")
        if signed_area(v) <= 0:
            raise InvalidShapeError("signed area must be positive (counterclockwise, non-degenerate)")
        cr = _cross(e, np.roll(e, -1, axis=0))
        if cr.min() < -EPS_CONVEX_REL * d * d:
            raise InvalidShapeError(f"polygon is not convex (min edge cross product {cr.min():.3e})")
        total = turning_angles(v).sum()
        if abs(total - 2 * np.pi) > 1e-9:
            raise InvalidShapeError(f"turning angles sum to {total!r}, not 2*pi (self-intersecting?)")

    # -- derived geometry -------------------------------------------------
    @property
    def edges(self) -> np.ndarray:
        return np.roll(self._v, -1, axis=0) - self._v

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.hypot(e[:, 0], e[:, 1])

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def diameter(self) -> float:
        v = self._v
        d = v[:, None, :] - v[None, :, :] if v.shape[0] <= 2048 else None
        if d is None:
            from scipy.spatial.distance import pdist
            return float(pdist(v).max())
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def arclength(self) -> np.ndarray:
        """Arc-length coordinate of each vertex, starting at vertex 0."""
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)[:-1]])

    @property
    def turning(self) -> np.ndarray:
        return turning_angles(self._v)

    @property
    def outward_normals(self) -> np.ndarray:
        """Unit outward normal of every edge (edge i joins vertex i to i+1)."""
        e = self.edges / self.edge_lengths[:, None]
        return np.column_stack([e[:, 1], -e[:, 0]])

    # -- transforms -------------------------------------------------------
    def translated(self, offset) -> "ConvexShape":
        return ConvexShape(self._v + np.asarray(offset, dtype=float))

    def scaled(self, t: float) -> "ConvexShape":
        return ConvexShape(self._v * float(t))

    def rotated(self, angle: float) -> "ConvexShape":
        c, s = np.cos(angle), np.sin(angle)
        return ConvexShape(self._v @ np.array([[c, s], [-s, c]]))

    def centered(self) -> "ConvexShape":
        _, c = area_centroid(self)
        return ConvexShape(self._v - c)

    def with_area(self, area: float) -> "ConvexShape":
        a, _ = area_centroid(self)
        return self.scaled(np.sqrt(area / a))

    def rolled(self, k: int) -> "ConvexShape":
        return ConvexShape(np.roll(self._v, -k, axis=0))


def signed_area(v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def turning_angles(v: np.ndarray) -> np.ndarray:
    """Exterior turning angle at every vertex, in (-pi, pi]."""
    v = np.asarray(v, dtype=float)
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    return np.arctan2(_cross(e_in, e_out), np.sum(e_in * e_out, axis=1))


def area_centroid(shape: ConvexShape) -> tuple[float, np.ndarray]:
    """Shoelace area and polygon centroid."""
    v = shape.vertices if isinstance(shape, ConvexShape) else np.asarray(shape, dtype=float)
    w = np.roll(v, -1, axis=0)
    c = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    a = 0.5 * c.sum()
    if not a > 0:
        raise InvalidShapeError("degenerate polygon: area <= 0")
    cx = ((v[:, 0] + w[:, 0]) * c).sum() / (6 * a)
    cy = ((v[:, 1] + w[:, 1]) * c).sum() / (6 * a)
    return float(a), np.array([cx, cy])


def convex_hull_indices(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counterclockwise, collinear points dropped."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    tol = 1e-14 * scale * scale

    def half(idx):
        chain: list[int] = []
        for i in idx:
            while len(chain) >= 2:
                o, a = pts[chain[-2]], pts[chain[-1]]
                b = pts[i]
                if (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) <= tol:
                    chain.pop()
                else:
                    break
            chain.append(int(i))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=int)


def convexify(points: Sequence[Sequence[float]] | np.ndarray) -> ConvexShape:
    """Convex hull of a point sequence as a :class:`ConvexShape`.

    Raises
    ------
    InvalidShapeError
        Fewer than three distinct points, or all points collinear.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidShapeError("points must be an (n, 2) array")
    if len(np.unique(pts, axis=0)) < 3:
        raise InvalidShapeError("need at least 3 distinct points")
    idx = convex_hull_indices(pts)
    if len(idx) < 3:
        raise InvalidShapeError("collinear input has no 2-D hull")
    hull = pts[idx]
    # start at the vertex sharing the original first index when possible,
    # so already-convex input keeps its ordering
    first = int(np.argmin(idx))
    return ConvexShape(np.roll(hull, -first, axis=0))


# ---------------------------------------------------------------------------
# boundary decomposition


@dataclass(frozen=True)
class FlatRun:
    """Edges ``start, start+1, ..., end-1`` (mod n) lying on one line."""

    start: int
    end: int
    direction: tuple[float, float]
    length: float

    def edge_indices(self, n: int) -> list[int]:
        k = (self.end - self.start) % n or n
        return [(self.start + j) % n for j in range(k)]


@dataclass(frozen=True)
class Junction:
    """Vertex where a flat run meets a strictly convex arc."""

    vertex: int
    s: float
    flat_run: int
    arc: int
    arc_side: int  # +1 if the arc follows the vertex counterclockwise, -1 if it precedes


@dataclass(frozen=True)
class BoundaryDecomposition:
    n: int
    flat_runs: list[FlatRun] = field(default_factory=list)
    strictly_convex_arcs: list[tuple[int, int]] = field(default_factory=list)
    junctions: list[Junction] = field(default_factory=list)
    eps_flat: float = EPS_FLAT
    ell_min: float = 0.0

    def arc_edges(self, i: int) -> list[int]:
        a, b = self.strictly_convex_arcs[i]
        k = (b - a) % self.n or self.n
        return [(a + j) % self.n for j in range(k)]

    def edge_labels(self) -> list[tuple[str, int]]:
        """``("flat", id)`` or ``("arc", id)`` for every polygon edge."""
        lab: list[tuple[str, int]] = [("arc", -1)] * self.n
        for i, run in enumerate(self.flat_runs):
            for e in run.edge_indices(self.n):
                lab[e] = ("flat", i)
        for i in range(len(self.strictly_convex_arcs)):
            for e in self.arc_edges(i):
                lab[e] = ("arc", i)
        return lab


def decompose_boundary(shape: ConvexShape, eps_flat: float = EPS_FLAT,
                       ell_min: float | None = None) -> BoundaryDecomposition:
    """Split the boundary into flat runs and strictly convex arcs.

    A flat run is a maximal run of consecutive vertices turning by less
    than ``eps_flat``, together with the two edges around each of them,
    whose chord is at least ``ell_min`` (default 1% of the perimeter).
    Remaining edges form the strictly convex arcs.  Edges are the
    partitioned index set: edge ``i`` joins vertex ``i`` and ``i + 1``.
    """
    v = shape.vertices
    n = shape.n
    if ell_min is None:
        ell_min = ELL_MIN_FRAC * shape.perimeter
    small = np.abs(shape.turning) < eps_flat  # vertex i joins edge i-1 and edge i

    # chains of edges joined through small-turning vertices
    if small.all():
        raise InvalidShapeError("all turning angles are below eps_flat")
    start_vertex = int(np.flatnonzero(~small)[0])
    chains: list[tuple[int, int]] = []
    j = start_vertex
    count = 0
    while count < n:
        a = j
        k = 1
        while small[(a + k) % n] and k < n:
            k += 1
        chains.append((a, (a + k) % n))
        j = (a + k) % n
        count += k

    flat_runs = []
    is_flat_edge = np.zeros(n, dtype=bool)
    for a, b in chains:
        chord = v[b] - v[a]
        length = float(np.hypot(*chord))
        # a run needs at least one small-turning vertex; a lone side is not a run
        if (b - a) % n != 1 and length >= ell_min:
            d = chord / length
            flat_runs.append(FlatRun(a, b, (float(d[0]), float(d[1])), length))
            k = (b - a) % n or n
            is_flat_edge[[(a + t) % n for t in range(k)]] = True

    arcs: list[tuple[int, int]] = []
    if not is_flat_edge.any():
        arcs.append((0, 0))
    elif (~is_flat_edge).any():
        e0 = int(np.flatnonzero(is_flat_edge & ~np.roll(is_flat_edge, -1))[0]) + 1
        e = e0 % n
        seen = 0
        while seen < n:
            if is_flat_edge[e]:
                e = (e + 1) % n
                seen += 1
                continue
            a = e
            while not is_flat_edge[e] and seen < n:
                e = (e + 1) % n
                seen += 1
            arcs.append((a, e))

    s = shape.arclength
    junctions = []
    if flat_runs and len(arcs) and arcs[0] != (0, 0):
        arc_of_edge = np.full(n, -1)
        for i, (a, b) in enumerate(arcs):
            k = (b - a) % n or n
            arc_of_edge[[(a + t) % n for t in range(k)]] = i
        run_of_edge = np.full(n, -1)
        for i, r in enumerate(flat_runs):
            run_of_edge[r.edge_indices(n)] = i
        for vtx in range(n):
            before, after = (vtx - 1) % n, vtx
            if run_of_edge[before] >= 0 and arc_of_edge[after] >= 0:
                junctions.append(Junction(vtx, float(s[vtx]), int(run_of_edge[before]),
                                          int(arc_of_edge[after]), +1))
            elif arc_of_edge[before] >= 0 and run_of_edge[after] >= 0:
                junctions.append(Junction(vtx, float(s[vtx]), int(run_of_edge[after]),
                                          int(arc_of_edge[before]), -1))
    return BoundaryDecomposition(n, flat_runs, arcs, junctions, eps_flat, float(ell_min))


# ---------------------------------------------------------------------------
# synthesis


def cosine_cluster(m: int) -> np.ndarray:
    """``m + 1`` points on [0, 1] clustered quadratically toward both ends."""
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))


def _finish(v: np.ndarray, area: float) -> ConvexShape:
    shape = ConvexShape(v).centered()
    return shape.with_area(area)


def disk(n: int = 256, area: float = 1.0) -> ConvexShape:
    t = 2 * np.pi * np.arange(n) / n
    return _finish(np.column_stack([np.cos(t), np.sin(t)]), area)


def square(n: int = 4, area: float = 1.0) -> ConvexShape:
    if n % 4:
        raise InvalidShapeError("square vertex count must be a multiple of 4")
    m = n // 4
    t = np.arange(m) / m
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pts = [corners[k] + t[:, None] * (corners[(k + 1) % 4] - corners[k]) for k in range(4)]
    return _finish(np.vstack(pts), area)


def _auto_flat_vertices(n: int, flat: float, curved: float) -> int:
    """Interior points for a flat side so its spacing is near the mean spacing."""
    return max(1, int(round(0.5 * n * flat / (flat + curved))) - 1)


def stadium(half_length: float, radius: float = 1.0, n: int = 512, area: float | None = 1.0,
            flat_vertices: int | None = None) -> ConvexShape:
    """Convex hull of two disks of ``radius`` whose centres are ``2*half_length`` apart.

    Each cap gets ``(n - 2*flat_vertices - 2) / 2`` vertices clustered toward
    the junctions; each flat side gets ``flat_vertices`` interior points
    (default: proportional to its length).  ``area=None`` keeps the given
    dimensions.
    """
    L, R = float(half_length), float(radius)
    if L < 0 or R <= 0:
        raise InvalidShapeError("stadium needs half_length >= 0 and radius > 0")
    if L == 0:
        return disk(n, area if area is not None else np.pi * R * R)
    if flat_vertices is None:
        flat_vertices = _auto_flat_vertices(n, 2 * L, np.pi * R)
    m_cap = (n - 2 * (flat_vertices + 1)) // 2
    if m_cap < 8:
        raise InvalidShapeError("too few vertices for the caps")
    pts = []
    psi = -np.pi / 2 + np.pi * cosine_cluster(m_cap)[:-1]  # right cap, bottom to top
    pts.append(np.column_stack([L + R * np.cos(psi), R * np.sin(psi)]))
    t = np.arange(flat_vertices + 1) / (flat_vertices + 1)
    pts.append(np.column_stack([L - 2 * L * t, np.full_like(t, R)]))
    pts.append(np.column_stack([-L - R * np.cos(psi), -R * np.sin(psi)]))
    pts.append(np.column_stack([-L + 2 * L * t, np.full_like(t, -R)]))
    v = np.vstack(pts)
    if area is None:
        return ConvexShape(v)
    return _finish(v, area)


def stadium_for_area(ratio: float, area: float = 1.0, n: int = 512,
                     flat_vertices: int | None = None) -> ConvexShape:
    """Stadium with ``half_length / radius = ratio`` and the requested area."""
    R = np.sqrt(area / (np.pi + 4.0 * ratio))
    return stadium(ratio * R, R, n, area=area, flat_vertices=flat_vertices)


def hoelder_cap(alpha: float, m: int, c: float = 1.0) -> np.ndarray:
    """Cap turning by pi with tangent angle ``c * s**alpha`` at both ends.

    Returns the ``m + 1`` cap points from the first junction at the origin
    (tangent direction +x) to the second junction (tangent direction -x).
    """
    s_half = (np.pi / (2.0 * c)) ** (1.0 / alpha)
    S = 2.0 * s_half

    def theta(s):
        s = np.asarray(s, dtype=float)
        lo = c * np.power(np.clip(s, 0.0, None), alpha)
        hi = np.pi - c * np.power(np.clip(S - s, 0.0, None), alpha)
        return np.where(s <= s_half, lo, hi)

    s_nodes = S * cosine_cluster(m)
    # positions by composite Gauss-Legendre on panels graded like the nodes
    gx, gw = np.polynomial.legendre.leggauss(12)
    pts = np.zeros((m + 1, 2))
    for j in range(m):
        a, b = s_nodes[j], s_nodes[j + 1]
        # split panels at s_half and substitute s = a + (b-a) u^2 near the singular end
        q = 0.5 * (gx + 1.0)
        w = 0.5 * gw
        if j == 0:
            ss = a + (b - a) * q ** 2
            ww = w * 2 * q * (b - a)
        elif j == m - 1:
            ss = b - (b - a) * q ** 2
            ww = w * 2 * q * (b - a)
        elif a < s_half < b:
            ss = np.concatenate([a + (s_half - a) * q, s_half + (b - s_half) * q])
            ww = np.concatenate([w * (s_half - a), w * (b - s_half)])
        else:
            ss = a + (b - a) * q
            ww = w * (b - a)
        th = theta(ss)
        pts[j + 1] = pts[j] + np.array([np.sum(ww * np.cos(th)), np.sum(ww * np.sin(th))])
    return pts


def hoelder_junction(alpha: float, n: int = 1024, area: float = 1.0, c: float = 1.0,
                     flat_length: float | None = None, flat_vertices: int | None = None) -> ConvexShape:
    """Stadium-like shape whose four junctions are exactly C^{1,alpha}.

    Past each junction the tangent angle grows like ``c * s**alpha``, so the
    curvature blows up like ``s**(alpha - 1)``.  Each flat side carries
    ``flat_vertices`` interior points (default: proportional to its length).
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidShapeError("alpha must lie in (0, 1]")
    if n < 16:
        raise InvalidShapeError("n must be at least 16")
    probe = hoelder_cap(alpha, 64, c)
    height = probe[-1, 1]
    if flat_length is None:
        flat_length = height
    cap_len = np.sum(np.hypot(*np.diff(probe, axis=0).T))
    if flat_vertices is None:
        flat_vertices = _auto_flat_vertices(n, flat_length, cap_len)
    m = n // 2 - flat_vertices
    if m < 8:
        raise InvalidShapeError("too few vertices for the caps")
    cap = hoelder_cap(alpha, m, c)
    a = 0.5 * flat_length
    t = (np.arange(1, flat_vertices + 1) / (flat_vertices + 1))[:, None]
    top = np.array([a, height]) + t * np.array([-2 * a, 0.0])
    bottom = np.array([-a, 0.0]) + t * np.array([2 * a, 0.0])
    right = cap[:-1] + np.array([a, 0.0])
    left = -cap[:-1] + np.array([-a, height])
    v = np.vstack([right, top, left, bottom])
    v[:, 1] -= 0.5 * height
    return _finish(v, area)


def synthesize(kind: str, **params) -> ConvexShape:
    """Build a named test shape of unit area (unless ``area`` is given).

    ``kind`` is one of ``disk``, ``square``, ``stadium``, ``hoelder_junction``.
    """
    n = params.get("n", 256)
    if n < 16 and kind != "square":
        raise InvalidShapeError("n must be at least 16")
    if kind == "disk":
        return disk(n, params.get("area", 1.0))
    if kind == "square":
        return square(max(4, n), params.get("area", 1.0))
    if kind == "stadium":
        if "ratio" in params:
            return stadium_for_area(params["ratio"], params.get("area", 1.0), n)
        return stadium(params.get("L", 1.0), params.get("R", 1.0), n, area=params.get("area", 1.0))
    if kind == "hoelder_junction":
        return hoelder_junction(params.get("alpha", 0.5), n, params.get("area", 1.0))
    raise InvalidShapeError(f"unknown shape kind {kind!r}")


# ---------------------------------------------------------------------------
# file formats


def _fmt(x: float) -> str:
    return repr(float(x)) if abs(x) >= 1e16 else format(float(x), ".17g")


def shape_to_csv(shape: ConvexShape) -> str:
    buf = io.StringIO()
    buf.write("x,y\n")
    for x, y in shape.vertices:
        buf.write(f"{_fmt(x)},{_fmt(y)}\n")
    return buf.getvalue()


def shape_from_csv(text: str) -> ConvexShape:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise InvalidShapeError("shape CSV must start with header 'x,y'")
    return ConvexShape([[float(a), float(b)] for a, b in (r for r in rows[1:] if r)])


def shape_to_json(shape: ConvexShape) -> str:
    body = ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in shape.vertices)
    return '{"vertices": [' + body + "]}"


def shape_from_json(text: str) -> ConvexShape:
    data = json.loads(text)
    return ConvexShape(data["vertices"])


def save_shape(shape: ConvexShape, path) -> Path:
    path = Path(path)
    text = shape_to_json(shape) if path.suffix.lower() == ".json" else shape_to_csv(shape)
    path.write_text(text)
    return path


def load_shape(path) -> ConvexShape:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return shape_from_json(text)
    return shape_from_csv(text)
