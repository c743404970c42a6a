"""Shape optimisation over convex polygons of prescribed area.

Three objectives are supported, all made scale invariant:

``lambda2_convex``
    ``|Ω| λ₂(Ω)`` over convex domains.
``lambda1_in_strip``
    ``|Ω| λ₁(Ω)`` over convex domains inside the strip ``|y| < M``.
``energy_in_strip``
    ``J(Ω) / |Ω|²`` (Dirichlet energy of -Δu = 1) inside the strip.

The descent loop is a projected gradient method: the Hadamard gradient is
preconditioned by a Steklov (H^1/2) boundary metric and projected onto the
tangent cone of the convexity and strip constraints; the step is followed by
hull projection with the same vertex count, the strip clamp, area
restoration, and an Armijo test.  The finite-element mesh follows the
boundary by harmonic morphing, so objective values along a line search come
from one mesh topology and are not polluted by remeshing noise; a fresh mesh
is built when element quality degrades.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_triangular
from scipy.optimize import nnls

from .errors import MeshingError, MultiplicityError, SolverError
from .geometry import (ConvexShape, area_centroid, convex_hull_indices, decompose_boundary,
                       disk, signed_area, stadium_for_area)
from .meshing import Grading, Mesh, triangulate
from .spectral import (EigenSolution, FESpace, PoissonSolution, boundary_flux, solve_eigs,
                       solve_poisson)

MAX_STEP_FRAC = 0.05
ACTIVE_TURN = 1e-5
GRADED_SIGMA0 = 2.5e-4
INITIAL_STRETCH = 0.05

OBJECTIVES = ("lambda2_convex", "lambda1_in_strip", "energy_in_strip")


@dataclass
class OptimizationProblem:
    objective: str = "lambda2_convex"
    V0: float = 1.0
    strip_M: float | None = None
    h: float = 0.03
    degree: int = 2
    grading: Grading = field(default_factory=Grading)
    n_vertices: int = 128
    gtol: float = 1e-4
    max_iter: int = 200
    gap_tol: float = 1e-3
    seed: int = 0
    remesh_angle: float = 15.0
    smoothing: float = 1.0
    refine_vertices: int = 0
    refine_iter: int = 100

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.V0 <= 0:
            raise ValueError("V0 must be positive")
        if self.objective != "lambda2_convex" and not (self.strip_M and self.strip_M > 0):
            raise ValueError("strip objectives need strip_M > 0")

    @property
    def eigen_index(self) -> int:
        return {"lambda2_convex": 1, "lambda1_in_strip": 0}.get(self.objective, -1)

    @property
    def disk_fits(self) -> bool:
        """Whether the disk of area V0 fits in the strip (recorded, not enforced)."""
        return self.strip_M is None or np.sqrt(self.V0 / np.pi) <= self.strip_M


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    area: float
    step: float
    grad_norm: float
    gap: float
    n_flat: int
    remeshed: bool = False


@dataclass
class OptimizationTrace:
    records: list[IterationRecord]
    final_shape: ConvexShape
    termination: str
    final_state: "State | None" = None

    @property
    def objective_values(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "objective", "area", "step", "grad_norm", "gap", "n_flat", "remeshed"])
        for r in self.records:
            w.writerow([r.iteration, f"{r.objective:.12g}", f"{r.area:.12g}", f"{r.step:.12g}",
                        f"{r.grad_norm:.12g}", f"{r.gap:.12g}", r.n_flat, int(r.remeshed)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class State:
    """Shape, mesh and solution at one iterate."""

    shape: ConvexShape
    mesh: Mesh
    objective: float
    area: float
    solution: EigenSolution | PoissonSolution
    gap: float


def _solve(problem: OptimizationProblem, mesh: Mesh):
    V = FESpace(mesh, problem.degree)
    if problem.objective == "energy_in_strip":
        return solve_poisson(mesh, space=V)
    k = problem.eigen_index + 2
    return solve_eigs(mesh, k=k, space=V)


def _objective_value(problem: OptimizationProblem, sol, area: float) -> tuple[float, float]:
    if problem.objective == "energy_in_strip":
        return sol.energy / area ** 2, np.inf
    i = problem.eigen_index
    lam = sol.eigenvalues
    gap = (lam[i + 1] - lam[i]) / lam[i]
    return area * lam[i], gap


def evaluate(problem: OptimizationProblem, shape: ConvexShape, mesh: Mesh | None = None) -> State:
    if mesh is None:
        mesh = triangulate(shape, problem.h, problem.grading)
    sol = _solve(problem, mesh)
    area, _ = area_centroid(shape)
    f, gap = _objective_value(problem, sol, area)
    return State(shape, mesh, f, area, sol, gap)


def error_bar(problem: OptimizationProblem, shape: ConvexShape, value: float | None = None) -> float:
    """Discretisation error estimate: change of the objective when ``h`` is halved."""
    if value is None:
        value = evaluate(problem, shape).objective
    fine = OptimizationProblem(**{**problem.__dict__, "h": problem.h / 2})
    return abs(evaluate(fine, shape).objective - value)


def scale_invariant_value(objective: str, shape: ConvexShape, h: float = 0.03, degree: int = 2,
                          mesh: Mesh | None = None) -> float:
    """Convenience evaluation of the scale-invariant objective on ``shape``."""
    M = 1.0 if objective != "lambda2_convex" else None
    p = OptimizationProblem(objective=objective, strip_M=M, h=h, degree=degree)
    return evaluate(p, shape, mesh).objective


# ---------------------------------------------------------------------------
# shape gradient


def _polygon_hat_moments(shape: ConvexShape, mesh: Mesh, flux_pairs):
    """∫ q_a q_b · hat_i ds on the two edges around every polygon vertex.

    Returns an array ``(len(flux_pairs), n, 2)`` of the moments multiplied by
    the outward normal of each adjacent edge and summed, i.e. the vertex
    gradient of ``∫ q_a q_b V·n ds``.
    """
    v = shape.vertices
    n = shape.n
    nrm = shape.outward_normals
    out = np.zeros((len(flux_pairs), n, 2))
    for k, (fa, fb) in enumerate(flux_pairs):
        edge, t, x, w, qa = fa.quadrature()
        qb = qa if fb is fa else fb.quadrature()[4]
        pe = mesh.boundary_polygon_edge[edge]
        a, b = v[pe], v[(pe + 1) % n]
        tau = np.sum((x - a) * (b - a), axis=1) / np.sum((b - a) ** 2, axis=1)
        f = w * qa * qb
        g = np.zeros((n, 2))
        np.add.at(g, pe, (f * (1.0 - tau))[:, None] * nrm[pe])
        np.add.at(g, (pe + 1) % n, (f * tau)[:, None] * nrm[pe])
        out[k] = g
    return out


def area_gradient(shape: ConvexShape) -> np.ndarray:
    v = shape.vertices
    d = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    return 0.5 * np.column_stack([d[:, 1], -d[:, 0]])


def shape_gradient(shape: ConvexShape, sol, objective: str = "lambda2_convex",
                   gap_tol: float = 1e-3, allow_cluster: bool = True) -> np.ndarray:
    """Vertex gradient of the scale-invariant objective, shape ``(n, 2)``.

    Uses the Hadamard formula ``dλ = -∫ |∂u/∂n|² V·n ds`` (``dJ`` carries an
    extra factor 1/2) with the consistent boundary flux tested against the
    polygon hat functions.  When λ₂ and λ₃ are closer than ``gap_tol`` the
    minimal-norm element of the Clarke subdifferential of ``max(λ₂, λ₃)``
    over the two-dimensional cluster is returned instead.
    """
    mesh = sol.mesh
    area, _ = area_centroid(shape)
    dA = area_gradient(shape)
    if isinstance(sol, PoissonSolution):
        q = boundary_flux(sol)
        G = _polygon_hat_moments(shape, mesh, [(q, q)])[0]
        dJ = -0.5 * G
        return _drop_translation(dJ / area ** 2 - 2.0 * sol.energy / area ** 3 * dA)
    i = 1 if objective == "lambda2_convex" else 0
    lam = sol.eigenvalues
    cluster = (objective == "lambda2_convex" and len(lam) > 2
               and (lam[2] - lam[1]) / lam[1] < gap_tol)
    if not cluster:
        q = boundary_flux(sol, i)
        G = _polygon_hat_moments(shape, mesh, [(q, q)])[0]
        return _drop_translation(lam[i] * dA - area * G)
    if not allow_cluster:
        raise MultiplicityError(f"λ₂ and λ₃ within relative gap {(lam[2] - lam[1]) / lam[1]:.2e}")
    q2, q3 = boundary_flux(sol, 1), boundary_flux(sol, 2)
    G22, G33, G23 = _polygon_hat_moments(shape, mesh, [(q2, q2), (q3, q3), (q2, q3)])
    # gradient of λ_a restricted to the 2-d eigenspace: W ↦ Σ W_ab (λ δ_ab dA - |Ω| G_ab)
    E22 = lam[1] * dA - area * G22
    E33 = lam[2] * dA - area * G33
    E23 = -area * G23
    return _drop_translation(_min_norm_cluster(E22, E33, E23))


def _drop_translation(g: np.ndarray) -> np.ndarray:
    # the objective is translation invariant; quadrature leaves a small net force
    return g - g.mean(axis=0)


def _min_norm_cluster(E22, E33, E23) -> np.ndarray:
    """Minimal-norm ``a E22 + (1-a) E33 + 2 b E23`` over ``a(1-a) >= b²``."""
    flat = [E.ravel() for E in (E22, E33, E23)]
    best = None
    ts = np.linspace(0.0, 2 * np.pi, 721)
    for rad in np.linspace(0.0, 0.5, 51):
        a = 0.5 + rad * np.cos(ts)
        b = rad * np.sin(ts)
        vals = a[:, None] * flat[0] + (1 - a)[:, None] * flat[1] + 2 * b[:, None] * flat[2]
        nrm = np.einsum("ij,ij->i", vals, vals)
        j = int(np.argmin(nrm))
        if best is None or nrm[j] < best[0]:
            best = (nrm[j], vals[j])
    return best[1].reshape(E22.shape)


# ---------------------------------------------------------------------------
# constraint handling


def project_convex(v: np.ndarray) -> np.ndarray:
    """Map a nearly convex polygon onto its hull keeping every vertex.

    Hull vertices stay put; each chain of non-hull vertices is laid on the
    hull edge that spans it, spaced by the chord-length of the original
    chain.  The result is convex with exactly collinear flat pieces.
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    hull = np.sort(convex_hull_indices(v))
    if len(hull) < 3:
        raise MeshingError("projection collapsed the polygon")
    out = v.copy()
    on_hull = np.zeros(n, dtype=bool)
    on_hull[hull] = True
    for k in range(len(hull)):
        a = hull[k]
        b = hull[(k + 1) % len(hull)]
        chain = [(a + j) % n for j in range(1, (b - a) % n)]
        if not chain:
            continue
        pts = v[[a] + chain + [b]]
        seg = np.hypot(*np.diff(pts, axis=0).T)
        cum = np.cumsum(seg)[:-1] / seg.sum()
        out[chain] = v[a] + cum[:, None] * (v[b] - v[a])
    return out


def _clamp_strip(v: np.ndarray, M: float) -> np.ndarray:
    out = v.copy()
    out[:, 1] = np.clip(out[:, 1], -M, M)
    return out


def _restore_area(v: np.ndarray, problem: OptimizationProblem) -> np.ndarray:
    a = signed_area(v)
    if problem.strip_M is None:
        c = area_centroid(v)[1]
        return (v - c) * np.sqrt(problem.V0 / a)
    out = v.copy()
    cx = area_centroid(v)[1][0]
    out[:, 0] = (out[:, 0] - cx) * (problem.V0 / a)
    return out


def admissible(v: np.ndarray, problem: OptimizationProblem) -> np.ndarray:
    """Convexify, clamp, and restore the area of a vertex array."""
    w = project_convex(v)
    if problem.strip_M is not None:
        w = _clamp_strip(w, problem.strip_M)
        w = project_convex(w)
    return _restore_area(w, problem)


def on_wall(v: np.ndarray, M: float | None, tol: float = 1e-9) -> np.ndarray:
    if M is None:
        return np.zeros(len(v), dtype=bool)
    return np.abs(np.abs(v[:, 1]) - M) <= tol * M


def wall_edges(v: np.ndarray, M: float | None, tol: float = 1e-9) -> np.ndarray:
    """Edges ``i -> i+1`` lying on a strip wall."""
    w = on_wall(v, M, tol)
    if M is None:
        return w
    same = np.sign(v[:, 1]) == np.sign(np.roll(v[:, 1], -1))
    return w & np.roll(w, -1) & same


def free_boundary_components(shape: ConvexShape, M: float | None, tol: float = 1e-9) -> int:
    """Number of connected pieces of the boundary off the strip walls."""
    free = ~wall_edges(shape.vertices, M, tol)
    if free.all():
        return 1
    if not free.any():
        return 0
    return int(np.sum(free & ~np.roll(free, 1)))


def wall_contact_angles(shape: ConvexShape, M: float | None, tol: float = 1e-9) -> np.ndarray:
    """Angle in degrees between the wall and the free boundary where they meet.

    The discrete angle is the turning at the vertex where a wall edge and a
    free edge meet; zero is tangential contact.
    """
    on = wall_edges(shape.vertices, M, tol)
    if M is None or not on.any():
        return np.empty(0)
    turn = shape.turning
    leave = on & ~np.roll(on, -1)          # wall edge i followed by free edge i+1, vertex i+1
    enter = ~on & np.roll(on, -1)          # free edge i followed by wall edge i+1, vertex i+1
    idx = (np.nonzero(leave | enter)[0] + 1) % shape.n
    return np.degrees(np.abs(turn[idx]))


def principal_axes(shape: ConvexShape) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and the two principal axis angles of the area inertia."""
    from .geometry import area_centroid as _ac

    v = shape.vertices
    _, c = _ac(shape)
    p, q = v - c, np.roll(v, -1, axis=0) - c
    cr = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
    ixx = np.sum(cr * (p[:, 1] ** 2 + p[:, 1] * q[:, 1] + q[:, 1] ** 2)) / 12
    iyy = np.sum(cr * (p[:, 0] ** 2 + p[:, 0] * q[:, 0] + q[:, 0] ** 2)) / 12
    ixy = np.sum(cr * (p[:, 0] * q[:, 1] + 2 * p[:, 0] * p[:, 1] + 2 * q[:, 0] * q[:, 1] + q[:, 0] * p[:, 1])) / 24
    beta = 0.5 * np.arctan2(2 * ixy, iyy - ixx)  # iyy is ∫x², ixx is ∫y²
    return c, np.array([beta, beta + 0.5 * np.pi])


def asymmetry(shape: ConvexShape, n_dirs: int = 720) -> dict:
    """Reflection asymmetry about both principal axes, relative to the diameter.

    Compares the support function ``h(θ)`` with ``h(2β - θ)`` about the
    centroid for each axis angle ``β``.
    """
    c, axes = principal_axes(shape)
    v = shape.vertices - c
    th = 2 * np.pi * np.arange(n_dirs) / n_dirs

    def support(a):
        return np.max(np.cos(a)[:, None] * v[:, 0] + np.sin(a)[:, None] * v[:, 1], axis=1)

    h = support(th)
    out = {}
    for name, b in zip(("major", "minor"), axes):
        out[name] = float(np.max(np.abs(h - support(2 * b - th))) / shape.diameter)
    out["axis_angle"] = float(axes[0])
    return out


# ---------------------------------------------------------------------------
# mesh morphing


def _boundary_displacement(shape: ConvexShape, new_v: np.ndarray, mesh: Mesh) -> np.ndarray:
    v = shape.vertices
    n = shape.n
    pts = mesh.nodes[mesh.boundary_nodes]
    pe = mesh.boundary_polygon_edge
    a, b = v[pe], v[(pe + 1) % n]
    t = np.sum((pts - a) * (b - a), axis=1) / np.sum((b - a) ** 2, axis=1)
    d = new_v - v
    return (1 - t)[:, None] * d[pe] + t[:, None] * d[(pe + 1) % n]


def morph_mesh(mesh: Mesh, shape: ConvexShape, new_v: np.ndarray) -> Mesh:
    """Move ``mesh`` so its boundary follows the polygon ``new_v``.

    Interior nodes follow a discrete harmonic extension of the boundary
    displacement.
    """
    bn = mesh.boundary_nodes
    db = _boundary_displacement(shape, new_v, mesh)
    V = FESpace(mesh, 1)
    K, _ = V.matrices
    interior = V.interior
    disp = np.zeros_like(mesh.nodes)
    disp[bn] = db
    if len(interior):
        Kii = K[interior][:, interior].tocsc()
        Kib = K[interior][:, bn]
        lu = spla.splu(Kii)
        for c in range(2):
            disp[interior, c] = lu.solve(-np.asarray(Kib @ db[:, c]).ravel())
    new_shape = ConvexShape(new_v)
    return Mesh(mesh.nodes + disp, mesh.triangles, mesh.boundary_edges, mesh.boundary_polygon_edge,
                mesh.boundary_tags, new_shape)


def _mesh_ok(mesh: Mesh, min_angle: float) -> bool:
    return bool(np.all(mesh.triangle_areas() > 0) and mesh.min_angle() >= min_angle)


# ---------------------------------------------------------------------------
# descent direction


def _convexity_rows(v: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Gradients of the cross products ``(v_i - v_{i-1}) x (v_{i+1} - v_i)`` at ``active``."""
    n = len(v)
    rows = np.zeros((len(active), 2 * n))
    for r, i in enumerate(active):
        a = v[i] - v[i - 1]
        b = v[(i + 1) % n] - v[i]
        da = np.array([b[1], -b[0]])
        db = np.array([-a[1], a[0]])
        for j, c in (((i - 1) % n, -da), (i, da - db), ((i + 1) % n, db)):
            rows[r, 2 * j:2 * j + 2] += c
        rows[r] /= np.linalg.norm(rows[r])
    return rows


def _vertex_interpolation(shape: ConvexShape, mesh: Mesh) -> sp.csr_matrix:
    """Map polygon vertex values to mesh boundary nodes (piecewise linear hats)."""
    v = shape.vertices
    n = shape.n
    pts = mesh.nodes[mesh.boundary_nodes]
    pe = mesh.boundary_polygon_edge
    a, b = v[pe], v[(pe + 1) % n]
    t = np.clip(np.sum((pts - a) * (b - a), axis=1) / np.sum((b - a) ** 2, axis=1), 0.0, 1.0)
    m = len(pts)
    rows = np.concatenate([np.arange(m), np.arange(m)])
    cols = np.concatenate([pe, (pe + 1) % n])
    return sp.csr_matrix((np.concatenate([1 - t, t]), (rows, cols)), shape=(m, n))


def boundary_metric(shape: ConvexShape, mesh: Mesh, smoothing: float = 1.0) -> np.ndarray:
    """Steklov-type metric on vertex displacements, per coordinate.

    ``G = Eᵀ (smoothing · S + M_b / ℓ) E`` where ``S`` is the Schur complement
    of the P1 Laplacian onto the mesh boundary (the energy of the harmonic
    extension, an H^1/2 norm), ``M_b`` the boundary mass, ``ℓ = P / 2π`` and
    ``E`` the hat interpolation from polygon vertices.  The H^1/2 scaling
    matches the frequency response of eigenvalue shape Hessians, so fine
    junction-graded vertices and long waves converge at similar rates.
    ``smoothing = 0`` gives the plain L²(∂Ω) metric.  Returns the dense
    ``(2n, 2n)`` matrix on interleaved ``(x, y)`` coordinates.
    """
    E = _vertex_interpolation(shape, mesh)
    bn = mesh.boundary_nodes
    Lb = mesh.boundary_edge_lengths()
    mb = 0.5 * (Lb + np.roll(Lb, 1))
    G = (E.T @ sp.diags(mb) @ E).toarray() * (2 * np.pi / shape.perimeter)
    if smoothing > 0:
        V = FESpace(mesh, 1)
        K, _ = V.matrices
        interior = V.interior
        K = K.tocsr()
        Kbb = K[bn][:, bn].toarray()
        if len(interior):
            Kbi = K[bn][:, interior]
            X = spla.splu(K[interior][:, interior].tocsc()).solve(Kbi.T.toarray())
            S = Kbb - Kbi @ X
        else:
            S = Kbb
        Ed = E.toarray()
        G = G + smoothing * (Ed.T @ S @ Ed)
    G = 0.5 * (G + G.T)
    return np.kron(G, np.eye(2))


def tangent_cone_direction(g: np.ndarray, shape: ConvexShape, mesh: Mesh, strip_M: float | None = None,
                           smoothing: float = 1.0, flat_tol: float = ACTIVE_TURN) -> np.ndarray:
    """Steepest descent direction restricted to the tangent cone of the constraints.

    Steepest descent is taken in :func:`boundary_metric`.  Active constraints
    are vertices with vanishing turning, which must not move inward of their
    chord, and vertices on a strip wall, which must not move outward.  In the
    strip the area is restored by a horizontal stretch, which is not neutral
    for the objective, so the direction is also kept area preserving.  The
    metric projection onto the cone is a non-negative least squares problem
    for the multipliers.
    """
    v = shape.vertices
    n = shape.n
    G = boundary_metric(shape, mesh, smoothing)
    C = np.linalg.cholesky(G)  # G = C Cᵀ, e = Cᵀ d
    e0 = -solve_triangular(C, g.ravel(), lower=True)
    active = np.flatnonzero(np.abs(shape.turning) < flat_tol)
    rows = [_convexity_rows(v, active)] if len(active) else []
    wall = np.flatnonzero(on_wall(v, strip_M))
    if len(wall):
        R = np.zeros((len(wall), 2 * n))
        R[np.arange(len(wall)), 2 * wall + 1] = -np.sign(v[wall, 1])
        rows.append(R)
    if strip_M is not None:
        a = area_gradient(shape).ravel()
        rows.append(np.vstack([a, -a]))
    if rows:
        # constraint A d >= 0 becomes (A C⁻ᵀ) e >= 0
        B = solve_triangular(C, np.vstack(rows).T, lower=True).T
        B /= np.linalg.norm(B, axis=1)[:, None]
        mu, _ = nnls(B.T, -e0, maxiter=50 * B.shape[0])
        e = e0 + B.T @ mu
    else:
        e = e0
    return solve_triangular(C.T, e, lower=False).reshape(n, 2)


def descent_direction(state: State, problem: OptimizationProblem) -> tuple[np.ndarray, np.ndarray]:
    """(raw gradient, projected descent direction)."""
    g = shape_gradient(state.shape, state.solution, problem.objective, problem.gap_tol)
    return g, tangent_cone_direction(g, state.shape, state.mesh, problem.strip_M, problem.smoothing)


def stationarity(g: np.ndarray, d: np.ndarray) -> float:
    """Norm of the projected gradient, ``sqrt(-g·d)`` in the descent metric."""
    return float(np.sqrt(max(-np.sum(g * d), 0.0)))


# ---------------------------------------------------------------------------
# driver


def _boundary_spline(shape: ConvexShape, decomposition):
    """Arc-length parametrisation of the boundary.

    Multi-edge flat runs are kept straight; each arc between flat runs is a
    cubic spline through its vertices, clamped tangent to the neighbouring
    runs so resampling does not manufacture corners at junctions.  Without
    flat runs a periodic spline is used.
    """
    v = shape.vertices
    n = shape.n
    P = shape.perimeter
    s = np.concatenate([shape.arclength, [P]])
    closed = np.vstack([v, v[:1]])
    runs = [r for r in decomposition.flat_runs if len(r.edge_indices(n)) > 1]
    if not runs:
        spline = CubicSpline(s, closed, bc_type="periodic")
        return lambda t: spline(np.mod(t, P))
    flat_edge = np.zeros(n, dtype=bool)
    for r in runs:
        flat_edge[r.edge_indices(n)] = True
    pieces = []  # (s_start, length, spline) per arc, in local arc length
    ends = sorted([(r.end, np.array(r.direction)) for r in runs])
    starts = {r.start: np.array(r.direction) for r in runs}
    for a, d_in in ends:
        # arc from the end of one run to the start of the next
        b = a
        while not flat_edge[b % n]:
            b += 1
        if b == a:
            continue
        idx = [(a + k) % n for k in range(b - a + 1)]
        pts = v[idx]
        loc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        d_out = starts[b % n]
        spl = CubicSpline(loc, pts, bc_type=((1, d_in), (1, d_out)))
        pieces.append((s[a], loc[-1], spl))

    def curve(t):
        t = np.mod(t, P)
        e = np.clip(np.searchsorted(s, t, side="right") - 1, 0, n - 1)
        out = np.column_stack([np.interp(t, s, closed[:, 0]), np.interp(t, s, closed[:, 1])])
        for s0, length, spl in pieces:
            u = np.mod(t - s0, P)
            m = (u <= length) & ~flat_edge[e]
            out[m] = spl(u[m])
        return out

    return curve


def resample(shape: ConvexShape, n: int, graded: bool = False, decomposition=None,
             problem: OptimizationProblem | None = None) -> ConvexShape:
    """Re-distribute ``n`` vertices along the boundary of ``shape``.

    Flat runs are sampled linearly and the remaining arcs through a periodic
    cubic spline, so upsampling a regular polygon does not create spurious
    segments.  With ``graded`` the vertices concentrate geometrically toward
    the junctions on the arc side (see :func:`_graded_parameters`).
    """
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    P = shape.perimeter
    curve = _boundary_spline(shape, decomposition)
    if not graded or not decomposition.junctions:
        t = P * np.arange(n) / n
    else:
        t = _graded_parameters(shape, decomposition, n)
    w = project_convex(curve(t))
    if problem is not None:
        w = admissible(w, problem)
    return ConvexShape(w)


def _graded_parameters(shape, decomposition, n, sigma0_frac=GRADED_SIGMA0):
    """Arc-length positions of ``n`` vertices graded toward every junction.

    The spacing is ``min(cap, σ0 + γ d)`` with ``d`` the distance to the
    nearest junction, on both sides of it, and ``cap`` below the flat-run
    length threshold; ``γ`` is chosen to spend exactly ``n`` vertices.  The
    flat side is graded too: a junction vertex whose hat reaches far into a
    run picks up the flux excess found on flat parts near their ends.
    """
    P = shape.perimeter
    fine = np.linspace(0.0, P, 400 * n + 1)
    s_j = np.array([j.s for j in decomposition.junctions])
    d = np.abs(fine[:, None] - s_j[None, :])
    d = np.minimum(d, P - d).min(axis=1)
    cap = 0.4 * decomposition.ell_min
    sigma0 = sigma0_frac * P

    def density(gamma):
        return 1.0 / np.minimum(cap, sigma0 + gamma * d)

    if np.trapezoid(density(1e3), fine) > n:
        raise ValueError(f"{n} vertices cannot respect the spacing cap {cap:.3g}")
    lo, hi = 1e-4, 1e3
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if np.trapezoid(density(mid), fine) > n:
            lo = mid
        else:
            hi = mid
    dens = density(np.sqrt(lo * hi))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    start = np.interp(s_j[0], fine, cum)
    targets = (start + cum[-1] * np.arange(n) / n) % cum[-1]
    return np.sort(np.interp(targets, cum, fine))


def _initial_state(initial: ConvexShape, problem: OptimizationProblem) -> State:
    shape = initial
    if shape.n != problem.n_vertices:
        shape = resample(shape, problem.n_vertices)
    shape = ConvexShape(admissible(shape.vertices, problem))
    state = evaluate(problem, shape)
    if problem.objective == "lambda2_convex" and state.gap < problem.gap_tol:
        # a symmetric start (the disk) sits on a double eigenvalue; a seeded
        # elliptic stretch selects a branch deterministically
        rng = np.random.default_rng(problem.seed)
        th = rng.uniform(0.0, np.pi)
        u = np.array([np.cos(th), np.sin(th)])
        v = shape.vertices
        x = v - area_centroid(v)[1]
        v = x + INITIAL_STRETCH * (x @ u)[:, None] * u[None, :]
        state = evaluate(problem, ConvexShape(admissible(v, problem)))
    return state


def _line_search(problem: OptimizationProblem, state: State, g: np.ndarray, d: np.ndarray,
                 step: float, diam0: float):
    """Backtracking Armijo search along the projected path on the mesh of ``state``.

    The sufficient-decrease test uses the actual projected displacement, so
    vertices pushed into a flat run and projected back do not count as
    progress.  Returns ``(trial, step)`` or ``(None, step)`` on collapse.
    """
    dmax = float(np.abs(d).max())
    t = min(2.0 * step, MAX_STEP_FRAC * diam0 / dmax)
    while t * dmax > 1e-10 * diam0:
        try:
            w = admissible(state.shape.vertices + t * d, problem)
            slope = float(np.sum(g * (w - state.shape.vertices)))
            if slope >= 0:
                t *= 0.5
                continue
            shape = ConvexShape(w)
            mesh = morph_mesh(state.mesh, state.shape, shape.vertices)
            if not _mesh_ok(mesh, 0.5 * problem.remesh_angle):
                t *= 0.5
                continue
            trial = evaluate(problem, shape, mesh)
        except (MeshingError, SolverError, ValueError):
            t *= 0.5
            continue
        if trial.objective <= state.objective + 1e-4 * slope:
            return trial, t
        t *= 0.5
    return None, t


def optimize(problem: OptimizationProblem, initial: ConvexShape, callback=None) -> OptimizationTrace:
    """Projected-gradient minimisation of the scale-invariant objective.

    The mesh is morphed along with the shape.  Once the minimum angle of the
    morphed mesh drops below ``remesh_angle`` the accepted iterate is
    remeshed; records after a remesh carry ``remeshed=True`` and start a new
    epoch, within which the objective is non-increasing.
    """
    state = _initial_state(initial, problem)
    shape = state.shape
    records: list[IterationRecord] = []
    termination = "max_iter"
    step = None
    diam0 = shape.diameter
    remeshed = False
    it = 0
    stages = [(problem.max_iter, problem.n_vertices)]
    if problem.refine_vertices:
        stages.append((problem.refine_iter, problem.refine_vertices))
    for stage, (n_iter, n_vert) in enumerate(stages):
        if stage > 0:
            shape = resample(state.shape, n_vert, graded=True, problem=problem)
            state = evaluate(problem, shape)
            step = None
            remeshed = True
            termination = "max_iter"
        for _ in range(n_iter):
            g, d = descent_direction(state, problem)
            gnorm = stationarity(g, d)
            dec = decompose_boundary(state.shape)
            records.append(IterationRecord(it, state.objective, state.area, step or 0.0, gnorm,
                                           state.gap, len(dec.flat_runs), remeshed))
            remeshed = False
            if callback is not None:
                callback(state, records[-1])
            if gnorm < problem.gtol:
                termination = "gradient"
                break
            if step is None:
                step = 0.01 * diam0 / float(np.abs(d).max())
            trial, t = _line_search(problem, state, g, d, step, diam0)
            if trial is None:
                termination = "stagnation"
                break
            state, step = trial, t
            if not _mesh_ok(state.mesh, problem.remesh_angle):
                state = evaluate(problem, state.shape)
                remeshed = True
            it += 1
    dec = decompose_boundary(state.shape)
    records.append(IterationRecord(it, state.objective, state.area, step or 0.0, float("nan"),
                                   state.gap, len(dec.flat_runs), remeshed))
    return OptimizationTrace(records, state.shape, termination, state)


# ---------------------------------------------------------------------------
# stadium family


@dataclass
class StadiumScan:
    ratios: np.ndarray
    values: np.ndarray
    best_ratio: float
    best_value: float
    best_shape: ConvexShape
    error_bar: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("ratio,lambda2_area\n")
        for r, v in zip(self.ratios, self.values):
            buf.write(f"{r:.12g},{v:.12g}\n")
        return buf.getvalue()

    def is_unimodal(self) -> bool:
        d = np.sign(np.diff(self.values))
        d = d[d != 0]
        return bool(np.sum(d[1:] != d[:-1]) <= 1 and (len(d) == 0 or d[0] <= 0))


def stadium_scan(V0: float = 1.0, n_samples: int = 12, ratio_range=(0.0, 2.0), n_vertices: int = 512,
                 h: float = 0.03, degree: int = 2, refine: bool = True) -> StadiumScan:
    """Scan ``|Ω| λ₂`` over stadiums (segment half-length / radius ratio).

    The best sampled ratio is refined by golden-section search.  The error
    bar is the change of the best value under halving ``h``.
    """
    if n_samples < 8:
        raise ValueError("n_samples must be >= 8")

    def value(r, hh=h):
        s = stadium_for_area(r, V0, n_vertices) if r > 0 else disk(n_vertices, V0)
        m = triangulate(s, hh * np.sqrt(V0))
        return area_centroid(s)[0] * solve_eigs(m, 3, degree).eigenvalues[1]

    ratios = np.linspace(ratio_range[0], ratio_range[1], n_samples)
    vals = np.array([value(r) for r in ratios])
    k = int(np.argmin(vals))
    best_r, best_v = ratios[k], vals[k]
    if refine:
        lo = ratios[max(k - 1, 0)]
        hi = ratios[min(k + 1, len(ratios) - 1)]
        gr = (np.sqrt(5) - 1) / 2
        a, b = lo, hi
        c, d = b - gr * (b - a), a + gr * (b - a)
        fc, fd = value(c), value(d)
        for _ in range(14):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = value(c)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = value(d)
        best_r, best_v = (c, fc) if fc < fd else (d, fd)
        if best_v > vals[k]:
            best_r, best_v = ratios[k], vals[k]
    err = abs(value(best_r, h / 2) - best_v)
    shape = stadium_for_area(best_r, V0, n_vertices) if best_r > 0 else disk(n_vertices, V0)
    return StadiumScan(ratios, vals, float(best_r), float(best_v), shape, float(err))
