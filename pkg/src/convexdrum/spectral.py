"""Lagrange P1/P2 finite elements for the Dirichlet Laplacian.

Eigenpairs come from shift-invert Lanczos (ARPACK) around zero with a sparse
LU factorisation of the interior stiffness matrix, followed by a subspace
refinement step that pushes residuals below the reporting tolerance.  Normal
derivatives on the boundary are recovered by the consistent (variational)
flux, which is considerably more accurate than differentiating the discrete
solution directly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import SolverError
from .meshing import Mesh

RESIDUAL_TOL = 1e-9


class FESpace:
    """Continuous Lagrange space of degree 1 or 2 on ``mesh``."""

    def __init__(self, mesh: Mesh, degree: int = 2):
        if degree not in (1, 2):
            raise SolverError("degree must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        nodes = mesh.nodes
        tris = mesh.triangles
        if degree == 1:
            self.elements = tris
            self.coords = nodes
            b = mesh.boundary_edges
            self.boundary_cycle = b[:, 0].copy()
        else:
            e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
            key = np.sort(e, axis=1)
            uniq, inv = np.unique(key, axis=0, return_inverse=True)
            inv = inv.ravel()
            nt = len(tris)
            mids = mesh.n_nodes + inv.reshape(3, nt).T
            self.elements = np.hstack([tris, mids])
            self.coords = np.vstack([nodes, 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])])
            lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(uniq)}
            cyc = []
            for a, b in mesh.boundary_edges:
                cyc.append(int(a))
                cyc.append(mesh.n_nodes + lookup[(min(a, b), max(a, b))])
            self.boundary_cycle = np.array(cyc, dtype=np.int64)
        self.ndof = len(self.coords)
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.boundary_cycle] = False
        self.interior = np.flatnonzero(mask)

    @cached_property
    def matrices(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Full stiffness and mass matrices (boundary rows included)."""
        f = kernels.p1_triplets if self.degree == 1 else kernels.p2_triplets
        r, c, kv, mv = f(self.coords, self.elements)
        shape = (self.ndof, self.ndof)
        K = sp.coo_matrix((kv, (r, c)), shape=shape).tocsr()
        M = sp.coo_matrix((mv, (r, c)), shape=shape).tocsr()
        return K, M

    @cached_property
    def load(self) -> np.ndarray:
        """Load vector of the constant right-hand side 1."""
        _, M = self.matrices
        return np.asarray(M @ np.ones(self.ndof)).ravel()

    @cached_property
    def interior_blocks(self):
        K, M = self.matrices
        i = self.interior
        return K[i][:, i].tocsc(), M[i][:, i].tocsc()

    @cached_property
    def lu(self):
        Kii, _ = self.interior_blocks
        return spla.splu(Kii)

    def integrate(self, u: np.ndarray) -> float:
        return float(self.load @ u)


@dataclass
class EigenSolution:
    """Ascending Dirichlet eigenvalues with L2-normalised eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    space: FESpace
    residuals: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def vector(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i]

    def gram(self) -> np.ndarray:
        _, M = self.space.matrices
        return self.eigenvectors.T @ (M @ self.eigenvectors)

    def residual_vector(self, i: int) -> np.ndarray:
        K, M = self.space.matrices
        u = self.vector(i)
        return K @ u - self.eigenvalues[i] * (M @ u)


@dataclass
class PoissonSolution:
    """Solution of -Δu = 1 with zero boundary values and its energy."""

    u: np.ndarray
    energy: float
    energy_quadratic: float
    space: FESpace

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def residual_vector(self, i: int = 0) -> np.ndarray:
        K, _ = self.space.matrices
        return K @ self.u - self.space.load


def _fix_sign(v: np.ndarray) -> np.ndarray:
    tol = 1e-8 * np.abs(v).max()
    first = np.flatnonzero(np.abs(v) > tol)[0]
    return v if v[first] > 0 else -v


def solve_eigs(mesh: Mesh, k: int = 3, degree: int = 2, tol: float = RESIDUAL_TOL,
               space: FESpace | None = None) -> EigenSolution:
    """``k`` smallest Dirichlet eigenpairs.

    ``k + 4`` Ritz pairs are iterated so that clusters (such as the double
    second eigenvalue of the disk) are resolved together.

    Raises
    ------
    SolverError
        A returned pair fails the relative residual tolerance.
    """
    if k < 1:
        raise SolverError("k must be >= 1")
    V = space if space is not None else FESpace(mesh, degree)
    Kii, Mii = V.interior_blocks
    n = Kii.shape[0]
    nev = min(k + 4, n - 2)
    if nev < k:
        raise SolverError(f"mesh too coarse: {n} interior dofs for k={k}")
    lu = V.lu
    OPinv = spla.LinearOperator(Kii.shape, matvec=lu.solve, dtype=float)
    v0 = np.ones(n) + np.linspace(0.0, 1.0, n)
    try:
        vals, vecs = spla.eigsh(Kii, k=nev, M=Mii, sigma=0.0, which="LM", OPinv=OPinv, v0=v0, tol=1e-13)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"ARPACK did not converge: {exc}") from exc
    order = np.argsort(vals)
    X = vecs[:, order]
    # two sweeps of subspace iteration + Rayleigh-Ritz on the Krylov block
    for _ in range(2):
        X = lu.solve(np.asarray(Mii @ X))
        A = X.T @ (Kii @ X)
        B = X.T @ (Mii @ X)
        A = 0.5 * (A + A.T)
        B = 0.5 * (B + B.T)
        w, Y = sla.eigh(A, B)
        X = X @ Y
        vals = w
    vals = vals[:k]
    X = X[:, :k]
    full = np.zeros((V.ndof, k))
    res = np.empty(k)
    for i in range(k):
        x = X[:, i] / np.sqrt(X[:, i] @ (Mii @ X[:, i]))
        r = Kii @ x - vals[i] * (Mii @ x)
        res[i] = np.linalg.norm(r) / (vals[i] * np.linalg.norm(Mii @ x))
        full[V.interior, i] = x
        full[:, i] = _fix_sign(full[:, i])
    if np.any(res > tol):
        raise SolverError(f"eigen residuals {res} exceed tolerance {tol}")
    if np.any(vals <= 0):
        raise SolverError("non-positive eigenvalue returned")
    return EigenSolution(np.asarray(vals), full, V, res)


def solve_poisson(mesh: Mesh, degree: int = 2, space: FESpace | None = None) -> PoissonSolution:
    """Galerkin solution of -Δu = 1, u = 0 on the boundary.

    The energy is ``-1/2 * ∫u``; the assembled quadratic form
    ``1/2 u·Ku - ∫u`` is kept alongside as a cross-check.
    """
    V = space if space is not None else FESpace(mesh, degree)
    K, _ = V.matrices
    F = V.load
    u = np.zeros(V.ndof)
    try:
        u[V.interior] = V.lu.solve(F[V.interior])
    except RuntimeError as exc:  # pragma: no cover
        raise SolverError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise SolverError("linear solve produced non-finite values")
    J = -0.5 * float(F @ u)
    Jq = 0.5 * float(u @ (K @ u)) - float(F @ u)
    return PoissonSolution(u, J, Jq, V)


# ---------------------------------------------------------------------------
# boundary flux


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def _p1_boundary_mass(lengths: np.ndarray) -> sp.csc_matrix:
    nb = len(lengths)
    i = np.arange(nb)
    j = (i + 1) % nb
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([lengths / 3, lengths / 3, lengths / 6, lengths / 6])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsc()


@dataclass
class BoundaryFlux:
    """Outward normal derivative along the boundary, continuous piecewise linear.

    ``values[i]`` is the flux at boundary vertex ``i`` of the mesh cycle
    (``points[i]``, arc length ``s[i]``); boundary edge ``i`` joins vertex
    ``i`` to ``i + 1``.
    """

    s: np.ndarray
    values: np.ndarray
    points: np.ndarray
    mesh: Mesh
    perimeter: float

    def quadrature(self):
        """Gauss points on every boundary edge.

        Returns ``(edge, t, x, w, q)``: owning boundary edge, local parameter
        in [0, 1], coordinates, weights in arc length, and flux values.
        """
        mesh = self.mesh
        nb = len(mesh.boundary_edges)
        t = 0.5 * (_GAUSS_X + 1.0)
        w = 0.5 * _GAUSS_W
        L = mesh.boundary_edge_lengths()
        pa = mesh.nodes[mesh.boundary_edges[:, 0]]
        pb = mesh.nodes[mesh.boundary_edges[:, 1]]
        x = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
        qa = self.values
        qb = np.roll(self.values, -1)
        q = qa[:, None] * (1 - t)[None] + qb[:, None] * t[None]
        edge = np.repeat(np.arange(nb), len(t))
        return edge, np.tile(t, nb), x.reshape(-1, 2), (L[:, None] * w[None]).ravel(), q.ravel()

    def integrate(self, fn=None) -> float:
        """∫ fn(q) ds over the whole boundary (``fn`` defaults to identity)."""
        _, _, _, w, q = self.quadrature()
        return float(np.sum(w * (q if fn is None else fn(q))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("s,dudn\n")
        for s, q in zip(self.s, self.values):
            buf.write(f"{s:.12g},{q:.12g}\n")
        return buf.getvalue()


def boundary_flux(sol: EigenSolution | PoissonSolution, which: int = 0) -> BoundaryFlux:
    """Consistent normal-derivative recovery from the Galerkin residual.

    The residual ``K u - λ M u`` (or ``K u - F``) is tested against the
    piecewise-linear hats of the boundary vertices and the boundary mass
    system is solved.  For P2 the hat is the P2 function with value 1/2 at
    the adjacent edge midpoints, which avoids the vertex/midpoint
    oscillation of a full quadratic trace.
    """
    V = sol.space
    r = sol.residual_vector(which)[V.boundary_cycle]
    if V.degree == 2:
        rv = r[0::2] + 0.5 * (r[1::2] + np.roll(r[1::2], 1))
    else:
        rv = r
    mesh = V.mesh
    L = mesh.boundary_edge_lengths()
    q = spla.spsolve(_p1_boundary_mass(L), rv)
    pts = mesh.nodes[mesh.boundary_edges[:, 0]]
    s = np.concatenate([[0.0], np.cumsum(L)[:-1]])
    return BoundaryFlux(s, np.asarray(q), pts, mesh, float(L.sum()))


def polygon_flux(sol: EigenSolution | PoissonSolution, which: int, shape) -> np.ndarray:
    """Flux projected on the hats of the polygon vertices of ``shape``.

    Coarser and smoother than :func:`boundary_flux`; returns one value per
    polygon vertex.
    """
    V = sol.space
    mesh = V.mesh
    r = sol.residual_vector(which)[V.boundary_cycle]
    if V.degree == 2:
        r = r[0::2] + 0.5 * (r[1::2] + np.roll(r[1::2], 1))
    v = shape.vertices
    n = shape.n
    pts = mesh.nodes[mesh.boundary_edges[:, 0]]
    pe = mesh.boundary_polygon_edge
    a, b = v[pe], v[(pe + 1) % n]
    t = np.sum((pts - a) * (b - a), axis=1) / np.sum((b - a) ** 2, axis=1)
    R = np.zeros(n)
    np.add.at(R, pe, (1 - t) * r)
    np.add.at(R, (pe + 1) % n, t * r)
    return spla.spsolve(_p1_boundary_mass(shape.edge_lengths), R)


def rellich_defect(sol: EigenSolution, which: int, flux: BoundaryFlux | None = None,
                   center=None) -> float:
    """Relative defect of ∫(∂u/∂n)² (x·n) ds = 2λ∫u² (u normalised)."""
    if flux is None:
        flux = boundary_flux(sol, which)
    mesh = sol.mesh
    edge, _, x, w, q = flux.quadrature()
    d = mesh.nodes[mesh.boundary_edges[:, 1]] - mesh.nodes[mesh.boundary_edges[:, 0]]
    nrm = np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(d[:, 0], d[:, 1])[:, None]
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    xn = np.sum((x - c) * nrm[edge], axis=1)
    lhs = float(np.sum(w * q * q * xn))
    rhs = 2.0 * sol.eigenvalues[which]
    return abs(lhs - rhs) / rhs


def solution_to_csv(space: FESpace, u: np.ndarray) -> str:
    """Nodal values at mesh vertices as ``node,x,y,u``."""
    buf = io.StringIO()
    buf.write("node,x,y,u\n")
    for i, (x, y) in enumerate(space.mesh.nodes):
        buf.write(f"{i},{x:.12g},{y:.12g},{u[i]:.12g}\n")
    return buf.getvalue()
