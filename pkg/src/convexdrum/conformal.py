"""Riemann map from the unit disk onto a convex domain.

Convex domains are star-like about the centroid, so the boundary is a polar
graph ``r = ρ(θ)`` and the boundary correspondence ``θ(t) = t + S(t)`` solves
Theodorsen's fixed point ``S = K[log ρ(t + S)]``, with ``K`` the circular
conjugation operator applied by FFT.

On the circle, ``Arg φ'(e^{it}) = τ(θ(t)) - t - π/2`` where ``τ`` is the
tangent angle of the image, exactly known for a polygon.  ``log|φ'|`` is its
harmonic conjugate up to the constant ``log φ'(0)``; it is also available
from the geometry as ``log(ds/dθ) + log θ'(t)``, and the two routes give the
conjugacy residual.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConformalError, PreconditionError
from .geometry import BoundaryDecomposition, ConvexShape, area_centroid, decompose_boundary

RELAXATION = 0.5
TOLERANCE = 1e-12
MAX_ITER = 20000
PHI_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# polar descriptions of the boundary


class PolygonBoundary:
    """Polar description of a convex polygon about an interior center."""

    def __init__(self, shape: ConvexShape, center):
        self.shape = shape
        self.center = np.asarray(center, dtype=float)
        v = shape.vertices - self.center
        self.v = v
        ang = np.arctan2(v[:, 1], v[:, 0])
        k = int(np.argmin(ang))
        self.order = np.roll(np.arange(shape.n), -k)
        self.ang = np.unwrap(ang[self.order])
        if np.any(np.diff(self.ang) <= 0):
            raise ConformalError("boundary is not star-like about the center")
        a, b = v[self.order], v[np.roll(self.order, -1)]
        e = b - a
        self.normal_angle = np.arctan2(-e[:, 0], e[:, 1])  # outward normal of each edge
        self.support = np.sum(a * np.column_stack([np.cos(self.normal_angle), np.sin(self.normal_angle)]), axis=1)
        self.tangent = np.arctan2(e[:, 1], e[:, 0])
        self.s_start = shape.arclength[self.order]
        self.perimeter = shape.perimeter
        self.edge_len = np.hypot(e[:, 0], e[:, 1])

    def _edge(self, theta):
        th = (np.asarray(theta) - self.ang[0]) % (2 * np.pi) + self.ang[0]
        j = np.searchsorted(self.ang, th, side="right") - 1
        return np.clip(j, 0, len(self.ang) - 1), th

    def rho(self, theta):
        j, th = self._edge(theta)
        return self.support[j] / np.cos(th - self.normal_angle[j])

    def tangent_angle(self, theta):
        j, _ = self._edge(theta)
        return self.tangent[j]

    def arclength(self, theta):
        """Arc length from shape vertex 0 to the boundary point at polar angle ``theta``."""
        j, th = self._edge(theta)
        p = self.rho(th)[..., None] * np.stack([np.cos(th), np.sin(th)], axis=-1)
        a = self.v[self.order[j]]
        return (self.s_start[j] + np.hypot(*(p - a).T)) % self.perimeter

    def vertex_angles(self) -> np.ndarray:
        """Polar angle of every shape vertex, indexed like ``shape.vertices``."""
        out = np.empty(self.shape.n)
        out[self.order] = self.ang
        return out


class CurveBoundary:
    """Smooth star-like curve ``r = ρ(θ)`` given by ``rho`` and its derivative ``drho``."""

    def __init__(self, rho, drho, center=(0.0, 0.0)):
        self._rho = rho
        self._drho = drho
        self.center = np.asarray(center, dtype=float)
        self.shape = None

    def rho(self, theta):
        return np.asarray(self._rho(np.asarray(theta)), dtype=float) * np.ones_like(theta)

    def tangent_angle(self, theta):
        r, dr = self.rho(theta), np.asarray(self._drho(theta), dtype=float) * np.ones_like(theta)
        return np.arctan2(dr * np.sin(theta) + r * np.cos(theta), dr * np.cos(theta) - r * np.sin(theta))

    def arclength(self, theta):
        raise NotImplementedError("arc length is only tracked for polygons")


def circle(radius: float = 1.0) -> CurveBoundary:
    """Exact circle centered at the origin."""
    return CurveBoundary(lambda t: radius + 0.0 * np.asarray(t), lambda t: 0.0 * np.asarray(t))


def ellipse(a: float, b: float) -> CurveBoundary:
    """Exact ellipse with semi-axes ``a`` (x) and ``b`` (y) centered at the origin."""
    def rho(t):
        return a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)

    def drho(t):
        q = (b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2
        return -0.5 * a * b * q ** -1.5 * (a * a - b * b) * np.sin(2 * t)

    return CurveBoundary(rho, drho)


# ---------------------------------------------------------------------------
# spectral helpers


def conjugate(u: np.ndarray) -> np.ndarray:
    """Circular harmonic conjugate of equispaced samples (mean and Nyquist dropped)."""
    n = len(u)
    c = np.fft.fft(u)
    k = np.fft.fftfreq(n, 1.0 / n)
    c = -1j * np.sign(k) * c
    if n % 2 == 0:
        c[n // 2] = 0.0
    return np.real(np.fft.ifft(c))


# ---------------------------------------------------------------------------
# the map


@dataclass
class ConformalMap:
    """Boundary data of ``φ`` on ``N`` equispaced circle points ``t``.

    ``theta`` is the polar angle of ``φ(e^{it})`` about ``center``, ``points``
    the image points, ``log_abs_dphi`` and ``arg_dphi`` the boundary values
    of ``log|φ'|`` and ``Arg φ'`` (continuous branch with ``Arg φ'(0) = 0``).
    """

    t: np.ndarray
    theta: np.ndarray
    points: np.ndarray
    log_abs_dphi: np.ndarray
    arg_dphi: np.ndarray
    log_abs_dphi_geometric: np.ndarray
    center: np.ndarray
    shape: ConvexShape | None
    iterations: int
    contraction: float
    boundary: object = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.t)

    @property
    def abs_dphi(self) -> np.ndarray:
        return np.maximum(np.exp(self.log_abs_dphi), PHI_FLOOR)

    @property
    def dphi0(self) -> float:
        """``φ'(0)``, real and positive by normalization."""
        return float(np.exp(np.mean(self.log_abs_dphi)))

    def conjugacy_residual(self) -> float:
        """Max distance between ``K[log|φ'|]`` and the centered ``Arg φ'``."""
        a = self.arg_dphi - np.mean(self.arg_dphi)
        return float(np.max(np.abs(conjugate(self.log_abs_dphi) - a)))

    def geometric_residual(self) -> float:
        """Median gap between the conjugation and geometric routes to ``log|φ'|``."""
        return float(np.median(np.abs(self.log_abs_dphi - self.log_abs_dphi_geometric)))

    def tangent_defect(self) -> float:
        """Max deviation of ``Arg φ' + t + π/2`` from the image tangent angle (mod 2π)."""
        tau = self.boundary.tangent_angle(self.theta)
        d = self.arg_dphi + self.t + 0.5 * np.pi - tau
        return float(np.max(np.abs(np.angle(np.exp(1j * d)))))

    def boundary_defect(self) -> float:
        """Max distance from the sampled image points to the boundary."""
        rel = self.points - self.center
        r = np.hypot(rel[:, 0], rel[:, 1])
        return float(np.max(np.abs(r - self.boundary.rho(np.arctan2(rel[:, 1], rel[:, 0])))))

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(np.unwrap(self.theta)) > 0))

    def taylor(self, values: np.ndarray) -> np.ndarray:
        """Taylor coefficients of the holomorphic function whose real boundary part is ``values``."""
        c = np.fft.fft(values) / self.N
        g = np.zeros(self.N // 2, dtype=complex)
        g[0] = c[0]
        g[1:] = 2.0 * c[1 : self.N // 2]
        return g

    def map_coefficients(self) -> np.ndarray:
        """Taylor coefficients of ``φ`` from its boundary values."""
        z = (self.points[:, 0] - self.center[0]) + 1j * (self.points[:, 1] - self.center[1])
        c = np.fft.fft(z) / self.N
        return c[: self.N // 2]

    def image_area(self) -> float:
        """``∫|φ'|²`` over the disk from the Taylor coefficients of ``φ``."""
        c = self.map_coefficients()
        k = np.arange(len(c))
        return float(np.pi * np.sum(k * np.abs(c) ** 2))

    def log_dphi(self, z: np.ndarray) -> np.ndarray:
        """``log φ'(z)`` inside the disk by Taylor summation."""
        g = self.taylor(self.log_abs_dphi)
        g[0] = np.mean(self.log_abs_dphi)
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, g)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """``φ(z)`` inside the disk, as complex numbers."""
        c = self.map_coefficients()
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, c) + complex(*self.center)

    def preimage_of_angle(self, theta) -> np.ndarray:
        """Circle parameter ``t`` whose image has polar angle ``theta``."""
        th = np.unwrap(self.theta)
        tt = np.concatenate([self.t - 2 * np.pi, self.t, self.t + 2 * np.pi])
        thh = np.concatenate([th - 2 * np.pi, th, th + 2 * np.pi])
        target = (np.asarray(theta) - th[0]) % (2 * np.pi) + th[0]
        return np.interp(target, thh, tt) % (2 * np.pi)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,y,log_abs_dphi,arg_dphi\n")
        for t, (x, y), la, ar in zip(self.t, self.points, self.log_abs_dphi, self.arg_dphi):
            buf.write(f"{t:.12g},{x:.12g},{y:.12g},{la:.12g},{ar:.12g}\n")
        return buf.getvalue()


def map_to(shape, N: int = 1024, relaxation: float = RELAXATION, tol: float = TOLERANCE,
           max_iter: int = MAX_ITER, center=None) -> ConformalMap:
    """Theodorsen iteration for the map of the unit disk onto ``shape``.

    ``shape`` is a :class:`ConvexShape` (mapped about its centroid) or a
    :class:`CurveBoundary`.  Normalization: ``φ(0)`` is the center and
    ``φ'(0) > 0``.

    Raises
    ------
    ConformalError
        ``N`` is not a power of two ≥ 256, or the iteration does not reach
        ``tol`` (the last contraction estimate is reported).
    """
    if N < 256 or N & (N - 1):
        raise ConformalError("N must be a power of two >= 256")
    if isinstance(shape, ConvexShape):
        c = area_centroid(shape)[1] if center is None else np.asarray(center, dtype=float)
        boundary = PolygonBoundary(shape, c)
    else:
        boundary = shape
        shape = None
    t = 2 * np.pi * np.arange(N) / N
    S = np.zeros(N)
    prev = None
    contraction = float("nan")
    for it in range(1, max_iter + 1):
        target = conjugate(np.log(boundary.rho(t + S)))
        new = (1 - relaxation) * S + relaxation * target
        change = float(np.max(np.abs(new - S)))
        if prev is not None and prev > 0:
            contraction = change / prev
        S, prev = new, change
        if change <= tol:
            break
        if not np.isfinite(change) or (it > 50 and contraction > 1.0 + 1e-9 and change > 1.0):
            raise ConformalError(f"Theodorsen iteration diverged (contraction {contraction:.3g})")
    else:
        raise ConformalError(f"Theodorsen iteration stalled at change {prev:.3g} after {max_iter} "
                             f"iterations (contraction {contraction:.6g})")
    theta = t + S
    rho = boundary.rho(theta)
    pts = boundary.center + rho[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    tau = boundary.tangent_angle(theta)
    arg = np.unwrap(tau - t - 0.5 * np.pi)
    arg = arg - 2 * np.pi * np.round(np.mean(arg) / (2 * np.pi))
    log0 = float(np.mean(np.log(rho)))
    log_abs = -conjugate(arg) + log0
    # arg is normalized so that Arg φ'(0) = mean(arg) vanishes up to discretization
    # centered chord rate |φ(t+h) - φ(t-h)| / 2h, free of the spectral ringing of S'
    chord = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    geo = np.log(np.hypot(chord[:, 0], chord[:, 1]) * N / (4 * np.pi))
    return ConformalMap(t, theta, pts, log_abs, arg, geo, boundary.center, shape, it, contraction, boundary)


# ---------------------------------------------------------------------------
# checks


def transport_check(cmap: ConformalMap, sol, which: int, Lambda: float,
                    decomposition: BoundaryDecomposition | None = None, d_min_frac: float = 0.02) -> dict:
    """Defect of ``|∇û| = Λ|φ'|`` on the preimage of the strictly convex arcs.

    ``|∇û| = |φ'| |∂u/∂n|∘φ`` is evaluated at every circle sample whose
    image lies on a strictly convex arc at arc-length distance at least
    ``d_min_frac * perimeter`` from a junction.

    Raises
    ------
    PreconditionError
        ``Λ`` not positive or no strictly convex arc.
    """
    from .spectral import boundary_flux

    if not Lambda > 0:
        raise PreconditionError("Λ must be positive")
    shape = cmap.shape
    if shape is None:
        raise PreconditionError("transport check needs a polygonal map")
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    if not decomposition.strictly_convex_arcs:
        raise PreconditionError("no strictly convex boundary part")
    flux = boundary_flux(sol, which)
    P = shape.perimeter
    s = cmap.boundary.arclength(cmap.theta)
    # polygon edge of every sample and its arc label
    labels = decomposition.edge_labels()
    starts = shape.arclength
    edge = (np.searchsorted(starts, s, side="right") - 1) % shape.n
    on_arc = np.array([labels[e][0] == "arc" for e in edge])
    if decomposition.junctions:
        sj = np.array([J.s for J in decomposition.junctions])
        dist = np.abs(s[:, None] - sj[None, :])
        dist = np.minimum(dist, P - dist).min(axis=1)
    else:
        dist = np.full(len(s), np.inf)
    use = on_arc & (dist >= d_min_frac * P)
    if not np.any(use):
        raise PreconditionError("no circle sample maps to the strictly convex arcs")
    fs = np.concatenate([flux.s, [P]])
    fv = np.concatenate([flux.values, flux.values[:1]])
    q = np.abs(np.interp(s[use], fs, fv))
    dphi = cmap.abs_dphi[use]
    grad_hat = dphi * q
    defect = np.abs(grad_hat - Lambda * dphi) / (Lambda * dphi)
    return {"max_defect": float(np.max(defect)), "mean_defect": float(np.mean(defect)),
            "n_samples": int(use.sum()), "Lambda": float(Lambda),
            "min_abs_dphi": float(np.min(cmap.abs_dphi))}


def run_preimages(cmap: ConformalMap, decomposition: BoundaryDecomposition) -> list[np.ndarray]:
    """Circle samples whose image lies strictly inside each flat run."""
    shape = cmap.shape
    vang = cmap.boundary.vertex_angles()
    out = []
    for run in decomposition.flat_runs:
        a, b = vang[run.start], vang[run.end]
        span = (b - a) % (2 * np.pi)
        rel = (cmap.theta - a) % (2 * np.pi)
        pad = 1e-9
        out.append(np.nonzero((rel > pad) & (rel < span - pad))[0])
    return out


def flat_run_argument_spread(cmap: ConformalMap, decomposition: BoundaryDecomposition | None = None) -> list[float]:
    """Spread of ``Arg φ' + t`` over each flat-run preimage.

    On the circle the straight image segment makes the argument of ``φ'``
    relative to the circle tangent constant, the disk counterpart of
    ``Arg φ'`` being constant on a straight part of a half-plane boundary.
    """
    if decomposition is None:
        decomposition = decompose_boundary(cmap.shape)
    vals = cmap.arg_dphi + cmap.t
    out = []
    for idx in run_preimages(cmap, decomposition):
        v = np.unwrap(vals[idx]) if len(idx) else np.zeros(1)
        out.append(float(np.ptp(v)))
    return out


def junction_preimages(cmap: ConformalMap, decomposition: BoundaryDecomposition) -> list[float]:
    vang = cmap.boundary.vertex_angles()
    return [float(cmap.preimage_of_angle(vang[J.vertex])) for J in decomposition.junctions]


def junction_expansions(cmap: ConformalMap, decomposition: BoundaryDecomposition, radius: float = 0.5,
                        resolved: float = 4.0) -> list:
    """Singular expansion of ``log|φ'|`` at every junction preimage.

    A Möbius map takes a half-disk of ``radius`` in the upper half plane to a
    neighbourhood of the preimage, with the Neumann ray on the flat side; the
    map's own ``log|M'|`` is smooth there and only feeds the smooth part.
    The Taylor sum of the sampled boundary data is the harmonic extension
    of its trigonometric interpolant, accurate up to the interpolation error
    even next to the circle.  Below the preimage spacing of the polygon
    vertices every vertex acts as a small corner, so radii finer than
    ``resolved`` times the larger of that spacing and the circle spacing are
    marked unusable.
    """
    from .mixed_bvp import PolarField, extract_singular

    out = []
    g = cmap.taylor(cmap.log_abs_dphi)
    g[0] = np.mean(cmap.log_abs_dphi)
    tv = cmap.preimage_of_angle(cmap.boundary.vertex_angles())
    gaps = (np.roll(tv, -1) - tv) % (2 * np.pi)
    curved = np.array([kind != "flat" for kind, _ in decomposition.edge_labels()])
    mids, gaps = tv[curved] + 0.5 * gaps[curved], gaps[curved]
    for J, tj in zip(decomposition.junctions, junction_preimages(cmap, decomposition)):
        z0 = np.exp(1j * tj)
        flip = J.arc_side > 0
        dist = np.abs(np.angle(np.exp(1j * (mids - tj))))

        def spacing(r, dist=dist):
            near = dist <= 4 * r
            return max(2 * np.pi / cmap.N, float(np.max(gaps[near])) if np.any(near) else 0.0)

        def field(r, phi, z0=z0, flip=flip, spacing=spacing):
            ang = np.pi - phi if flip else phi
            w = r * np.exp(1j * ang)
            z = z0 * (1j - w) / (1j + w)
            vals = np.real(np.polynomial.polynomial.polyval(z, g))
            # |M'(0)| = 2: a radius maps to a circle of radius about 2r around z0
            ok = np.vectorize(lambda x: 2 * x >= resolved * spacing(x))(r)
            return np.where(ok, vals, np.nan)

        f = PolarField.from_function(field, radius)
        out.append(extract_singular(f))
    return out


def schwarz_christoffel_square_log_dphi(t: np.ndarray) -> np.ndarray:
    """``log|φ'|`` on the circle for the axis-aligned square, up to a constant.

    With prevertices at ``e^{i(π/4 + kπ/2)}`` the polygon map has
    ``φ'(z) = C (z^4 + 1)^(-1/2)``.
    """
    z = np.exp(1j * np.asarray(t))
    return -0.5 * np.log(np.abs(z ** 4 + 1))


def argument_holder_exponent(cmap: ConformalMap, h_min: float | None = None, h_max: float | None = None,
                             n_scales: int = 16) -> float:
    """Log-log slope of the second-order modulus of continuity of ``Arg φ'``.

    ``ω₂(h) = max |A(t+h) - 2A(t) + A(t-h)|`` scales like ``h^β`` for a
    ``C^{0,β}`` function with ``β < 1`` and like ``h²`` for a smooth one, so
    any value above 1 means better than Lipschitz.

    For a polygon ``Arg φ'`` is a staircase whose jumps sit at the vertex
    preimages; it is sampled at the preimages of the edge midpoints instead
    and interpolated, and ``h_min`` defaults to twice the largest preimage
    gap.  The modulus saturates once ``h`` reaches the width of the features
    of ``Arg φ'``, so the default window is the short one ``[h_min, 8 h_min]``.
    """
    t, a = cmap.t, cmap.arg_dphi
    if cmap.shape is not None:
        b = cmap.boundary
        mid = np.unwrap(b.ang) + 0.5 * np.diff(np.concatenate([np.unwrap(b.ang), [b.ang[0] + 2 * np.pi]]))
        tm = np.unwrap(cmap.preimage_of_angle(mid))
        am = (b.tangent - tm - 0.5 * np.pi)
        am = am - 2 * np.pi * np.round((am - np.interp(tm % (2 * np.pi), t, a)) / (2 * np.pi))
        gaps = np.diff(np.concatenate([tm, tm[:1] + 2 * np.pi]))
        order = np.argsort(tm % (2 * np.pi))
        tt, aa = tm[order] % (2 * np.pi), am[order]
        a = np.interp(t, np.concatenate([tt - 2 * np.pi, tt, tt + 2 * np.pi]), np.concatenate([aa, aa, aa]))
        if h_min is None:
            h_min = 2.0 * float(np.max(gaps))
    elif h_min is None:
        h_min = 8 * 2 * np.pi / cmap.N
    if h_max is None:
        h_max = 8.0 * h_min
    shifts = np.unique(np.round(np.geomspace(h_min, h_max, n_scales) * cmap.N / (2 * np.pi)).astype(int))
    shifts = shifts[shifts >= 1]
    omega = np.array([np.max(np.abs(np.roll(a, -k) - 2 * a + np.roll(a, k))) for k in shifts])
    h = shifts * 2 * np.pi / cmap.N
    ok = omega > 0
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(omega[ok]), 1)[0])
