"""Boundary regularity at junctions and the overdetermined flux condition.

The Hölder exponent at a junction is read off the tangent angle on the
strictly convex side.  Near a flat/curved junction the tangent angle measured
from the flat direction expands as ``a d^α + b d + ...``: the singular term
carries the exponent and ``b`` is the regular curvature.  The cumulative
discrete turning (the integral of the discrete curvature, junction vertex
included) is fitted to that two-term law.  A plain log-log slope of the
curvature is reported alongside; the regular part biases it toward 1 unless
the window is tiny.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from ._json import dumps
from .errors import AnalysisError, PreconditionError
from .geometry import BoundaryDecomposition, ConvexShape, Junction, area_centroid, decompose_boundary
from .spectral import EigenSolution, boundary_flux

Z95 = 1.959963984540054
MIN_FIT_VERTICES = 30
MIN_FIT_DECADES = 1.5
WINDOW_OUTER_FRAC = 1.0 / 20.0
D_MIN_FRAC = 0.02
BLOWUP_ALPHA = 0.95
STENCIL_CLEARANCE = 3  # first vertex whose 5-point stencil avoids the junction


def curvature(v: np.ndarray) -> np.ndarray:
    """Discrete curvature from a least-squares circle through 5 consecutive vertices."""
    v = np.asarray(v, dtype=float)
    n = len(v)
    idx = (np.arange(n)[:, None] + np.arange(-2, 3)[None, :]) % n
    p = v[idx]
    q = p - p.mean(axis=1, keepdims=True)
    A = np.concatenate([2.0 * q, np.ones((n, 5, 1))], axis=2)
    b = np.sum(q * q, axis=2)
    AtA = np.einsum("nij,nik->njk", A, A)
    Atb = np.einsum("nij,ni->nj", A, b)
    kappa = np.zeros(n)
    ok = np.abs(np.linalg.det(AtA)) > 1e-300
    sol = np.linalg.solve(AtA[ok], Atb[ok][..., None])[..., 0]
    r2 = sol[:, 2] + sol[:, 0] ** 2 + sol[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa[ok] = np.where(r2 > 0, 1.0 / np.sqrt(np.abs(r2)), 0.0)
    return kappa


@dataclass
class HolderFit:
    """Exponent estimate at one boundary point."""

    alpha: float
    band: tuple[float, float]
    model: str  # "power_law" or "bounded_curvature"
    loglog_alpha: float
    loglog_band: tuple[float, float]
    power_law: dict | None
    n_points: int
    decades: float
    window: tuple[float, float]
    distances: np.ndarray = field(repr=False)
    tangent_angles: np.ndarray = field(repr=False)

    @property
    def consistent_with_half(self) -> bool:
        """Band contains 1/2 and excludes 1."""
        lo, hi = self.band
        return lo <= 0.5 <= hi and not lo <= 1.0 <= hi


def _tangent_series(shape: ConvexShape, start: int, side: int, stop: int | None):
    """Cumulative turning of the edges leaving ``start``.

    Returns edge-midpoint distances, tangent angles, the vertex each edge
    leaves from and that vertex's distance.
    """
    v = shape.vertices
    n = shape.n
    tu = shape.turning
    theta, dist, verts, vdist = [], [], [], []
    acc, along, cur = 0.0, 0.0, start
    for _ in range(n - 1):
        acc += tu[cur]
        nxt = (cur + side) % n
        L = float(np.hypot(*(v[nxt] - v[cur])))
        theta.append(acc)
        dist.append(along + 0.5 * L)
        verts.append(cur)
        vdist.append(along)
        along += L
        cur = nxt
        if stop is not None and cur == stop:
            break
    return np.array(dist), np.array(theta), np.array(verts), np.array(vdist)


def _power_fit(x: np.ndarray, y: np.ndarray):
    """Relative least squares for ``θ = a d^α + b d``: ``(α, σ_α, rss, params)`` or None."""
    def model(t, a, al, b):
        return a * t ** al + b * t

    best = None
    for a0 in (0.3, 0.5, 0.8):
        p0 = [0.5 * y[-1] / x[-1] ** a0, a0, 0.5 * y[-1] / x[-1]]
        try:
            p, cov = curve_fit(model, x, y, p0=p0, sigma=np.abs(y),
                               bounds=([-np.inf, 1e-3, -np.inf], [np.inf, 2.0, np.inf]), maxfev=20000)
        except (RuntimeError, ValueError):
            continue
        rss = float(np.sum(((model(x, *p) - y) / y) ** 2))
        if np.all(np.isfinite(cov)) and (best is None or rss < best[2]):
            best = (float(p[1]), float(np.sqrt(cov[1, 1])), rss, p)
    return best


def fit_holder_exponent(shape: ConvexShape, junction: Junction | int, side: int | None = None,
                        decomposition: BoundaryDecomposition | None = None,
                        outer_frac: float = WINDOW_OUTER_FRAC,
                        min_points: int = MIN_FIT_VERTICES,
                        min_decades: float = MIN_FIT_DECADES) -> HolderFit:
    """Hölder exponent of the tangent angle at ``junction`` from the convex side.

    ``junction`` is a :class:`Junction` or a plain vertex index; in the
    latter case ``side`` (+1 counterclockwise, -1 clockwise) picks the
    direction of the walk.  The window runs from the second edge out to
    ``outer_frac * perimeter``.  The band adds in quadrature to the 95%
    statistical band the largest shift caused by dropping the two innermost
    edges or by halving the window.  The power law is fitted only when the
    curvature blows up, i.e. the band of the log-log estimate lies below
    ``BLOWUP_ALPHA``; otherwise the curvature is bounded, the tangent angle
    is Lipschitz and the exponent is reported as 1 with the log-log band.

    Raises
    ------
    AnalysisError
        The window holds fewer than ``min_points`` vertices or spans less
        than ``min_decades`` decades.
    """
    stop = None
    if isinstance(junction, Junction):
        start, side = junction.vertex, junction.arc_side
        if decomposition is None:
            decomposition = decompose_boundary(shape)
        a, b = decomposition.strictly_convex_arcs[junction.arc]
        stop = b if side > 0 else a
    else:
        start = int(junction)
        side = 1 if side is None else int(np.sign(side))
    d, theta, verts, vdist = _tangent_series(shape, start, side, stop)
    hi = outer_frac * shape.perimeter
    # the first edge is left out: its angle is the junction vertex's own
    # turning, which a polygon cannot resolve below one spacing
    m = (np.arange(len(d)) >= 1) & (d <= hi) & (theta > 0)
    npts = int(m.sum())
    decades = float(np.log10(d[m].max() / d[m].min())) if npts >= 2 else 0.0
    if npts < min_points or decades < min_decades:
        raise AnalysisError(f"fit window too short: {npts} vertices over {decades:.2f} decades "
                            f"(need {min_points} and {min_decades})")
    x, y = d[m], theta[m]

    # curvature log-log slope with stencils clear of the junction
    kappa = curvature(shape.vertices)[verts]
    mk = m & (np.arange(len(d)) >= STENCIL_CLEARANCE) & (kappa > 0)
    if stop is not None:
        mk[max(0, len(d) - STENCIL_CLEARANCE):] = False
    # the linear column absorbs the smooth variation of a regular curvature
    A = np.column_stack([np.log(vdist[mk]), np.ones(int(mk.sum())), vdist[mk] / hi])
    coef, *_ = np.linalg.lstsq(A, np.log(kappa[mk]), rcond=None)
    r = np.log(kappa[mk]) - A @ coef
    cov = (r @ r) / max(len(r) - 2, 1) * np.linalg.inv(A.T @ A)
    a_log = float(1.0 + coef[0])
    e_log = float(Z95 * np.sqrt(cov[0, 0]))

    # power law only where the curvature demonstrably blows up
    fit = _power_fit(x, y) if a_log + e_log < BLOWUP_ALPHA else None
    if fit is not None:
        alpha = fit[0]
        shifts = []
        for sel in (np.arange(len(x)) >= 2, x <= 0.5 * hi):
            if sel.sum() >= 5:
                alt = _power_fit(x[sel], y[sel])
                if alt is not None:
                    shifts.append(abs(alt[0] - alpha))
        shift = max(shifts, default=0.0)
        err = float(np.hypot(Z95 * fit[1], shift))
        model = "power_law"
        p = fit[3]
        info = {"a": float(p[0]), "alpha": float(p[1]), "b": float(p[2]), "alpha_err": fit[1],
                "window_shift": float(shift), "rms_rel": float(np.sqrt(fit[2] / npts))}
    else:
        alpha, err, model = 1.0, e_log, "bounded_curvature"
        info = None
    alpha = float(np.clip(alpha, 1e-6, 2.0))
    return HolderFit(alpha, (alpha - err, alpha + err), model, a_log, (a_log - e_log, a_log + e_log),
                     info, npts, decades, (float(x.min()), float(hi)), x, y)


# ---------------------------------------------------------------------------
# reports


@dataclass
class JunctionEntry:
    vertex: int
    s: float
    flat_run: int
    fit: HolderFit | None
    error: str | None = None

    def as_dict(self) -> dict:
        out = {"vertex": self.vertex, "s": self.s, "flat_run": self.flat_run, "error": self.error}
        if self.fit is not None:
            f = self.fit
            out.update({
                "alpha": f.alpha, "band": list(f.band), "model": f.model,
                "loglog_alpha": f.loglog_alpha, "loglog_band": list(f.loglog_band),
                "power_law": f.power_law, "n_points": f.n_points, "decades": f.decades,
                "window": list(f.window), "consistent_with_c1_half": f.consistent_with_half,
            })
        return out


@dataclass
class JunctionReport:
    junctions: list[JunctionEntry]
    n_flat_runs: int
    perimeter: float

    @property
    def alphas(self) -> list[float]:
        return [j.fit.alpha for j in self.junctions if j.fit is not None]

    def as_dict(self) -> dict:
        return {"n_flat_runs": self.n_flat_runs, "n_junctions": len(self.junctions),
                "perimeter": self.perimeter, "junctions": [j.as_dict() for j in self.junctions]}

    def to_json(self) -> str:
        return dumps(self.as_dict())

    def to_csv(self) -> str:
        """Per-junction fit data as ``junction,distance,tangent_angle``."""
        buf = io.StringIO()
        buf.write("junction,distance,tangent_angle\n")
        for k, j in enumerate(self.junctions):
            if j.fit is None:
                continue
            for d, c in zip(j.fit.distances, j.fit.tangent_angles):
                buf.write(f"{k},{d:.12g},{c:.12g}\n")
        return buf.getvalue()


def analyze_junctions(shape: ConvexShape, decomposition: BoundaryDecomposition | None = None,
                      **fit_options) -> JunctionReport:
    """Exponent fit at every junction; fit failures are recorded per entry."""
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    entries = []
    for J in decomposition.junctions:
        try:
            fit = fit_holder_exponent(shape, J, decomposition=decomposition, **fit_options)
            entries.append(JunctionEntry(J.vertex, float(J.s), J.flat_run, fit))
        except AnalysisError as exc:
            entries.append(JunctionEntry(J.vertex, float(J.s), J.flat_run, None, str(exc)))
    return JunctionReport(entries, len(decomposition.flat_runs), float(shape.perimeter))


def contact_angle(fit: HolderFit) -> float:
    """Tangent angle at the junction, in degrees, extrapolated from the fit window.

    The turning at the junction vertex mixes any true kink with the turning
    ``a σ^α`` the boundary accumulates over the first edge of length ``σ``;
    fitting ``c + a d^α̂ + b d`` on the resolved window separates them, and
    ``c`` is the contact angle (zero for tangential contact).
    """
    x, y = fit.distances, fit.tangent_angles
    A = np.column_stack([np.ones_like(x), x ** fit.alpha, x])
    c, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.degrees(c[0]))


def wall_contact_report(shape: ConvexShape, M: float, decomposition: BoundaryDecomposition | None = None,
                        tol: float = 1e-9, **fit_options) -> list[dict]:
    """Contact angle at every junction whose flat run lies on a strip wall ``|y| = M``."""
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    v = shape.vertices
    out = []
    for J in decomposition.junctions:
        run = decomposition.flat_runs[J.flat_run]
        idx = [run.start] + [(i + 1) % shape.n for i in run.edge_indices(shape.n)]
        if not np.all(np.abs(np.abs(v[idx, 1]) - M) <= tol * M):
            continue
        entry = {"vertex": J.vertex, "vertex_turning_deg": float(np.degrees(shape.turning[J.vertex]))}
        try:
            fit = fit_holder_exponent(shape, J, decomposition=decomposition, **fit_options)
            entry["contact_angle_deg"] = contact_angle(fit)
            entry["alpha"] = fit.alpha
        except AnalysisError as exc:
            entry["contact_angle_deg"] = float("nan")
            entry["error"] = str(exc)
        out.append(entry)
    return out


@dataclass
class OverdeterminedReport:
    lambda_index: int
    eigenvalue: float
    area: float
    Lambda_predicted: float
    Lambda_measured: float
    relative_error: float
    cv: float
    gap: float | None
    d_min: float
    profiles: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["profiles"] = [{"s": p[0].tolist(), "dudn": p[1].tolist()} for p in self.profiles]
        return d

    def to_json(self, profiles: bool = False) -> str:
        d = self.as_dict()
        if not profiles:
            d.pop("profiles")
        return dumps(d)


def check_overdetermined(shape: ConvexShape, sol: EigenSolution,
                         decomposition: BoundaryDecomposition | None = None, which: int = 1,
                         d_min_frac: float = D_MIN_FRAC) -> OverdeterminedReport:
    """Flux statistics of eigenfunction ``which`` over the strictly convex arcs.

    Samples closer than ``d_min_frac * perimeter`` (arc length) to a junction
    are excluded.  ``Λ_measured`` is the arc-length mean of ``|∂u/∂n|``.

    Raises
    ------
    PreconditionError
        The boundary has no strictly convex part.
    """
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    if not decomposition.strictly_convex_arcs:
        raise PreconditionError("no strictly convex boundary part: the overdetermined condition "
                                "needs at least one nonempty strictly convex arc")
    area, _ = area_centroid(shape)
    lam = float(sol.eigenvalues[which])
    flux = boundary_flux(sol, which)
    mesh = flux.mesh
    P = shape.perimeter
    d_min = d_min_frac * P
    edge, _, x, w, q = flux.quadrature()
    s_edge = flux.s[edge] + np.linalg.norm(x - mesh.nodes[mesh.boundary_edges[edge, 0]], axis=1)
    kind = np.array([t[0] for t in mesh.boundary_tags])
    arc_id = np.array([t[1] for t in mesh.boundary_tags])
    if decomposition.junctions:
        sj = np.array([J.s for J in decomposition.junctions])
        dist = np.abs(s_edge[:, None] - sj[None, :])
        dist = np.minimum(dist, P - dist).min(axis=1)
    else:
        dist = np.full(len(s_edge), np.inf)
    use = (kind[edge] == "arc") & (dist >= d_min)
    if not np.any(use):
        raise PreconditionError("every strictly convex sample lies within d_min of a junction")
    aq = np.abs(q[use])
    ww = w[use]
    mean = float(np.sum(ww * aq) / np.sum(ww))
    std = float(np.sqrt(np.sum(ww * (aq - mean) ** 2) / np.sum(ww)))
    pred = float(np.sqrt(lam / area))
    profiles = []
    node_kind = kind
    for a in range(len(decomposition.strictly_convex_arcs)):
        sel = (node_kind == "arc") & (arc_id == a)
        profiles.append((flux.s[sel], flux.values[sel]))
    ev = sol.eigenvalues
    gap = float((ev[which + 1] - ev[which]) / ev[which]) if len(ev) > which + 1 else None
    return OverdeterminedReport(which, lam, float(area), pred, mean, abs(mean - pred) / pred,
                                std / mean, gap, float(d_min), profiles)


def junction_conformal_check(cmap, shape: ConvexShape | None = None,
                             decomposition: BoundaryDecomposition | None = None, **options) -> list:
    """Singular expansion of ``log|φ'|`` at every junction preimage.

    Returns one :class:`~convexdrum.mixed_bvp.SingularExpansion` per junction
    (empty for shapes without junctions).
    """
    from .conformal import junction_expansions

    shape = cmap.shape if shape is None else shape
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    if not decomposition.junctions:
        return []
    return junction_expansions(cmap, decomposition, **options)
