"""Mixed Dirichlet/Neumann harmonic problem on a half-disk with a flat corner.

Polar coordinates ``(r, φ)`` put the Neumann ray at ``φ = 0`` (condition on
``∂_y a``) and the Dirichlet ray at ``φ = π``.  The solution is a lifting of
the ray data plus an expansion in the homogeneous modes
``r^(k+1/2) cos((k+1/2)φ)``, whose coefficients are fixed by collocation on
the arc ``r = R``.

For polynomial ray data the lifting is explicit: with ``p`` the Dirichlet
data and ``Q`` an antiderivative of the Neumann data (``Q(0) = 0``),
``Re p(-z) + Im Q(z)`` is harmonic, equals ``p(r)`` on the Dirichlet ray, has
``∂_y = q`` on the Neumann ray and does not disturb the other condition.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.fft import dct
from scipy.optimize import minimize_scalar

from ._json import dumps
from .errors import ExtractionError, MixedSolverError

Data = Callable[[np.ndarray], np.ndarray] | tuple | None

LADDER = tuple(range(2, 13))
N_PHI = 64
SMOOTH_DEGREE = 6
DELTA_REL = 1e-4
MAX_CONDITION = 1e8


def _as_samples(data: Data, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(points, values)`` for a callable (sampled at ``nodes``) or a sample pair."""
    if data is None:
        return nodes, np.zeros_like(nodes)
    if callable(data):
        return nodes, np.asarray(data(nodes), dtype=float)
    x, y = (np.asarray(a, dtype=float) for a in data)
    if x.shape != y.shape:
        raise MixedSolverError("sample points and values differ in shape")
    return x, y


@dataclass
class MixedProblem:
    """Data for the half-disk problem of radius ``R``.

    ``g_D`` and ``g_N`` are functions of ``r`` on the rays, ``g_arc`` a
    function of ``φ`` on the arc; each may also be a ``(points, values)``
    sample pair or ``None`` for zero data.
    """

    R: float = 1.0
    g_D: Data = None
    g_N: Data = None
    g_arc: Data = None

    def __post_init__(self):
        if not self.R > 0:
            raise MixedSolverError("radius must be positive")
        for name in ("g_D", "g_N", "g_arc"):
            d = getattr(self, name)
            if d is not None and not callable(d):
                _, y = _as_samples(d, np.zeros(1))
                if not np.all(np.isfinite(y)):
                    raise MixedSolverError(f"{name} samples are not finite")

    def samples(self, n: int = 129) -> dict:
        r = self.R * 0.5 * (1 - np.cos(np.linspace(0, np.pi, n)))
        phi = np.linspace(0, np.pi, n)
        rd, gd = _as_samples(self.g_D, r)
        rn, gn = _as_samples(self.g_N, r)
        pa, ga = _as_samples(self.g_arc, phi)
        return {"R": self.R, "g_D": {"r": rd, "values": gd}, "g_N": {"r": rn, "values": gn},
                "g_arc": {"phi": pa, "values": ga}}

    def to_json(self, n: int = 129) -> str:
        return dumps(self.samples(n))

    @classmethod
    def from_json(cls, text: str) -> "MixedProblem":
        d = json.loads(text)
        return cls(float(d["R"]), (d["g_D"]["r"], d["g_D"]["values"]),
                   (d["g_N"]["r"], d["g_N"]["values"]), (d["g_arc"]["phi"], d["g_arc"]["values"]))


@dataclass
class PolarField:
    """Samples ``values[i, j]`` of a field at ``radii[i]`` and Gauss angles ``phi[j]``."""

    R: float
    radii: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    @classmethod
    def from_function(cls, f: Callable, R: float = 1.0, ladder=LADDER, n_phi: int = N_PHI) -> "PolarField":
        x, w = np.polynomial.legendre.leggauss(n_phi)
        phi = 0.5 * np.pi * (x + 1)
        w = 0.5 * np.pi * w
        radii = R * 2.0 ** -np.asarray(ladder, dtype=float)
        vals = np.asarray(f(radii[:, None], phi[None, :]), dtype=float)
        return cls(float(R), radii, phi, w, np.broadcast_to(vals, (len(radii), n_phi)).copy())

    def modes(self, k_max: int = 2) -> np.ndarray:
        """``a_k(r) = (2/π)∫ a(r,φ) cos((k+1/2)φ) dφ`` for ``k < k_max``, shape (radii, k_max)."""
        basis = np.cos((np.arange(k_max)[None, :] + 0.5) * self.phi[:, None])
        return (2.0 / np.pi) * (self.values * self.weights[None, :]) @ basis

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,phi,a\n")
        for i, r in enumerate(self.radii):
            for j, p in enumerate(self.phi):
                buf.write(f"{r:.12g},{p:.12g},{self.values[i, j]:.12g}\n")
        return buf.getvalue()


@dataclass
class MixedSolution:
    problem: MixedProblem
    coefficients: np.ndarray  # homogeneous mode coefficients in the scaled radius r/R
    dirichlet_lift: Chebyshev
    neumann_lift: Chebyshev
    residual: float
    condition: float
    field: PolarField = field(repr=False, default=None)

    def __call__(self, r, phi) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        z = r * np.exp(1j * phi)
        lift = np.real(self.dirichlet_lift(-z)) + np.imag(self.neumann_lift(z))
        k = np.arange(len(self.coefficients)) + 0.5
        rho = (r / self.problem.R)[..., None]
        modes = rho ** k * np.cos(k * phi[..., None])
        return lift + modes @ self.coefficients


def _chebyshev_fit(x: np.ndarray, y: np.ndarray, R: float, max_degree: int, tol: float,
                   scale: float):
    """Chebyshev fit on ``[0, R]`` with trailing coefficients below ``tol`` chopped.

    ``scale`` is the magnitude of all problem data, so that rounding noise
    in a vanishing data set is chopped too.  Returns the series and the
    amplification of its continuation onto the half-disk,
    ``max|p(z)| / scale`` over ``|z| = R``.
    """
    if scale == 0.0 or not np.any(np.abs(y) > tol * scale):
        return Chebyshev([0.0], domain=[0.0, R]), 1.0
    c = Chebyshev.fit(x, y, min(max_degree, len(x) - 1), domain=[0.0, R])
    coef = c.coef.copy()
    big = np.nonzero(np.abs(coef) > tol * scale)[0]
    c = Chebyshev(coef[: big[-1] + 1] if len(big) else [0.0], domain=[0.0, R])
    z = R * np.exp(1j * np.linspace(0, np.pi, 257))
    amp = float(max(np.max(np.abs(c(z))), np.max(np.abs(c(-z)))) / scale)
    return c, amp


def solve_mixed(problem: MixedProblem, resolution: int = 64, tol: float = 1e-13) -> MixedSolution:
    """Lifting plus half-integer mode collocation on the arc.

    ``resolution`` is the number of homogeneous modes (and an upper bound on
    the degree of the ray-data lifting).

    Raises
    ------
    MixedSolverError
        ``resolution < 32``, non-finite data, or a lifting whose continuation
        off the rays amplifies the data by more than ``MAX_CONDITION``.
    """
    if resolution < 32:
        raise MixedSolverError("resolution must be at least 32 modes")
    R = problem.R
    m = 4 * resolution
    r_nodes = R * 0.5 * (1 - np.cos(np.pi * (np.arange(m) + 0.5) / m))
    rd, gd = _as_samples(problem.g_D, r_nodes)
    rn, gn = _as_samples(problem.g_N, r_nodes)
    if not (np.all(np.isfinite(gd)) and np.all(np.isfinite(gn))):
        raise MixedSolverError("ray data are not finite")
    K = resolution
    phi = (np.arange(K) + 0.5) * np.pi / K
    if problem.g_arc is None or callable(problem.g_arc):
        ga = _as_samples(problem.g_arc, phi)[1]
    else:
        pa, va = _as_samples(problem.g_arc, phi)
        ga = np.interp(phi, pa, va)
    if not np.all(np.isfinite(ga)):
        raise MixedSolverError("arc data are not finite")
    scale = max(np.max(np.abs(gd), initial=0.0), R * np.max(np.abs(gn), initial=0.0),
                np.max(np.abs(ga), initial=0.0))
    max_deg = min(resolution, 40)
    p, cond_d = _chebyshev_fit(rd, gd, R, max_deg, tol, scale)
    q, cond_n = _chebyshev_fit(rn, R * gn, R, max_deg, tol, scale)
    q = q / R
    cond = max(cond_d, cond_n)
    if cond > MAX_CONDITION:
        raise MixedSolverError(f"ray-data lifting is ill-conditioned (amplification {cond:.3g})")
    Q = q.integ(lbnd=0.0)

    # collocation on the arc at φ_i = (i + 1/2)π/K: the mode matrix is a DCT-IV
    z = R * np.exp(1j * phi)
    h = ga - (np.real(p(-z)) + np.imag(Q(z)))
    coef = dct(h, type=4, norm=None) / K

    sol = MixedSolution(problem, coef, p, Q, 0.0, cond)
    sol.residual = boundary_residual(sol)
    sol.field = PolarField.from_function(sol, R)
    return sol


def boundary_residual(sol: MixedSolution, n: int = 200) -> float:
    """Max violation of the three boundary conditions at check points."""
    pb = sol.problem
    R = pb.R
    r = R * 0.5 * (1 - np.cos(np.linspace(0, np.pi, n)))[1:-1]
    phi = np.linspace(0, np.pi, n)
    res = []
    if pb.g_D is None or callable(pb.g_D):
        res.append(np.abs(sol(r, np.full_like(r, np.pi)) - _as_samples(pb.g_D, r)[1]))
    if pb.g_N is None or callable(pb.g_N):
        # ∂_y at φ = 0 by the lifting; modes contribute nothing there
        res.append(np.abs(np.real(sol.neumann_lift.deriv()(r)) - _as_samples(pb.g_N, r)[1]))
    if pb.g_arc is None or callable(pb.g_arc):
        res.append(np.abs(sol(np.full_like(phi, R), phi) - _as_samples(pb.g_arc, phi)[1]))
    return float(max((np.max(x) for x in res), default=0.0))


@dataclass
class SingularExpansion:
    """Leading singular coefficients at the corner and fit diagnostics."""

    a0: float
    a1: float
    remainder_exponent: float
    radii: np.ndarray
    mode_profiles: np.ndarray
    residuals: np.ndarray
    field_exponent: float
    gradient_exponent: float
    field_scale: float
    delta: float

    @property
    def a0_significant(self) -> bool:
        return abs(self.a0) > self.delta

    @property
    def a1_significant(self) -> bool:
        return abs(self.a1) > self.delta

    def as_dict(self) -> dict:
        return {"a0": self.a0, "a1": self.a1, "remainder_exponent": self.remainder_exponent,
                "field_exponent": self.field_exponent, "gradient_exponent": self.gradient_exponent,
                "radii": self.radii.tolist(), "residuals": self.residuals.tolist(),
                "field_scale": self.field_scale, "delta": self.delta,
                "a0_significant": self.a0_significant, "a1_significant": self.a1_significant}

    def to_json(self) -> str:
        return dumps(self.as_dict())


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def extract_singular(field_or_solution, smooth_degree: int = SMOOTH_DEGREE) -> SingularExpansion:
    """Fit ``a_k(r) ≈ s_k r^(k+1/2) + p_k(r)`` on the radius ladder for ``k = 0, 1``.

    ``p_k`` is a polynomial of degree ``smooth_degree`` absorbing the
    integer-power content of smooth parts.  The remainder exponent is the
    log-log slope of the singular remainder once the ``r^(1/2)`` term and the
    smooth parts are removed.

    Raises
    ------
    ExtractionError
        Fewer than 4 radii carry finite samples.
    """
    f = field_or_solution.field if isinstance(field_or_solution, MixedSolution) else field_or_solution
    finite = np.all(np.isfinite(f.values), axis=1)
    if finite.sum() < 4:
        raise ExtractionError(f"only {int(finite.sum())} usable radii (need 4)")
    r = f.radii[finite] / f.R
    vals = f.values[finite]
    sub = PolarField(f.R, f.radii[finite], f.phi, f.weights, vals)
    prof = sub.modes(2)
    deg = min(smooth_degree, len(r) - 3)
    coefs, residuals, smooth = [], [], []
    for k in range(2):
        cols = [r ** (k + 0.5)] + [r ** j for j in range(deg + 1)]
        A = np.column_stack(cols)
        norms = np.linalg.norm(A, axis=0)
        c, *_ = np.linalg.lstsq(A / norms, prof[:, k], rcond=None)
        c = c / norms
        coefs.append(c[0] * f.R ** -(k + 0.5))
        residuals.append(float(np.linalg.norm(A @ c - prof[:, k])))
        smooth.append(A[:, 1:] @ c[1:])
    # singular remainder: everything but the r^(1/2) term and the smooth parts
    k_all = 8
    prof_all = sub.modes(k_all)
    rem = prof_all.copy()
    rem[:, 0] -= coefs[0] * f.radii[finite] ** 0.5 + smooth[0]
    rem[:, 1] -= smooth[1]
    for k in range(2, k_all):
        A = np.column_stack([r ** j for j in range(deg + 1)])
        c, *_ = np.linalg.lstsq(A, prof_all[:, k], rcond=None)
        rem[:, k] -= A @ c
    rem_norm = np.sqrt(0.5 * np.pi * np.sum(rem ** 2, axis=1))
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    delta = DELTA_REL * max(scale, 1e-300)
    rem_exp = _slope(r, rem_norm) if np.max(rem_norm) > 1e-9 * max(scale, 1e-300) else float("nan")
    field_exp, grad_exp = _holder_exponents(sub, scale)
    return SingularExpansion(float(coefs[0]), float(coefs[1]), rem_exp, sub.radii, prof,
                             np.array(residuals), field_exp, grad_exp, scale, float(delta))


def _varpro_exponent(r: np.ndarray, D: np.ndarray, integer_powers, scale: float) -> float:
    """Exponent ``α`` of ``D(r, φ) ≈ A r^α + A' r^(α+1) + Σ_m B_m r^m`` by variable projection.

    Amplitudes are solved linearly for every ``φ`` column at once and ``α``
    minimizes the total residual.  Returns NaN when no singular content is
    present.
    """
    ok = np.all(np.isfinite(D), axis=1)
    r, D = r[ok], D[ok]
    if len(r) < len(integer_powers) + 3:
        return float("nan")
    x = r / r.max()
    ints = [x ** m for m in integer_powers]

    def fit(alpha):
        A = np.column_stack([x ** alpha, x ** (alpha + 1)] + ints)
        c, *_ = np.linalg.lstsq(A, D, rcond=None)
        return float(np.sum((A @ c - D) ** 2)), c

    grid = np.linspace(0.02, 3.0, 597)
    res = np.array([fit(a)[0] for a in grid])
    i = int(np.argmin(res))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    alpha = float(minimize_scalar(lambda a: fit(a)[0], bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-8}).x)
    _, c = fit(alpha)
    amp = np.max(np.abs(c[0]))
    if amp <= 1e-10 * max(scale, 1e-300):
        return float("nan")
    return alpha


def _holder_exponents(f: PolarField, scale: float) -> tuple[float, float]:
    """Corner exponents of the field and of its gradient.

    With ``r_{j+1} = r_j / 2``, first differences along each ray cancel the
    constant and second differences ``Δ_j - 2Δ_{j+1}`` also cancel linear
    terms; the leading non-integer power left is fitted by variable
    projection.
    """
    v = f.values
    if not np.allclose(f.radii[1:] / f.radii[:-1], 0.5):
        return float("nan"), float("nan")
    d1 = v[:-1] - v[1:]
    d2 = d1[:-1] - 2.0 * d1[1:]
    field = _varpro_exponent(f.radii[:-1], d1, (1, 2, 3), scale)
    grad = _varpro_exponent(f.radii[:-2], d2, (2, 3), scale)
    return field, grad - 1.0


def manufactured(a0: float = 1.0, a1: float = 0.0, smooth: Callable | None = None, R: float = 1.0,
                 extra_modes: dict | None = None):
    """Problem whose exact solution is ``a0 r^(1/2)cos(φ/2) + a1 r^(3/2)cos(3φ/2) + smooth``.

    ``smooth`` maps complex ``z`` to a holomorphic value whose real part is
    added to the field.  Returns ``(problem, exact)``.
    """
    modes = {0: a0, 1: a1}
    if extra_modes:
        modes.update(extra_modes)

    def exact(r, phi):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        out = np.zeros(np.broadcast(r, phi).shape)
        for k, c in modes.items():
            out = out + c * r ** (k + 0.5) * np.cos((k + 0.5) * phi)
        if smooth is not None:
            out = out + np.real(smooth(r * np.exp(1j * phi)))
        return out

    def g_N(r):
        # ∂_y a on φ = 0: singular modes have zero angular derivative there
        r = np.asarray(r, dtype=float)
        if smooth is None:
            return np.zeros_like(r)
        return -np.imag(_complex_derivative(smooth, r))

    pb = MixedProblem(R, lambda r: exact(r, np.full_like(np.asarray(r, dtype=float), np.pi)),
                      g_N, lambda phi: exact(np.full_like(np.asarray(phi, dtype=float), R), phi))
    return pb, exact


def _complex_derivative(f: Callable, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Derivative of holomorphic ``f`` on the real axis by a circular Cauchy rule."""
    t = 2 * np.pi * np.arange(32) / 32
    w = np.exp(1j * t)
    vals = f(x[..., None] + h * w)
    return np.mean(vals / (h * w), axis=-1)
