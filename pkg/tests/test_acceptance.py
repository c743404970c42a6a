"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
numbers, then asserts.  The two optimization runs are shared session
fixtures; the whole module takes several minutes.
"""

import numpy as np
import pytest
from scipy.special import jn_zeros

from convexdrum.conformal import (circle, flat_run_argument_spread, map_to,
                                  schwarz_christoffel_square_log_dphi, transport_check)
from convexdrum.geometry import (ConvexShape, area_centroid, decompose_boundary, disk, hoelder_junction, square,
                                 stadium_for_area)
from convexdrum.meshing import Grading, triangulate
from convexdrum.mixed_bvp import extract_singular, manufactured, solve_mixed
from convexdrum.regularity_analysis import analyze_junctions, check_overdetermined, wall_contact_report
from convexdrum.shape_opt import (OptimizationProblem, error_bar, free_boundary_components, optimize,
                                  stadium_scan)
from convexdrum.spectral import solve_eigs

pytestmark = pytest.mark.acceptance

J01 = jn_zeros(0, 1)[0]
J11 = jn_zeros(1, 1)[0]
STRIP_M = 0.4


def _problem(**kw):
    return OptimizationProblem(h=0.04, n_vertices=128, max_iter=200, refine_vertices=384, refine_iter=250,
                               grading=Grading.junction_graded(1 / 64), **kw)


@pytest.fixture(scope="session")
def lambda2_run():
    p = _problem()
    return p, optimize(p, disk(64, 1.0))


@pytest.fixture(scope="session")
def strip_run():
    p = _problem(objective="lambda1_in_strip", strip_M=STRIP_M)
    return p, optimize(p, ConvexShape(disk(128, 1.0).vertices * np.array([1.6, 0.6])))


@pytest.fixture(scope="session")
def scan():
    return stadium_scan(n_samples=12, ratio_range=(0.0, 2.0), n_vertices=512, h=0.04)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_c01_eigensolver_accuracy(verdict):
    d = solve_eigs(triangulate(disk(512), 0.02), 2, 2).eigenvalues
    e1, e2 = abs(d[0] / (np.pi * J01 ** 2) - 1), abs(d[1] / (np.pi * J11 ** 2) - 1)
    sq = solve_eigs(triangulate(square(4), 0.03), 1, 2).eigenvalues[0]
    e3 = abs(sq / (2 * np.pi ** 2) - 1)
    errs = [abs(solve_eigs(triangulate(square(4), h), 1, 1).eigenvalues[0] - 2 * np.pi ** 2)
            for h in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = e1 < 1e-3 and e2 < 1e-3 and e3 < 1e-3 and np.all(orders >= 1.9)
    verdict(1, ok, f"disk rel err {e1:.2e}, {e2:.2e}; square {e3:.2e}; P1 orders {np.round(orders, 3).tolist()}")


def test_c02_krahn_szego(verdict):
    lam2 = solve_eigs(triangulate(disk(512), 0.03), 3, 2).eigenvalues[1]
    verdict(2, lam2 > 2 * np.pi * J01 ** 2, f"λ₂(disk) = {lam2:.4f} vs two-disk value {2 * np.pi * J01 ** 2:.4f}")


def test_c03_stadium_not_optimal(verdict, lambda2_run, scan):
    p, tr = lambda2_run
    val = tr.final_state.objective
    bar = max(error_bar(p, tr.final_shape, val), scan.error_bar)
    ok = val < scan.best_value - 3 * bar
    verdict(3, ok, f"optimum {val:.6f}, best stadium {scan.best_value:.6f} (ratio {scan.best_ratio:.4f}), "
                   f"error bar {bar:.2e}, margin {(scan.best_value - val) / bar:.1f} bars")


def test_c04_optimality_condition(verdict, lambda2_run, scan):
    _, tr = lambda2_run
    st = tr.final_state
    rep = check_overdetermined(st.shape, st.solution, which=1)
    s = scan.best_shape
    dec = decompose_boundary(s)
    ctrl = check_overdetermined(s, solve_eigs(triangulate(s, 0.04, Grading.junction_graded(1 / 64), dec), 3),
                                dec, which=1)
    ok = rep.relative_error <= 0.02 and rep.cv <= 0.02 and ctrl.cv > 0.05
    verdict(4, ok, f"optimum: mean |∂u₂/∂n| rel err {rep.relative_error:.2e}, CV {rep.cv:.2e}; "
                   f"stadium control: rel err {ctrl.relative_error:.2e}, CV {ctrl.cv:.2e} (needs > 5e-2)")


def test_c05_simple_eigenvalue(verdict, lambda2_run):
    _, tr = lambda2_run
    verdict(5, tr.final_state.gap > 0.01, f"relative gap (λ₃-λ₂)/λ₂ = {tr.final_state.gap:.4f}")


def test_c06_flat_parts(verdict, lambda2_run):
    _, tr = lambda2_run
    n = len(decompose_boundary(tr.final_shape).flat_runs)
    verdict(6, n >= 2, f"{n} flat runs")


def test_c07_junction_exponent(verdict, lambda2_run):
    _, tr = lambda2_run
    rep = analyze_junctions(tr.final_shape)
    good = [j.fit is not None and 0.35 <= j.fit.band[0] and j.fit.band[1] <= 0.70 and j.fit.consistent_with_half
            for j in rep.junctions]
    syn = [j.fit.alpha for j in analyze_junctions(hoelder_junction(0.5, n=1024)).junctions]
    stad = [j.fit.alpha for j in analyze_junctions(stadium_for_area(1.0, 1.0, 1024)).junctions]
    ok = bool(rep.junctions) and all(good) and max(abs(a - 0.5) for a in syn) <= 0.05 and min(stad) >= 0.9
    bands = [(round(j.fit.alpha, 3), tuple(np.round(j.fit.band, 3).tolist())) if j.fit else j.error for j in rep.junctions]
    verdict(7, ok, f"optimum junctions {bands}; synthetic α̂ {np.round(syn, 3).tolist()}; "
                   f"stadium α̂ {np.round(stad, 3).tolist()}")


def test_c08_mixed_expansion(verdict):
    smooth = lambda z: 0.3 + 0.2 * z - 0.1 * z ** 2  # noqa: E731
    errs = []
    for a0, a1 in ((1.0, 0.0), (0.7, -0.4), (0.0, 1.0)):
        e = extract_singular(solve_mixed(manufactured(a0, a1, smooth)[0]))
        errs.append(max(abs(e.a0 - a0), abs(e.a1 - a1)))
    rem = extract_singular(solve_mixed(manufactured(0.0, 1.0, smooth)[0])).remainder_exponent
    ok = max(errs) <= 1e-3 and abs(rem - 1.5) <= 0.05
    verdict(8, ok, f"max coefficient error {max(errs):.2e}; remainder exponent with a0 = 0: {rem:.4f}")


def test_c09_conformal(verdict, lambda2_run):
    m = map_to(circle(1.0), 1024)
    ident = float(np.max(np.hypot(m.points[:, 0] - np.cos(m.t), m.points[:, 1] - np.sin(m.t))))
    sq = map_to(square(4), 4096)
    tk = sq.preimage_of_angle(np.pi / 4)
    d = np.abs(np.angle(np.exp(1j * (sq.t - tk))))
    sel = (d > 20 * 2 * np.pi / sq.N) & (d < 0.2)
    slope = np.polyfit(np.log(d[sel]), sq.log_abs_dphi[sel], 1)[0]
    ref = np.polyfit(np.log(d[sel]), schwarz_christoffel_square_log_dphi(sq.t[sel] - tk + np.pi / 4), 1)[0]
    _, tr = lambda2_run
    st = tr.final_state
    area = area_centroid(st.shape)[0]
    cmap = map_to(st.shape, 16384)
    tc = transport_check(cmap, st.solution, 1, float(np.sqrt(st.solution.eigenvalues[1] / area)))
    spread = max(flat_run_argument_spread(cmap))
    ok = ident <= 1e-10 and abs(slope + 0.5) <= 0.02 and abs(slope - ref) <= 0.02 and \
        tc["max_defect"] <= 0.03 and spread <= 1e-3
    verdict(9, ok, f"disk identity {ident:.1e}; square exponent {slope:.4f} (oracle {ref:.4f}); "
                   f"transport defect {tc['max_defect']:.2e}; flat-run Arg spread {spread:.1e}")


def test_c10_strip(verdict, strip_run):
    p, tr = strip_run
    s = tr.final_shape
    comps = free_boundary_components(s, STRIP_M)
    contacts = wall_contact_report(s, STRIP_M)
    angles = [c["contact_angle_deg"] for c in contacts]
    rep = analyze_junctions(s)
    bands = [j.fit.band for j in rep.junctions if j.fit is not None]
    ok = comps == 2 and len(angles) > 0 and np.all(np.abs(angles) <= 2.0) and \
        len(bands) == len(rep.junctions) > 0 and all(lo <= 0.5 <= hi for lo, hi in bands)
    verdict(10, ok, f"free boundary components {comps}; contact angles {np.round(angles, 3).tolist()} deg; "
                    f"junction α̂ {[(round(j.fit.alpha, 3), tuple(np.round(j.fit.band, 3).tolist())) for j in rep.junctions]}")
