import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexdrum.conformal import (CurveBoundary, argument_holder_exponent, circle, conjugate, ellipse,
                                  flat_run_argument_spread, junction_expansions, junction_preimages, map_to,
                                  schwarz_christoffel_square_log_dphi, transport_check)
from convexdrum.errors import ConformalError, PreconditionError
from convexdrum.geometry import ConvexShape, decompose_boundary, disk, hoelder_junction, square, stadium_for_area
from convexdrum.meshing import triangulate
from convexdrum.spectral import boundary_flux, solve_eigs


@given(st.integers(1, 100), st.floats(-np.pi, np.pi))
def test_conjugate_of_fourier_modes(k, phase):
    N = 256
    t = 2 * np.pi * np.arange(N) / N
    u = np.cos(k * t + phase) + 3.0
    np.testing.assert_allclose(conjugate(u), np.sin(k * t + phase), atol=1e-12)


def test_conjugate_kills_constants():
    assert np.max(np.abs(conjugate(np.full(64, 2.5)))) < 1e-15


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_disk_identity(radius):
    m = map_to(circle(radius), 256)
    t = m.t
    np.testing.assert_allclose(m.points[:, 0], radius * np.cos(t), atol=1e-10)
    np.testing.assert_allclose(m.points[:, 1], radius * np.sin(t), atol=1e-10)
    np.testing.assert_allclose(m.log_abs_dphi, np.log(radius), atol=1e-10)
    assert m.dphi0 == pytest.approx(radius, abs=1e-10)


def test_ellipse_map_invariants():
    m = map_to(ellipse(1.3, 0.8), 1024)
    assert m.is_monotone()
    assert m.conjugacy_residual() < 1e-10
    assert m.tangent_defect() < 1e-8
    assert m.boundary_defect() < 1e-10
    assert m.image_area() == pytest.approx(np.pi * 1.3 * 0.8, rel=1e-9)
    # φ(0) is the center and φ'(0) > 0
    assert abs(m(np.array([0.0]))[0]) < 1e-12
    assert np.isclose(np.exp(m.log_dphi(np.array([0.0]))[0]).imag, 0, atol=1e-12)


@settings(max_examples=6)
@given(st.floats(1.0, 1.8))
def test_ellipse_area_property(a):
    m = map_to(ellipse(a, 1.0), 512)
    assert m.image_area() == pytest.approx(np.pi * a, rel=1e-8)
    assert m.is_monotone()


def test_square_against_polygon_map():
    s = square(4)
    m = map_to(s, 4096)
    assert m.is_monotone()
    assert m.conjugacy_residual() < 1e-8
    assert m.image_area() == pytest.approx(1.0, rel=5e-3)
    # prevertex exponent: log|φ'| ~ -1/2 log|t - t_k| near each prevertex
    tk = m.preimage_of_angle(np.pi / 4)
    d = np.abs(np.angle(np.exp(1j * (m.t - tk))))
    sel = (d > 20 * 2 * np.pi / m.N) & (d < 0.2)
    slope = np.polyfit(np.log(d[sel]), m.log_abs_dphi[sel], 1)[0]
    ref = np.polyfit(np.log(d[sel]), schwarz_christoffel_square_log_dphi(m.t[sel] - tk + np.pi / 4), 1)[0]
    assert abs(slope + 0.5) < 0.02
    assert abs(slope - ref) < 0.02


def test_polygon_map_follows_boundary():
    m = map_to(stadium_for_area(0.8, 1.0, 256), 2048)
    assert m.is_monotone()
    assert m.boundary_defect() < 1e-12
    assert m.tangent_defect() < 1e-9
    assert m.geometric_residual() < 1e-2
    assert m.to_csv().splitlines()[0] == "t,x,y,log_abs_dphi,arg_dphi"
    assert max(flat_run_argument_spread(m)) < 1e-3
    assert len(junction_preimages(m, decompose_boundary(m.shape))) == 4


def test_bad_resolution():
    with pytest.raises(ConformalError):
        map_to(circle(), 300)
    with pytest.raises(ConformalError):
        map_to(circle(), 128)


def test_divergence_reported():
    with pytest.raises(ConformalError, match="contraction"):
        map_to(ellipse(6.0, 1.0), 256, max_iter=30)


def test_transport_disk():
    s = disk(256)
    sol = solve_eigs(triangulate(s, 0.04), 1)
    Lam = float(np.mean(np.abs(boundary_flux(sol, 0).values)))
    m = map_to(s, 1024)
    out = transport_check(m, sol, 0, Lam)
    assert out["max_defect"] < 0.01
    assert transport_check(m, sol, 0, 2 * Lam)["mean_defect"] > 0.4
    with pytest.raises(PreconditionError):
        transport_check(m, sol, 0, 0.0)


def test_transport_needs_arcs():
    s = square(64)
    sol = solve_eigs(triangulate(s, 0.1), 1)
    m = map_to(s, 1024)
    with pytest.raises(PreconditionError):
        transport_check(m, sol, 0, 1.0, decompose_boundary(s, eps_flat=1e-6))


def test_junction_expansion_detects_half_power():
    s = hoelder_junction(0.5, n=1024)
    m = map_to(s, 8192)
    ex = junction_expansions(m, decompose_boundary(s))
    assert len(ex) == 4
    assert all(e.a0_significant for e in ex)


def test_argument_exponent_separates_smooth_and_junction():
    t = 2 * np.pi * np.arange(256) / 256
    e = ConvexShape(np.column_stack([1.2 * np.cos(t), np.sin(t)]))
    assert argument_holder_exponent(map_to(e, 4096)) > 1.0
    b = argument_holder_exponent(map_to(hoelder_junction(0.5, n=1024), 8192))
    assert abs(b - 0.5) < 0.1
