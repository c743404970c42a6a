import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexdrum.errors import ExtractionError, MixedSolverError
from convexdrum.mixed_bvp import (MixedProblem, PolarField, boundary_residual, extract_singular, manufactured,
                                  solve_mixed)


def smooth(z):
    return 0.3 + 0.2 * z - 0.1 * z ** 2


coef = st.floats(-2, 2).filter(lambda x: abs(x) > 1e-3 or x == 0)


@given(coef, coef, st.floats(0.5, 2.0))
def test_manufactured_recovery(a0, a1, R):
    pb, exact = manufactured(a0, a1, smooth, R=R)
    sol = solve_mixed(pb)
    e = extract_singular(sol)
    assert abs(e.a0 - a0) < 1e-3
    assert abs(e.a1 - a1) < 1e-3
    assert boundary_residual(sol) < 1e-9
    r = R * np.linspace(0.01, 1, 9)
    ph = np.linspace(0, np.pi, 9)
    R_, P_ = np.meshgrid(r, ph)
    assert np.abs(sol(R_, P_) - exact(R_, P_)).max() < 1e-9


def test_step_six_dichotomy():
    e = extract_singular(solve_mixed(manufactured(0.0, 1.0, smooth)[0]))
    assert not e.a0_significant and e.a1_significant
    assert abs(e.remainder_exponent - 1.5) < 0.05
    assert abs(e.field_exponent - 1.5) < 0.05
    e = extract_singular(solve_mixed(manufactured(1.0, 0.0, smooth)[0]))
    assert e.a0_significant
    assert abs(e.field_exponent - 0.5) < 0.05
    assert abs(e.gradient_exponent + 0.5) < 0.05


def test_extra_modes_do_not_leak_into_a0():
    pb, _ = manufactured(0.5, 0.0, smooth, extra_modes={2: 0.3, 3: -0.2})
    e = extract_singular(solve_mixed(pb))
    assert abs(e.a0 - 0.5) < 1e-3 and abs(e.a1) < 1e-3


def test_polar_field_direct():
    f = PolarField.from_function(lambda r, p: 2.0 * np.sqrt(r) * np.cos(p / 2) + np.real(smooth(r * np.exp(1j * p))))
    e = extract_singular(f)
    assert e.a0 == pytest.approx(2.0, abs=1e-6)
    assert f.to_csv().startswith("r,phi,a\n")


def test_sample_data_roundtrip():
    pb, _ = manufactured(1.0, 0.25, smooth)
    pb2 = MixedProblem.from_json(pb.to_json())
    e = extract_singular(solve_mixed(pb2))
    assert abs(e.a0 - 1.0) < 1e-3
    assert abs(e.a1 - 0.25) < 1e-3
    d = json.loads(e.to_json())
    assert set(d) >= {"a0", "a1", "remainder_exponent", "a0_significant"}


def test_errors():
    with pytest.raises(MixedSolverError):
        MixedProblem(R=0.0)
    with pytest.raises(MixedSolverError):
        MixedProblem(g_D=([0.0, 1.0], [0.0, np.nan]))
    f = PolarField.from_function(lambda r, p: np.where(r > 1e-3, np.nan, 0 * r + 0 * p))
    with pytest.raises(ExtractionError):
        extract_singular(f)


def _field(f):
    return PolarField.from_function(f)


def test_zero_data_zero_field():
    sol = solve_mixed(MixedProblem())
    e = extract_singular(sol)
    assert np.max(np.abs(sol.field.values)) == 0.0 or np.max(np.abs(sol.field.values)) < 1e-14
    assert abs(e.a0) < 1e-14 and abs(e.a1) < 1e-14


def test_manufactured_half_plus_quadratic():
    pb, exact = manufactured(1.0, 0.0, lambda z: z ** 2)
    sol = solve_mixed(pb)
    r, phi = sol.field.radii[:, None], sol.field.phi[None, :]
    assert np.max(np.abs(sol.field.values - exact(r, phi))) < 1e-8


def test_pure_three_halves_has_no_a0():
    e = extract_singular(solve_mixed(manufactured(0.0, 2.0)[0]))
    assert abs(e.a0) <= 1e-6 and abs(e.a1 - 2.0) < 1e-3


def test_smooth_data_has_no_singular_content():
    e = extract_singular(solve_mixed(manufactured(0.0, 0.0, lambda z: 1 + z - 0.5 * z ** 3)[0]))
    assert abs(e.a0) <= 1e-6 and abs(e.a1) <= 1e-6


@pytest.mark.parametrize("k", [0, 1])
def test_single_mode_is_one_hot(k):
    e = extract_singular(_field(lambda r, p: r ** (k + 0.5) * np.cos((k + 0.5) * p)))
    np.testing.assert_allclose([e.a0, e.a1], np.eye(2)[k], atol=1e-8)


@given(coef, coef, coef, coef)
def test_extraction_is_linear(a, b, c, d):
    f1 = lambda r, p: a * np.sqrt(r) * np.cos(p / 2) + b * r ** 1.5 * np.cos(1.5 * p) + r * np.cos(p)  # noqa: E731
    f2 = lambda r, p: c * np.sqrt(r) * np.cos(p / 2) + d * r ** 1.5 * np.cos(1.5 * p)  # noqa: E731
    e1, e2 = extract_singular(_field(f1)), extract_singular(_field(f2))
    e = extract_singular(_field(lambda r, p: f1(r, p) + f2(r, p)))
    assert abs(e.a0 - e1.a0 - e2.a0) < 1e-8 and abs(e.a1 - e1.a1 - e2.a1) < 1e-8
