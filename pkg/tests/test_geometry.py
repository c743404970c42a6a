import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexdrum.errors import InvalidShapeError
from convexdrum.geometry import (ConvexShape, area_centroid, convexify, decompose_boundary, disk, load_shape,
                                 save_shape, shape_from_csv, shape_from_json, shape_to_csv, shape_to_json,
                                 square, stadium, stadium_for_area, synthesize)

from conftest import regular_polygon


def test_unit_square_area_centroid():
    a, c = area_centroid(ConvexShape([(0, 0), (1, 0), (1, 1), (0, 1)]))
    assert a == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(c, [0.5, 0.5], atol=1e-15)


def test_regular_256gon_area():
    a, _ = area_centroid(ConvexShape(regular_polygon(256)))
    assert abs(a - np.pi) < 1e-3
    assert a == pytest.approx(128 * np.sin(2 * np.pi / 256), rel=1e-13)


@given(st.floats(0.1, 10.0), st.integers(0, 63))
def test_area_centroid_scaling_and_rotation(t, k):
    v = regular_polygon(64) * np.array([1.3, 0.7]) + np.array([0.2, -0.1])
    s = ConvexShape(v)
    a, c = area_centroid(s)
    a2, c2 = area_centroid(s.scaled(t))
    assert a2 == pytest.approx(a * t * t, rel=1e-12)
    np.testing.assert_allclose(c2, c * t, atol=1e-12 * t)
    a3, c3 = area_centroid(s.rolled(k))
    assert a3 == pytest.approx(a, rel=1e-13)
    np.testing.assert_allclose(c3, c, atol=1e-13)


@given(st.floats(-np.pi, np.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_area_centroid_rigid_motion(angle, dx, dy):
    s = stadium(0.7, 1.0, 128)
    a, c = area_centroid(s)
    m = s.rotated(angle).translated((dx, dy))
    a2, c2 = area_centroid(m)
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    assert a2 == pytest.approx(a, rel=1e-12)
    np.testing.assert_allclose(c2, R @ c + [dx, dy], atol=1e-12)


def test_invariants_rejected():
    with pytest.raises(InvalidShapeError):
        ConvexShape([(0, 0), (1, 0), (0.5, 0.1), (1, 1), (0, 1)][::-1])  # clockwise
    with pytest.raises(InvalidShapeError):
        ConvexShape([(0, 0), (1, 0), (0.2, 0.2), (1, 1), (0, 1)])  # reflex vertex
    with pytest.raises(InvalidShapeError):
        ConvexShape([(0, 0), (1, 0), (1, 0), (1, 1)])  # duplicate vertex
    with pytest.raises(InvalidShapeError):
        area_centroid(np.array([(0, 0), (1, 0), (2, 0)]))


def test_turning_sums_to_two_pi():
    s = stadium_for_area(1.3)
    assert abs(np.sum(s.turning) - 2 * np.pi) < 1e-9


def test_convexify_interior_point():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.4, 0.6)]
    s = convexify(pts)
    assert s.n == 4
    assert area_centroid(s)[0] == pytest.approx(1.0)


def test_convexify_pushed_midpoint():
    pts = [(0, 0), (0.5, 0.1), (1, 0), (1, 1), (0, 1)]
    s = convexify(pts)
    assert s.n == 4
    assert area_centroid(s)[0] == pytest.approx(1.0, abs=1e-15)


def test_convexify_convex_64gon_preserved():
    v = regular_polygon(64)
    s = convexify(v)
    assert s.n == 64
    assert {tuple(np.round(p, 12)) for p in s.vertices} == {tuple(np.round(p, 12)) for p in v}


def test_convexify_collinear_rejected():
    with pytest.raises(InvalidShapeError):
        convexify([(0, 0), (1, 1), (2, 2), (3, 3)])
    with pytest.raises(InvalidShapeError):
        convexify([(0, 0), (0, 0), (1, 1)])


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=8, max_size=40))
def test_convexify_idempotent(points):
    pts = np.array(points)
    try:
        s = convexify(pts)
    except InvalidShapeError:
        return
    s2 = convexify(s.vertices)
    np.testing.assert_array_equal(s2.vertices, s.vertices)


def test_decompose_regular_polygon():
    d = decompose_boundary(ConvexShape(regular_polygon(128)))
    assert d.flat_runs == [] and d.junctions == []
    assert d.strictly_convex_arcs == [(0, 0)] or len(d.strictly_convex_arcs) == 1
    assert sum(len(d.arc_edges(i)) for i in range(len(d.strictly_convex_arcs))) == 128


def test_decompose_stadium():
    s = stadium(1.0, 1.0, 200)
    d = decompose_boundary(s)
    assert len(d.flat_runs) == 2
    assert len(d.junctions) == 4
    for J in d.junctions:
        assert J.arc_side in (-1, 1)


def test_decompose_square():
    d = decompose_boundary(square(64), eps_flat=1e-6)
    assert len(d.flat_runs) == 4
    assert d.strictly_convex_arcs == []


def test_partition_property():
    for s in (stadium(0.5, 1.0, 256), synthesize("hoelder_junction", alpha=0.5, n=512), disk(64)):
        d = decompose_boundary(s)
        labels = d.edge_labels()
        assert len(labels) == s.n
        flat = [i for run in d.flat_runs for i in run.edge_indices(s.n)]
        arc = [i for k in range(len(d.strictly_convex_arcs)) for i in d.arc_edges(k)]
        assert sorted(flat + arc) == list(range(s.n))
        # every junction separates one flat run from one arc
        for J in d.junctions:
            e_arc = J.vertex if J.arc_side > 0 else (J.vertex - 1) % s.n
            e_flat = (J.vertex - 1) % s.n if J.arc_side > 0 else J.vertex
            assert labels[e_arc] == ("arc", J.arc)
            assert labels[e_flat] == ("flat", J.flat_run)


@pytest.mark.parametrize("eps", [1e-5, 1e-4, 1e-3])
def test_flat_count_stable_over_two_decades(eps):
    assert len(decompose_boundary(stadium(1.0, 1.0, 400), eps_flat=eps).flat_runs) == 2


def test_synthesize_disk():
    s = synthesize("disk", n=256)
    assert abs(area_centroid(s)[0] - 1) < 1e-3
    assert np.ptp(s.turning) < 1e-12


def test_synthesize_stadium_equal_flats():
    s = stadium_for_area(1.0, 1.0, 512)
    d = decompose_boundary(s)
    assert len(d.flat_runs) == 2
    assert d.flat_runs[0].length == pytest.approx(d.flat_runs[1].length, rel=1e-9)
    assert area_centroid(s)[0] == pytest.approx(1.0, rel=1e-12)


def test_synthesize_errors():
    with pytest.raises(InvalidShapeError):
        synthesize("disk", n=8)
    with pytest.raises(InvalidShapeError):
        synthesize("triangle")


def test_shape_io_roundtrip(tmp_path):
    s = synthesize("hoelder_junction", alpha=0.5, n=256)
    assert shape_from_csv(shape_to_csv(s)) == s
    assert shape_from_json(shape_to_json(s)) == s
    assert shape_to_csv(s).splitlines()[0] == "x,y"
    assert "vertices" in json.loads(shape_to_json(s))
    for name in ("s.csv", "s.json"):
        p = save_shape(s, tmp_path / name)
        assert load_shape(p) == s
