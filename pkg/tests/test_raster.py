from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from maskforge import (
    MaskLayer,
    RoiRect,
    Stroke,
    connected_components,
    delete_mark,
    erase_stroke,
    fill_box,
    fill_curve,
    fill_ellipse,
    fill_polygon,
    paint_stroke,
)
from maskforge.errors import MalformedGeometryError, TooFewVerticesError


def layer(w: int, h: int) -> MaskLayer:
    return MaskLayer.zeros("test", w, h)


# --- fill_box ---------------------------------------------------------------

def test_box_area():
    out = fill_box(layer(5, 5), RoiRect(1, 1, 3, 3))
    assert out.count() == 9
    assert out.bits[1:4, 1:4].all()


def test_box_full_layer():
    assert fill_box(layer(5, 5), RoiRect(0, 0, 5, 5)).count() == 25


def test_box_clipped():
    assert fill_box(layer(5, 5), RoiRect(3, 3, 5, 5)).count() == 4


def test_box_or_semantics():
    out = layer(5, 5)
    fill_box(out, RoiRect(0, 0, 2, 2))
    fill_box(out, RoiRect(1, 1, 2, 2))
    assert out.count() == 7


# --- fill_ellipse -----------------------------------------------------------

def test_ellipse_unit_cross():
    out = fill_ellipse(layer(5, 5), (2.5, 2.5), 1, 1)
    assert out.count() == 5
    for i, j in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)]:
        assert out.bits[j, i]


def test_ellipse_degenerate_axis():
    out = fill_ellipse(layer(5, 5), (2.5, 2.5), 0, 0)
    assert out.count() == 1
    assert out.bits[2, 2]


def test_ellipse_degenerate_one_axis():
    out = fill_ellipse(layer(5, 5), (2.5, 2.5), 0, 3)
    assert out.count() == 1 and out.bits[2, 2]


def test_ellipse_area_and_oracle():
    # frozen from the center-inclusion oracle: 632 bits, within 2% of pi*a*b
    out = fill_ellipse(layer(64, 64), (32.0, 32.0), 20.0, 10.0)
    assert out.count() == 632
    expected = oracles.ellipse_oracle(64, 64, (32.0, 32.0), 20.0, 10.0)
    assert np.array_equal(out.bits, expected)
    assert abs(out.count() - np.pi * 200) / (np.pi * 200) < 0.02


def test_ellipse_outside_layer_clips():
    out = fill_ellipse(layer(5, 5), (-10.0, -10.0), 2, 2)
    assert out.count() == 0


# --- fill_polygon / fill_curve ----------------------------------------------

def test_polygon_square():
    # frozen from the point-in-polygon oracle: centers i,j in {1,2,3}
    out = fill_polygon(layer(6, 6), [(1, 1), (4, 1), (4, 4), (1, 4)])
    assert out.count() == 9
    assert out.bits[1:4, 1:4].all()


def test_polygon_too_few_vertices():
    with pytest.raises(TooFewVerticesError):
        fill_polygon(layer(6, 6), [(0, 0), (4, 4)])


def test_polygon_bowtie_matches_oracle():
    verts = [(0, 0), (4, 4), (4, 0), (0, 4)]
    out = fill_polygon(layer(6, 6), verts)
    assert np.array_equal(out.bits, oracles.polygon_oracle(6, 6, verts))


def test_polygon_nonfinite_rejected():
    with pytest.raises(MalformedGeometryError):
        fill_polygon(layer(6, 6), [(0, 0), (float("nan"), 1), (2, 2)])


def test_curve_equals_polygon():
    verts = [(1, 1), (4, 1), (4, 4), (1, 4)]
    a = fill_curve(layer(6, 6), verts)
    b = fill_polygon(layer(6, 6), verts)
    assert np.array_equal(a.bits, b.bits)
    assert a.count() == 9


def test_curve_circle_sampled():
    # frozen from the oracle over the 200-gon: 316 bits, within 3% of pi*r^2
    ts = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    pts = [(16 + 10 * np.cos(t), 16 + 10 * np.sin(t)) for t in ts]
    out = fill_curve(layer(32, 32), pts)
    assert out.count() == 316
    assert abs(out.count() - np.pi * 100) / (np.pi * 100) < 0.03
    assert np.array_equal(out.bits, oracles.polygon_oracle(32, 32, pts))


def test_curve_collinear_is_empty():
    pts = [(1.0, 1.0), (5.0, 5.0), (9.0, 9.0)]
    out = fill_curve(layer(12, 12), pts)
    assert np.array_equal(out.bits, oracles.polygon_oracle(12, 12, pts))
    assert out.count() == 0


def test_curve_too_few_samples():
    with pytest.raises(TooFewVerticesError):
        fill_curve(layer(6, 6), [(0, 0), (3, 3)])


# --- paint / erase ----------------------------------------------------------

def test_paint_single_point_radius0():
    out = paint_stroke(layer(5, 5), Stroke([(2.5, 2.5)], 0))
    assert out.count() == 1
    assert out.bits[2, 2]


def test_paint_disk_radius2():
    out = paint_stroke(layer(17, 17), Stroke([(8.5, 8.5)], 2))
    assert out.count() == 13


def test_paint_thin_polyline():
    # frozen from the capsule oracle: (2,2)..(10,2)
    out = paint_stroke(layer(16, 16), Stroke([(2.5, 2.5), (10.5, 2.5)], 0))
    assert out.count() == 9
    assert out.bits[2, 2:11].all()


def test_erase_on_empty_is_noop():
    out = erase_stroke(layer(8, 8), Stroke([(4, 4)], 3))
    assert out.count() == 0


def test_erase_exact_inverse():
    s = Stroke([(2.0, 3.0), (9.5, 4.5), (5.0, 9.0)], 2.5)
    out = paint_stroke(layer(12, 12), s)
    assert out.count() > 0
    erase_stroke(out, s)
    assert out.count() == 0


def test_erase_from_full_layer():
    out = layer(17, 17)
    out.bits[:] = True
    erase_stroke(out, Stroke([(8.5, 8.5)], 2))
    assert out.count() == 17 * 17 - 13


def test_stroke_validation():
    with pytest.raises(MalformedGeometryError):
        Stroke([], 1.0)
    with pytest.raises(MalformedGeometryError):
        Stroke([(0, 0)], -1.0)
    with pytest.raises(MalformedGeometryError):
        Stroke([(0, float("inf"))], 1.0)


# --- connected components / delete_mark --------------------------------------

def test_components_empty():
    _, count = connected_components(layer(4, 4))
    assert count == 0


def test_components_diagonal_touch():
    out = layer(4, 4)
    out.bits[1, 1] = True
    out.bits[2, 2] = True
    _, count = connected_components(out)
    assert count == 1


def test_components_two_separate():
    out = layer(4, 4)
    out.bits[0, 0] = True
    out.bits[3, 0] = True
    labels, count = connected_components(out)
    assert count == 2
    assert labels[0, 0] == 1 and labels[3, 0] == 2


def test_components_first_encounter_order():
    out = layer(6, 3)
    out.bits[0, 4] = True   # first in row-major scan
    out.bits[1, 0] = True
    out.bits[2, 2] = True
    labels, count = connected_components(out)
    assert count == 3
    assert labels[0, 4] == 1 and labels[1, 0] == 2 and labels[2, 2] == 3


def test_delete_mark_removes_whole_component():
    out = layer(10, 10)
    fill_box(out, RoiRect(0, 0, 6, 2))    # component A spans outside the rect
    fill_box(out, RoiRect(7, 7, 2, 2))    # component B disjoint
    before_b = out.bits[7:9, 7:9].copy()
    delete_mark(out, RoiRect(0, 0, 2, 2))
    assert out.bits[0:2, 0:6].sum() == 0
    assert np.array_equal(out.bits[7:9, 7:9], before_b)
    assert out.count() == 4


def test_delete_mark_no_hit():
    out = layer(10, 10)
    fill_box(out, RoiRect(0, 0, 2, 2))
    delete_mark(out, RoiRect(5, 5, 3, 3))
    assert out.count() == 4


def test_delete_mark_outside_layer():
    out = layer(5, 5)
    fill_box(out, RoiRect(0, 0, 2, 2))
    delete_mark(out, RoiRect(10, 10, 3, 3))
    assert out.count() == 4


# --- properties ---------------------------------------------------------------

coord = st.floats(min_value=-8.0, max_value=40.0, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord)


@settings(max_examples=60, deadline=None)
@given(vertices=st.lists(point, min_size=3, max_size=10))
def test_polygon_matches_oracle_property(vertices):
    out = fill_polygon(layer(32, 32), vertices)
    assert np.array_equal(out.bits, oracles.polygon_oracle(32, 32, vertices))


@settings(max_examples=60, deadline=None)
@given(points=st.lists(point, min_size=1, max_size=6),
       radius=st.floats(min_value=0.0, max_value=6.0))
def test_paint_matches_oracle_property(points, radius):
    out = paint_stroke(layer(32, 32), Stroke(points, radius))
    assert np.array_equal(out.bits, oracles.stroke_oracle(32, 32, points, radius))


@settings(max_examples=40, deadline=None)
@given(points=st.lists(point, min_size=1, max_size=6),
       radius=st.floats(min_value=0.0, max_value=6.0))
def test_paint_erase_inverse_property(points, radius):
    s = Stroke(points, radius)
    out = paint_stroke(layer(32, 32), s)
    erase_stroke(out, s)
    assert out.count() == 0


@settings(max_examples=40, deadline=None)
@given(vertices=st.lists(point, min_size=3, max_size=8))
def test_fill_idempotent_property(vertices):
    once = fill_polygon(layer(32, 32), vertices)
    twice = fill_polygon(MaskLayer("test", once.bits.copy()), vertices)
    assert np.array_equal(once.bits, twice.bits)


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_delete_mark_component_property(data):
    rng_bits = data.draw(st.lists(
        st.tuples(st.integers(0, 15), st.integers(0, 15)),
        min_size=0, max_size=40))
    out = layer(16, 16)
    for i, j in rng_bits:
        out.bits[j, i] = True
    rect = RoiRect(data.draw(st.integers(0, 12)), data.draw(st.integers(0, 12)),
                   data.draw(st.integers(1, 6)), data.draw(st.integers(1, 6)))
    labels_before, _ = oracles.bfs_components(out.bits.copy())
    delete_mark(out, rect)
    labels_after, _ = oracles.bfs_components(out.bits)
    clip = rect.clipped(16, 16)
    if clip is not None:
        rows, cols = clip.slices()
        assert labels_after[rows, cols].sum() == 0
        hit = np.unique(labels_before[rows, cols])
        hit = hit[hit > 0]
        survivors = ~np.isin(labels_before, hit) & (labels_before > 0)
        assert np.array_equal(out.bits, survivors)
