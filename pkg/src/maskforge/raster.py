"""Rasterization of the marking and modification tools onto a mask layer.

All tools sample pixel centers (i + 0.5, j + 0.5) and clip geometry to the
layer instead of rejecting it; fills OR bits in, erasers clear exactly the
set a fill would produce. Every operation is deterministic and idempotent.

Fill rule for polygons and freehand curves: even-odd, with the half-open
scanline convention (an edge spans scanline y when ymin <= y < ymax), so
shared vertices and self-intersections count unambiguously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import MalformedGeometryError, TooFewVerticesError
from .mask import MaskLayer, RoiRect

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass
class Stroke:
    """A brush trajectory: ordered points plus a radius in pixels.

    radius 0 means a thin line: pixels whose centers lie within 0.5 of the
    polyline (an empty brush would be useless interactively).
    """

    points: list[tuple[float, float]] = field(default_factory=list)
    radius: float = 0.0

    def __post_init__(self):
        if not self.points:
            raise MalformedGeometryError("stroke needs at least one point")
        if not math.isfinite(self.radius) or self.radius < 0:
            raise MalformedGeometryError(f"invalid brush radius {self.radius}")
        _check_finite(self.points)


def _check_finite(points) -> None:
    for x, y in points:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MalformedGeometryError(f"non-finite coordinate ({x}, {y})")


def fill_box(layer: MaskLayer, rect: RoiRect) -> MaskLayer:
    """Set every pixel of [x0, x0+w) x [y0, y0+h), clipped to the layer."""
    clipped = rect.clipped(layer.width, layer.height)
    if clipped is not None:
        rows, cols = clipped.slices()
        layer.bits[rows, cols] = True
    return layer


def fill_ellipse(layer: MaskLayer, center: tuple[float, float],
                 a: float, b: float) -> MaskLayer:
    """Set pixels whose centers satisfy ((cx-x)/a)^2 + ((cy-y)/b)^2 <= 1.

    A degenerate axis (a == 0 or b == 0) sets only the pixel containing
    the center point.
    """
    _check_finite([center])
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise MalformedGeometryError(f"invalid semi-axes ({a}, {b})")
    x, y = float(center[0]), float(center[1])
    h, w = layer.bits.shape
    if a == 0.0 or b == 0.0:
        i, j = int(math.floor(x)), int(math.floor(y))
        if 0 <= i < w and 0 <= j < h:
            layer.bits[j, i] = True
        return layer
    i0 = max(0, int(math.floor(x - a)) - 1)
    i1 = min(w - 1, int(math.ceil(x + a)) + 1)
    j0 = max(0, int(math.floor(y - b)) - 1)
    j1 = min(h - 1, int(math.ceil(y + b)) + 1)
    if i0 > i1 or j0 > j1:
        return layer
    cx = np.arange(i0, i1 + 1, dtype=np.float64) + 0.5
    cy = np.arange(j0, j1 + 1, dtype=np.float64) + 0.5
    u = (cx - x) / a
    v = (cy - y) / b
    inside = (u * u)[None, :] + (v * v)[:, None] <= 1.0
    layer.bits[j0:j1 + 1, i0:i1 + 1] |= inside
    return layer


def _edges(vertices) -> list[tuple[float, float, float, float]]:
    n = len(vertices)
    out = []
    for k in range(n):
        x1, y1 = vertices[k]
        x2, y2 = vertices[(k + 1) % n]
        out.append((float(x1), float(y1), float(x2), float(y2)))
    return out


def fill_polygon(layer: MaskLayer, vertices) -> MaskLayer:
    """Even-odd fill of the closed polygon through ``vertices``.

    A pixel is set iff its center sees an odd number of edge crossings on
    the ray towards +x, edges counted under the half-open convention.
    """
    if len(vertices) < 3:
        raise TooFewVerticesError(f"polygon needs >= 3 vertices, got {len(vertices)}")
    _check_finite(vertices)
    h, w = layer.bits.shape
    edges = _edges(vertices)
    ys = [e[1] for e in edges] + [e[3] for e in edges]
    j0 = max(0, int(math.floor(min(ys) - 0.5)))
    j1 = min(h - 1, int(math.ceil(max(ys))))
    if j0 > j1:
        return layer
    centers_x = np.arange(w, dtype=np.float64) + 0.5
    for j in range(j0, j1 + 1):
        cy = j + 0.5
        xs = []
        for x1, y1, x2, y2 in edges:
            ymin, ymax = (y1, y2) if y1 <= y2 else (y2, y1)
            if ymin <= cy < ymax:
                xs.append(x1 + (cy - y1) * (x2 - x1) / (y2 - y1))
        if not xs:
            continue
        xs = np.sort(np.asarray(xs, dtype=np.float64))
        # parity of crossings strictly right of each center
        greater = len(xs) - np.searchsorted(xs, centers_x, side="right")
        layer.bits[j, :] |= (greater & 1).astype(bool)
    return layer


def fill_curve(layer: MaskLayer, samples) -> MaskLayer:
    """Close the freehand curve (last sample back to first) and fill it.

    Identical code path to fill_polygon: the sampled curve IS the polygon.
    """
    if len(samples) < 3:
        raise TooFewVerticesError(f"curve needs >= 3 samples, got {len(samples)}")
    return fill_polygon(layer, samples)


def _stroke_region(shape: tuple[int, int], stroke: Stroke) -> np.ndarray:
    """Bool array marking pixels whose centers lie within the stroke capsule."""
    h, w = shape
    region = np.zeros(shape, dtype=bool)
    r = stroke.radius if stroke.radius > 0.0 else 0.5
    r2 = r * r
    pts = [(float(x), float(y)) for x, y in stroke.points]
    segments = list(zip(pts, pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
    for (x1, y1), (x2, y2) in segments:
        i0 = max(0, int(math.floor(min(x1, x2) - r)) - 1)
        i1 = min(w - 1, int(math.ceil(max(x1, x2) + r)) + 1)
        j0 = max(0, int(math.floor(min(y1, y2) - r)) - 1)
        j1 = min(h - 1, int(math.ceil(max(y1, y2) + r)) + 1)
        if i0 > i1 or j0 > j1:
            continue
        cx = np.arange(i0, i1 + 1, dtype=np.float64) + 0.5
        cy = np.arange(j0, j1 + 1, dtype=np.float64) + 0.5
        gx, gy = np.meshgrid(cx, cy)
        vx, vy = x2 - x1, y2 - y1
        denom = vx * vx + vy * vy
        if denom == 0.0:
            qx, qy = x1, y1
        else:
            t = np.clip(((gx - x1) * vx + (gy - y1) * vy) / denom, 0.0, 1.0)
            qx = x1 + t * vx
            qy = y1 + t * vy
        dx = gx - qx
        dy = gy - qy
        d2 = dx * dx + dy * dy
        region[j0:j1 + 1, i0:i1 + 1] |= d2 <= r2
    return region


def paint_stroke(layer: MaskLayer, stroke: Stroke) -> MaskLayer:
    """OR in every pixel whose center is within the brush radius of the
    polyline through the stroke points (a single point paints a disk)."""
    layer.bits |= _stroke_region(layer.bits.shape, stroke)
    return layer


def erase_stroke(layer: MaskLayer, stroke: Stroke) -> MaskLayer:
    """Clear exactly the pixel set paint_stroke would set."""
    layer.bits &= ~_stroke_region(layer.bits.shape, stroke)
    return layer


def connected_components(layer: MaskLayer) -> tuple[np.ndarray, int]:
    """8-connected labeling of set bits.

    Returns (labels, count): unset bits get 0, components get 1..count in
    the order their first pixel appears in a row-major scan.
    """
    raw, count = ndimage.label(layer.bits, structure=_EIGHT_CONNECTED)
    if count == 0:
        return raw.astype(np.int32), 0
    flat = raw.ravel()
    nonzero = flat[flat > 0]
    _, first = np.unique(nonzero, return_index=True)
    # np.unique sorts by label value; reorder 1..count by first occurrence
    order = np.argsort(first, kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[1 + order] = np.arange(1, count + 1, dtype=np.int32)
    return remap[raw], count


def delete_mark(layer: MaskLayer, rect: RoiRect) -> MaskLayer:
    """Clear every 8-connected component that intersects ``rect``, whole,
    including the parts outside the rectangle."""
    clipped = rect.clipped(layer.width, layer.height)
    if clipped is None:
        return layer
    labels, count = connected_components(layer)
    if count == 0:
        return layer
    rows, cols = clipped.slices()
    hit = np.unique(labels[rows, cols])
    hit = hit[hit > 0]
    if hit.size:
        layer.bits[np.isin(labels, hit)] = False
    return layer
