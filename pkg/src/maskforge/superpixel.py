"""SLIC superpixel segmentation, implemented from scratch.

The three tunable parameters are the desired region count k, the
compactness weight m, and the iteration count. Clustering runs in CIELAB
(grayscale images use (L, 0, 0)) with the distance

    D^2 = d_color^2 + (d_spatial / S)^2 * m^2,   S = sqrt(N / k)

evaluated at pixel centers. Assignment is windowed to 2S x 2S around each
seed; ties go to the lowest seed index, which makes results reproducible
across runs and worker counts. A connectivity pass merges undersized
4-connected fragments into their largest neighbor and renumbers labels
compactly in row-major first-encounter order.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    InvalidParamsError,
    PointOutsideImageError,
    StaleSuperpixelMapError,
)
from .mask import MaskLayer

# sRGB -> XYZ (D65, 2 degree observer), IEC 61966-2-1
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0
_F_THRESHOLD = _DELTA ** 3
_F_SLOPE = 1.0 / (3.0 * _DELTA * _DELTA)


class LabColor(NamedTuple):
    L: float
    a: float
    b: float


@dataclass(frozen=True)
class SlicParams:
    """k: desired superpixel count; m: compactness; iterations >= 0."""

    k: int = 200
    m: float = 10.0
    iterations: int = 10

    def validate(self, pixel_count: int) -> None:
        if self.k < 1 or self.k > pixel_count:
            raise InvalidParamsError(
                f"k must be in [1, {pixel_count}], got {self.k}")
        if not math.isfinite(self.m) or self.m <= 0:
            raise InvalidParamsError(f"compactness must be finite and > 0, got {self.m}")
        if self.iterations < 0:
            raise InvalidParamsError(f"iterations must be >= 0, got {self.iterations}")


@dataclass
class SuperpixelMap:
    """Per-pixel region labels bound to the exact source pixels by digest."""

    labels: np.ndarray  # int32, shape (height, width), values in [0, region_count)
    region_count: int
    params: SlicParams
    image_digest: str

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def pixel_digest(pixels: np.ndarray) -> str:
    """Stable identifier for an exact pixel array (shape + dtype + bytes)."""
    arr = np.ascontiguousarray(pixels)
    head = f"{arr.shape}|{arr.dtype}".encode()
    return hashlib.sha256(head + arr.tobytes()).hexdigest()


def _linearize(channel: np.ndarray) -> np.ndarray:
    c = channel / 255.0
    return np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _F_THRESHOLD, np.cbrt(t), _F_SLOPE * t + 4.0 / 29.0)


def lab_image(pixels: np.ndarray) -> np.ndarray:
    """CIELAB image, float64 (h, w, 3). Grayscale maps to (L, 0, 0)."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        y = _linearize(pixels.astype(np.float64))
        L = 116.0 * _lab_f(y) - 16.0
        out = np.zeros(pixels.shape + (3,), dtype=np.float64)
        out[..., 0] = L
        return out
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (h, w) or (h, w, 3) pixels, got {pixels.shape}")
    rgb_lin = _linearize(pixels.astype(np.float64))
    xyz = rgb_lin @ _SRGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    out = np.empty_like(f)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def rgb_to_lab(rgb) -> LabColor:
    """Convert one sRGB triple (channels 0-255) to CIELAB (D65)."""
    r, g, b = rgb
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError(f"rgb channels must be in [0, 255], got {rgb}")
    arr = np.array([[[r, g, b]]], dtype=np.float64)
    L, a, b_ = lab_image(arr)[0, 0]
    return LabColor(float(L), float(a), float(b_))


def _seed_grid(width: int, height: int, step: float, k: int) -> np.ndarray:
    """Regular lattice at ((i+0.5)*step, (j+0.5)*step), at most k seeds
    (surplus dropped from the end in row-major order)."""
    xs = np.arange(0.5 * step, width, step, dtype=np.float64)
    ys = np.arange(0.5 * step, height, step, dtype=np.float64)
    if xs.size == 0:
        xs = np.array([width / 2.0])
    if ys.size == 0:
        ys = np.array([height / 2.0])
    gx, gy = np.meshgrid(xs, ys)
    seeds = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return seeds[:k]


def _perturb_seeds(lab: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Move each seed to the lowest-gradient pixel center in the 3x3
    neighborhood of the pixel containing it; keep the original continuous
    position when the containing pixel already wins (ties included)."""
    h, w = lab.shape[:2]
    padded = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = padded[1:-1, 2:] - padded[1:-1, :-2]
    dy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    grad = (dx * dx).sum(axis=2) + (dy * dy).sum(axis=2)
    out = seeds.copy()
    for idx, (sx, sy) in enumerate(seeds):
        px = min(max(int(math.floor(sx)), 0), w - 1)
        py = min(max(int(math.floor(sy)), 0), h - 1)
        best_val = grad[py, px]
        best = (px, py)
        for ny in range(max(0, py - 1), min(h, py + 2)):
            for nx in range(max(0, px - 1), min(w, px + 2)):
                if grad[ny, nx] < best_val:
                    best_val = grad[ny, nx]
                    best = (nx, ny)
        if best != (px, py):
            out[idx] = (best[0] + 0.5, best[1] + 0.5)
    return out


def _assign_rows(lab, seed_xy, seed_lab, step, ratio, j_lo, j_hi):
    """Assignment for rows [j_lo, j_hi): per pixel, the minimum-D seed among
    those whose 2S window covers it; strict < keeps the lowest index on ties."""
    h, w = lab.shape[:2]
    band = lab[j_lo:j_hi]
    cx_full = np.arange(w, dtype=np.float64) + 0.5
    cy_band = np.arange(j_lo, j_hi, dtype=np.float64) + 0.5
    best_d2 = np.full((j_hi - j_lo, w), np.inf)
    labels = np.full((j_hi - j_lo, w), -1, dtype=np.int32)
    for idx in range(seed_xy.shape[0]):
        sx, sy = seed_xy[idx]
        i0 = max(0, math.ceil(sx - step - 0.5))
        i1 = min(w - 1, math.floor(sx + step - 0.5))
        j0 = max(j_lo, math.ceil(sy - step - 0.5))
        j1 = min(j_hi - 1, math.floor(sy + step - 0.5))
        if i0 > i1 or j0 > j1:
            continue
        rows = slice(j0 - j_lo, j1 + 1 - j_lo)
        cols = slice(i0, i1 + 1)
        diff = band[rows, cols] - seed_lab[idx]
        dc2 = (diff * diff).sum(axis=2)
        ex = cx_full[cols] - sx
        ey = cy_band[rows] - sy
        ds2 = (ex * ex)[None, :] + (ey * ey)[:, None]
        d2 = dc2 + ds2 * ratio
        better = d2 < best_d2[rows, cols]
        best_d2[rows, cols] = np.where(better, d2, best_d2[rows, cols])
        sub = labels[rows, cols]
        sub[better] = idx
        labels[rows, cols] = sub
    return labels, best_d2


def _assign(lab, seed_xy, seed_lab, step, ratio, workers):
    h = lab.shape[0]
    if workers <= 1 or h < 2 * workers:
        return _assign_rows(lab, seed_xy, seed_lab, step, ratio, 0, h)
    bounds = np.linspace(0, h, workers + 1, dtype=int)
    jobs = [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)
            if bounds[i] < bounds[i + 1]]
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        parts = list(pool.map(
            lambda jr: _assign_rows(lab, seed_xy, seed_lab, step, ratio, *jr), jobs))
    labels = np.concatenate([p[0] for p in parts], axis=0)
    best_d2 = np.concatenate([p[1] for p in parts], axis=0)
    return labels, best_d2


def _fill_orphans(lab, labels, seed_xy, seed_lab, ratio):
    """Assign any pixel no window reached to its overall minimum-D seed."""
    orphan = labels < 0
    if not orphan.any():
        return labels
    jj, ii = np.nonzero(orphan)
    cx = ii + 0.5
    cy = jj + 0.5
    pix = lab[jj, ii]
    best_d2 = np.full(len(jj), np.inf)
    best = np.full(len(jj), -1, dtype=np.int32)
    for idx in range(seed_xy.shape[0]):
        diff = pix - seed_lab[idx]
        dc2 = (diff * diff).sum(axis=1)
        ex = cx - seed_xy[idx, 0]
        ey = cy - seed_xy[idx, 1]
        d2 = dc2 + (ex * ex + ey * ey) * ratio
        better = d2 < best_d2
        best_d2[better] = d2[better]
        best[better] = idx
    labels[jj, ii] = best
    return labels


def _run_slic(lab: np.ndarray, params: SlicParams, workers: int = 1):
    """Raw clustering loop. Returns (labels, seed displacement per round)."""
    h, w = lab.shape[:2]
    n_pixels = h * w
    step = math.sqrt(n_pixels / params.k)
    ratio = (params.m * params.m) / (step * step)
    seed_xy = _seed_grid(w, h, step, params.k)
    seed_xy = _perturb_seeds(lab, seed_xy)
    jj, ii = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    px_centers_x = ii.astype(np.float64) + 0.5
    px_centers_y = jj.astype(np.float64) + 0.5
    seed_lab = lab[
        np.clip(np.floor(seed_xy[:, 1]).astype(int), 0, h - 1),
        np.clip(np.floor(seed_xy[:, 0]).astype(int), 0, w - 1),
    ].copy()
    n_seeds = seed_xy.shape[0]
    displacements: list[float] = []

    labels, _ = _assign(lab, seed_xy, seed_lab, step, ratio, workers)
    labels = _fill_orphans(lab, labels, seed_xy, seed_lab, ratio)
    for _ in range(params.iterations):
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n_seeds).astype(np.float64)
        nonzero = counts > 0
        sum_x = np.bincount(flat, weights=px_centers_x.ravel(), minlength=n_seeds)
        sum_y = np.bincount(flat, weights=px_centers_y.ravel(), minlength=n_seeds)
        new_xy = seed_xy.copy()
        new_xy[nonzero, 0] = sum_x[nonzero] / counts[nonzero]
        new_xy[nonzero, 1] = sum_y[nonzero] / counts[nonzero]
        new_lab = seed_lab.copy()
        for c in range(3):
            s = np.bincount(flat, weights=lab[..., c].ravel(), minlength=n_seeds)
            new_lab[nonzero, c] = s[nonzero] / counts[nonzero]
        move = np.sqrt(((new_xy - seed_xy) ** 2).sum(axis=1))
        displacements.append(float(move.mean()))
        seed_xy, seed_lab = new_xy, new_lab
        labels, _ = _assign(lab, seed_xy, seed_lab, step, ratio, workers)
        labels = _fill_orphans(lab, labels, seed_xy, seed_lab, ratio)
    return labels, displacements


def compute_slic(image, params: SlicParams, min_size: int | None = None,
                 workers: int = 1) -> SuperpixelMap:
    """Segment an image (ImageRecord or uint8 array) into superpixels.

    min_size defaults to (N // k) // 4; fragments below it are merged by
    the connectivity pass. workers only parallelizes the assignment step
    and never changes the result.
    """
    pixels = np.asarray(getattr(image, "pixels", image))
    if pixels.ndim not in (2, 3):
        raise InvalidParamsError(f"unsupported pixel array shape {pixels.shape}")
    h, w = pixels.shape[:2]
    params.validate(h * w)
    lab = lab_image(pixels)
    labels, _ = _run_slic(lab, params, workers=workers)
    if min_size is None:
        min_size = max(1, (h * w // params.k) // 4)
    labels = enforce_connectivity(labels, min_size)
    return SuperpixelMap(
        labels=labels,
        region_count=int(labels.max()) + 1,
        params=params,
        image_digest=pixel_digest(pixels),
    )


def _row_runs(row: np.ndarray) -> list[tuple[int, int]]:
    if row.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(row)) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [row.size]))
    return list(zip(starts.tolist(), ends.tolist()))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def enforce_connectivity(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Merge 4-connected fragments smaller than min_size into their largest
    adjacent region, then renumber compactly in row-major first-encounter
    order. Accepts any integer labeling."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels grid must be non-empty")
    h, w = labels.shape

    # run-length pass: fragments = 4-connected same-label components
    rows_runs: list[list[tuple[int, int, int]]] = []  # (start, end, run_id)
    run_label: list[int] = []
    run_pos: list[tuple[int, int, int]] = []  # (row, start, end)
    for j in range(h):
        row = labels[j]
        runs = []
        for s, e in _row_runs(row):
            rid = len(run_label)
            run_label.append(int(row[s]))
            run_pos.append((j, s, e))
            runs.append((s, e, rid))
        rows_runs.append(runs)
    uf = _UnionFind(len(run_label))
    for j in range(1, h):
        above, below = rows_runs[j - 1], rows_runs[j]
        ai = bi = 0
        while ai < len(above) and bi < len(below):
            a_s, a_e, a_id = above[ai]
            b_s, b_e, b_id = below[bi]
            if a_s < b_e and b_s < a_e and run_label[a_id] == run_label[b_id]:
                uf.union(a_id, b_id)
            if a_e <= b_e:
                ai += 1
            else:
                bi += 1

    # fragments in first-encounter order
    frag_of_run: dict[int, int] = {}
    frag_size: list[int] = []
    frag_first: list[int] = []
    run_frag = [0] * len(run_label)
    for rid in range(len(run_label)):
        root = uf.find(rid)
        f = frag_of_run.get(root)
        if f is None:
            f = len(frag_size)
            frag_of_run[root] = f
            frag_size.append(0)
            j, s, _ = run_pos[rid]
            frag_first.append(j * w + s)
        j, s, e = run_pos[rid]
        frag_size[f] += e - s
        run_frag[rid] = f

    # fragment adjacency (4-neighborhood, differing labels)
    adjacency: set[tuple[int, int]] = set()

    def _adj(f1: int, f2: int) -> None:
        if f1 != f2:
            adjacency.add((f1, f2) if f1 < f2 else (f2, f1))

    for j in range(h):
        runs = rows_runs[j]
        for i in range(len(runs) - 1):
            _adj(run_frag[runs[i][2]], run_frag[runs[i + 1][2]])
        if j == 0:
            continue
        above, below = rows_runs[j - 1], rows_runs[j]
        ai = bi = 0
        while ai < len(above) and bi < len(below):
            a_s, a_e, a_id = above[ai]
            b_s, b_e, b_id = below[bi]
            if a_s < b_e and b_s < a_e:
                _adj(run_frag[a_id], run_frag[b_id])
            if a_e <= b_e:
                ai += 1
            else:
                bi += 1

    # absorb undersized groups into their largest neighbor
    n_frag = len(frag_size)
    guf = _UnionFind(n_frag)
    size = list(frag_size)
    first = list(frag_first)
    while True:
        roots = {guf.find(f) for f in range(n_frag)}
        small = [r for r in roots if size[r] < min_size]
        if not small:
            break
        small.sort(key=lambda r: (size[r], first[r]))
        merged_any = False
        for r in small:
            if guf.find(r) != r or size[r] >= min_size:
                continue
            neighbors: set[int] = set()
            for f1, f2 in adjacency:
                r1, r2 = guf.find(f1), guf.find(f2)
                if r1 == r and r2 != r:
                    neighbors.add(r2)
                elif r2 == r and r1 != r:
                    neighbors.add(r1)
            if not neighbors:
                continue
            target = min(neighbors, key=lambda t: (-size[t], first[t]))
            guf.parent[r] = target
            size[target] += size[r]
            first[target] = min(first[target], first[r])
            merged_any = True
        if not merged_any:
            break

    # compact renumbering by the merged groups' first pixels
    groups = sorted({guf.find(f) for f in range(n_frag)}, key=lambda r: first[r])
    compact = {r: i for i, r in enumerate(groups)}
    out = np.empty((h, w), dtype=np.int32)
    for rid, (j, s, e) in enumerate(run_pos):
        out[j, s:e] = compact[guf.find(run_frag[rid])]
    return out


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels on a region boundary (label differs from right or down neighbor)."""
    b = np.zeros(labels.shape, dtype=bool)
    b[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    b[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return b


def mark_superpixel(layer: MaskLayer, spmap: SuperpixelMap,
                    p: tuple[float, float],
                    expected_digest: str | None = None) -> MaskLayer:
    """OR the clicked superpixel's whole region into the layer."""
    if expected_digest is not None and expected_digest != spmap.image_digest:
        raise StaleSuperpixelMapError("superpixel map was computed for different pixels")
    if (layer.height, layer.width) != (spmap.height, spmap.width):
        raise StaleSuperpixelMapError(
            f"superpixel map is {spmap.width}x{spmap.height}, "
            f"layer is {layer.width}x{layer.height}")
    x, y = p
    if not (0 <= x < spmap.width and 0 <= y < spmap.height):
        raise PointOutsideImageError(f"click ({x}, {y}) outside image")
    label = spmap.labels[int(math.floor(y)), int(math.floor(x))]
    layer.bits |= spmap.labels == label
    return layer
