"""Annotation session state: image list, class registry, per-image mask
layers, ROI frame handling, navigation with autosave, and overlay preview
rendering.

A session is a single-writer state machine; callers (the HTTP service)
serialize mutations. Mask layers always keep full-image dimensions; while
an ROI is active, edits are confined to it by rasterizing onto a view of
the layer bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import raster
from .errors import (
    DimensionMismatchError,
    MalformedGeometryError,
    NoImagesFoundError,
    PointOutsideFrameError,
    UnknownClassError,
    UnreadableDirectoryError,
)
from .mask import ClassRegistry, MaskLayer, MaskSet, RoiRect
from .persistence import (
    SUPPORTED_EXTENSIONS,
    Checkpoint,
    ImageRecord,
    load_image,
    load_masks,
    read_checkpoint,
    resume,
    save_masks,
    write_checkpoint,
)
from .superpixel import SuperpixelMap, mark_superpixel

MUTATING_OPS = (
    "box", "ellipse", "polygon", "curve", "paint", "erase",
    "delete_mark", "superpixel_click",
)


def to_global(roi: RoiRect | None, p, image_size: tuple[int, int] | None = None):
    """Translate a frame-local point to full-image coordinates.

    With an ROI the point must lie inside its extent; without one it must
    lie inside the image when ``image_size`` is given.
    """
    x, y = float(p[0]), float(p[1])
    if roi is not None:
        if not (0 <= x < roi.w and 0 <= y < roi.h):
            raise PointOutsideFrameError(
                f"point ({x}, {y}) outside ROI extent {roi.w}x{roi.h}")
        return (x + roi.x0, y + roi.y0)
    if image_size is not None:
        w, h = image_size
        if not (0 <= x < w and 0 <= y < h):
            raise PointOutsideFrameError(f"point ({x}, {y}) outside image {w}x{h}")
    return (x, y)


def render_overlay(image: ImageRecord, masks: MaskSet,
                   registry: ClassRegistry) -> np.ndarray:
    """Composite class layers over the image in registry order.

    Per set pixel and channel: out = (1-alpha)*under + alpha*color, rounded
    half away from zero. Returns an RGB uint8 array.
    """
    if image.channels == 1:
        out = np.stack([image.pixels] * 3, axis=-1).astype(np.uint8)
    else:
        out = image.pixels.copy()
    for name, style in registry.entries:
        layer = masks.layers.get(name)
        if layer is None:
            continue
        if (layer.height, layer.width) != (image.height, image.width):
            raise DimensionMismatchError(
                f"layer {name!r} is {layer.width}x{layer.height}, "
                f"image is {image.width}x{image.height}")
        bits = layer.bits
        if not bits.any():
            continue
        alpha = style.opacity
        color = np.asarray(style.color, dtype=np.float64)
        under = out[bits].astype(np.float64)
        blended = (1.0 - alpha) * under + alpha * color
        out[bits] = np.floor(blended + 0.5).astype(np.uint8)
    return out


@dataclass
class OpOutcome:
    changed_bits: int
    bounding_box_of_change: RoiRect | None
    mask_version: int


def _num(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedGeometryError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(float(value)):
        raise MalformedGeometryError(f"{what} must be finite, got {value!r}")
    return float(value)


def _parse_rect(geometry: dict) -> RoiRect:
    try:
        vals = [geometry[k] for k in ("x0", "y0", "w", "h")]
    except (KeyError, TypeError):
        raise MalformedGeometryError("rect geometry needs x0, y0, w, h")
    x0, y0, w, h = (int(round(_num(v, k))) for v, k in zip(vals, "x0 y0 w h".split()))
    return RoiRect(x0, y0, w, h)


def _parse_points(geometry: dict) -> list[tuple[float, float]]:
    pts = geometry.get("points")
    if not isinstance(pts, (list, tuple)) or not pts:
        raise MalformedGeometryError("geometry needs a non-empty points list")
    out = []
    for p in pts:
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise MalformedGeometryError(f"bad point {p!r}")
        out.append((_num(p[0], "x"), _num(p[1], "y")))
    return out


class Session:
    """One annotation session over an ordered image list."""

    def __init__(self, images: list[Path], registry: ClassRegistry,
                 work_dir: Path, masks_dir: Path | None = None):
        if not images:
            raise NoImagesFoundError("session needs at least one image")
        self.images = images
        self.registry = registry
        self.work_dir = Path(work_dir)
        self.masks_dir = Path(masks_dir) if masks_dir is not None else None
        self.current = 0
        self.roi: RoiRect | None = None
        self.masks: dict[int, MaskSet] = {}
        self.dirty: set[int] = set()
        self.completed: list[str] = []
        self.versions: dict[tuple[int, str], int] = {}
        self._records: dict[int, ImageRecord] = {}

    # --- opening -------------------------------------------------------

    @classmethod
    def open(cls, image_sources, class_names: list[str],
             masks_dir=None) -> "Session":
        """Open a session over a directory or an explicit list of files.

        Images are ordered lexicographically by filename; the start index
        comes from the checkpoint (first image not yet completed), and any
        pre-existing mask files for it are loaded.
        """
        images, work_dir = cls._resolve_sources(image_sources)
        if not class_names:
            raise ValueError("class_names must be non-empty")
        registry = ClassRegistry.from_names(list(class_names))
        session = cls(images, registry, work_dir, masks_dir)
        cp = read_checkpoint(session._checkpoint_dir())
        if cp is not None:
            session.completed = list(cp.completed)
        session.current = resume([p.name for p in images], cp)
        session._arrive()
        return session

    @staticmethod
    def _resolve_sources(image_sources) -> tuple[list[Path], Path]:
        if isinstance(image_sources, (str, Path)):
            directory = Path(image_sources)
            try:
                entries = list(directory.iterdir())
            except NotADirectoryError as e:
                raise UnreadableDirectoryError(f"{directory}: not a directory") from e
            except FileNotFoundError as e:
                raise UnreadableDirectoryError(f"{directory}: does not exist") from e
            except PermissionError as e:
                raise UnreadableDirectoryError(f"{directory}: permission denied") from e
            images = [p for p in entries
                      if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS]
            work_dir = directory
        else:
            images = [Path(p) for p in image_sources]
            missing = [p for p in images if not p.is_file()]
            if missing:
                raise NoImagesFoundError(f"missing image files: {missing}")
            work_dir = images[0].parent if images else Path(".")
        images.sort(key=lambda p: p.name)
        if not images:
            raise NoImagesFoundError("no supported images found")
        return images, work_dir

    # --- accessors -----------------------------------------------------

    @property
    def current_image_path(self) -> Path:
        return self.images[self.current]

    def image_record(self, index: int | None = None) -> ImageRecord:
        index = self.current if index is None else index
        record = self._records.get(index)
        if record is None:
            record = load_image(self.images[index])
            self._records[index] = record
        return record

    def mask_set(self, index: int | None = None) -> MaskSet:
        index = self.current if index is None else index
        ms = self.masks.get(index)
        if ms is None:
            ms = MaskSet()
            self.masks[index] = ms
        return ms

    def _mask_dir(self, index: int) -> Path:
        return self.masks_dir if self.masks_dir is not None else self.images[index].parent

    def _checkpoint_dir(self) -> Path:
        return self.masks_dir if self.masks_dir is not None else self.work_dir

    def layer(self, class_name: str) -> MaskLayer:
        if class_name not in self.registry:
            raise UnknownClassError(f"unknown class {class_name!r}")
        record = self.image_record()
        return self.mask_set().get_or_create(class_name, record.width, record.height)

    # --- classes -------------------------------------------------------

    def add_class(self, name: str) -> None:
        self.registry.add(name)

    def set_active_class(self, name: str) -> None:
        self.registry.set_active(name)
        self.layer(name)  # lazily materialize the zero layer

    # --- ROI -----------------------------------------------------------

    def set_roi(self, rect: RoiRect) -> None:
        record = self.image_record()
        rect.validate_within(record.width, record.height)
        self.roi = rect

    def clear_roi(self) -> None:
        self.roi = None

    def to_global(self, p):
        record = self.image_record()
        return to_global(self.roi, p, (record.width, record.height))

    def frame_size(self) -> tuple[int, int]:
        if self.roi is not None:
            return (self.roi.w, self.roi.h)
        record = self.image_record()
        return (record.width, record.height)

    # --- marking -------------------------------------------------------

    def apply(self, op: str, class_name: str, geometry: dict,
              frame: str = "global",
              spmap: SuperpixelMap | None = None,
              expected_digest: str | None = None) -> OpOutcome:
        """Apply one marking/modification op to a class layer.

        Geometry is a plain dict as carried by the HTTP transport; frame
        "roi" takes ROI-local coordinates. While an ROI is active all edits
        are confined to it regardless of frame.
        """
        if op not in MUTATING_OPS:
            raise MalformedGeometryError(f"unknown op {op!r}")
        if frame not in ("roi", "global"):
            raise MalformedGeometryError(f"unknown frame {frame!r}")
        if frame == "roi" and self.roi is None:
            raise MalformedGeometryError("frame=roi but no ROI is set")
        layer = self.layer(class_name)
        roi = self.roi
        if roi is not None:
            rows, cols = roi.slices()
            target = MaskLayer(class_name, layer.bits[rows, cols])
            offset = (roi.x0, roi.y0) if frame == "global" else (0, 0)
        else:
            target = layer
            offset = (0, 0)
        before = target.bits.copy()
        self._dispatch(op, target, geometry, offset, spmap, expected_digest)
        diff = target.bits ^ before
        changed = int(diff.sum())
        bbox = None
        if changed:
            ys, xs = np.nonzero(diff)
            gx0 = int(xs.min()) + (roi.x0 if roi is not None else 0)
            gy0 = int(ys.min()) + (roi.y0 if roi is not None else 0)
            bbox = RoiRect(gx0, gy0,
                           int(xs.max() - xs.min()) + 1,
                           int(ys.max() - ys.min()) + 1)
        key = (self.current, class_name)
        self.versions[key] = self.versions.get(key, 0) + 1
        self.dirty.add(self.current)
        return OpOutcome(changed, bbox, self.versions[key])

    def _dispatch(self, op, target, geometry, offset, spmap, expected_digest):
        ox, oy = offset
        if not isinstance(geometry, dict):
            raise MalformedGeometryError("geometry must be an object")
        if op == "box" or op == "delete_mark":
            rect = _parse_rect(geometry)
            rect = RoiRect(rect.x0 - ox, rect.y0 - oy, rect.w, rect.h)
            if op == "box":
                raster.fill_box(target, rect)
            else:
                raster.delete_mark(target, rect)
        elif op == "ellipse":
            cx = _num(geometry.get("cx"), "cx")
            cy = _num(geometry.get("cy"), "cy")
            a = _num(geometry.get("a"), "a")
            b = _num(geometry.get("b"), "b")
            if a < 0 or b < 0:
                raise MalformedGeometryError("semi-axes must be >= 0")
            raster.fill_ellipse(target, (cx - ox, cy - oy), a, b)
        elif op in ("polygon", "curve"):
            pts = [(x - ox, y - oy) for x, y in _parse_points(geometry)]
            if op == "polygon":
                raster.fill_polygon(target, pts)
            else:
                raster.fill_curve(target, pts)
        elif op in ("paint", "erase"):
            pts = [(x - ox, y - oy) for x, y in _parse_points(geometry)]
            radius = _num(geometry.get("radius", 0.0), "radius")
            if radius < 0:
                raise MalformedGeometryError("radius must be >= 0")
            stroke = raster.Stroke(pts, radius)
            if op == "paint":
                raster.paint_stroke(target, stroke)
            else:
                raster.erase_stroke(target, stroke)
        elif op == "superpixel_click":
            from .errors import StaleSuperpixelMapError
            if spmap is None:
                raise StaleSuperpixelMapError("no superpixel map computed")
            x = _num(geometry.get("x"), "x")
            y = _num(geometry.get("y"), "y")
            mark_superpixel(target, spmap, (x - ox, y - oy),
                            expected_digest=expected_digest)

    # --- navigation & persistence ---------------------------------------

    def _depart_current(self) -> None:
        """Autosave the outgoing image; a dirty image becomes completed."""
        if self.current in self.dirty:
            index = self.current
            record = self.image_record(index)
            save_masks(record.stem, self.mask_set(index), self._mask_dir(index))
            name = self.images[index].name
            if name not in self.completed:
                self.completed.append(name)
            write_checkpoint(self._checkpoint_dir(), Checkpoint(list(self.completed)))
            self.dirty.discard(index)

    def _arrive(self) -> None:
        record = self.image_record()
        if self.current not in self.masks:
            self.masks[self.current] = load_masks(
                record.stem, (record.width, record.height),
                self._mask_dir(self.current))

    def navigate(self, delta: int) -> int:
        """Move to the previous/next image, clamped at the ends.

        Leaving a dirty image writes its mask files and the checkpoint
        first; arriving loads any existing mask files of the new image.
        """
        if delta not in (-1, 1):
            raise MalformedGeometryError(f"delta must be -1 or +1, got {delta}")
        new = min(max(self.current + delta, 0), len(self.images) - 1)
        if new == self.current:
            return self.current
        self._depart_current()
        self.current = new
        self.roi = None
        self._arrive()
        return self.current

    def export(self) -> list[Path]:
        """Write the current image's masks now and mark it completed."""
        index = self.current
        record = self.image_record(index)
        written = save_masks(record.stem, self.mask_set(index), self._mask_dir(index))
        name = self.images[index].name
        if name not in self.completed:
            self.completed.append(name)
        write_checkpoint(self._checkpoint_dir(), Checkpoint(list(self.completed)))
        self.dirty.discard(index)
        return written

    def flush(self) -> None:
        """Persist any unsaved masks plus the checkpoint (shutdown path)."""
        for index in sorted(self.dirty):
            record = self.image_record(index)
            save_masks(record.stem, self.mask_set(index), self._mask_dir(index))
        self.dirty.clear()
        write_checkpoint(self._checkpoint_dir(), Checkpoint(list(self.completed)))

    # --- rendering -------------------------------------------------------

    def render(self, frame: str = "global", with_masks: bool = True) -> np.ndarray:
        """Current view as RGB: raw image or overlay, optionally ROI-cropped."""
        record = self.image_record()
        if with_masks:
            out = render_overlay(record, self.mask_set(), self.registry)
        elif record.channels == 1:
            out = np.stack([record.pixels] * 3, axis=-1)
        else:
            out = record.pixels.copy()
        if frame == "roi" and self.roi is not None:
            rows, cols = self.roi.slices()
            out = out[rows, cols]
        return out


def open_session(image_sources, class_names: list[str], masks_dir=None) -> Session:
    """Open an annotation session (directory or explicit file list)."""
    return Session.open(image_sources, class_names, masks_dir=masks_dir)
