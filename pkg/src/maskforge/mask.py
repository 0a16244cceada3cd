"""Core mask data types: per-class binary layers, the class registry and
the active crop rectangle.

Coordinate convention used throughout the package: pixel (i, j) covers the
square [i, i+1) x [j, j+1) with center (i + 0.5, j + 0.5); (0, 0) is the
top-left pixel, x grows right, y grows down. Bitmaps are numpy bool arrays
of shape (height, width), indexed [y, x].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateClassNameError,
    EmptyClassNameError,
    OutOfBoundsRoiError,
    UnknownClassError,
    ZeroAreaRoiError,
)

# Fixed default palette, cycled as classes are added. Twelve visually
# distinct colors so fresh sessions are reproducible without configuration.
DEFAULT_PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 25, 75),    # red
    (60, 180, 75),    # green
    (255, 225, 25),   # yellow
    (0, 130, 200),    # blue
    (245, 130, 48),   # orange
    (145, 30, 180),   # purple
    (70, 240, 240),   # cyan
    (240, 50, 230),   # magenta
    (210, 245, 60),   # lime
    (250, 190, 212),  # pink
    (0, 128, 128),    # teal
    (170, 110, 40),   # brown
)

DEFAULT_OPACITY = 0.5


@dataclass
class ClassStyle:
    """Overlay color and transparency for one annotation class."""

    color: tuple[int, int, int]
    opacity: float = DEFAULT_OPACITY

    def __post_init__(self):
        r, g, b = self.color
        if not all(0 <= c <= 255 for c in (r, g, b)):
            raise ValueError(f"color channels must be in [0, 255], got {self.color}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must be in [0, 1], got {self.opacity}")


@dataclass
class ClassRegistry:
    """Ordered set of class names with styles; one class is active at a time.

    Names are unique (case-sensitive) and non-empty. The active index is
    valid whenever the registry is non-empty.
    """

    entries: list[tuple[str, ClassStyle]] = field(default_factory=list)
    active: int = 0

    @classmethod
    def from_names(cls, names: list[str]) -> "ClassRegistry":
        reg = cls()
        for name in names:
            reg.add(name)
        return reg

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.entries)

    def index_of(self, name: str) -> int:
        for i, (n, _) in enumerate(self.entries):
            if n == name:
                return i
        raise UnknownClassError(f"unknown class {name!r}")

    def style(self, name: str) -> ClassStyle:
        return self.entries[self.index_of(name)][1]

    def add(self, name: str, style: ClassStyle | None = None) -> None:
        if not name:
            raise EmptyClassNameError("class name must be non-empty")
        if name in self:
            raise DuplicateClassNameError(f"class {name!r} already registered")
        if style is None:
            style = ClassStyle(DEFAULT_PALETTE[len(self.entries) % len(DEFAULT_PALETTE)])
        self.entries.append((name, style))

    def set_active(self, name: str) -> None:
        self.active = self.index_of(name)

    def set_style(self, name: str, color: tuple[int, int, int] | None = None,
                  opacity: float | None = None) -> None:
        i = self.index_of(name)
        old = self.entries[i][1]
        new = ClassStyle(
            color=tuple(color) if color is not None else old.color,
            opacity=opacity if opacity is not None else old.opacity,
        )
        self.entries[i] = (name, new)

    @property
    def active_name(self) -> str:
        if not self.entries:
            raise UnknownClassError("registry is empty")
        return self.entries[self.active][0]


@dataclass
class MaskLayer:
    """One binary bitmap for a single class, always at full-image size.

    ``bits`` may be a view into a parent layer (used internally to confine
    edits to an ROI); dimensions then reflect the view.
    """

    class_name: str
    bits: np.ndarray  # bool, shape (height, width)

    @classmethod
    def zeros(cls, class_name: str, width: int, height: int) -> "MaskLayer":
        return cls(class_name, np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "MaskLayer":
        return MaskLayer(self.class_name, self.bits.copy())


@dataclass
class MaskSet:
    """All class layers for one image; every layer shares the image size."""

    layers: dict[str, MaskLayer] = field(default_factory=dict)

    def get_or_create(self, class_name: str, width: int, height: int) -> MaskLayer:
        layer = self.layers.get(class_name)
        if layer is None:
            layer = MaskLayer.zeros(class_name, width, height)
            self.layers[class_name] = layer
        elif (layer.width, layer.height) != (width, height):
            raise DimensionMismatchError(
                f"layer {class_name!r} is {layer.width}x{layer.height}, "
                f"expected {width}x{height}"
            )
        return layer

    def add(self, layer: MaskLayer) -> None:
        if self.layers:
            any_layer = next(iter(self.layers.values()))
            if (layer.width, layer.height) != (any_layer.width, any_layer.height):
                raise DimensionMismatchError(
                    "all layers in a mask set must share dimensions"
                )
        self.layers[layer.class_name] = layer

    def __contains__(self, class_name: str) -> bool:
        return class_name in self.layers

    def __len__(self) -> int:
        return len(self.layers)

    def copy(self) -> "MaskSet":
        return MaskSet({name: layer.copy() for name, layer in self.layers.items()})


@dataclass(frozen=True)
class RoiRect:
    """Axis-aligned pixel rectangle: top-left (x0, y0) inclusive, extent w x h."""

    x0: int
    y0: int
    w: int
    h: int

    def validate_within(self, width: int, height: int) -> None:
        if self.w < 1 or self.h < 1:
            raise ZeroAreaRoiError(f"ROI extent must be >= 1x1, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.w > width or self.y0 + self.h > height:
            raise OutOfBoundsRoiError(
                f"ROI ({self.x0},{self.y0},{self.w},{self.h}) exceeds "
                f"image {width}x{height}"
            )

    def clipped(self, width: int, height: int) -> "RoiRect | None":
        """Intersection with the [0,width)x[0,height) grid, or None if empty."""
        x0 = max(self.x0, 0)
        y0 = max(self.y0, 0)
        x1 = min(self.x0 + self.w, width)
        y1 = min(self.y0 + self.h, height)
        if x1 <= x0 or y1 <= y0:
            return None
        return RoiRect(x0, y0, x1 - x0, y1 - y0)

    def slices(self) -> tuple[slice, slice]:
        """(row, column) slices selecting this rectangle in a (h, w) array."""
        return slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w)
