"""Image decoding, per-class mask file I/O and checkpointing.

Mask files are 8-bit grayscale PNGs named ``<stem>__<class>__mask.png``
with 0 = background and 255 = mask, always at full-image dimensions. The
checkpoint is ``.maskeditor_checkpoint.json`` holding the ordered list of
completed image filenames (plus the redundant count). All writes go
through a temp file + rename so an interrupted save never corrupts the
canonical file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptCheckpointError,
    CorruptFileError,
    DimensionMismatchError,
    IoFailureError,
    NotFoundError,
    UnencodableClassNameError,
    UnsupportedFormatError,
)
from .mask import MaskLayer, MaskSet

SUPPORTED_FORMATS = {"JPEG", "PNG", "BMP", "TIFF"}
SUPPORTED_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"}
CHECKPOINT_NAME = ".maskeditor_checkpoint.json"
CHECKPOINT_VERSION = 1
_MASK_SUFFIX = "__mask.png"

_SIXTEEN_BIT_MODES = {"I;16", "I;16L", "I;16B", "I;16N", "I"}


@dataclass
class ImageRecord:
    """A decoded image: 8-bit grayscale (h, w) or RGB (h, w, 3)."""

    path: str
    width: int
    height: int
    channels: int
    pixels: np.ndarray

    @property
    def stem(self) -> str:
        return Path(self.path).stem


@dataclass
class Checkpoint:
    """Progress record: the ordered filenames of completed images."""

    completed: list[str] = field(default_factory=list)
    version: int = CHECKPOINT_VERSION

    @property
    def completed_count(self) -> int:
        return len(self.completed)


def load_image(path) -> ImageRecord:
    """Decode a JPG/PNG/BMP/TIFF file to 8-bit gray or RGB.

    16-bit sources are scaled down to 8-bit; alpha channels are dropped.
    """
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"no such file: {path}")
    try:
        img = Image.open(path)
    except UnidentifiedImageError as e:
        raise UnsupportedFormatError(f"{path}: not a decodable image") from e
    except OSError as e:
        raise CorruptFileError(f"{path}: {e}") from e
    if img.format not in SUPPORTED_FORMATS:
        raise UnsupportedFormatError(
            f"{path}: format {img.format} not supported (JPG/PNG/BMP/TIFF only)")
    try:
        img.load()
    except OSError as e:
        raise CorruptFileError(f"{path}: {e}") from e

    mode = img.mode
    if mode in _SIXTEEN_BIT_MODES:
        arr = np.asarray(img, dtype=np.int64)
        arr = np.clip(arr, 0, 65535)
        pixels = np.round(arr / 257.0).astype(np.uint8)
    elif mode in ("L",):
        pixels = np.asarray(img, dtype=np.uint8)
    elif mode in ("1", "LA", "La"):
        pixels = np.asarray(img.convert("L"), dtype=np.uint8)
    elif mode == "RGB":
        pixels = np.asarray(img, dtype=np.uint8)
    else:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    height, width = pixels.shape[:2]
    channels = 1 if pixels.ndim == 2 else 3
    return ImageRecord(str(path), width, height, channels, pixels)


def _check_class_name(name: str) -> None:
    if not name:
        raise UnencodableClassNameError("class name is empty")
    bad = set('/\\\0')
    if any(c in bad for c in name):
        raise UnencodableClassNameError(
            f"class name {name!r} contains filesystem-unsafe characters")


def mask_filename(image_stem: str, class_name: str) -> str:
    _check_class_name(class_name)
    return f"{image_stem}__{class_name}{_MASK_SUFFIX}"


def _atomic_write(path: Path, data_writer) -> None:
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "wb") as f:
            data_writer(f)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailureError(f"failed writing {path}: {e}") from e
    finally:
        if tmp.exists():
            try:
                tmp.unlink()
            except OSError:
                pass


def save_masks(image_stem: str, masks: MaskSet, out_dir) -> list[Path]:
    """Write one binary PNG per class with at least one set bit.

    A class whose file already exists is rewritten even when empty, so
    erasing everything persists rather than leaving the stale file behind.
    """
    out_dir = Path(out_dir)
    written = []
    for class_name, layer in masks.layers.items():
        target = out_dir / mask_filename(image_stem, class_name)
        if layer.count() == 0 and not target.exists():
            continue
        data = np.where(layer.bits, 255, 0).astype(np.uint8)

        def _write(f, data=data):
            Image.fromarray(data, mode="L").save(f, format="PNG")

        _atomic_write(target, _write)
        written.append(target)
    return written


def load_masks(image_stem: str, image_dims: tuple[int, int], directory) -> MaskSet:
    """Load every mask file matching the naming convention for the stem.

    image_dims is (width, height); a file of any other size is an error.
    Pixels above 127 count as set, tolerating antialiased foreign masks.
    """
    directory = Path(directory)
    width, height = image_dims
    masks = MaskSet()
    if not directory.is_dir():
        return masks
    prefix = f"{image_stem}__"
    names = sorted(
        n for n in os.listdir(directory)
        if n.startswith(prefix) and n.endswith(_MASK_SUFFIX)
        and len(n) > len(prefix) + len(_MASK_SUFFIX)
    )
    for name in names:
        class_name = name[len(prefix):-len(_MASK_SUFFIX)]
        path = directory / name
        try:
            img = Image.open(path)
            img.load()
        except (UnidentifiedImageError, OSError) as e:
            raise CorruptFileError(f"{path}: {e}") from e
        if img.size != (width, height):
            raise DimensionMismatchError(
                f"{path}: mask is {img.size[0]}x{img.size[1]}, "
                f"image is {width}x{height}")
        arr = np.asarray(img.convert("L"))
        masks.add(MaskLayer(class_name, arr > 127))
    return masks


def write_checkpoint(directory, cp: Checkpoint) -> Path:
    """Atomically persist the checkpoint file into ``directory``."""
    path = Path(directory) / CHECKPOINT_NAME
    payload = {
        "version": cp.version,
        "completed_count": cp.completed_count,
        "completed": list(cp.completed),
    }
    blob = json.dumps(payload, indent=2).encode("utf-8")
    _atomic_write(path, lambda f: f.write(blob))
    return path


def read_checkpoint(directory) -> Checkpoint | None:
    """Parse the checkpoint in ``directory``; None when absent, an error
    (never a silent reset) when present but malformed."""
    path = Path(directory) / CHECKPOINT_NAME
    if not path.exists():
        return None
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path}: {e}") from e
    if not isinstance(payload, dict):
        raise CorruptCheckpointError(f"{path}: expected a JSON object")
    completed = payload.get("completed")
    count = payload.get("completed_count")
    version = payload.get("version")
    if (
        not isinstance(completed, list)
        or not all(isinstance(n, str) for n in completed)
        or len(set(completed)) != len(completed)
        or not isinstance(count, int)
        or count != len(completed)
        or not isinstance(version, int)
    ):
        raise CorruptCheckpointError(f"{path}: inconsistent checkpoint contents")
    return Checkpoint(completed=completed, version=version)


def resume(images, cp: Checkpoint | None) -> int:
    """Index of the first image not yet completed; last index when all are."""
    images = list(images)
    if cp is None:
        return 0
    done = set(cp.completed)
    for i, image in enumerate(images):
        if Path(image).name not in done:
            return i
    return max(0, len(images) - 1)
