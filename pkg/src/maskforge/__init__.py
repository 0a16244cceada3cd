"""maskforge: interactive image-annotation engine producing per-class
binary segmentation masks."""

from .errors import MaskForgeError
from .mask import (
    DEFAULT_PALETTE,
    ClassRegistry,
    ClassStyle,
    MaskLayer,
    MaskSet,
    RoiRect,
)
from .model import OpOutcome, Session, open_session, render_overlay, to_global
from .persistence import (
    Checkpoint,
    ImageRecord,
    load_image,
    load_masks,
    read_checkpoint,
    resume,
    save_masks,
    write_checkpoint,
)
from .raster import (
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
from .superpixel import (
    LabColor,
    SlicParams,
    SuperpixelMap,
    boundary_mask,
    compute_slic,
    enforce_connectivity,
    mark_superpixel,
    pixel_digest,
    rgb_to_lab,
)

__version__ = "0.1.0"

__all__ = [
    "MaskForgeError",
    "DEFAULT_PALETTE",
    "ClassRegistry",
    "ClassStyle",
    "MaskLayer",
    "MaskSet",
    "RoiRect",
    "OpOutcome",
    "Session",
    "open_session",
    "render_overlay",
    "to_global",
    "Checkpoint",
    "ImageRecord",
    "load_image",
    "load_masks",
    "read_checkpoint",
    "resume",
    "save_masks",
    "write_checkpoint",
    "Stroke",
    "connected_components",
    "delete_mark",
    "erase_stroke",
    "fill_box",
    "fill_curve",
    "fill_ellipse",
    "fill_polygon",
    "paint_stroke",
    "LabColor",
    "SlicParams",
    "SuperpixelMap",
    "boundary_mask",
    "compute_slic",
    "enforce_connectivity",
    "mark_superpixel",
    "pixel_digest",
    "rgb_to_lab",
    "__version__",
]
