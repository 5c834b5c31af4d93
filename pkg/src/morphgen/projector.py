"""Orthographic depth maps, frontal area and drag-coefficient helpers.

Flow runs along +x, +z is up. Each view looks along a fixed direction ``d``
with an image "up" axis; image columns follow ``d x up``:

========  =========  ======  ==============
view      looks      up      columns along
========  =========  ======  ==============
front     +x         +z      -y
back      -x         +z      +y
side      -y         +z      -x
left      +y         +z      +x
top       -z         +x      -y
bottom    +z         +x      +y
========  =========  ======  ==============
"""

import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import _kernels
from .errors import EmptyProjectionError, ValidationError
from .mesh_io import bounding_box

__all__ = [
    "VIEWS",
    "DEFAULT_VIEWS",
    "DepthImage",
    "DepthStack",
    "depth_map",
    "stack_views",
    "frontal_area",
    "drag_coefficient",
    "drag_counts",
    "save_png",
]

VIEWS = {
    "front": ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    "back": ((-1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    "side": ((0.0, -1.0, 0.0), (0.0, 0.0, 1.0)),
    "left": ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    "top": ((0.0, 0.0, -1.0), (1.0, 0.0, 0.0)),
    "bottom": ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
}
DEFAULT_VIEWS = ("back", "side", "top")
DEFAULT_SIZE = 384
MARGIN = 0.05
LEVELS = 255
# camera plane offset from the box face, as a fraction of the box diagonal
_STANDOFF = 1e-3


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Quantized depth map: 0 is background, 1 the nearest and 255 the farthest hit."""

    width: int
    height: int
    view: str
    pixels: np.ndarray
    depth_min: float
    depth_max: float
    pixel_pitch: float
    depth: np.ndarray = field(default=None, repr=False)

    @property
    def hits(self):
        return self.pixels > 0

    def metadata(self):
        return {
            "view": self.view,
            "width": self.width,
            "height": self.height,
            "depth_min": self.depth_min,
            "depth_max": self.depth_max,
            "pixel_pitch": self.pixel_pitch,
        }


@dataclass(frozen=True, eq=False)
class DepthStack:
    channels: tuple

    @property
    def array(self):
        """``(height, width, n_channels)`` uint8 array."""
        return np.stack([c.pixels for c in self.channels], axis=-1)

    def metadata(self):
        return {"channels": [c.metadata() for c in self.channels]}


def _camera(view):
    try:
        d, up = VIEWS[view]
    except KeyError:
        raise ValidationError(f"unknown view {view!r}; choose from {sorted(VIEWS)}") from None
    d = np.asarray(d)
    up = np.asarray(up)
    return d, up, np.cross(d, up)


def quantize(depth, hit):
    """Min/max normalize hit depths onto bins 1..255; background stays 0."""
    out = np.zeros(depth.shape, dtype=np.uint8)
    if not hit.any():
        return out, float("nan"), float("nan")
    vals = depth[hit]
    lo, hi = float(vals.min()), float(vals.max())
    if hi > lo:
        out[hit] = 1 + np.rint((vals - lo) / (hi - lo) * (LEVELS - 1)).astype(np.uint8)
    else:
        out[hit] = LEVELS
    return out, lo, hi


def render(mesh, view, width=DEFAULT_SIZE, height=DEFAULT_SIZE):
    """Raw first-hit distances from the camera plane (``inf`` where nothing is hit).

    Returns ``(depth, pitch)``. The mesh box cross-section fills the image up
    to a 5% margin on its tighter side and is centred.
    """
    if mesh.n_triangles == 0:
        raise ValidationError("cannot project an empty mesh")
    if width < 1 or height < 1:
        raise ValidationError("image size must be positive")
    d, up, right = _camera(view)
    box = bounding_box(mesh)
    lo = np.asarray(box.min)
    # work relative to the box corner so rigid translations are exact
    corners = np.ascontiguousarray(mesh.corners - lo)
    ext = np.asarray(box.max) - lo
    eu = abs(ext @ right)
    ev = abs(ext @ up)
    usable = 1.0 - 2.0 * MARGIN
    pitch = max(eu / (width * usable), ev / (height * usable))
    if pitch == 0:
        raise EmptyProjectionError(f"mesh has no extent across the {view} view")
    center = ext / 2.0
    near = min(0.0, float(ext @ d)) - _STANDOFF * float(np.linalg.norm(ext))
    plane = center + (near - center @ d) * d
    origin = plane - (width / 2.0) * pitch * right + (height / 2.0) * pitch * up
    depth = np.full((height, width), np.inf)
    _kernels.render_depth(corners, origin, d, right, up, pitch, width, height, depth)
    return depth, pitch


def depth_map(mesh, view="back", width=DEFAULT_SIZE, height=DEFAULT_SIZE):
    depth, pitch = render(mesh, view, width, height)
    hit = np.isfinite(depth)
    if not hit.any():
        raise EmptyProjectionError(f"no ray hit the mesh in the {view} view")
    pixels, lo, hi = quantize(depth, hit)
    return DepthImage(width, height, view, pixels, lo, hi, pitch, np.where(hit, depth, np.nan))


def stack_views(mesh, views=DEFAULT_VIEWS, width=DEFAULT_SIZE, height=DEFAULT_SIZE):
    """Depth maps for ``views`` in order, to be used as image channels."""
    views = tuple(views)
    if len(views) != 3:
        raise ValidationError(f"need exactly 3 views, got {views}")
    return DepthStack(tuple(depth_map(mesh, v, width, height) for v in views))


def save_png(image, path, sidecar=True):
    """Write a DepthImage (grayscale) or DepthStack (RGB) plus a JSON sidecar."""
    if isinstance(image, DepthStack):
        Image.fromarray(image.array, mode="RGB").save(path, format="PNG")
    else:
        Image.fromarray(image.pixels, mode="L").save(path, format="PNG")
    meta_path = None
    if sidecar:
        meta_path = str(path) + ".json"
        with open(meta_path, "w") as fh:
            json.dump(image.metadata(), fh, indent=2, sort_keys=True)
    return meta_path


def frontal_area(mesh, view="front", width=256, height=256):
    """Projected area along the view axis: hit pixels times pitch squared."""
    depth, pitch = render(mesh, view, width, height)
    hits = int(np.isfinite(depth).sum())
    if hits == 0:
        raise EmptyProjectionError(f"no ray hit the mesh in the {view} view")
    return hits * pitch**2


def drag_coefficient(force, rho, v, area):
    """``C_d = 2 F_d / (rho v^2 A)``."""
    if rho <= 0 or v <= 0 or area <= 0:
        raise ValidationError("density, speed and area must be positive")
    return 2.0 * force / (rho * v * v * area)


def drag_counts(cd):
    """Drag coefficient in counts (units of 1e-4)."""
    return cd * 1e4
