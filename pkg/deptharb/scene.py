"""
Scene layouts: objects with normalized boxes and relative depths,
box rasterization, and occlusion pair derivation.

Depth is distance to the camera. A smaller depth is closer, so the
smaller-depth object of an overlapping pair is the foreground.
"""

import json
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from deptharb.errors import SceneValidationError

logger = logging.getLogger(__name__)

BBox = tuple[float, float, float, float]


@dataclass(frozen=True)
class SceneObject:
    id: int
    label: str
    bbox: BBox
    depth: float


@dataclass(frozen=True)
class SceneSpec:
    grid_height: int
    grid_width: int
    objects: tuple[SceneObject, ...]
    # Raw "config" block from the scene file, merged later by the caller.
    config_overrides: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        validate_scene(self)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_height, self.grid_width)

    def index_of(self, object_id: int) -> int:
        for index, obj in enumerate(self.objects):
            if obj.id == object_id:
                return index
        raise KeyError(object_id)

    def object_by_id(self, object_id: int) -> SceneObject:
        return self.objects[self.index_of(object_id)]


@dataclass(frozen=True)
class OcclusionPair:
    foreground_id: int
    background_id: int


def _validate_object(index: int, obj: SceneObject) -> None:
    if len(obj.bbox) != 4:
        raise SceneValidationError("expected four coordinates", index, "bbox")
    x_min, y_min, x_max, y_max = obj.bbox
    if not all(0.0 <= c <= 1.0 for c in obj.bbox):
        raise SceneValidationError(f"coordinates must lie in [0, 1], got {obj.bbox}", index, "bbox")
    if not (x_min < x_max and y_min < y_max):
        raise SceneValidationError(f"min must be < max on both axes, got {obj.bbox}", index, "bbox")
    if not 0.0 <= obj.depth <= 1.0:
        raise SceneValidationError(f"must lie in [0, 1], got {obj.depth}", index, "depth")
    if obj.id < 0:
        raise SceneValidationError(f"must be non-negative, got {obj.id}", index, "id")


def validate_scene(scene: SceneSpec) -> None:
    if scene.grid_height < 2 or scene.grid_width < 2:
        raise SceneValidationError(
            f"grid must be at least 2x2, got {scene.grid_height}x{scene.grid_width}", field="grid"
        )
    if not scene.objects:
        raise SceneValidationError("scene needs at least one object", field="objects")
    seen = set()
    for index, obj in enumerate(scene.objects):
        _validate_object(index, obj)
        if obj.id in seen:
            raise SceneValidationError(f"duplicate id {obj.id}", index, "id")
        seen.add(obj.id)


def _require(mapping: dict, key: str, kind, index: int | None, field: str | None = None):
    field = field or key
    if key not in mapping:
        raise SceneValidationError("missing", index, field)
    value = mapping[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise SceneValidationError(f"expected an integer, got {value!r}", index, field)
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise SceneValidationError(f"expected a number, got {value!r}", index, field)
    if kind is str and not isinstance(value, str):
        raise SceneValidationError(f"expected a string, got {value!r}", index, field)
    return value


def scene_from_dict(data: Any) -> SceneSpec:
    """Builds a validated SceneSpec from already-decoded JSON."""
    if not isinstance(data, dict):
        raise SceneValidationError("top level must be an object", field="scene")
    grid = data.get("grid")
    if not isinstance(grid, dict):
        raise SceneValidationError("missing grid dimensions", field="grid")
    height = _require(grid, "height", int, None, "grid.height")
    width = _require(grid, "width", int, None, "grid.width")

    raw_objects = data.get("objects")
    if not isinstance(raw_objects, list):
        raise SceneValidationError("missing object list", field="objects")

    objects = []
    for index, raw in enumerate(raw_objects):
        if not isinstance(raw, dict):
            raise SceneValidationError("expected an object", index, "objects")
        bbox = raw.get("bbox")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise SceneValidationError("expected [x_min, y_min, x_max, y_max]", index, "bbox")
        if any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in bbox):
            raise SceneValidationError(f"coordinates must be numbers, got {bbox}", index, "bbox")
        objects.append(
            SceneObject(
                id=_require(raw, "id", int, index),
                label=_require(raw, "label", str, index),
                bbox=tuple(float(c) for c in bbox),
                depth=float(_require(raw, "depth", float, index)),
            )
        )

    overrides = data.get("config") or {}
    if not isinstance(overrides, dict):
        raise SceneValidationError("config block must be an object", field="config")

    return SceneSpec(
        grid_height=height,
        grid_width=width,
        objects=tuple(objects),
        config_overrides=tuple(overrides.items()),
    )


def parse_scene(text: str) -> SceneSpec:
    """Parses scene-file JSON text into a validated SceneSpec."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneValidationError(f"malformed JSON: {e}", field="scene") from e
    scene = scene_from_dict(data)
    logger.debug("parsed scene %dx%d with %d objects", *scene.shape, len(scene.objects))
    return scene


def pixel_centers(length: int) -> np.ndarray:
    return (np.arange(length, dtype=np.float64) + 0.5) / length


def rasterize_mask(bbox: BBox, height: int, width: int) -> np.ndarray:
    """
    Binary H x W mask of the pixels whose centers fall inside the box.
    Intervals are half-open, so boxes sharing an edge never share a pixel.
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dims must be >= 1, got {height}x{width}")
    x_min, y_min, x_max, y_max = bbox
    cx = pixel_centers(width)
    cy = pixel_centers(height)
    cols = (cx >= x_min) & (cx < x_max)
    rows = (cy >= y_min) & (cy < y_max)
    return np.outer(rows, cols).astype(np.float64)


def scene_masks(scene: SceneSpec) -> np.ndarray:
    """K x H x W stack of rasterized boxes, index-aligned with scene.objects."""
    return np.stack([rasterize_mask(o.bbox, *scene.shape) for o in scene.objects])


def boxes_overlap(a: BBox, b: BBox) -> bool:
    """True when two boxes intersect with positive area."""
    width = min(a[2], b[2]) - max(a[0], b[0])
    height = min(a[3], b[3]) - max(a[1], b[1])
    return width > 0 and height > 0


def box_intersection(a: BBox, b: BBox) -> BBox | None:
    if not boxes_overlap(a, b):
        return None
    return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))


def derive_occlusion_pairs(scene: SceneSpec) -> list[OcclusionPair]:
    """
    One (foreground, background) pair per overlapping object pair with
    strictly different depths. Equal depths give no pair.
    """
    pairs = []
    objects = scene.objects
    for a_index, a in enumerate(objects):
        for b in objects[a_index + 1 :]:
            if a.depth == b.depth or not boxes_overlap(a.bbox, b.bbox):
                continue
            front, back = (a, b) if a.depth < b.depth else (b, a)
            pairs.append(OcclusionPair(front.id, back.id))
    pairs.sort(key=lambda p: (p.foreground_id, p.background_id))
    return pairs
