"""Per-object attention maps and the primitive transforms the losses read."""

from dataclasses import dataclass

import numpy as np

from deptharb.errors import ShapeMismatchError
from deptharb.scene import SceneSpec, pixel_centers

NO_WINNER = -1


def check_map(values: np.ndarray, name: str = "attention map") -> np.ndarray:
    """Returns values as a float64 array after rejecting NaN/inf/negatives."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(values < 0):
        raise ValueError(f"{name} has negative entries")
    return values


@dataclass(frozen=True)
class AttentionField:
    """K x H x W stack, one map per scene object in scene order."""

    maps: np.ndarray

    def __post_init__(self):
        maps = check_map(self.maps, "attention field")
        if maps.ndim != 3:
            raise ShapeMismatchError(f"attention field must be K x H x W, got shape {maps.shape}")
        object.__setattr__(self, "maps", maps)

    @property
    def num_objects(self) -> int:
        return self.maps.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.maps.shape[1], self.maps.shape[2]

    def check_aligned(self, scene: SceneSpec) -> None:
        if self.num_objects != len(scene.objects) or self.shape != scene.shape:
            raise ShapeMismatchError(
                f"field {self.num_objects}x{self.shape[0]}x{self.shape[1]} does not match "
                f"scene {len(scene.objects)}x{scene.grid_height}x{scene.grid_width}"
            )

    def scaled(self, factor: float) -> "AttentionField":
        return AttentionField(self.maps * factor)


@dataclass(frozen=True)
class CoordGrid:
    """Normalized pixel-center coordinates p(x, y) = ((x+0.5)/W, (y+0.5)/H)."""

    px: np.ndarray
    py: np.ndarray

    @classmethod
    def for_shape(cls, height: int, width: int) -> "CoordGrid":
        py, px = np.meshgrid(pixel_centers(height), pixel_centers(width), indexing="ij")
        return cls(px=px, py=py)


def masked_energies(values: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """sum(A * M) and sum(A * (1 - M)), each accumulated in float64."""
    return float((values * mask).sum()), float((values * (1.0 - mask)).sum())


def attention_mass(values: np.ndarray, mask: np.ndarray | None = None) -> float:
    """
    sum(A). Given a box mask it is taken as e_in + e_out, so the energy
    split adds back to exactly the mass the normalization divides by.
    """
    if mask is None:
        return float(values.sum())
    e_in, e_out = masked_energies(values, mask)
    return e_in + e_out


def normalize_map(values: np.ndarray, epsilon: float, mask: np.ndarray | None = None) -> np.ndarray:
    """A / (sum(A) + eps): the map as a spatial distribution (sums to just under 1)."""
    values = check_map(values)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != values.shape:
            raise ShapeMismatchError(f"mask shape {mask.shape} does not match {values.shape}")
    return values / (attention_mass(values, mask) + epsilon)


def aggregate_maps(maps: list[np.ndarray]) -> np.ndarray:
    """Element-wise mean over heads/layers/tokens."""
    if not maps:
        raise ValueError("cannot aggregate an empty list of maps")
    first = np.shape(maps[0])
    for m in maps[1:]:
        if np.shape(m) != first:
            raise ShapeMismatchError(f"map shape {np.shape(m)} does not match {first}")
    stacked = np.stack([check_map(m) for m in maps])
    return stacked.mean(axis=0)


def pseudo_segment(field: AttentionField, scene: SceneSpec) -> np.ndarray:
    """
    Per-pixel winning object index (into scene.objects), NO_WINNER where all
    maps are zero. Ties go to the smaller depth, then the smaller id.
    """
    field.check_aligned(scene)
    # Visit objects in tie-break priority; a later object only wins on a strict improvement.
    priority = sorted(range(field.num_objects), key=lambda k: (scene.objects[k].depth, scene.objects[k].id))
    best = np.zeros(field.shape)
    winner = np.full(field.shape, NO_WINNER, dtype=np.int64)
    for k in priority:
        better = field.maps[k] > best
        winner[better] = k
        best = np.where(better, field.maps[k], best)
    return winner


def threshold_mask(values: np.ndarray, rel_threshold: float) -> np.ndarray:
    """Pixels at or above rel_threshold * max(A); all-zero maps give an all-zero mask."""
    if not 0 < rel_threshold <= 1:
        raise ValueError(f"rel_threshold must be in (0, 1], got {rel_threshold}")
    values = check_map(values)
    peak = values.max()
    if peak <= 0:
        return np.zeros_like(values)
    return (values >= rel_threshold * peak).astype(np.float64)
