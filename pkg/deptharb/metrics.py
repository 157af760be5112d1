"""
Layout and occlusion metrics read straight off an attention field.
Thresholded maps stand in for detector boxes and the per-pixel argmax
stands in for instance segmentation.
"""

from dataclasses import dataclass

import numpy as np

from deptharb.attention import AttentionField, pseudo_segment, threshold_mask
from deptharb.scene import (
    OcclusionPair,
    SceneSpec,
    box_intersection,
    derive_occlusion_pairs,
    rasterize_mask,
)

DEFAULT_REL_THRESHOLD = 0.5


@dataclass(frozen=True)
class LayoutIoU:
    per_object: tuple[float, ...]
    miou_fg: float | None
    miou_bg: float | None
    miou_all: float


@dataclass(frozen=True)
class PairCoverage:
    foreground_id: int
    background_id: int
    focr: float | None


@dataclass(frozen=True)
class MetricReport:
    layout: LayoutIoU
    pairs: tuple[PairCoverage, ...]
    focr_mean: float | None
    miou_overlap: float | None
    rel_threshold: float


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two binary masks; two empty masks count as a perfect match."""
    a = a > 0
    b = b > 0
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def foreground_ids(pairs: list[OcclusionPair]) -> set[int]:
    return {p.foreground_id for p in pairs}


def layout_miou(
    field: AttentionField,
    scene: SceneSpec,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
    pairs: list[OcclusionPair] | None = None,
) -> LayoutIoU:
    """
    IoU of each thresholded map against its rasterized box. An object that is
    foreground in any pair goes in the fg aggregate, every other object in bg.
    """
    field.check_aligned(scene)
    ious = [
        mask_iou(threshold_mask(field.maps[k], rel_threshold), rasterize_mask(obj.bbox, *scene.shape))
        for k, obj in enumerate(scene.objects)
    ]
    if pairs is None:
        pairs = derive_occlusion_pairs(scene)
    front = foreground_ids(pairs)
    fg = [iou for iou, obj in zip(ious, scene.objects) if obj.id in front]
    bg = [iou for iou, obj in zip(ious, scene.objects) if obj.id not in front]
    return LayoutIoU(per_object=tuple(ious), miou_fg=_mean(fg), miou_bg=_mean(bg), miou_all=_mean(ious))


def _intersection_mask(scene: SceneSpec, pair: OcclusionPair) -> np.ndarray:
    fg = scene.object_by_id(pair.foreground_id)
    bg = scene.object_by_id(pair.background_id)
    overlap = box_intersection(fg.bbox, bg.bbox)
    if overlap is None:
        return np.zeros(scene.shape)
    return rasterize_mask(overlap, *scene.shape)


def focr(
    field: AttentionField, scene: SceneSpec, pairs: list[OcclusionPair]
) -> tuple[tuple[PairCoverage, ...], float | None]:
    """
    Per pair, the share of the rasterized box intersection whose winning object
    is the foreground. Intersections too thin to hold a pixel center report None.
    """
    winners = pseudo_segment(field, scene)
    coverage = []
    for pair in pairs:
        region = _intersection_mask(scene, pair) > 0
        pixels = int(region.sum())
        if pixels == 0:
            coverage.append(PairCoverage(pair.foreground_id, pair.background_id, None))
            continue
        won = int((winners[region] == scene.index_of(pair.foreground_id)).sum())
        coverage.append(PairCoverage(pair.foreground_id, pair.background_id, won / pixels))
    return tuple(coverage), _mean([c.focr for c in coverage if c.focr is not None])


def overlap_miou(
    field: AttentionField,
    scene: SceneSpec,
    pairs: list[OcclusionPair],
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> float | None:
    """
    Inside each pair's box intersection the foreground should cover every pixel
    and the background none. Per pair, the mean of the foreground's thresholded
    coverage and the background's thresholded absence over the intersection.
    """
    scores = []
    for pair in pairs:
        region = _intersection_mask(scene, pair) > 0
        if not region.any():
            continue
        fg = scene.index_of(pair.foreground_id)
        bg = scene.index_of(pair.background_id)
        fg_pred = threshold_mask(field.maps[fg], rel_threshold)[region]
        bg_pred = threshold_mask(field.maps[bg], rel_threshold)[region]
        fg_iou = mask_iou(fg_pred, np.ones_like(fg_pred))
        bg_iou = mask_iou(1.0 - bg_pred, np.ones_like(bg_pred))
        scores.append((fg_iou + bg_iou) / 2)
    return _mean(scores)


def evaluate_field(
    field: AttentionField,
    scene: SceneSpec,
    pairs: list[OcclusionPair],
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> MetricReport:
    coverage, focr_mean = focr(field, scene, pairs)
    return MetricReport(
        layout=layout_miou(field, scene, rel_threshold, pairs),
        pairs=coverage,
        focr_mean=focr_mean,
        miou_overlap=overlap_miou(field, scene, pairs, rel_threshold),
        rel_threshold=rel_threshold,
    )
