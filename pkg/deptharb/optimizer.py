"""Staged latent optimization: stage schedule, step sizes and the update loop."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from deptharb.attention import AttentionField
from deptharb.config import GuidanceConfig
from deptharb.errors import NumericalAbortError
from deptharb.losses import LossBreakdown, LossContext, Stage
from deptharb.scene import OcclusionPair, SceneSpec, derive_occlusion_pairs
from deptharb.surrogate import LatentState, backprop_to_latent, render_attention

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    step: int
    stage: int
    eta: float
    losses: LossBreakdown
    metrics: dict | None = None


@dataclass
class Trajectory:
    """
    One record per step plus the initial evaluation. Record i holds the loss of
    the field the i-th update was computed from; the last record holds the
    final field under the last step's stage.
    """

    records: list[StepRecord] = field(default_factory=list)
    final_latent: LatentState | None = None
    final_field: AttentionField | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    def first_stage2(self) -> StepRecord | None:
        return next((r for r in self.records if r.stage == Stage.Textural), None)


def stage1_steps(cfg: GuidanceConfig) -> int:
    return math.floor(cfg.stage1_fraction * cfg.total_steps)


def stage_of(step: int, cfg: GuidanceConfig) -> int:
    if not 0 <= step < cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps})")
    return Stage.Structural if step < stage1_steps(cfg) else Stage.Textural


def step_size(step: int, cfg: GuidanceConfig) -> float:
    """Geometric schedule eta0 * eta_decay^step."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return cfg.eta0 * cfg.eta_decay**step


def _check_finite(step: int, breakdown: LossBreakdown) -> None:
    if not math.isfinite(breakdown.total):
        raise NumericalAbortError(step, "loss")


def run_guidance(
    scene: SceneSpec,
    cfg: GuidanceConfig,
    latent0: LatentState,
    pairs: list[OcclusionPair] | None = None,
    snapshot: Callable[[AttentionField], dict] | None = None,
    snapshot_every: int = 0,
) -> Trajectory:
    """
    Iterates render -> staged loss -> attention gradient -> latent gradient ->
    z <- z - eta_t g for cfg.total_steps steps, cfg.inner_iters updates each.

    When snapshot is given it is called on the field of every
    snapshot_every-th record (and the final one) and stored on the record.
    """

    def take_snapshot(step: int, field_: AttentionField, is_final: bool = False) -> dict | None:
        if snapshot is None or snapshot_every <= 0:
            return None
        if is_final or step % snapshot_every == 0:
            return snapshot(field_)
        return None

    latent0.check_matches(scene)
    if pairs is None:
        pairs = derive_occlusion_pairs(scene)
    context = LossContext(scene, pairs, cfg)
    boundary = stage1_steps(cfg)
    logger.info(
        "guidance run: %d steps (%d structural), mode=%s, eta0=%g",
        cfg.total_steps,
        boundary,
        latent0.mode,
        cfg.eta0,
    )

    trajectory = Trajectory()
    latent = latent0
    attention = render_attention(latent, scene)
    last_stage = Stage.Structural if boundary > 0 else Stage.Textural

    for step in range(cfg.total_steps):
        stage = stage_of(step, cfg)
        eta = step_size(step, cfg)
        if step == boundary and step > 0:
            logger.info("switching to stage %d at step %d", stage, step)

        for inner in range(cfg.inner_iters):
            breakdown = context.breakdown(attention, stage)
            _check_finite(step, breakdown)
            if inner == 0:
                trajectory.records.append(
                    StepRecord(step, stage, eta, breakdown, take_snapshot(step, attention))
                )
            grad = backprop_to_latent(latent, scene, context.gradient(attention, stage))
            if not np.all(np.isfinite(grad)):
                raise NumericalAbortError(step, "gradient")
            try:
                latent = latent.stepped(grad, eta)
                attention = render_attention(latent, scene)
            except ValueError as e:
                raise NumericalAbortError(step, "latent") from e
        logger.debug("step %d stage %d eta %g total %.6g", step, stage, eta, breakdown.total)
        last_stage = stage

    final = context.breakdown(attention, last_stage)
    _check_finite(cfg.total_steps, final)
    trajectory.records.append(
        StepRecord(
            cfg.total_steps,
            last_stage,
            step_size(cfg.total_steps, cfg),
            final,
            take_snapshot(cfg.total_steps, attention, is_final=True),
        )
    )
    trajectory.final_latent = latent
    trajectory.final_field = attention
    logger.info("guidance run finished: total=%.6g", final.total)
    return trajectory
