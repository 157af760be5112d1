"""
Central finite-difference checks of the analytic gradients, in attention
space and in latent space.

A coordinate passes when |analytic - numeric| <= atol + tol * |numeric|,
with atol = ABS_TOL_RATIO * tol. Near-zero gradients are then held to an
absolute bound instead of a meaningless relative one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from deptharb.config import GuidanceConfig
from deptharb.losses import LossContext
from deptharb.scene import SceneObject, SceneSpec, derive_occlusion_pairs
from deptharb.surrogate import LatentState, backprop_to_latent, init_latent, render_attention

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-6
DEFAULT_TOL = 1e-5
ABS_TOL_RATIO = 1e-4
WORST_KEPT = 5


class Space:
    Attention = "attention"
    Latent = "latent"


@dataclass(frozen=True)
class Probe:
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def abs_error(self) -> float:
        return abs(self.analytic - self.numeric)

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return self.abs_error / scale if scale > 0 else 0.0

    def excess_error(self, atol: float) -> float:
        """Error beyond atol relative to |numeric|; a probe passes when this is <= tol."""
        excess = max(0.0, self.abs_error - atol)
        if excess == 0.0:
            return 0.0
        scale = abs(self.numeric)
        return excess / scale if scale > 0 else float("inf")


@dataclass
class GradCheckResult:
    space: str
    mode: str
    stage: int
    tol: float
    samples: int = 0
    failures: int = 0
    # Measured past the absolute floor, so it stays <= tol on a pass.
    max_rel_error: float = 0.0
    max_abs_error: float = 0.0
    worst: list[Probe] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    @property
    def label(self) -> str:
        return f"{self.space}/{self.mode}/stage{self.stage}"


def _within(probe: Probe, tol: float) -> bool:
    return probe.abs_error <= ABS_TOL_RATIO * tol + tol * abs(probe.numeric)


def _collect(result: GradCheckResult, probes: list[Probe]) -> GradCheckResult:
    atol = ABS_TOL_RATIO * result.tol
    for probe in probes:
        result.samples += 1
        if not _within(probe, result.tol):
            result.failures += 1
        result.max_rel_error = max(result.max_rel_error, probe.excess_error(atol))
        result.max_abs_error = max(result.max_abs_error, probe.abs_error)
    # Failing probes first, then the largest relative errors.
    ranked = sorted(probes, key=lambda p: (_within(p, result.tol), -p.rel_error))
    result.worst = ranked[:WORST_KEPT]
    return result


def _sample_indices(shape: tuple[int, ...], samples: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    size = int(np.prod(shape))
    flat = np.arange(size) if samples >= size else rng.choice(size, size=samples, replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, shape)) for f in np.sort(flat)]


def central_difference(func, x: np.ndarray, index: tuple[int, ...], step: float) -> float:
    """(f(x + h e) - f(x - h e)) / 2h without mutating x."""
    probe = x.copy()
    probe[index] = x[index] + step
    f_plus = func(probe)
    probe[index] = x[index] - step
    f_minus = func(probe)
    return (f_plus - f_minus) / (2.0 * step)


def check_attention_gradient(
    context: LossContext,
    maps: np.ndarray,
    stage: int,
    samples: int,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    step: float = DEFAULT_STEP,
) -> GradCheckResult:
    analytic = context.gradient(maps, stage)

    def total(values):
        return context.total(values, stage)

    probes = [
        Probe(index, float(analytic[index]), central_difference(total, maps, index, step))
        for index in _sample_indices(maps.shape, samples, rng)
    ]
    return _collect(GradCheckResult(Space.Attention, "field", stage, tol), probes)


def check_latent_gradient(
    context: LossContext,
    latent: LatentState,
    stage: int,
    samples: int,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    step: float = DEFAULT_STEP,
) -> GradCheckResult:
    scene = context.scene
    attention = render_attention(latent, scene)
    analytic = backprop_to_latent(latent, scene, context.gradient(attention, stage))

    def total(params):
        return context.total(render_attention(LatentState(latent.mode, params), scene), stage)

    probes = [
        Probe(index, float(analytic[index]), central_difference(total, latent.params, index, step))
        for index in _sample_indices(latent.params.shape, samples, rng)
    ]
    return _collect(GradCheckResult(Space.Latent, latent.mode, stage, tol), probes)


def random_field(scene: SceneSpec, rng: np.random.Generator, high: float = 2.0) -> np.ndarray:
    return rng.uniform(0.0, high, size=(len(scene.objects), *scene.shape))


def random_scene(rng: np.random.Generator, num_objects: int, height: int = 32, width: int = 32) -> SceneSpec:
    """Boxes at least a fifth of the grid wide with distinct depths."""
    depths = rng.permutation(num_objects) / max(num_objects - 1, 1)
    objects = []
    for k in range(num_objects):
        x0, y0 = rng.uniform(0.0, 0.6, size=2)
        w, h = rng.uniform(0.2, 0.4, size=2)
        bbox = (float(x0), float(y0), float(min(x0 + w, 1.0)), float(min(y0 + h, 1.0)))
        objects.append(SceneObject(id=k, label=f"object-{k}", bbox=bbox, depth=float(depths[k])))
    return SceneSpec(grid_height=height, grid_width=width, objects=tuple(objects))


def grad_check_scene(
    scene: SceneSpec,
    cfg: GuidanceConfig,
    modes: list[str],
    stages: list[int],
    samples: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    step: float = DEFAULT_STEP,
) -> list[GradCheckResult]:
    """
    Attention-space check on a seeded random field in [0, 2], then latent-space
    checks for each surrogate mode, for every requested stage.
    """
    rng = np.random.default_rng(seed)
    context = LossContext(scene, derive_occlusion_pairs(scene), cfg)
    maps = random_field(scene, rng)
    results = []
    for stage in stages:
        results.append(check_attention_gradient(context, maps, stage, samples, rng, tol, step))
        for mode in modes:
            latent = init_latent(scene, mode, seed)
            results.append(check_latent_gradient(context, latent, stage, samples, rng, tol, step))
    for result in results:
        logger.info(
            "grad check %s: %d samples, %d failures, max rel %.3g",
            result.label,
            result.samples,
            result.failures,
            result.max_rel_error,
        )
    return results
