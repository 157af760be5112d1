"""
Differentiable stand-in for the diffusion backbone. A latent state renders
one attention map per object, and attention-space gradients chain back to
latent-space gradients.

raster: A_k(x, y) = exp(logit_k(x, y))
blob:   A_k(x, y) = a exp(-(dx^2 / (2 sx^2) + dy^2 / (2 sy^2)))
        with dx = cx - center_x, a = exp(log_amplitude), s = exp(log_sigma)

Blob chain rule, with G = dL/dA:
  dL/dcenter_x    = sum(G A dx / sx^2)
  dL/dlog_sigma_x = sum(G A dx^2 / sx^2)
  dL/dlog_amp     = sum(G A)
and likewise on y.
"""

import logging
from dataclasses import dataclass

import numpy as np

from deptharb.attention import AttentionField, CoordGrid
from deptharb.errors import ShapeMismatchError
from deptharb.scene import SceneSpec

logger = logging.getLogger(__name__)

CENTER_JITTER = 0.05
# Blob parameter columns.
CENTER_X, CENTER_Y, LOG_SIGMA_X, LOG_SIGMA_Y, LOG_AMPLITUDE = range(5)
BLOB_PARAMS = 5


class LatentMode:
    Raster = "raster"
    Blob = "blob"

    @classmethod
    def choices(cls) -> tuple[str, str]:
        return (cls.Raster, cls.Blob)


@dataclass(frozen=True)
class LatentState:
    """Raster: K x H x W logits. Blob: K x 5 parameter rows."""

    mode: str
    params: np.ndarray

    def __post_init__(self):
        if self.mode not in LatentMode.choices():
            raise ValueError(f"unknown latent mode {self.mode!r}")
        params = np.asarray(self.params, dtype=np.float64)
        if not np.all(np.isfinite(params)):
            raise ValueError("latent has non-finite entries")
        if self.mode == LatentMode.Blob and (params.ndim != 2 or params.shape[1] != BLOB_PARAMS):
            raise ShapeMismatchError(f"blob latent must be K x {BLOB_PARAMS}, got {params.shape}")
        if self.mode == LatentMode.Raster and params.ndim != 3:
            raise ShapeMismatchError(f"raster latent must be K x H x W, got {params.shape}")
        object.__setattr__(self, "params", params)

    def check_matches(self, scene: SceneSpec) -> None:
        k = len(scene.objects)
        if self.mode == LatentMode.Raster:
            expected = (k, *scene.shape)
        else:
            expected = (k, BLOB_PARAMS)
        if self.params.shape != expected:
            raise ShapeMismatchError(f"{self.mode} latent shape {self.params.shape} does not match {expected}")

    def stepped(self, gradient: np.ndarray, step_size: float) -> "LatentState":
        return LatentState(self.mode, self.params - step_size * gradient)


def init_latent(scene: SceneSpec, mode: str, seed: int, jitter: bool = True) -> LatentState:
    """
    Seeded starting point. Raster logits are uniform in [-1, 1]. Blobs sit on
    their box centers with sigma at half the box half-extent and unit
    amplitude, with +-0.05 uniform center jitter unless disabled.
    """
    rng = np.random.default_rng(seed)
    k = len(scene.objects)
    if mode == LatentMode.Raster:
        return LatentState(mode, rng.uniform(-1.0, 1.0, size=(k, *scene.shape)))
    if mode != LatentMode.Blob:
        raise ValueError(f"unknown latent mode {mode!r}")

    params = np.zeros((k, BLOB_PARAMS))
    for row, obj in enumerate(scene.objects):
        x_min, y_min, x_max, y_max = obj.bbox
        params[row, CENTER_X] = (x_min + x_max) / 2
        params[row, CENTER_Y] = (y_min + y_max) / 2
        params[row, LOG_SIGMA_X] = np.log((x_max - x_min) / 4)
        params[row, LOG_SIGMA_Y] = np.log((y_max - y_min) / 4)
    if jitter:
        params[:, [CENTER_X, CENTER_Y]] += rng.uniform(-CENTER_JITTER, CENTER_JITTER, size=(k, 2))
    logger.debug("blob latent for %d objects (seed %d, jitter %s)", k, seed, jitter)
    return LatentState(mode, params)


def _blob_terms(params: np.ndarray, coords: CoordGrid):
    """Per-object rendered maps plus the offsets the chain rule reuses."""
    cx = params[:, CENTER_X, None, None]
    cy = params[:, CENTER_Y, None, None]
    sx2 = np.exp(2.0 * params[:, LOG_SIGMA_X, None, None])
    sy2 = np.exp(2.0 * params[:, LOG_SIGMA_Y, None, None])
    dx = coords.px[None] - cx
    dy = coords.py[None] - cy
    exponent = params[:, LOG_AMPLITUDE, None, None] - (dx**2 / (2.0 * sx2) + dy**2 / (2.0 * sy2))
    return np.exp(exponent), dx, dy, sx2, sy2


def render_attention(latent: LatentState, scene: SceneSpec) -> AttentionField:
    latent.check_matches(scene)
    if latent.mode == LatentMode.Raster:
        return AttentionField(np.exp(latent.params))
    maps, *_ = _blob_terms(latent.params, CoordGrid.for_shape(*scene.shape))
    return AttentionField(maps)


def backprop_to_latent(latent: LatentState, scene: SceneSpec, grad_field: np.ndarray) -> np.ndarray:
    """Chains dL/dA back to a latent-shaped gradient."""
    latent.check_matches(scene)
    grad_field = np.asarray(grad_field, dtype=np.float64)
    expected = (len(scene.objects), *scene.shape)
    if grad_field.shape != expected:
        raise ShapeMismatchError(f"gradient shape {grad_field.shape} does not match {expected}")

    if latent.mode == LatentMode.Raster:
        return grad_field * np.exp(latent.params)

    maps, dx, dy, sx2, sy2 = _blob_terms(latent.params, CoordGrid.for_shape(*scene.shape))
    weighted = grad_field * maps
    grad = np.empty_like(latent.params)
    grad[:, CENTER_X] = (weighted * dx / sx2).sum(axis=(1, 2))
    grad[:, CENTER_Y] = (weighted * dy / sy2).sum(axis=(1, 2))
    grad[:, LOG_SIGMA_X] = (weighted * dx**2 / sx2).sum(axis=(1, 2))
    grad[:, LOG_SIGMA_Y] = (weighted * dy**2 / sy2).sum(axis=(1, 2))
    grad[:, LOG_AMPLITUDE] = weighted.sum(axis=(1, 2))
    return grad
