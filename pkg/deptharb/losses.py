"""
Layout confinement, attention arbitration and spatial compactness losses,
the staged objective, and closed-form gradients with respect to every
attention entry.

Gradient derivations (A = one object's map, M its box mask, d its depth,
S = e_in + e_out, D = S + eps):

  alignment    f = e_in / D
               df/dA(x) = M(x)/D - e_in/D^2
               dL_align/dA(x) = -2 d (1 - f) df/dA(x)

  arbitration  I = sum(A_j * M_i) / (sum(M_i) + eps), linear in A_j:
               dL_ortho/dA_j(x) = sum over pairs (i, j) of lambda_ij M_i(x) / (sum(M_i) + eps)

  compactness  At = A / D, n = sum(At), mu = sum(At p), Var = sum(At |p - mu|^2)
               Since sum(At (mu - p)) = (n - 1) mu, the dependence of Var on
               At through mu only contributes 2 (n - 1) mu . p, which vanishes
               when n = 1:
                 dVar/dAt(x) = |p(x) - mu|^2 + 2 (n - 1) mu . p(x)  =: g(x)
               and through the normalization dAt(y)/dA(x) = [x = y]/D - A(y)/D^2:
                 dVar/dA(x) = (g(x) - sum(g At)) / D
               dL_compact/dA(x) = d dVar/dA(x)

Sums are accumulated in float64. S is defined as e_in + e_out, so the
energy split adds back to the mass used by every other formula.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from deptharb.attention import AttentionField, CoordGrid, attention_mass, check_map, masked_energies
from deptharb.config import GuidanceConfig
from deptharb.errors import ShapeMismatchError
from deptharb.scene import OcclusionPair, SceneSpec, scene_masks

logger = logging.getLogger(__name__)


class Stage:
    Structural = 1
    Textural = 2


@dataclass(frozen=True)
class PairTerm:
    foreground_id: int
    background_id: int
    interference: float
    weight: float


@dataclass(frozen=True)
class LossBreakdown:
    stage: int
    align: float
    ortho: float
    compact: float
    total: float
    f: tuple[float, ...]
    e_in: tuple[float, ...]
    e_out: tuple[float, ...]
    pairs: tuple[PairTerm, ...]
    mu: tuple[tuple[float, float], ...]
    var: tuple[float, ...]

    @property
    def mean_interference(self) -> float | None:
        if not self.pairs:
            return None
        return sum(p.interference for p in self.pairs) / len(self.pairs)

    @property
    def mean_variance(self) -> float:
        return sum(self.var) / len(self.var)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape {a.shape} does not match {b.shape}")


def attention_energies(values: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """In-box and out-of-box attention energy."""
    values = check_map(values)
    mask = np.asarray(mask, dtype=np.float64)
    _check_same_shape(values, mask)
    return masked_energies(values, mask)


def alignment_ratio(e_in: float, e_out: float, epsilon: float) -> float:
    return e_in / (e_in + e_out + epsilon)


def interference(map_j: np.ndarray, mask_i: np.ndarray, epsilon: float) -> float:
    """Mean background attention inside the foreground box."""
    map_j = check_map(map_j)
    mask_i = np.asarray(mask_i, dtype=np.float64)
    _check_same_shape(map_j, mask_i)
    return float((map_j * mask_i).sum() / (mask_i.sum() + epsilon))


def arbitration_weight(d_i: float, d_j: float, cfg: GuidanceConfig) -> float:
    """Repulsion weight for foreground i over background j; grows as j recedes."""
    return cfg.lambda0 * math.exp(cfg.alpha * (d_j - d_i) / cfg.tau)


def spatial_mean(norm_map: np.ndarray, coords: CoordGrid) -> tuple[float, float]:
    return float((norm_map * coords.px).sum()), float((norm_map * coords.py).sum())


def spatial_variance(norm_map: np.ndarray, coords: CoordGrid, mu: tuple[float, float]) -> float:
    dist2 = (coords.px - mu[0]) ** 2 + (coords.py - mu[1]) ** 2
    return float((norm_map * dist2).sum())


class LossContext:
    """
    Everything about a layout the losses need that does not depend on the
    attention values: masks, coordinates, depths and arbitration pairs.
    Build one per (scene, pairs, cfg) and evaluate many fields with it.
    """

    def __init__(self, scene: SceneSpec, pairs: list[OcclusionPair], cfg: GuidanceConfig):
        self.scene = scene
        self.cfg = cfg
        self.pairs = list(pairs)
        self.masks = scene_masks(scene)
        self.mask_sizes = self.masks.sum(axis=(1, 2))
        self.coords = CoordGrid.for_shape(*scene.shape)
        self.depths = np.array([o.depth for o in scene.objects], dtype=np.float64)
        self.pair_indices = []
        for pair in self.pairs:
            try:
                fg = scene.index_of(pair.foreground_id)
                bg = scene.index_of(pair.background_id)
            except KeyError as e:
                raise ValueError(f"occlusion pair references unknown object id {e.args[0]}") from e
            self.pair_indices.append((fg, bg))
        self.pair_weights = [
            arbitration_weight(self.depths[fg], self.depths[bg], cfg) for fg, bg in self.pair_indices
        ]
        logger.debug("loss context: %d objects, %d arbitration pairs", len(scene.objects), len(self.pairs))

    def _maps(self, field: AttentionField | np.ndarray) -> np.ndarray:
        maps = field.maps if isinstance(field, AttentionField) else np.asarray(field, dtype=np.float64)
        expected = (len(self.scene.objects), *self.scene.shape)
        if maps.shape != expected:
            raise ShapeMismatchError(f"field shape {maps.shape} does not match scene {expected}")
        return maps

    def _energies(self, maps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        split = np.array([masked_energies(values, mask) for values, mask in zip(maps, self.masks)])
        return split[:, 0], split[:, 1]

    def _moments(self, maps: np.ndarray):
        eps = self.cfg.epsilon
        # normalize_map without re-validating every perturbed field
        norm = np.stack([values / (attention_mass(values, mask) + eps) for values, mask in zip(maps, self.masks)])
        mu = [spatial_mean(n, self.coords) for n in norm]
        var = np.array([spatial_variance(n, self.coords, m) for n, m in zip(norm, mu)])
        mu_x = np.array([m[0] for m in mu])
        mu_y = np.array([m[1] for m in mu])
        dist2 = (self.coords.px - mu_x[:, None, None]) ** 2 + (self.coords.py - mu_y[:, None, None]) ** 2
        return norm, mu_x, mu_y, dist2, var

    def align_terms(self, maps: np.ndarray):
        e_in, e_out = self._energies(maps)
        f = np.array([alignment_ratio(a, b, self.cfg.epsilon) for a, b in zip(e_in, e_out)])
        return float((self.depths * (1.0 - f) ** 2).sum()), f, e_in, e_out

    def ortho_terms(self, maps: np.ndarray) -> tuple[float, list[PairTerm]]:
        terms = []
        value = 0.0
        for pair, (fg, bg), weight in zip(self.pairs, self.pair_indices, self.pair_weights):
            i_value = float((maps[bg] * self.masks[fg]).sum() / (self.mask_sizes[fg] + self.cfg.epsilon))
            terms.append(PairTerm(pair.foreground_id, pair.background_id, i_value, weight))
            value += weight * i_value
        return value, terms

    def compact_terms(self, maps: np.ndarray):
        _, mu_x, mu_y, _, var = self._moments(maps)
        return float((self.depths * var).sum()), mu_x, mu_y, var

    def weights(self, stage: int) -> tuple[float, float, float]:
        """Multipliers of (align, ortho, compact) in the stage objective."""
        if stage not in (Stage.Structural, Stage.Textural):
            raise ValueError(f"stage must be 1 or 2, got {stage}")
        cfg = self.cfg
        w_align = 1.0 if cfg.use_align else 0.0
        w_ortho = cfg.lambda_ortho if (cfg.use_ortho and stage == Stage.Structural) else 0.0
        w_compact = cfg.lambda_compact if cfg.use_compact else 0.0
        return w_align, w_ortho, w_compact

    def breakdown(self, field: AttentionField | np.ndarray, stage: int) -> LossBreakdown:
        maps = self._maps(field)
        align, f, e_in, e_out = self.align_terms(maps)
        ortho, pair_terms = self.ortho_terms(maps)
        compact, mu_x, mu_y, var = self.compact_terms(maps)
        w_align, w_ortho, w_compact = self.weights(stage)
        total = w_align * align + w_ortho * ortho + w_compact * compact
        return LossBreakdown(
            stage=stage,
            align=align,
            ortho=ortho,
            compact=compact,
            total=total,
            f=tuple(float(v) for v in f),
            e_in=tuple(float(v) for v in e_in),
            e_out=tuple(float(v) for v in e_out),
            pairs=tuple(pair_terms),
            mu=tuple((float(x), float(y)) for x, y in zip(mu_x, mu_y)),
            var=tuple(float(v) for v in var),
        )

    def total(self, field: AttentionField | np.ndarray, stage: int) -> float:
        return self.breakdown(field, stage).total

    def grad_align(self, field: AttentionField | np.ndarray) -> np.ndarray:
        maps = self._maps(field)
        e_in, e_out = self._energies(maps)
        denom = (e_in + e_out + self.cfg.epsilon)[:, None, None]
        f = e_in[:, None, None] / denom
        df = self.masks / denom - e_in[:, None, None] / denom**2
        return -2.0 * self.depths[:, None, None] * (1.0 - f) * df

    def grad_ortho(self, field: AttentionField | np.ndarray) -> np.ndarray:
        maps = self._maps(field)
        grad = np.zeros_like(maps)
        for (fg, bg), weight in zip(self.pair_indices, self.pair_weights):
            grad[bg] += weight * self.masks[fg] / (self.mask_sizes[fg] + self.cfg.epsilon)
        return grad

    def grad_compact(self, field: AttentionField | np.ndarray) -> np.ndarray:
        maps = self._maps(field)
        norm, mu_x, mu_y, dist2, _ = self._moments(maps)
        mass = norm.sum(axis=(1, 2))
        e_in, e_out = self._energies(maps)
        denom = (e_in + e_out + self.cfg.epsilon)[:, None, None]
        g = dist2 + 2.0 * (mass - 1.0)[:, None, None] * (
            mu_x[:, None, None] * self.coords.px + mu_y[:, None, None] * self.coords.py
        )
        centered = g - (g * norm).sum(axis=(1, 2))[:, None, None]
        return self.depths[:, None, None] * centered / denom

    def gradient(self, field: AttentionField | np.ndarray, stage: int) -> np.ndarray:
        """dL_t/dA_k(x, y) for every object k, as a K x H x W array."""
        maps = self._maps(field)
        w_align, w_ortho, w_compact = self.weights(stage)
        grad = np.zeros_like(maps)
        if w_align:
            grad += w_align * self.grad_align(maps)
        if w_ortho:
            grad += w_ortho * self.grad_ortho(maps)
        if w_compact:
            grad += w_compact * self.grad_compact(maps)
        return grad


def loss_align(field: AttentionField, scene: SceneSpec, cfg: GuidanceConfig) -> tuple[float, tuple[float, ...]]:
    field.check_aligned(scene)
    value, f, _, _ = LossContext(scene, [], cfg).align_terms(field.maps)
    return value, tuple(float(v) for v in f)


def loss_ortho(
    field: AttentionField, scene: SceneSpec, pairs: list[OcclusionPair], cfg: GuidanceConfig
) -> tuple[float, tuple[PairTerm, ...]]:
    field.check_aligned(scene)
    value, terms = LossContext(scene, pairs, cfg).ortho_terms(field.maps)
    return value, tuple(terms)


def loss_compact(
    field: AttentionField, scene: SceneSpec, cfg: GuidanceConfig
) -> tuple[float, tuple[tuple[float, float], ...], tuple[float, ...]]:
    field.check_aligned(scene)
    value, mu_x, mu_y, var = LossContext(scene, [], cfg).compact_terms(field.maps)
    mu = tuple((float(x), float(y)) for x, y in zip(mu_x, mu_y))
    return value, mu, tuple(float(v) for v in var)


def staged_loss(
    field: AttentionField, scene: SceneSpec, pairs: list[OcclusionPair], cfg: GuidanceConfig, stage: int
) -> LossBreakdown:
    field.check_aligned(scene)
    return LossContext(scene, pairs, cfg).breakdown(field, stage)


def grad_staged_loss(
    field: AttentionField, scene: SceneSpec, pairs: list[OcclusionPair], cfg: GuidanceConfig, stage: int
) -> np.ndarray:
    field.check_aligned(scene)
    return LossContext(scene, pairs, cfg).gradient(field, stage)
