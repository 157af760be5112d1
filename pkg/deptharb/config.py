"""Guidance hyperparameters, presets and config merging"""

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

from deptharb.errors import ConfigError


class Preset:
    Main = "main"
    Appendix = "appendix"


# "main" is the default weighting; "appendix" swaps the two weights.
PRESETS: dict[str, dict[str, float]] = {
    Preset.Main: {"lambda_ortho": 0.5, "lambda_compact": 0.2},
    Preset.Appendix: {"lambda_ortho": 0.2, "lambda_compact": 0.5},
}


@dataclass(frozen=True)
class GuidanceConfig:
    lambda0: float = 0.5
    alpha: float = 1.0
    tau: float = 1.0
    lambda_ortho: float = 0.5
    lambda_compact: float = 0.2
    epsilon: float = 1e-8
    eta0: float = 0.1
    eta_decay: float = 1.0
    stage1_fraction: float = 0.5
    total_steps: int = 100
    inner_iters: int = 1
    use_align: bool = True
    use_ortho: bool = True
    use_compact: bool = True

    def __post_init__(self):
        checks = (
            ("lambda0", self.lambda0 > 0, "must be > 0"),
            ("tau", self.tau > 0, "must be > 0"),
            ("epsilon", self.epsilon > 0, "must be > 0"),
            ("lambda_ortho", self.lambda_ortho >= 0, "must be >= 0"),
            ("lambda_compact", self.lambda_compact >= 0, "must be >= 0"),
            ("stage1_fraction", 0 <= self.stage1_fraction <= 1, "must be in [0, 1]"),
            ("eta0", self.eta0 >= 0, "must be >= 0"),
            ("eta_decay", 0 < self.eta_decay <= 1, "must be in (0, 1]"),
            ("total_steps", self.total_steps >= 0, "must be >= 0"),
            ("inner_iters", self.inner_iters >= 1, "must be >= 1"),
        )
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(f"{message}, got {getattr(self, name)!r}", field=name)

    @classmethod
    def from_preset(cls, name: str) -> "GuidanceConfig":
        if name not in PRESETS:
            raise ConfigError(
                f"unknown preset {name!r}, choose from {sorted(PRESETS)}", field="preset"
            )
        return cls(**PRESETS[name])


def _field_types() -> dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(GuidanceConfig)}


def _coerce(name: str, value: Any, kind: Any) -> Any:
    """Converts a JSON/flag value to the field type, rejecting lossy casts."""
    if kind in (bool, "bool"):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"expected a boolean, got {value!r}", field=name)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=name)
    if kind in (int, "int"):
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", field=name)
        return int(value)
    return float(value)


def merge_config(base: GuidanceConfig, overrides: Mapping[str, Any] | None) -> GuidanceConfig:
    """Returns base with the given partial overrides applied and re-validated."""
    if not overrides:
        return base
    types = _field_types()
    changes = {}
    for name, value in overrides.items():
        if name not in types:
            raise ConfigError("unknown config key", field=name)
        changes[name] = _coerce(name, value, types[name])
    return dataclasses.replace(base, **changes)


def config_to_dict(cfg: GuidanceConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)
