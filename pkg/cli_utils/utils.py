"""Utility functions shared by the deptharb commands"""

import argparse
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

from deptharb.config import PRESETS, GuidanceConfig, Preset, merge_config
from deptharb.errors import (
    ConfigError,
    DepthArbError,
    DumpFormatError,
    NumericalAbortError,
    SceneValidationError,
    ShapeMismatchError,
)
from deptharb.scene import SceneSpec, parse_scene
from deptharb.surrogate import LatentMode

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "DEPTHARB_THREADS"


class ExitCode:
    Success = 0
    InputError = 1
    NumericalAbort = 2
    GradCheckFailure = 3


class UsageError(DepthArbError):
    pass


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit code 1."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.RawDescriptionHelpFormatter)
        super().__init__(*args, **kwargs)

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


# flag dest -> GuidanceConfig field
CONFIG_FLAGS = {
    "steps": "total_steps",
    "stage1_frac": "stage1_fraction",
    "eta": "eta0",
    "eta_decay": "eta_decay",
    "lambda0": "lambda0",
    "alpha": "alpha",
    "tau": "tau",
    "lambda_ortho": "lambda_ortho",
    "lambda_compact": "lambda_compact",
    "epsilon": "epsilon",
    "inner_iters": "inner_iters",
}


def add_scene_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scene", required=True, metavar="PATH", help="scene JSON file")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags that override GuidanceConfig fields; unset flags leave lower layers alone."""
    group = parser.add_argument_group("guidance config")
    group.add_argument("--preset", choices=sorted(PRESETS), default=None, help="base weights (default: main)")
    group.add_argument("--steps", type=int, default=None, metavar="N")
    group.add_argument("--stage1-frac", type=float, default=None, metavar="F")
    group.add_argument(
        "--eta",
        type=float,
        default=None,
        metavar="F",
        help="base step size eta0 (default 0.1, a gentle step). Raster logits move about eta/(H*W) "
        "per step, so full-strength runs on a 64x64 grid use --eta 4096",
    )
    group.add_argument("--eta-decay", type=float, default=None, metavar="F")
    group.add_argument("--lambda0", type=float, default=None, metavar="F")
    group.add_argument("--alpha", type=float, default=None, metavar="F")
    group.add_argument("--tau", type=float, default=None, metavar="F")
    group.add_argument("--lambda-ortho", type=float, default=None, metavar="F")
    group.add_argument("--lambda-compact", type=float, default=None, metavar="F")
    group.add_argument("--epsilon", type=float, default=None, metavar="F")
    group.add_argument("--inner-iters", type=int, default=None, metavar="N")


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=LatentMode.choices(), default=LatentMode.Raster)
    parser.add_argument("--seed", type=int, default=0, metavar="N")
    parser.add_argument("--rel-threshold", type=float, default=0.5, metavar="F")


def add_verbose_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", action="store_true", help="log engine progress to stderr")


def configure_logging(args: argparse.Namespace) -> None:
    if getattr(args, "verbose", False):
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def load_scene(path: str | Path) -> SceneSpec:
    """Reads and validates a scene file"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SceneValidationError(f"cannot read scene file {path}: {e.strerror or e}", field="scene") from e
    return parse_scene(text)


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        field: getattr(args, dest)
        for dest, field in CONFIG_FLAGS.items()
        if getattr(args, dest, None) is not None
    }


def resolve_config(
    scene: SceneSpec, args: argparse.Namespace, extra: dict[str, Any] | None = None
) -> GuidanceConfig:
    """
    Effective config: preset (or defaults) < scene-file "config" block <
    command-line flags < extra (used by sweeps and ablations).
    """
    base = GuidanceConfig.from_preset(getattr(args, "preset", None) or Preset.Main)
    cfg = merge_config(base, dict(scene.config_overrides))
    cfg = merge_config(cfg, flag_overrides(args))
    return merge_config(cfg, extra)


def check_seed(seed: int) -> int:
    if not 0 <= seed < 2**64:
        raise UsageError(f"--seed must be in [0, 2^64), got {seed}")
    return seed


def check_rel_threshold(value: float) -> float:
    if not 0 < value <= 1:
        raise UsageError(f"--rel-threshold must be in (0, 1], got {value}")
    return value


def parse_csv_floats(text: str) -> list[float]:
    """Parses --values; an empty list is a usage error."""
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise UsageError("--values needs at least one value")
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise UsageError(f"--values must be comma separated numbers: {e}") from e


def thread_cap() -> int:
    """Worker count for fan-out commands, capped by DEPTHARB_THREADS."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return max(os.cpu_count() or 1, 1)
    try:
        value = int(raw)
    except ValueError as e:
        raise UsageError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}") from e
    if value < 1:
        raise UsageError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value


def run_concurrently(func: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """Maps func over items on a thread pool, returning results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def format_value(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def print_table(headers: list[str], rows: list[list[str]]) -> None:
    """Prints a plain-text table with left-aligned columns"""
    widths = [max(len(str(cell)) for cell in column) for column in zip(headers, *rows)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    for row in rows:
        print("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)))


def run_command(command: Callable[[], Any]) -> int:
    """
    Runs a command body and turns engine errors into stable exit codes.
    Returns the body's own exit code when it returns an int.
    """
    try:
        result = command()
    except NumericalAbortError as e:
        print(f"Numerical abort: {e}")
        return ExitCode.NumericalAbort
    except (
        UsageError,
        SceneValidationError,
        ConfigError,
        ShapeMismatchError,
        DumpFormatError,
    ) as e:
        print(f"Error: {e}")
        return ExitCode.InputError
    except OSError as e:
        print(f"Error: {e}")
        return ExitCode.InputError
    return result if isinstance(result, int) else ExitCode.Success
