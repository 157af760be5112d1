"""
Attention dumps and JSON run reports.

Dump layout, all little-endian:
  b"DARB" | version u16 (=1) | H u32 | W u32 | K u32 | seed u64 |
  K*H*W float32 values, object-major then row-major.
"""

import datetime
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from deptharb.attention import AttentionField
from deptharb.config import GuidanceConfig, config_to_dict
from deptharb.errors import DumpFormatError
from deptharb.losses import LossBreakdown
from deptharb.metrics import MetricReport

logger = logging.getLogger(__name__)

MAGIC = b"DARB"
VERSION = 1
HEADER = struct.Struct("<4sHIIIQ")
PAYLOAD_DTYPE = np.dtype("<f4")

REPORT_KEYS = ("losses", "per_object", "per_pair", "metrics", "config", "seed", "timestamp")


def encode_dump(field: AttentionField, seed: int) -> bytes:
    k, h, w = field.maps.shape
    header = HEADER.pack(MAGIC, VERSION, h, w, k, seed)
    # float64 -> float32 casts round to nearest-even.
    return header + field.maps.astype(PAYLOAD_DTYPE).tobytes(order="C")


def decode_dump(data: bytes) -> tuple[AttentionField, int]:
    if len(data) < HEADER.size:
        raise DumpFormatError(f"dump is {len(data)} bytes, shorter than its {HEADER.size}-byte header")
    magic, version, h, w, k, seed = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DumpFormatError(f"unsupported dump version {version}, expected {VERSION}")
    expected = HEADER.size + k * h * w * PAYLOAD_DTYPE.itemsize
    if len(data) != expected:
        raise DumpFormatError(f"dump is {len(data)} bytes, header implies {expected}")
    values = np.frombuffer(data, dtype=PAYLOAD_DTYPE, offset=HEADER.size).reshape(k, h, w)
    try:
        return AttentionField(values.astype(np.float64)), seed
    except ValueError as e:
        raise DumpFormatError(f"dump payload rejected: {e}") from e


def write_dump(path: str | Path, field: AttentionField, seed: int) -> None:
    Path(path).write_bytes(encode_dump(field, seed))
    logger.info("wrote attention dump %s", path)


def read_dump(path: str | Path) -> tuple[AttentionField, int]:
    return decode_dump(Path(path).read_bytes())


def _number(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def build_report(
    breakdown: LossBreakdown,
    metrics: MetricReport,
    cfg: GuidanceConfig,
    seed: int,
    object_ids: list[int],
    metric_losses: LossBreakdown | None = None,
    mode: str | None = None,
) -> dict[str, Any]:
    """
    Report dict with the fixed key set; floats stay lossless.

    metric_losses is the breakdown of the field the metrics were taken on
    (mean interference and mean variance come from it); it defaults to
    breakdown. mode, when given, is echoed inside the config block.
    """
    coverage = {(c.foreground_id, c.background_id): c.focr for c in metrics.pairs}
    if metric_losses is None:
        metric_losses = breakdown
    config = config_to_dict(cfg)
    if mode is not None:
        config["mode"] = mode
    report = {
        "losses": {
            "stage": breakdown.stage,
            "align": _number(breakdown.align),
            "ortho": _number(breakdown.ortho),
            "compact": _number(breakdown.compact),
            "total": _number(breakdown.total),
        },
        "per_object": [
            {
                "id": object_id,
                "f": _number(breakdown.f[k]),
                "e_in": _number(breakdown.e_in[k]),
                "e_out": _number(breakdown.e_out[k]),
                "mu": [_number(breakdown.mu[k][0]), _number(breakdown.mu[k][1])],
                "var": _number(breakdown.var[k]),
                "miou": _number(metrics.layout.per_object[k]),
            }
            for k, object_id in enumerate(object_ids)
        ],
        "per_pair": [
            {
                "foreground_id": p.foreground_id,
                "background_id": p.background_id,
                "interference": _number(p.interference),
                "weight": _number(p.weight),
                "focr": _number(coverage.get((p.foreground_id, p.background_id))),
            }
            for p in breakdown.pairs
        ],
        "metrics": {
            "miou_fg": _number(metrics.layout.miou_fg),
            "miou_bg": _number(metrics.layout.miou_bg),
            "miou_all": _number(metrics.layout.miou_all),
            "miou_overlap": _number(metrics.miou_overlap),
            "focr_mean": _number(metrics.focr_mean),
            "mean_interference": _number(metric_losses.mean_interference),
            "mean_variance": _number(metric_losses.mean_variance),
            "rel_threshold": metrics.rel_threshold,
            # Need CLIP and a VLM judge; never computed here.
            "bor": None,
            "fbs": None,
        },
        "config": config,
        "seed": seed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return report


def comparable(report: dict[str, Any]) -> dict[str, Any]:
    """The report without its timestamp, for determinism comparisons."""
    return {key: value for key, value in report.items() if key != "timestamp"}


def report_to_json(report: dict[str, Any]) -> str:
    # json writes floats with repr: shortest round-trip form, at most 17 significant digits.
    return json.dumps(report, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_report(path: str | Path, report: dict[str, Any]) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")
    logger.info("wrote report %s", path)


def quantize_field(field: AttentionField) -> AttentionField:
    """The field exactly as a dump stores it, so metrics agree before and after a round trip."""
    return AttentionField(field.maps.astype(PAYLOAD_DTYPE).astype(np.float64))
