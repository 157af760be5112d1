"""Depth-aware attention arbitration engine"""

from pathlib import Path

CANONICAL_SCENE = Path(__file__).parent / "scenes" / "canonical.json"
