"""
Fixed constants of the fqlab engine.
These are versioned together with the report schema; changing any of them
changes the bytes of emitted reports.
"""

from dataclasses import dataclass
from typing import Tuple

# ─── Dimension-estimation acceptance window ───
# N(K) must lie within this factor range of the extrapolated count.
CERTAINTY_WINDOW: Tuple[float, float] = (0.25, 4.0)


@dataclass(frozen=True)
class LabConstants:
    """Immutable engine constants."""

    VERSION: str = "fqlab-1.0"
    CSV_SCHEMA_VERSION: str = "1"

    # ─── Field construction ───
    MAX_FIELD_SIZE: int = 2 ** 16

    # ─── Packed kernel ───
    PACKED_WORD_BITS: int = 64

    # ─── Search defaults (overridable through Settings) ───
    DEFAULT_K: int = 3
    STRATA_BUDGET: int = 2 ** 28
    MINRANK_BUDGET: int = 2 ** 20
    EXHAUSTIVE_BUDGET: int = 2 ** 26
    SLICERANK_BUDGET: int = 2 ** 24
    GREEDY_BUDGET: int = 2 ** 16
    GREEDY_SAMPLES: int = 2 ** 12
    ORACLE_BUDGET: int = 2 ** 20

    # Linear sections bounding rank loci: points per check, full checks,
    # screened subspaces and the largest extension the subspaces live in
    SECTION_BUDGET: int = 2 ** 20
    SECTION_TRIES: int = 16
    SECTION_CANDIDATES: int = 512
    SECTION_EXTENSION: int = 2

    # Hyperplane candidates per mode in the greedy slice-rank peel
    PEEL_CANDIDATES: int = 256


LAB = LabConstants()
