"""
Report envelopes, checksums and rendering.

Every command produces a body dict. The envelope adds the schema version,
the engine version, the command name and a SHA-256 checksum of the body so
that repeated runs with the same inputs are byte-comparable.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from fqlab.engine.constants import LAB
from fqlab.engine.errors import BadParams
from fqlab.models.io import canonical_json
from fqlab.models.schema import ChainRecord

CHAIN_COLUMNS: List[str] = list(ChainRecord.model_fields)
FORMATS = ("structured", "table", "csv")


def generate_checksum(data: dict) -> str:
    """
    SHA-256 over the sorted-key JSON of `data`. A timestamp key, when
    present, is left out so identical inputs give identical checksums.
    """
    stable_data = {k: v for k, v in data.items() if k not in ("timestamp",)}
    canonical = json.dumps(stable_data, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ChainReport:
    """One tensor pushed through the whole invariant chain."""
    record: ChainRecord
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"record": self.record.model_dump(), "details": self.details}


def envelope(command: str, body: dict) -> dict:
    return {
        "schema_version": LAB.CSV_SCHEMA_VERSION,
        "version": LAB.VERSION,
        "command": command,
        "body": body,
        "checksum": generate_checksum(body),
    }


def records_frame(records: Sequence[ChainRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=CHAIN_COLUMNS, dtype=object)


def _flat_frame(body: dict) -> pd.DataFrame:
    """Key/value view of a nested body for table and csv output."""
    flat = pd.json_normalize(body, sep=".")
    if flat.empty:
        return pd.DataFrame(columns=["key", "value"])
    row = flat.iloc[0]
    return pd.DataFrame({"key": list(row.index), "value": [_cell(v) for v in row.values]})


def _cell(value: Any) -> str:
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True, default=str, separators=(",", ":"))
    return "" if value is None else str(value)


def render(
    command: str,
    body: dict,
    fmt: str = "structured",
    rows: Optional[pd.DataFrame] = None,
) -> str:
    """
    Render a command result.

    Args:
        body: the full report body (always what the checksum covers).
        fmt: structured | table | csv.
        rows: tabular view of the body; a key/value flattening is used when
            the command has no natural rows.
    """
    if fmt not in FORMATS:
        raise BadParams(f"Unknown format '{fmt}'. Must be one of: {list(FORMATS)}")
    if fmt == "structured":
        return canonical_json(envelope(command, body))

    frame = rows if rows is not None else _flat_frame(body)
    if fmt == "table":
        return frame.to_string(index=False) + "\n"
    header = f"# fqlab-csv schema={LAB.CSV_SCHEMA_VERSION} command={command} checksum={generate_checksum(body)}\n"
    return header + frame.to_csv(index=False, lineterminator="\n")
