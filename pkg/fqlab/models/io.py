"""
Reading and writing tensors, certificates and decompositions.

Tensor files are sorted-key JSON documents. The compact one-line form
`p^m|n1,n2,...|e1 e2 ...` is accepted anywhere a tensor is read; `-` reads
from stdin.
"""

import json
import sys
from pathlib import Path
from typing import Any, Union

from pydantic import ValidationError

from fqlab.engine.errors import BadParams
from fqlab.engine.slicerank import SliceDecomposition
from fqlab.engine.subrank import SubrankCertificate
from fqlab.engine.tensor import FqTensor
from fqlab.models.schema import CertificateFile, DecompositionFile, TensorFile

PathLike = Union[str, Path]


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, default=str) + "\n"


def _read_text(path: PathLike) -> str:
    if str(path) == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _validated(model, payload: dict):
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        raise BadParams(f"Invalid {model.__name__}: {exc.errors()[0]['msg']}") from exc


# ─── Tensors ───

def tensor_to_compact(T: FqTensor) -> str:
    dims = ",".join(str(n) for n in T.dims)
    return f"{T.field.name}|{dims}|{' '.join(str(e) for e in T.entries)}"


def parse_compact(text: str) -> FqTensor:
    """
    Raises:
        BadParams: the line does not have three `|`-separated parts.
    """
    parts = text.strip().split("|")
    if len(parts) != 3:
        raise BadParams(f"Compact tensors look like 'p^m|n1,n2|e1 e2 ...', got {text.strip()[:40]!r}")
    field_text, dims_text, entries_text = parts
    try:
        dims = [int(n) for n in dims_text.split(",") if n.strip()]
        entries = [int(e) for e in entries_text.split()]
    except ValueError as exc:
        raise BadParams(f"Compact tensor has a non-integer token: {exc}") from exc
    return _validated(TensorFile, {"field": field_text.strip(), "dims": dims, "entries": entries}).to_tensor()


def parse_tensor_text(text: str) -> FqTensor:
    """JSON document or compact line, decided by the first character."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise BadParams(f"Tensor file is not valid JSON: {exc}") from exc
        return _validated(TensorFile, payload).to_tensor()
    return parse_compact(stripped)


def read_tensor(path: PathLike) -> FqTensor:
    return parse_tensor_text(_read_text(path))


def write_tensor(T: FqTensor, path: PathLike, compact: bool = False) -> None:
    text = tensor_to_compact(T) + "\n" if compact else canonical_json(TensorFile.from_tensor(T).model_dump())
    Path(path).write_text(text, encoding="utf-8")


# ─── Certificates and Decompositions ───

def write_certificate(T: FqTensor, cert: SubrankCertificate, path: PathLike) -> None:
    Path(path).write_text(canonical_json(CertificateFile.from_certificate(T, cert).model_dump()), encoding="utf-8")


def read_certificate(path: PathLike) -> CertificateFile:
    try:
        payload = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise BadParams(f"Certificate file is not valid JSON: {exc}") from exc
    return _validated(CertificateFile, payload)


def write_decomposition(dec: SliceDecomposition, path: PathLike) -> None:
    Path(path).write_text(canonical_json(DecompositionFile.from_decomposition(dec).model_dump()), encoding="utf-8")


def read_decomposition(path: PathLike) -> SliceDecomposition:
    try:
        payload = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise BadParams(f"Decomposition file is not valid JSON: {exc}") from exc
    stored = _validated(DecompositionFile, payload)
    try:
        return stored.to_decomposition()
    except ValueError as exc:
        raise BadParams(f"Invalid decomposition: {exc}") from exc
