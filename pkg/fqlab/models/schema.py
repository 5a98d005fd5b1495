"""
File and report models for fqlab.
Models: TensorFile, CertificateFile, DecompositionFile, ChainRecord, ExperimentConfig.
Validation happens here so the engine only ever sees well-formed inputs.
"""

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from fqlab.engine.errors import BadParams
from fqlab.engine.gf import parse_field
from fqlab.engine.subrank import SubrankCertificate
from fqlab.engine.slicerank import SliceDecomposition, SliceTerm
from fqlab.engine.tensor import FAMILIES, FqTensor


# Families whose shape comes from dims rather than from their own parameters
SHAPED_FAMILIES = ("random", "zero")


def _field_name(value: str) -> str:
    return parse_field(value).name


# ─── Persistence Models ───

class TensorFile(BaseModel):
    """A dense tensor: field "p^m", dims, row-major entries."""
    field: str = Field(..., description="Field as p or p^m")
    dims: List[int] = Field(..., description="Mode dimensions, each >= 1")
    entries: List[int] = Field(..., description="Row-major canonical field elements")

    @field_validator("field")
    @classmethod
    def validate_field(cls, v: str) -> str:
        return _field_name(v)

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: List[int]) -> List[int]:
        if any(n < 1 for n in v):
            raise ValueError(f"Every dimension must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def validate_entries(self) -> "TensorFile":
        size = int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1
        if len(self.entries) != size:
            raise ValueError(f"{len(self.entries)} entries do not fill dims {self.dims}")
        q = parse_field(self.field).q
        bad = [e for e in self.entries if not 0 <= e < q]
        if bad:
            raise ValueError(f"Entries {bad[:5]} outside GF({self.field})")
        return self

    def to_tensor(self) -> FqTensor:
        return FqTensor.from_entries(parse_field(self.field), self.dims, self.entries)

    @classmethod
    def from_tensor(cls, T: FqTensor) -> "TensorFile":
        return cls(field=T.field.name, dims=list(T.dims), entries=T.entries)


class CertificateFile(BaseModel):
    """A subrank certificate together with the tensor shape it was made for."""
    field: str
    dims: List[int]
    c: int = Field(..., ge=0)
    u: List[List[List[int]]] = Field(..., description="u[i][j]: covector j on mode i+1")
    coeff: List[List[int]] = Field(..., description="Slice recombination coefficients")

    @field_validator("field")
    @classmethod
    def validate_field(cls, v: str) -> str:
        return _field_name(v)

    @model_validator(mode="after")
    def validate_shape(self) -> "CertificateFile":
        if len(self.u) != len(self.dims) - 1:
            raise ValueError(f"Need {len(self.dims) - 1} covector modes, got {len(self.u)}")
        if len(self.coeff) != self.c or any(len(mode) != self.c for mode in self.u):
            raise ValueError(f"Certificate of size {self.c} needs {self.c} vectors per mode")
        return self

    def to_certificate(self) -> SubrankCertificate:
        return SubrankCertificate(self.c, self.u, self.coeff)

    @classmethod
    def from_certificate(cls, T: FqTensor, cert: SubrankCertificate) -> "CertificateFile":
        data = cert.to_dict()
        return cls(field=T.field.name, dims=list(T.dims), c=cert.c, u=data["u"], coeff=data["coeff"])


class SliceTermModel(BaseModel):
    mode: int = Field(..., ge=1)
    vector: List[int]
    cofactor: List[int] = Field(..., description="Row-major cofactor over the other modes")


class DecompositionFile(BaseModel):
    """A slice decomposition stored for replay."""
    field: str
    dims: List[int]
    terms: List[SliceTermModel] = Field(default_factory=list)

    @field_validator("field")
    @classmethod
    def validate_field(cls, v: str) -> str:
        return _field_name(v)

    def to_decomposition(self) -> SliceDecomposition:
        F = parse_field(self.field)
        terms = []
        for t in self.terms:
            if not 1 <= t.mode <= len(self.dims):
                raise ValueError(f"Term mode {t.mode} outside 1..{len(self.dims)}")
            rest = [n for i, n in enumerate(self.dims) if i != t.mode - 1]
            terms.append(
                SliceTerm(t.mode, np.asarray(t.vector, dtype=np.int64), np.asarray(t.cofactor, dtype=np.int64).reshape(rest))
            )
        return SliceDecomposition(F, tuple(self.dims), terms)

    @classmethod
    def from_decomposition(cls, dec: SliceDecomposition) -> "DecompositionFile":
        return cls.model_validate(dec.to_dict())


# ─── Report Rows ───

class ChainRecord(BaseModel):
    """One row of the inequality-chain report."""
    name: str
    field: str
    dims: str
    q_lower: Optional[int] = None
    q_upper: Optional[int] = None
    q_exact: Optional[int] = None
    gr: Optional[int] = None
    gr_certain: Optional[bool] = None
    sr: Optional[int] = None
    pr_lower: Optional[int] = None
    pr_upper: Optional[int] = None
    ar_z: Optional[str] = None
    ar_e: Optional[int] = None
    ar: Optional[float] = None
    bias: Optional[str] = None
    gr_bound_infinite: Optional[int] = None
    gr_bound_finite: Optional[str] = None
    covering_m: Optional[int] = None
    covering_bound: Optional[str] = None
    q_le_gr: str = "unknown"
    gr_le_sr: str = "unknown"
    gr_le_inf_bound: str = "diagnostic"
    errors: str = ""


# ─── Experiment Configuration ───

class ExperimentConfig(BaseModel):
    """Everything a command needs to rebuild its tensor and budgets."""
    field: str = "2"
    dims: Optional[List[int]] = None
    family: str = "identity"
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    K: int = Field(3, ge=1)
    strata_budget: Optional[int] = None
    exhaustive_budget: Optional[int] = None
    greedy_budget: Optional[int] = None
    minrank_budget: Optional[int] = None
    slicerank_budget: Optional[int] = None
    C1: float = 1.0
    C2: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    format: Literal["table", "csv", "structured"] = "structured"
    workers: Optional[int] = None

    @field_validator("field")
    @classmethod
    def validate_field(cls, v: str) -> str:
        return _field_name(v)

    @field_validator("family")
    @classmethod
    def validate_family(cls, v: str) -> str:
        if v not in FAMILIES:
            raise ValueError(f"Unknown family '{v}'. Must be one of: {sorted(FAMILIES)}")
        return v

    @model_validator(mode="after")
    def validate_budgets_and_seed(self) -> "ExperimentConfig":
        for name in ("strata_budget", "exhaustive_budget", "greedy_budget", "minrank_budget", "slicerank_budget"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.family == "random" and self.seed is None and "seed" not in self.params:
            raise ValueError("The random family needs an explicit seed")
        if min(self.C1, self.C2, self.c1, self.c2) <= 0:
            raise ValueError("Diagnostic constants must be positive")
        return self

    def family_params(self) -> Dict[str, Any]:
        """
        Raises:
            BadParams: dims given for a family whose shape is fixed by its parameters.
        """
        params = dict(self.params)
        if self.dims is not None:
            if self.family not in SHAPED_FAMILIES:
                raise BadParams(
                    f"--dims applies to the {' and '.join(SHAPED_FAMILIES)} families, not '{self.family}'"
                )
            params.setdefault("dims", list(self.dims))
        if self.family == "random" and self.seed is not None:
            params.setdefault("seed", self.seed)
        return params
