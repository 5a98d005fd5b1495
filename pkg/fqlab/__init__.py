"""
fqlab: exact tensor rank laboratory over finite fields.
Subrank, geometric rank, slice and partition rank, bias and analytic rank
of small tensors over GF(p^m), with checkable certificates.
"""

__version__ = "1.0.0"

from fqlab.engine.gf import build_field, parse_field
from fqlab.engine.slicerank import partition_rank, slice_rank_exact, slice_rank_upper
from fqlab.engine.strata import bias_and_ar, geometric_rank
from fqlab.engine.subrank import check_certificate, subrank_report
from fqlab.engine.tensor import FqTensor, family

__all__ = [
    "__version__",
    "build_field",
    "parse_field",
    "FqTensor",
    "family",
    "geometric_rank",
    "bias_and_ar",
    "subrank_report",
    "check_certificate",
    "slice_rank_exact",
    "slice_rank_upper",
    "partition_rank",
]
