"""
Experiment runners behind the `ranks` and `exp` commands.

Each runner returns a plain body dict (plus row data where the command is
tabular). Hard inequalities are checked only when both sides are known
exactly; a failed check raises InvariantViolation. Every other engine error
is recorded in the report and the runner carries on.
"""

from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fqlab.config.settings import load_lab_config
from fqlab.engine.errors import BadParams, BudgetExceeded, DegreeTooLarge, InvariantViolation, LabError
from fqlab.engine.fqlinalg import rank
from fqlab.engine.gf import parse_field
from fqlab.engine.slicerank import partition_rank, slice_rank_exact, slice_rank_upper
from fqlab.engine.strata import (
    GeometricRank,
    ar_stability_ratio,
    bias_and_ar,
    finite_field_gr_bound,
    geometric_rank,
    gr_upper_via_counting,
    infinite_field_gr_bound,
    low_rank_covering,
)
from fqlab.engine.subrank import (
    SubrankOptions,
    check_certificate,
    kron_certificate,
    lift_certificate,
    subrank_exhaustive,
    subrank_over_extension,
    subrank_report,
)
from fqlab.engine.tensor import FqTensor, direct_sum, extend_field, family, flatten, kronecker
from fqlab.harness.reports import ChainReport
from fqlab.models.schema import ChainRecord, ExperimentConfig
from fqlab.observability import logger

PASS = "pass"
UNKNOWN = "unknown"


# ─── Helpers ───

def tensor_from_config(cfg: ExperimentConfig) -> FqTensor:
    return family(cfg.family, parse_field(cfg.field), **cfg.family_params())


def subrank_options(cfg: ExperimentConfig) -> SubrankOptions:
    return SubrankOptions(
        K=cfg.K,
        greedy_budget=cfg.greedy_budget,
        exhaustive_budget=cfg.exhaustive_budget,
        minrank_budget=cfg.minrank_budget,
        strata_budget=cfg.strata_budget,
        seed=cfg.seed or 0,
        workers=cfg.workers,
    )


def _attempt(errors: List[str], step: str, fn: Callable[..., Any], *args, **kwargs) -> Any:
    """Run one engine step; record a LabError and return None instead of raising."""
    try:
        return fn(*args, **kwargs)
    except InvariantViolation:
        raise
    except LabError as exc:
        errors.append(f"{step}: {exc}")
        logger.warning("step_failed", step=step, error=str(exc))
        return None


def check_le(label: str, left: Optional[int], right: Optional[int]) -> str:
    """Verdict for left <= right; only decided when both sides are exact."""
    if left is None or right is None:
        return UNKNOWN
    if left > right:
        raise InvariantViolation(f"{label} failed: {left} > {right}")
    return PASS


def _dims_label(T: FqTensor) -> str:
    return "x".join(str(n) for n in T.dims)


def _min_flattening_rank(T: FqTensor) -> int:
    return min(rank(flatten(T, [i])) for i in range(1, T.order + 1))


# ─── Inequality Chain ───

def run_chain(
    T: FqTensor,
    cfg: ExperimentConfig,
    name: str = "tensor",
    covering: bool = False,
) -> ChainReport:
    """
    Subrank bounds, geometric rank, slice and partition rank, bias and
    analytic rank for one tensor, with the hard chain Q <= GR <= SR checked
    where exact and the quadratic GR bounds reported as diagnostics.
    """
    errors: List[str] = []
    details: Dict[str, Any] = {}
    row: Dict[str, Any] = {"name": name, "field": T.field.name, "dims": _dims_label(T)}

    gr = None
    if T.order >= 2:
        gr = _attempt(errors, "geometric_rank", geometric_rank, T, cfg.K, budget=cfg.strata_budget, workers=cfg.workers)
    if gr is not None:
        row.update(gr=gr.value, gr_certain=gr.certain)
        details["geometric_rank"] = gr.to_dict()
    gr_exact = gr.value if gr is not None and gr.certain else None

    q_exact = None
    if T.order >= 2:
        report = _attempt(errors, "subrank", subrank_report, T, subrank_options(cfg), gr=gr)
        if report is not None:
            q_exact = report.exact
            row.update(q_lower=report.lower, q_upper=report.upper, q_exact=report.exact)
            details["subrank"] = report.to_dict()

    sr_exact = None
    if T.order == 3:
        sr = _attempt(errors, "slice_rank_exact", slice_rank_exact, T, budget=cfg.slicerank_budget, workers=cfg.workers)
        if sr is not None:
            sr_exact = sr.value
            row.update(sr=sr.value, pr_lower=sr.value, pr_upper=sr.value)
            details["slice_rank"] = sr.to_dict()
        else:
            details["slice_rank_upper"] = slice_rank_upper(T).to_dict()
    if T.order != 3 or sr_exact is None:
        pr = _attempt(errors, "partition_rank", partition_rank, T, budget=cfg.slicerank_budget, K=cfg.K, workers=cfg.workers)
        if pr is not None:
            row.update(pr_lower=pr.lower, pr_upper=pr.upper)
            details["partition_rank"] = pr.to_dict()

    bias = None
    if T.order >= 2:
        bias = _attempt(errors, "bias", bias_and_ar, T, budget=cfg.strata_budget, workers=cfg.workers)
    if bias is not None:
        row.update(ar_z=str(bias.Z), ar_e=bias.E, ar=round(bias.analytic_rank, 12), bias=str(bias.bias))
        details["bias"] = bias.to_dict()
        if gr_exact is not None:
            details["ar_stability"] = asdict(ar_stability_ratio(bias.analytic_rank, gr_exact, cfg.C1, cfg.C2))

    if q_exact is not None:
        inf_bound = infinite_field_gr_bound(q_exact)
        row.update(gr_bound_infinite=inf_bound, gr_bound_finite=str(finite_field_gr_bound(q_exact, cfg.c1, cfg.c2)))
        if gr is not None:
            row["gr_le_inf_bound"] = "diagnostic: holds" if gr.value <= inf_bound else "diagnostic: exceeds"

    if covering and T.order == 3 and q_exact:
        cover = _attempt(errors, "covering", low_rank_covering, T, q_exact, budget=cfg.strata_budget, workers=cfg.workers)
        if cover is not None:
            if cover.covers is False:
                raise InvariantViolation(f"Subrank {q_exact} is exact but the low-rank set does not cover")
            row.update(covering_m=cover.m, covering_bound=str(cover.bound))
            details["covering"] = cover.to_dict()

    row["q_le_gr"] = check_le("Q <= GR", q_exact, gr_exact)
    row["gr_le_sr"] = check_le("GR <= SR", gr_exact, sr_exact)
    row["errors"] = "; ".join(errors)
    logger.info("chain_computed", name=name, dims=list(T.dims), field=T.field.name, errors=len(errors))
    return ChainReport(ChainRecord(**row), details)


# ─── Direct Sums ───

def settled_geometric_rank(
    T: FqTensor,
    K: int,
    max_K: int,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> Tuple[GeometricRank, int]:
    """
    geometric_rank at K, raised one degree at a time while the value is
    uncertain, up to max_K. The last result is kept once the next degree
    would leave the budget or the field cap.
    """
    gr = geometric_rank(T, K, budget=budget, workers=workers)
    while not gr.certain and K < max_K:
        try:
            gr = geometric_rank(T, K + 1, budget=budget, workers=workers)
        except (BudgetExceeded, DegreeTooLarge):
            break
        K += 1
    return gr, K


def run_direct_sum(S: FqTensor, T: FqTensor, cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Q(S), Q(T), Q(S ⊕ T) and the superadditivity gap, with the additivity
    of geometric rank checked when all three values are certain. Uncertain
    geometric ranks are recomputed with a larger K, up to
    experiments.direct_sum.max_K.
    """
    opts = subrank_options(cfg)
    settings = load_lab_config().get("experiments", {}).get("direct_sum", {})
    max_K = max(cfg.K, int(settings.get("max_K", cfg.K)))
    ST = direct_sum(S, T)
    errors: List[str] = []
    parts: Dict[str, Any] = {}
    for label, X in (("S", S), ("T", T), ("S+T", ST)):
        settled = _attempt(
            errors, f"geometric_rank[{label}]", settled_geometric_rank,
            X, cfg.K, max_K, budget=cfg.strata_budget, workers=cfg.workers,
        )
        gr, K_used = settled if settled else (None, None)
        report = _attempt(errors, f"subrank[{label}]", subrank_report, X, opts, gr=gr)
        parts[label] = {
            "dims": list(X.dims),
            "q_lower": report.lower if report else None,
            "q_upper": report.upper if report else None,
            "q_exact": report.exact if report else None,
            "gr": gr.value if gr else None,
            "gr_certain": gr.certain if gr else None,
            "K": K_used,
        }

    qs, qt, qst = (parts[k]["q_exact"] for k in ("S", "T", "S+T"))
    gap = None
    if None not in (qs, qt, qst):
        gap = qst - qs - qt
        if gap < 0:
            raise InvariantViolation(f"Q(S ⊕ T) = {qst} is below Q(S) + Q(T) = {qs + qt}")

    grs = [parts[k]["gr"] if parts[k]["gr_certain"] else None for k in ("S", "T", "S+T")]
    additivity = UNKNOWN
    if None not in grs:
        if grs[2] != grs[0] + grs[1]:
            raise InvariantViolation(f"GR(S ⊕ T) = {grs[2]} but GR(S) + GR(T) = {grs[0] + grs[1]}")
        additivity = PASS

    return {
        "field": S.field.name,
        "parts": parts,
        "gap": gap,
        "superadditivity": PASS if gap is not None else UNKNOWN,
        "gr_additivity": additivity,
        "errors": errors,
    }


# ─── Kronecker Growth ───

def run_kron_growth(T: FqTensor, cfg: ExperimentConfig, kmax: Optional[int] = None) -> Dict[str, Any]:
    """
    Certified lower bounds for T^{⊠k}, k = 1..kmax, from composed
    certificates (each re-verified), refined by one exhaustive step when the
    budget allows; upper bounds from flattening ranks and geometric rank.
    """
    settings = load_lab_config().get("experiments", {}).get("kron", {})
    kmax = int(kmax if kmax is not None else settings.get("kmax", 3))
    if kmax < 1:
        raise BadParams(f"kmax must be >= 1, got {kmax}")
    gr_budget = int(settings.get("gr_budget", 1 << 16))

    base = subrank_report(T, subrank_options(cfg))
    rows: List[Dict[str, Any]] = []
    power, cert = T, base.certificate
    for k in range(1, kmax + 1):
        if k > 1:
            cert = kron_certificate(power, cert, T, base.certificate)
            power = kronecker(power, T)
        if not check_certificate(power, cert):
            raise InvariantViolation(f"Composed certificate of size {cert.c} fails on the power k={k}")

        errors: List[str] = []
        lower, lower_method = cert.c, "composed" if k > 1 else base.lower_method
        upper, upper_method = _min_flattening_rank(power), "flattening_rank"
        gr = _attempt(errors, "geometric_rank", geometric_rank, power, cfg.K, budget=gr_budget, workers=cfg.workers)
        if gr is not None and gr.certain and gr.value < upper:
            upper, upper_method = gr.value, "geometric_rank"

        if k > 1 and lower < upper:
            outcome = _attempt(
                errors, "exhaustive", subrank_exhaustive, power, lower + 1, budget=cfg.exhaustive_budget, workers=cfg.workers
            )
            if outcome is not None:
                if outcome.found:
                    lower, lower_method = outcome.r, "exhaustive"
                else:
                    upper, upper_method = lower, "exhaustive"
        if lower > upper:
            raise InvariantViolation(f"Kronecker power k={k}: lower {lower} exceeds upper {upper}")

        rows.append(
            {
                "k": k,
                "dims": _dims_label(power),
                "lower": lower,
                "lower_method": lower_method,
                "upper": upper,
                "upper_method": upper_method,
                "gr": gr.value if gr else None,
                "gr_certain": gr.certain if gr else None,
                "growth": round(lower ** (1.0 / k), 12),
                "errors": "; ".join(errors),
            }
        )
        logger.info("kron_power", k=k, lower=lower, upper=upper)
    return {"field": T.field.name, "base_dims": list(T.dims), "kmax": kmax, "rows": rows}


# ─── Extension Stability ───

def _divisors_before(k: int, done: Dict[int, Any]) -> List[int]:
    return [j for j in sorted(done) if j < k and k % j == 0]


def run_extension_stability(T: FqTensor, cfg: ExperimentConfig, klist: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    """
    Subrank bounds of T over GF(q^k) for every k in klist. Certified lower
    bounds never decrease along subfield chains: a stronger certificate from
    a subfield is lifted and re-verified. Lower bounds above 2Q²+3Q of the
    base field are flagged as anomalies.
    """
    if klist is None:
        klist = load_lab_config().get("experiments", {}).get("extension", {}).get("klist", [1, 2, 4])
    klist = sorted({int(k) for k in klist})
    if not klist or klist[0] < 1:
        raise BadParams(f"Extension degrees must be >= 1, got {klist}")

    opts = subrank_options(cfg)
    errors: List[str] = []
    gr = _attempt(errors, "geometric_rank", geometric_rank, T, cfg.K, budget=cfg.strata_budget, workers=cfg.workers)

    reports: Dict[int, Any] = {}
    unlifted = set()
    rows: List[Dict[str, Any]] = []
    for k in klist:
        report = subrank_over_extension(T, k, opts, gr=gr)
        ext = extend_field(T, k)
        for j in _divisors_before(k, reports):
            earlier = reports[j]
            if earlier.lower <= report.lower or earlier.certificate is None:
                continue
            lifted = lift_certificate(earlier.certificate, extend_field(T, j), k // j)
            if not check_certificate(ext, lifted):
                # GF(q^j) -> GF(q^k) need not commute with GF(q) -> GF(q^k) when q is not prime
                errors.append(f"certificate from k={j} does not carry over to k={k}")
                unlifted.add((j, k))
                continue
            if lifted.c > report.upper:
                raise InvariantViolation(f"Lifted lower bound {lifted.c} exceeds upper bound {report.upper} at k={k}")
            report.lower, report.lower_method, report.certificate = lifted.c, f"lifted from k={j}", lifted
            report.exact = report.lower if report.lower == report.upper else None
        reports[k] = report

        base = report.baseline
        bound = infinite_field_gr_bound(base.upper)
        anomaly = report.lower > bound
        if anomaly:
            logger.warning("extension_anomaly", k=k, lower=report.lower, bound=bound)
        rows.append(
            {
                "k": k,
                "field": ext.field.name,
                "lower": report.lower,
                "lower_method": report.lower_method,
                "upper": report.upper,
                "upper_method": report.upper_method,
                "exact": report.exact,
                "base_bound": bound,
                "anomaly": anomaly,
            }
        )

    for k in klist:
        for j in _divisors_before(k, reports):
            if (j, k) not in unlifted and reports[k].lower < reports[j].lower:
                raise InvariantViolation(f"Lower bound dropped from {reports[j].lower} at k={j} to {reports[k].lower} at k={k}")

    return {
        "field": T.field.name,
        "dims": list(T.dims),
        "gr": gr.value if gr else None,
        "gr_certain": gr.certain if gr else None,
        "rows": rows,
        "errors": errors,
    }


# ─── Seeded Survey ───

def survey_seeds(seed: int, samples: int) -> List[int]:
    """Per-sample seeds spawned from one master seed."""
    return [int(np.random.SeedSequence([seed, i]).generate_state(1)[0]) for i in range(samples)]


def run_survey(
    cfg: ExperimentConfig,
    samples: Optional[int] = None,
    dims: Optional[Sequence[int]] = None,
) -> Tuple[List[ChainRecord], Dict[str, Any]]:
    """One chain row per seeded random tensor."""
    survey = load_lab_config().get("experiments", {}).get("survey", {})
    samples = int(samples if samples is not None else survey.get("samples", 20))
    dims = list(dims or cfg.dims or survey.get("dims", [4, 4, 4]))
    seed = cfg.seed if cfg.seed is not None else survey.get("seed")
    if seed is None:
        raise BadParams("The survey needs an explicit seed")
    if samples < 1:
        raise BadParams(f"samples must be >= 1, got {samples}")

    F = parse_field(cfg.field)
    records: List[ChainRecord] = []
    for i, sample_seed in enumerate(survey_seeds(int(seed), samples)):
        T = family("random", F, dims=dims, seed=sample_seed)
        records.append(run_chain(T, cfg, name=f"sample-{i}", covering=True).record)
    body = {
        "field": F.name,
        "dims": dims,
        "seed": int(seed),
        "samples": samples,
        "rows": [r.model_dump() for r in records],
    }
    return records, body


# ─── Covering ───

def run_covering(T: FqTensor, cfg: ExperimentConfig, c: Optional[int] = None, k: int = 1) -> Dict[str, Any]:
    """
    Low-rank covering data for c (default: the exact subrank when known,
    else the certified lower bound), with the counting bound on GR.
    """
    errors: List[str] = []
    gr = _attempt(errors, "geometric_rank", geometric_rank, T, cfg.K, budget=cfg.strata_budget, workers=cfg.workers)
    q_exact = None
    if c is None:
        report = subrank_report(T, subrank_options(cfg), gr=gr)
        c, q_exact = report.lower, report.exact
    cover = low_rank_covering(T, c, k, budget=cfg.strata_budget, workers=cfg.workers)
    if q_exact is not None and q_exact == c and c >= 1 and cover.covers is False:
        raise InvariantViolation(f"Subrank {c} is exact but the low-rank set does not cover")

    counting = None
    if cover.m >= 1 and k == 1:
        counting = gr_upper_via_counting(T, c, cover.m, cfg.C1, cfg.C2)
    return {
        "field": T.field.name,
        "dims": list(T.dims),
        "covering": cover.to_dict(),
        "q_exact": q_exact,
        "gr": gr.value if gr else None,
        "gr_certain": gr.certain if gr else None,
        "gr_upper_via_counting": counting,
        "errors": errors,
    }
