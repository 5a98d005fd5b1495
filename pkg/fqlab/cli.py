"""
CLI Entrypoint: fqlab
Usage: python -m fqlab <command> [tensor] [flags]

Commands:
  field, tensor make|show, ranks, gr, bias, strata, subrank, slicerank, pr,
  gaussian, exp direct-sum|kron|extension|survey|covering

A tensor argument is a JSON tensor file, a compact one-line tensor file or
`-` for stdin; without one the tensor is built from --family/--dims/--params.
Reports go to stdout (or --out), logs to stderr.

Exit codes: 0 success, 2 budget exhausted, 1 invariant violation or bad input.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from fqlab import __version__
from fqlab.config.settings import get_settings, load_lab_config
from fqlab.engine.errors import BadParams, BudgetExceeded, InvariantViolation, LabError, ShapeMismatch
from fqlab.engine.gf import parse_field
from fqlab.engine.slicerank import partition_rank, slice_rank_exact, slice_rank_oracle, slice_rank_upper
from fqlab.engine.strata import bias_and_ar, gaussian_binomial, geometric_rank, rank_strata
from fqlab.engine.subrank import check_certificate, subrank_report
from fqlab.engine.tensor import FqTensor, family, mode_slices
from fqlab.harness import experiments
from fqlab.harness.reports import records_frame, render
from fqlab.models.io import read_certificate, read_tensor, write_certificate, write_decomposition, write_tensor
from fqlab.models.schema import ExperimentConfig
from fqlab.observability import bind_command, configure_logging, logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BUDGET = 2


@dataclass
class CommandResult:
    body: Dict[str, Any]
    rows: Optional[pd.DataFrame] = None
    exit_code: int = EXIT_OK
    text: Optional[str] = None          # preformatted table output


# ─── Configuration ───

def _parse_dims(text: Optional[str]) -> Optional[List[int]]:
    if not text:
        return None
    try:
        return [int(n) for n in text.split(",") if n.strip()]
    except ValueError as exc:
        raise BadParams(f"--dims expects integers like 2,2,2, got {text!r}") from exc


def _parse_params(text: Optional[str]) -> Dict[str, Any]:
    if not text:
        return {}
    try:
        params = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadParams(f"--params must be a JSON object: {exc}") from exc
    if not isinstance(params, dict):
        raise BadParams("--params must be a JSON object")
    return params


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flags override settings, which override the YAML defaults."""
    settings = get_settings()
    diagnostics = load_lab_config().get("diagnostics", {})
    budget = args.budget
    payload = {
        "field": args.field,
        "dims": _parse_dims(args.dims),
        "family": args.family,
        "params": _parse_params(args.params),
        "seed": args.seed,
        "K": args.K if args.K is not None else settings.DEFAULT_K,
        "strata_budget": budget,
        "exhaustive_budget": budget,
        "greedy_budget": budget,
        "minrank_budget": budget,
        "slicerank_budget": budget,
        "format": args.format,
        "workers": args.workers,
    }
    for name in ("C1", "C2", "c1", "c2"):
        flag = getattr(args, name, None)
        payload[name] = flag if flag is not None else float(diagnostics.get(name, 1.0))
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise BadParams(f"Invalid options: {exc.errors()[0]['msg']}") from exc


def load_tensor(args: argparse.Namespace, cfg: ExperimentConfig) -> FqTensor:
    path = getattr(args, "tensor", None)
    if path:
        return read_tensor(path)
    return experiments.tensor_from_config(cfg)


def _tensor_summary(T: FqTensor) -> Dict[str, Any]:
    return {"field": T.field.name, "dims": list(T.dims)}


# ─── Commands ───

def cmd_field(args, cfg) -> CommandResult:
    F = parse_field(cfg.field)
    return CommandResult(
        {"field": F.name, "p": F.p, "m": F.m, "q": F.q, "modulus": list(F.modulus), "generator": F.generator}
    )


def cmd_tensor_make(args, cfg) -> CommandResult:
    T = experiments.tensor_from_config(cfg)
    if args.out:
        write_tensor(T, args.out, compact=args.compact)
        args.out = None
    body = {**_tensor_summary(T), "family": cfg.family, "params": cfg.family_params(), "entries": T.entries}
    return CommandResult(body)


def _slice_text(T: FqTensor) -> str:
    if T.order < 2:
        return " ".join(str(e) for e in T.entries) + "\n"
    lines = []
    for k, S in enumerate(mode_slices(T)):
        lines.append(f"slice {k + 1}:")
        block = S.reshape(S.shape[0], -1)
        lines.extend(" ".join(str(int(x)) for x in row) for row in block)
    return "\n".join(lines) + "\n"


def cmd_tensor_show(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    body = {**_tensor_summary(T), "nonzero": T.nonzero_count(), "slices": [S.tolist() for S in mode_slices(T)]}
    return CommandResult(body, text=_slice_text(T))


def cmd_ranks(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    report = experiments.run_chain(T, cfg, name=args.name, covering=args.covering)
    return CommandResult(report.to_dict(), rows=records_frame([report.record]))


def cmd_gr(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    gr = geometric_rank(T, cfg.K, budget=cfg.strata_budget, workers=cfg.workers)
    return CommandResult({**_tensor_summary(T), "K": cfg.K, "geometric_rank": gr.to_dict()})


def cmd_bias(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    bias = bias_and_ar(T, budget=cfg.strata_budget, workers=cfg.workers)
    return CommandResult({**_tensor_summary(T), **bias.to_dict()})


def cmd_strata(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    if args.k is not None:
        counts = rank_strata(T, args.k, budget=cfg.strata_budget, workers=cfg.workers)
        rows = pd.DataFrame({"rank": list(counts), "count": [str(n) for n in counts.values()]}, dtype=object)
        return CommandResult({**_tensor_summary(T), "k": args.k, "counts": {str(c): n for c, n in counts.items()}}, rows)
    gr = geometric_rank(T, cfg.K, budget=cfg.strata_budget, workers=cfg.workers)
    data = gr.to_dict()
    rows = pd.DataFrame(data["strata"], dtype=object) if data["strata"] else None
    return CommandResult({**_tensor_summary(T), "K": cfg.K, "profile": data["profile"], "strata": data["strata"]}, rows)


def cmd_subrank(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    if args.check:
        cert_file = read_certificate(args.check)
        if cert_file.field != T.field.name or list(cert_file.dims) != list(T.dims):
            raise ShapeMismatch(
                f"Certificate is for GF({cert_file.field}) {cert_file.dims}, tensor is GF({T.field.name}) {list(T.dims)}"
            )
        valid = check_certificate(T, cert_file.to_certificate())
        body = {**_tensor_summary(T), "certificate": args.check, "c": cert_file.c, "valid": valid}
        return CommandResult(body, exit_code=EXIT_OK if valid else EXIT_FAILURE)

    report = subrank_report(T, experiments.subrank_options(cfg))
    if args.certify and report.certificate is not None:
        write_certificate(T, report.certificate, args.certify)
    return CommandResult({**_tensor_summary(T), "subrank": report.to_dict()})


def cmd_slicerank(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    if args.oracle:
        result = slice_rank_oracle(T)
    elif args.upper or T.order != 3:
        result = slice_rank_upper(T)
    else:
        result = slice_rank_exact(T, budget=cfg.slicerank_budget, workers=cfg.workers)
    if args.decomposition:
        write_decomposition(result.decomposition, args.decomposition)
    return CommandResult({**_tensor_summary(T), "slice_rank": result.to_dict()})


def cmd_pr(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    result = partition_rank(T, budget=cfg.slicerank_budget, K=cfg.K, workers=cfg.workers)
    return CommandResult({**_tensor_summary(T), "partition_rank": result.to_dict()})


def cmd_gaussian(args, cfg) -> CommandResult:
    q = args.q if args.q is not None else parse_field(cfg.field).q
    value = gaussian_binomial(args.c, args.n, q)
    return CommandResult({"c": args.c, "n": args.n, "q": q, "value": str(value)})


def _experiment_tensor(spec: Dict[str, Any], cfg: ExperimentConfig) -> FqTensor:
    return family(spec.get("family", "identity"), parse_field(cfg.field), **spec.get("params", {}))


def cmd_exp_direct_sum(args, cfg) -> CommandResult:
    defaults = load_lab_config().get("experiments", {}).get("direct_sum", {})
    S = read_tensor(args.left) if args.left else _experiment_tensor(defaults.get("left", {"family": "W"}), cfg)
    T = read_tensor(args.right) if args.right else _experiment_tensor(defaults.get("right", {"family": "W"}), cfg)
    return CommandResult(experiments.run_direct_sum(S, T, cfg))


def cmd_exp_kron(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    body = experiments.run_kron_growth(T, cfg, kmax=args.kmax)
    return CommandResult(body, rows=pd.DataFrame(body["rows"], dtype=object))


def cmd_exp_extension(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    klist = _parse_dims(args.klist)
    body = experiments.run_extension_stability(T, cfg, klist=klist)
    return CommandResult(body, rows=pd.DataFrame(body["rows"], dtype=object))


def cmd_exp_survey(args, cfg) -> CommandResult:
    records, body = experiments.run_survey(cfg, samples=args.samples)
    return CommandResult(body, rows=records_frame(records))


def cmd_exp_covering(args, cfg) -> CommandResult:
    T = load_tensor(args, cfg)
    return CommandResult(experiments.run_covering(T, cfg, c=args.c, k=args.k))


# ─── Parser ───

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", default="2", help="Field as p or p^m (default 2).")
    common.add_argument("--dims", default=None, help="Comma-separated dimensions, e.g. 2,2,2.")
    common.add_argument("--family", default="identity", help="Tensor family when no tensor file is given.")
    common.add_argument("--params", default=None, help='Family parameters as JSON, e.g. \'{"r": 3}\'.')
    common.add_argument("--seed", type=int, default=None, help="Seed for random families and searches.")
    common.add_argument("--K", type=int, default=None, help="Extension degrees for point counting.")
    common.add_argument("--budget", type=int, default=None, help="Work budget applied to every search.")
    common.add_argument("--C1", type=float, default=None, help="Diagnostic constant C1.")
    common.add_argument("--C2", type=float, default=None, help="Diagnostic constant C2.")
    common.add_argument("--c1", type=float, default=None, help="Finite-field GR bound constant c1.")
    common.add_argument("--c2", type=float, default=None, help="Finite-field GR bound constant c2.")
    common.add_argument("--out", default=None, help="Write the report here instead of stdout.")
    common.add_argument("--format", choices=["structured", "table", "csv"], default="structured")
    common.add_argument("--workers", type=int, default=None, help="Worker processes for enumeration.")
    logs = common.add_mutually_exclusive_group()
    logs.add_argument("--log-json", dest="log_json", action="store_true", default=None, help="JSON log lines.")
    logs.add_argument("--log-console", dest="log_json", action="store_false", default=None, help="Human-readable log lines.")
    common.add_argument("--log-level", default=None, help="Minimum log level (default from settings).")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="fqlab", description="Exact tensor rank laboratory over finite fields.")
    parser.add_argument("--version", action="version", version=f"fqlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def leaf(subparsers, name: str, handler: Callable, help_text: str, tensor: bool = True) -> argparse.ArgumentParser:
        p = subparsers.add_parser(name, parents=[common], help=help_text)
        if tensor:
            p.add_argument("tensor", nargs="?", default=None, help="Tensor file, or - for stdin.")
        p.set_defaults(handler=handler)
        return p

    leaf(sub, "field", cmd_field, "Describe GF(p^m).", tensor=False)

    tensor_cmd = sub.add_parser("tensor", help="Create or inspect tensor files.")
    tensor_sub = tensor_cmd.add_subparsers(dest="tensor_command", required=True)
    make = leaf(tensor_sub, "make", cmd_tensor_make, "Build a family tensor.", tensor=False)
    make.add_argument("--compact", action="store_true", help="Write the one-line compact form.")
    leaf(tensor_sub, "show", cmd_tensor_show, "Print a tensor as mode-d slices.")

    ranks = leaf(sub, "ranks", cmd_ranks, "Run the full invariant chain.")
    ranks.add_argument("--covering", action="store_true", help="Add low-rank covering data.")
    ranks.add_argument("--name", default="tensor", help="Row label.")
    leaf(sub, "gr", cmd_gr, "Geometric rank by stratified point counting.")
    leaf(sub, "bias", cmd_bias, "Exact bias and analytic rank.")
    strata = leaf(sub, "strata", cmd_strata, "Rank strata counts.")
    strata.add_argument("--k", type=int, default=None, help="Count over GF(q^k) only.")
    subrank = leaf(sub, "subrank", cmd_subrank, "Subrank bounds with certificates.")
    subrank.add_argument("--certify", default=None, help="Write the lower-bound certificate here.")
    subrank.add_argument("--check", default=None, help="Verify a certificate file against the tensor.")
    slicerank = leaf(sub, "slicerank", cmd_slicerank, "Slice rank with a decomposition.")
    slicerank.add_argument("--oracle", action="store_true", help="Use the decomposition search oracle.")
    slicerank.add_argument("--upper", action="store_true", help="Upper bound only.")
    slicerank.add_argument("--decomposition", default=None, help="Write the decomposition here.")
    leaf(sub, "pr", cmd_pr, "Partition rank bounds.")
    gaussian = leaf(sub, "gaussian", cmd_gaussian, "Gaussian binomial coefficient.", tensor=False)
    gaussian.add_argument("--c", type=int, required=True)
    gaussian.add_argument("--n", type=int, required=True)
    gaussian.add_argument("--q", type=int, default=None, help="Defaults to the size of --field.")

    exp = sub.add_parser("exp", help="Inequality experiments.")
    exp_sub = exp.add_subparsers(dest="exp_command", required=True)
    ds = leaf(exp_sub, "direct-sum", cmd_exp_direct_sum, "Subrank and GR of S, T and S ⊕ T.", tensor=False)
    ds.add_argument("--left", default=None, help="Tensor file for S.")
    ds.add_argument("--right", default=None, help="Tensor file for T.")
    kron = leaf(exp_sub, "kron", cmd_exp_kron, "Subrank growth under Kronecker powers.")
    kron.add_argument("--kmax", type=int, default=None)
    ext = leaf(exp_sub, "extension", cmd_exp_extension, "Subrank over field extensions.")
    ext.add_argument("--klist", default=None, help="Comma-separated extension degrees.")
    survey = leaf(exp_sub, "survey", cmd_exp_survey, "Seeded random ensemble.", tensor=False)
    survey.add_argument("--samples", type=int, default=None)
    cover = leaf(exp_sub, "covering", cmd_exp_covering, "Low-rank covering data.")
    cover.add_argument("--c", type=int, default=None, help="Candidate subrank (default: computed).")
    cover.add_argument("--k", type=int, default=1, help="Extension degree.")
    return parser


def _command_name(args: argparse.Namespace) -> str:
    parts = [args.command]
    for attr in ("tensor_command", "exp_command"):
        if getattr(args, attr, None):
            parts.append(getattr(args, attr))
    return " ".join(parts)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ─── Entry point ───

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    configure_logging(
        json_format=settings.LOG_JSON if args.log_json is None else args.log_json,
        level=args.log_level or settings.LOG_LEVEL,
    )
    command = _command_name(args)
    bind_command(command, field=args.field, dims=args.dims, seed=args.seed)

    try:
        cfg = build_config(args)
        result = args.handler(args, cfg)
    except BudgetExceeded as exc:
        logger.error("budget_exceeded", what=exc.what, required=exc.required, budget=exc.budget)
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        logger.critical("invariant_violation", error=str(exc))
        print(f"INVARIANT VIOLATION: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (LabError, OSError) as exc:
        logger.error("command_failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    if cfg.format == "table" and result.text is not None:
        text = result.text
    else:
        text = render(command, result.body, cfg.format, rows=result.rows)
    _emit(text, args.out)
    logger.info("command_finished", exit_code=result.exit_code)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
