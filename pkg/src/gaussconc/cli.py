"""Command-line interface.

Subcommands:
  check         hypothesis report for an expression (exit 0 when neither
                condition is rejected)
  verify-lemma  residual checks of the tilted identity over a lambda grid
                plus the kernel-mean-equals-variance row
  bounds        full tail-bound report (classical vs variance-based)
  example       the built-in integral-of-sigma example with its third
                bound column

JSON output has top-level keys {config, condition_report, bound_report,
lemma_report}; every float is serialized with 17 significant digits so
parsing the file reproduces the doubles bit for bit.  CSV emits the tail
table only (columns x, empirical, ci_lo, ci_hi, classical, improved,
improved_example).  Exit codes: 0 all requested checks pass, 1 a
mathematical check failed or a condition was rejected, 2 usage or parse
error.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass

import numpy as np

from .autodiff import FunctionModel
from .bounds import BoundReport, builtin_sigma_example, sigma_example, tail_report
from .conditions import ConditionReport, check_condition_i, check_conditions
from .config import EstimatorConfig
from .errors import ExpressionSyntaxError, GaussConcError
from .expressions import parse_expression
from .interpolation import verify_kernel_mean_is_variance, verify_tilted_identity

DEFAULT_LAMBDAS = (0.0, 0.1, 0.5, 1.0)
DEFAULT_MGF_LAMBDAS = tuple(0.25 * k for k in range(9))
DEFAULT_XS = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass(frozen=True)
class RunConfig:
    expression: str
    dimension: int
    seed: int = 42
    samples: int = 1_000_000
    quadrature_order: int = 20
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDAS
    x_grid: tuple[float, ...] = DEFAULT_XS
    output_format: str = "text"
    analytic_k: float | None = None
    box_radius: float = 6.0

    def validate(self) -> None:
        for grid, name in ((self.lambda_grid, "lambdas"), (self.x_grid, "xs")):
            if any(v < 0 for v in grid):
                raise ValueError(f"--{name} values must be non-negative")
            if list(grid) != sorted(grid):
                raise ValueError(f"--{name} must be sorted ascending")
        if self.output_format not in ("json", "csv", "text"):
            raise ValueError("--format must be json, csv or text")
        self.estimator().validate()

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(seed=self.seed, samples=self.samples,
                               quad_order=self.quadrature_order)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _json_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps_json(obj, indent: int = 0) -> str:
    """JSON writer with 17-significant-digit floats (lossless for
    doubles; json.loads round-trips the values exactly)."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return _json_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{k}": {dumps_json(v, indent + 2)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{inner}{dumps_json(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def render_json(config: RunConfig, condition_report=None, bound_report=None,
                lemma_report=None) -> str:
    doc = {
        "config": to_jsonable(config),
        "condition_report": to_jsonable(condition_report),
        "bound_report": to_jsonable(bound_report),
        "lemma_report": to_jsonable(lemma_report),
    }
    return dumps_json(doc) + "\n"


def render_csv(bound_report: BoundReport | None) -> str:
    lines = ["x,empirical,ci_lo,ci_hi,classical,improved,improved_example"]
    for row in (bound_report.tail_table if bound_report else ()):
        example = "" if row.example_bound is None else _json_float(row.example_bound)
        lines.append(",".join([
            _json_float(row.x), _json_float(row.empirical),
            _json_float(row.ci_low), _json_float(row.ci_high),
            _json_float(row.classical_bound), _json_float(row.improved_bound),
            example,
        ]))
    return "\n".join(lines) + "\n"


def _render_condition_text(report: ConditionReport) -> list[str]:
    ci = report.condition_i
    cii = report.condition_ii
    lines = [
        f"condition (i)  [exp-integrability] : {ci.verdict}",
        f"  growth degrees per variable      : {[round(d, 3) for d in ci.degrees]}",
        f"  derivative growth subexponential : {ci.derivative_subexponential}",
        f"  usable MGF lambda range          : [0, {ci.mgf_safe_lambda:g})",
    ]
    if ci.rejection_ray:
        lines.append(f"  rejection ray                    : {ci.rejection_ray} ({ci.note})")
    for d in ci.tail_diagnostics:
        lines.append(f"  tail sample lam={d.lam:g}: top-sample share "
                     f"{d.top_share:.3f}{' DIVERGENT' if d.divergent else ''}")
    lines.append(f"condition (ii) [sign condition]    : {cii.verdict}"
                 f" (gradient signs {list(cii.gradient_signs)},"
                 f" {cii.points_checked} points)")
    if cii.witness is not None:
        w = cii.witness
        lines.append(f"  witness: i={w.i} j={w.j} product={w.product:.6g}")
        lines.append(f"    x={list(w.x)}")
        lines.append(f"    y={list(w.y)}")
        lines.append(f"    z={list(w.z)}")
    return lines


def _render_bounds_text(report: BoundReport) -> list[str]:
    mv = report.mean_variance
    lines = [
        f"K estimate : {report.k_estimate.value:.10g} ({report.k_estimate.method})",
        f"mean       : {mv.mean:.10g} +- {mv.mean_uncertainty:.3g}",
        f"variance   : {mv.variance:.10g} +- {mv.variance_uncertainty:.3g}",
        f"improved bound certified: {report.improved_certified}",
        "mgf curve:",
    ]
    for p in report.mgf_curve:
        flags = []
        if not p.dominated:
            flags.append("NOT-DOMINATED")
        if p.heavy_tail:
            flags.append("heavy-tail")
        lines.append(f"  lam={p.lam:<5g} phi={p.estimate:.6g} "
                     f"se={p.standard_error:.3g} bound={p.gaussian_bound:.6g} "
                     f"{' '.join(flags)}")
    header = "  x       empirical    ci_lo        ci_hi        classical  improved"
    if report.sigma_sup is not None:
        header += "   example"
    lines.append("tail table:")
    lines.append(header)
    for r in report.tail_table:
        line = (f"  {r.x:<7g} {r.empirical:<12.6g} {r.ci_low:<12.6g} "
                f"{r.ci_high:<12.6g} {r.classical_bound:<10.6g} "
                f"{r.improved_bound:<10.6g}")
        if r.example_bound is not None:
            line += f" {r.example_bound:<10.6g}"
        if not r.resolvable:
            line += "  (unresolved: <5 hits)"
        elif r.violates_improved:
            line += "  VIOLATION"
        lines.append(line)
    return lines


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_check(config: RunConfig, out: str | None = None) -> int:
    tree = parse_expression(config.expression, config.dimension)
    report = check_conditions(tree, config.box_radius,
                              sample_count=20_000, seed=config.seed,
                              config=config.estimator())
    if config.output_format == "json":
        _emit(render_json(config, condition_report=report), out)
    elif config.output_format == "csv":
        _emit(render_csv(None), out)
    else:
        _emit("\n".join(_render_condition_text(report)) + "\n", out)
    return 1 if report.rejected else 0


def _lemma_rows(model: FunctionModel, config: RunConfig):
    """One row per lambda (gated by the integrability classifier) plus
    the kernel-mean row; rows blocked by the gate are skipped, not
    failed."""
    est = config.estimator()
    cond_i = check_condition_i(model.tree, est)
    rows = []
    for lam in config.lambda_grid:
        if cond_i.verdict == "rejected" and lam > 0:
            rows.append({"lambda": lam, "skipped": True,
                         "reason": "condition (i) rejected"})
            continue
        if lam > 0 and lam >= cond_i.mgf_safe_lambda:
            rows.append({"lambda": lam, "skipped": True,
                         "reason": (f"lambda beyond usable MGF range "
                                    f"(ceiling {cond_i.mgf_safe_lambda:g})")})
            continue
        rep = verify_tilted_identity(model, lam, est)
        rows.append({"lambda": lam, "skipped": False,
                     "lhs": rep.lhs.value, "rhs": rep.rhs.value,
                     "residual": rep.residual,
                     "combined_uncertainty": rep.combined_uncertainty,
                     "passed": rep.passed})
    mean_row = verify_kernel_mean_is_variance(model, est)
    return cond_i, rows, mean_row


def cmd_verify_lemma(config: RunConfig, out: str | None = None) -> int:
    model = FunctionModel(parse_expression(config.expression, config.dimension))
    cond_i, rows, mean_row = _lemma_rows(model, config)
    lemma_report = {
        "condition_i_verdict": cond_i.verdict,
        "rows": rows,
        "kernel_mean_row": {
            "lhs": mean_row.lhs.value, "rhs": mean_row.rhs.value,
            "residual": mean_row.residual,
            "combined_uncertainty": mean_row.combined_uncertainty,
            "passed": mean_row.passed,
        },
    }
    if config.output_format == "json":
        _emit(render_json(config, lemma_report=lemma_report), out)
    elif config.output_format == "csv":
        _emit(render_csv(None), out)
    else:
        lines = [f"condition (i): {cond_i.verdict}"]
        for row in rows:
            if row["skipped"]:
                lines.append(f"lam={row['lambda']:<5g} SKIPPED ({row['reason']})")
            else:
                lines.append(
                    f"lam={row['lambda']:<5g} lhs={row['lhs']:.8g} "
                    f"rhs={row['rhs']:.8g} residual={row['residual']:.3g} "
                    f"(4x uncertainty {4 * row['combined_uncertainty']:.3g}) "
                    f"{'pass' if row['passed'] else 'FAIL'}")
        m = lemma_report["kernel_mean_row"]
        lines.append(f"kernel mean vs variance: lhs={m['lhs']:.8g} "
                     f"rhs={m['rhs']:.8g} residual={m['residual']:.3g} "
                     f"{'pass' if m['passed'] else 'FAIL'}")
        _emit("\n".join(lines) + "\n", out)
    executed = [r for r in rows if not r["skipped"]]
    all_passed = all(r["passed"] for r in executed) and mean_row.passed
    return 0 if all_passed else 1


def _bounds_exit(report: BoundReport) -> int:
    if report.condition_report is not None and report.condition_report.rejected:
        return 1
    if report.improved_certified:
        if any(r.violates_improved for r in report.tail_table if r.resolvable):
            return 1
        if any(not p.dominated for p in report.mgf_curve):
            return 1
    return 0


def cmd_bounds(config: RunConfig, out: str | None = None) -> int:
    tree = parse_expression(config.expression, config.dimension)
    model = FunctionModel(tree)
    est = config.estimator()
    cond = check_conditions(tree, config.box_radius, sample_count=20_000,
                            seed=config.seed, config=est)
    lambdas = (config.lambda_grid if config.lambda_grid != DEFAULT_LAMBDAS
               else DEFAULT_MGF_LAMBDAS)
    if cond.condition_i.mgf_safe_lambda < math.inf:
        lambdas = tuple(l for l in lambdas
                        if l < cond.condition_i.mgf_safe_lambda)
    report = tail_report(model, config.x_grid, est,
                         analytic_k=config.analytic_k,
                         condition_report=cond, lambdas=lambdas,
                         box_radius=config.box_radius)
    _emit_bound_report(config, report, out)
    return _bounds_exit(report)


def cmd_example(config: RunConfig, out: str | None = None) -> int:
    spec = builtin_sigma_example()
    est = config.estimator()
    cond = check_conditions(spec.f_tree, config.box_radius,
                            sample_count=20_000, seed=config.seed, config=est)
    report = sigma_example(spec, config.x_grid, est, condition_report=cond,
                           box_radius=config.box_radius)
    _emit_bound_report(config, report, out)
    code = _bounds_exit(report)
    ordered = all(r.example_bound < r.classical_bound
                  for r in report.tail_table if r.x > 0)
    return code if ordered else 1


def _emit_bound_report(config: RunConfig, report: BoundReport,
                       out: str | None) -> None:
    if config.output_format == "json":
        _emit(render_json(config, condition_report=report.condition_report,
                          bound_report=report), out)
    elif config.output_format == "csv":
        _emit(render_csv(report), out)
    else:
        lines = []
        if report.condition_report is not None:
            lines.extend(_render_condition_text(report.condition_report))
        lines.extend(_render_bounds_text(report))
        _emit("\n".join(lines) + "\n", out)


# --------------------------------------------------------------------------


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussconc",
        description="Check and compare Gaussian concentration bounds for "
                    "expressions over y1..yn.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_expr=True):
        if needs_expr:
            group = p.add_mutually_exclusive_group(required=True)
            group.add_argument("--expr",
                               help="expression in y1..yn (see README grammar)")
            group.add_argument("--expr-file", dest="expr_file",
                               help="file containing the expression")
            p.add_argument("--dim", type=int, required=True,
                           help="number of variables n")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--samples", type=int, default=1_000_000)
        p.add_argument("--quad-order", type=int, default=20)
        p.add_argument("--lambdas", type=_float_list, default=None,
                       help="comma-separated lambda grid")
        p.add_argument("--xs", type=_float_list, default=None,
                       help="comma-separated tail grid")
        p.add_argument("--format", default="text",
                       choices=("json", "csv", "text"))
        p.add_argument("--analytic-K", type=float, default=None,
                       dest="analytic_k",
                       help="known Lipschitz constant (overrides the "
                            "sampled estimate in the classical bound)")
        p.add_argument("--box-radius", type=float, default=6.0)
        p.add_argument("--out", default=None, help="output file (default stdout)")

    common(sub.add_parser("check", help="check both tail-bound hypotheses"))
    common(sub.add_parser("verify-lemma",
                          help="verify the tilted identity and the "
                               "kernel-mean identity"))
    common(sub.add_parser("bounds", help="full tail-bound report"))
    common(sub.add_parser("example",
                          help="built-in integral-of-sigma example"),
           needs_expr=False)
    return parser


def _run_config(args) -> RunConfig:
    expression = getattr(args, "expr", "") or ""
    expr_file = getattr(args, "expr_file", None)
    if expr_file:
        with open(expr_file) as fh:
            expression = fh.read().strip()
    cfg = RunConfig(
        expression=expression,
        dimension=getattr(args, "dim", 1) or 1,
        seed=args.seed,
        samples=args.samples,
        quadrature_order=args.quad_order,
        lambda_grid=args.lambdas if args.lambdas is not None else DEFAULT_LAMBDAS,
        x_grid=args.xs if args.xs is not None else DEFAULT_XS,
        output_format=args.format,
        analytic_k=args.analytic_k,
        box_radius=args.box_radius,
    )
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _run_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    handlers = {
        "check": cmd_check,
        "verify-lemma": cmd_verify_lemma,
        "bounds": cmd_bounds,
        "example": cmd_example,
    }
    try:
        return handlers[args.command](config, args.out)
    except ExpressionSyntaxError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except GaussConcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
