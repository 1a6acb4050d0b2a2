"""Command-line front end.

Exit codes: 0 success, 1 mathematical failure (axiom, bound or convergence),
2 operational error (usage, unreadable or malformed instance, bad φ).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

from bvfix import catalog
from bvfix.constants import (
    DEFAULT_BUDGET,
    DEFAULT_MAX_ITER,
    DEFAULT_P_WINDOW,
    DEFAULT_TOL_STEP,
)
from bvfix.contraction import (
    HypothesisReport,
    InvalidModulusError,
    Modulus,
    PairSource,
    analyze_map,
    check_hypotheses,
)
from bvfix.expr import ExpressionSyntaxError
from bvfix.oracle import OracleBudgetError, oracle_report
from bvfix.solver import (
    StoppingCriteria,
    picard,
    trace_csv_text,
    verify_kannan_bounds,
    verify_residual,
    verify_weak_decrease,
)
from bvfix.space import (
    DomainEscapeError,
    InstanceError,
    SpaceSignature,
    check_axioms,
    classify_space,
    load_instance,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _p_window(text: str) -> tuple[int, ...]:
    try:
        ps = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid p window {text!r}") from None
    if not ps or min(ps) < 1:
        raise argparse.ArgumentTypeError("p values must be positive integers")
    return ps


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", type=Path, help="instance file (JSON)")
    common.add_argument("--v", type=int, help="override the instance's v")
    common.add_argument("--s", type=float, help="override the instance's s")
    common.add_argument("--seed", type=int, help="RNG seed (fallback: $FIXPOINT_SEED, then 0)")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="tuple budget")
    common.add_argument("--tol-step", type=float, default=DEFAULT_TOL_STEP)
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--phi", help="comparison modulus, expression in t")
    common.add_argument("--gamma", type=float, help="Kannan constant for the bound checks")
    common.add_argument("--p-window", type=_p_window, default=DEFAULT_P_WINDOW)
    common.add_argument("--u0", help="starting point (label/index for finite spaces, real otherwise)")
    common.add_argument("--v-grid", type=_p_window, default=(1, 2), help="v values for classify")
    common.add_argument("--out", type=Path, help="output file (CSV trace for solve)")
    common.add_argument("--format", choices=("text", "structured", "csv"), default="text")
    common.add_argument("--no-timestamp", action="store_true")

    parser = argparse.ArgumentParser(prog="bvfix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check the b_v(s) axioms")
    sub.add_parser("classify", parents=[common], help="minimal s per v and named classes")
    sub.add_parser("analyze", parents=[common], help="contraction constants and theorem hypotheses")
    sub.add_parser("solve", parents=[common], help="Picard iteration with bound verification")
    sub.add_parser("oracle", parents=[common], help="brute-force ground truth (finite instances)")
    cat = sub.add_parser("catalog", parents=[common], help="export a built-in instance")
    cat.add_argument("name", choices=("banach", "kannan", "weak", "swap", "bv"))
    cat.add_argument("--c", type=float, default=0.5, help="contraction constant (banach)")
    cat.add_argument("--n", type=int, default=10, help="number of points (bv)")
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FIXPOINT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"FIXPOINT_SEED must be an integer, got {env!r}") from None


def _load(args):
    if args.instance is None:
        raise UsageError("--instance is required")
    try:
        inst = load_instance(args.instance)
    except OSError as exc:
        raise UsageError(f"cannot read instance: {exc}") from None
    sig = inst.signature
    try:
        sig = SpaceSignature(
            v=args.v if args.v is not None else sig.v,
            s=args.s if args.s is not None else sig.s,
            complete=sig.complete,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return inst, sig


def _phi(args, inst) -> Modulus | None:
    src = args.phi if args.phi is not None else inst.phi
    return Modulus.expression(src) if src else None


def _u0(args, space):
    if args.u0 is None:
        return 0 if space.is_finite else space.domain[1]
    if space.is_finite:
        if args.u0 in space.labels:
            return space.labels.index(args.u0)
        try:
            return int(args.u0)
        except ValueError:
            raise UsageError(f"unknown point {args.u0!r}") from None
    try:
        return float(args.u0)
    except ValueError:
        raise UsageError(f"--u0 must be a real number, got {args.u0!r}") from None


# ---------------------------------------------------------------------------
# commands; each returns (exit code, report dict, text lines)


def cmd_verify(args, seed):
    inst, sig = _load(args)
    rep = check_axioms(inst.space, sig.v, sig.s, args.budget, seed)
    lines = [
        f"axioms v={sig.v} s={sig.s:g}: {'PASS' if rep.ok else 'FAIL'}",
        f"  separation: {_ok(rep.condition1_ok)}",
        f"  symmetry: {_ok(rep.condition2_ok)}",
        f"  polygon inequality: {_ok(rep.condition3_ok)}"
        + (" (vacuous: no admissible tuple)" if rep.vacuous else ""),
        f"  mode: {rep.mode}, tuples checked: {rep.tuples_checked}, skipped 0/0: {rep.skipped_zero}",
        f"  worst ratio: {_num(rep.worst_ratio)}",
    ]
    if not rep.condition3_ok:
        lines.append(f"  witness {rep.describe_witness()}")
    lines += [f"  note: {n}" for n in rep.notes]
    return (EXIT_OK if rep.ok else EXIT_FAIL), {"axioms": rep.to_dict()}, lines


def cmd_classify(args, seed):
    inst, sig = _load(args)
    sigs = classify_space(inst.space, args.v_grid, args.budget, seed, complete=sig.complete)
    lines = []
    for g in sigs:
        lines.append(
            f"v={g.v}: s_min={_num(g.s)} status={g.axiom_status} classes={', '.join(g.classes) or '-'}"
        )
    return EXIT_OK, {"signatures": [g.to_dict() for g in sigs]}, lines


def _analysis(args, seed, inst, sig):
    if inst.map is None:
        raise UsageError("instance has no map")
    phi = _phi(args, inst)
    report = analyze_map(inst.space, inst.map, phi, PairSource.default(inst.space, seed))
    hyps = [check_hypotheses(sig, report, phi, "B")]
    if phi is not None:
        hyps.insert(0, check_hypotheses(sig, report, phi, "A"))
    else:
        hyps.insert(0, HypothesisReport("A", False, [("φ supplied", False)]))
    return phi, report, hyps


def _hyp_lines(hyps):
    lines = []
    for h in hyps:
        if h.details == [("φ supplied", False)]:
            lines.append(f"theorem {h.theorem}: NOT satisfied (no φ given; pass --phi)")
            continue
        verdicts = ", ".join(f"{name}: {_ok(ok)}" for name, ok in h.details)
        lines.append(f"theorem {h.theorem}: {'satisfied' if h.satisfied else 'NOT satisfied'} ({verdicts})")
    return lines


def cmd_analyze(args, seed):
    inst, sig = _load(args)
    phi, report, hyps = _analysis(args, seed, inst, sig)
    space = inst.space
    lines = [
        f"pairs: {report.pairs_checked} ({report.mode})",
        f"banach c_hat: {report.banach_c}  witness {_pair(space, report.banach_c.witness)}",
        f"kannan gamma_hat: {report.kannan_gamma}  witness {_pair(space, report.kannan_gamma.witness)}",
    ]
    if phi is not None:
        lines.append(
            f"weakly contractive (φ={phi}): {report.weak_ok}  min slack {_num(report.min_slack)}"
            f"  φ valid: {report.phi_valid}"
        )
    lines += _hyp_lines(hyps)
    out = {"contraction": report.to_dict(), "hypotheses": [h.to_dict() for h in hyps]}
    return EXIT_OK, out, lines


def cmd_solve(args, seed):
    inst, sig = _load(args)
    space, smap = inst.space, inst.map
    phi, report, hyps = _analysis(args, seed, inst, sig)
    warnings = [
        f"warning: theorem {h.theorem} hypotheses not met ({', '.join(h.failed())}); running anyway"
        for h in hyps
        if not h.satisfied and (h.theorem == "B" or phi is not None)
    ]
    for w in warnings:
        print(w, file=sys.stderr)

    try:
        stop = StoppingCriteria(tol_step=args.tol_step, max_iter=args.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    u0 = _u0(args, space)
    trace = picard(space, smap, u0, stop)
    status = trace.status
    failed = not status.converged
    out = {
        "hypotheses": [h.to_dict() for h in hyps],
        "warnings": warnings,
        "status": status.kind,
        "iterations": len(trace.step_dist),
        "u0": space.label(u0),
    }
    lines = _hyp_lines(hyps) + warnings
    lines.append(f"status: {status}  after {len(trace.step_dist)} steps")
    if status.converged:
        out["fixed_point"] = space.label(status.fixed_point)
        out["residual"] = status.residual
    if status.kind == "cycle":
        out["cycle"] = list(status.cycle)

    gamma = args.gamma
    if gamma is None and not report.kannan_gamma.unbounded:
        gamma = report.kannan_gamma.value
    p_window = [p for p in args.p_window if p < len(trace.iterates)]
    if gamma is not None and 0 <= gamma < 0.5:
        kb = verify_kannan_bounds(trace, gamma, p_window)
        out["kannan_bounds"] = kb.to_dict()
        lines.append(f"kannan bounds (γ={gamma:g}, p={p_window}): {_ok(kb.ok)}")
        failed |= not kb.ok
    elif gamma is not None:
        lines.append(f"kannan bounds skipped: γ={_num(gamma)} not below 1/2")
    if phi is not None and p_window:
        wd = verify_weak_decrease(trace, phi, p_window)
        out["weak_decrease"] = wd.to_dict()
        lines.append(f"weak decrease (φ={phi}, p={p_window}): {_ok(wd.ok)}")
        failed |= not wd.ok
    if status.converged and len(trace.iterates) >= sig.v + 1:
        tol_fixed = 10 * args.tol_step
        res = None
        if gamma is not None and gamma < 0.5:
            res = verify_residual(space, sig, trace, gamma=gamma, tol_fixed=tol_fixed)
        elif phi is not None:
            res = verify_residual(space, sig, trace, phi=phi, tol_fixed=tol_fixed)
        if res is not None:
            out["residual_check"] = res.to_dict()
            lines.append(f"residual check: {res.status} (residual {res.residual:.3g}, bound {_num(res.bound)})")
            failed |= res.status == "fail"

    csv_text = trace_csv_text(trace, gamma if gamma is not None and gamma < 0.5 else None, phi)
    if args.out is not None:
        args.out.write_text(csv_text)
        out["trace_file"] = str(args.out)
        lines.append(f"trace written to {args.out}")
    out["csv"] = csv_text
    return (EXIT_FAIL if failed else EXIT_OK), out, lines


def cmd_oracle(args, seed):
    inst, sig = _load(args)
    if not inst.space.is_finite:
        raise UsageError("the oracle handles finite (matrix-backed) instances only")
    try:
        res = oracle_report(inst.space, inst.map, sig.v, sig.s)
    except OracleBudgetError as exc:
        raise UsageError(str(exc)) from None
    rep = res.axiom_verdict
    labels = [inst.space.labels[p] for p in res.fixed_points]
    lines = [
        f"fixed points: {labels}",
        f"exact c: {res.exact_c}",
        f"exact gamma: {res.exact_gamma}",
        f"axioms v={sig.v} s={sig.s:g}: {'PASS' if rep.ok else 'FAIL'} worst ratio {_num(rep.worst_ratio)}",
    ]
    if not rep.condition3_ok:
        lines.append(f"  witness {rep.witness}")
    out = {
        "fixed_points": labels,
        "exact_c": res.exact_c.report_value(),
        "exact_gamma": res.exact_gamma.report_value(),
        "axioms": rep.to_dict(),
    }
    return (EXIT_OK if rep.ok else EXIT_FAIL), out, lines


def cmd_catalog(args, seed):
    if args.name == "banach":
        entry = catalog.make_banach_linear(args.c)
    elif args.name == "kannan":
        entry = catalog.make_kannan_classic()
    elif args.name == "weak":
        entry = catalog.make_weak_contractive_classic()
    elif args.name == "swap":
        entry = catalog.make_swap()
    else:
        entry = catalog.make_bv_finite(args.v or 1, args.s or 1.0, args.n, args.gamma)
    text = entry.to_instance()
    if args.out is not None:
        args.out.write_text(text + "\n")
        return EXIT_OK, {"instance_file": str(args.out)}, [f"wrote {entry.name} to {args.out}"]
    return EXIT_OK, {"instance": json.loads(text)}, text.splitlines()


COMMANDS = {
    "verify": cmd_verify,
    "classify": cmd_classify,
    "analyze": cmd_analyze,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "catalog": cmd_catalog,
}


# ---------------------------------------------------------------------------
# rendering


def _ok(flag) -> str:
    return "ok" if flag else "FAIL"


def _num(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float) and math.isinf(x):
        return "unbounded"
    return f"{x:.12g}"


def _pair(space, w) -> str:
    if w is None:
        return "-"
    return "(" + ", ".join(space.label(p) for p in w) + ")"


def _header(args, seed) -> dict:
    head = {"command": args.command, "seed": seed, "budget": args.budget}
    if not args.no_timestamp:
        head["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return head


def render(args, seed, code, report, lines) -> str:
    head = _header(args, seed)
    csv_text = report.pop("csv", None)
    if args.format == "csv":
        if csv_text is None:
            raise UsageError("--format csv is only available for solve")
        return "" if args.out is not None else csv_text
    if args.format == "structured":
        doc = {"header": head, "exit_code": code, **report}
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    out = []
    if "timestamp" in head:
        out.append(f"# timestamp: {head['timestamp']}")
    out.append(f"# bvfix {head['command']}  seed={seed}  budget={head['budget']}")
    out += lines
    return "\n".join(out) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = _seed(args)
        code, report, lines = COMMANDS[args.command](args, seed)
        text = render(args, seed, code, report, lines)
    except (UsageError, InstanceError, ExpressionSyntaxError, InvalidModulusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainEscapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out is not None and args.command not in ("solve", "catalog"):
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
