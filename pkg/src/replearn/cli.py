"""Command-line entry point.

Exit codes: 0 success (or condition holds), 1 domain failure (or condition
fails), 2 unreadable or malformed input. Solver and check tolerances can be set
by flags or by ``REPLEARN_*`` environment variables; flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .checks import (DEFAULT_REALIZABLE_TOL, check_detectability, check_hls, check_sublog,
                     check_sublog_fr, is_realizable)
from .constructions import (ConstructedProblem, augment_with_trivial, build_binarized_arms,
                            build_fr_example, build_hard_set, build_nested_family,
                            build_policy_class_features)
from .errors import ReplearnError
from .io import FormatError, dumps_problem, load_problem, write_curves
from .model import RepresentationSet, validate_instance
from .oracle import GridSpec, brute_force_complexity
from .simulator import AlgorithmConfig, Environment, Kind, run
from .solver import (SolverOptions, solve_clb, solve_fully_realizable, solve_replearn,
                     solve_unstructured)

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
ENV_PREFIX = "REPLEARN_"

SOLVER_FLAGS = {
    "eps_feas": float, "eps_obj": float, "max_iters": int, "M": float, "rank_tol": float,
    "delta_margin": float, "realizable_tol": float, "enum_budget": int, "cut_rule": str,
}


def solver_options(args, environ=os.environ) -> SolverOptions:
    """Defaults, overridden by ``REPLEARN_<NAME>`` variables, overridden by flags."""
    values = {}
    for name, typ in SOLVER_FLAGS.items():
        env = environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            try:
                values[name] = typ(env)
            except ValueError:
                raise FormatError(f"{ENV_PREFIX + name.upper()}={env!r} is not a valid {typ.__name__}")
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return SolverOptions(**values)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    for name, typ in SOLVER_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def _emit(record: dict, out: str | None) -> None:
    text = json.dumps(record, indent=1, default=_json_default)
    print(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def cmd_validate(args) -> int:
    instance, reps, _ = load_problem(args.path, strict=not args.lenient)
    report = validate_instance(instance)
    violations = list(report.violations)
    for r in reps:
        if not r.compatible_with(instance):
            violations.append(f"representation {r.name!r} shape mismatch")
    _emit({"valid": not violations, "violations": violations}, None)
    return EXIT_OK if not violations else EXIT_FAIL


def cmd_complexity(args) -> int:
    instance, reps, _ = load_problem(args.path, strict=not args.lenient)
    opts = solver_options(args)
    family = args.family
    record = {"family": family, "config": asdict(opts)}
    if family == "unstructured":
        record["value"] = solve_unstructured(instance)
    else:
        if family == "replearn":
            sol = solve_replearn(instance, reps, opts)
        elif family == "fr":
            sol = solve_fully_realizable(instance, reps, opts)
        elif family.startswith("clb:"):
            try:
                rep = reps.by_name(family[4:])
            except KeyError:
                raise ReplearnError(f"no representation named {family[4:]!r}") from None
            sol = solve_clb(instance, rep, opts)
        else:
            raise ReplearnError(f"unknown family {family!r}")
        record.update(sol.to_dict())
    _emit(record, args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    instance, reps, _ = load_problem(args.path, strict=not args.lenient)
    what = args.what
    tol = args.tol if args.tol is not None else DEFAULT_REALIZABLE_TOL
    if what == "realizable":
        per = {}
        for r in reps:
            ok, res, theta = is_realizable(instance, r, tol)
            per[r.name] = {"realizable": ok, "residual": res, "theta": theta}
        holds = all(v["realizable"] for v in per.values())
        record = {"holds": holds, "representations": per}
    elif what == "hls":
        per = {r.name: check_hls(instance, r).to_dict() for r in reps}
        holds = all(v["holds"] for v in per.values())
        record = {"holds": holds, "representations": per}
    elif what == "sublog":
        record = check_sublog(instance, reps, tol).to_dict()
    elif what == "sublog-fr":
        record = check_sublog_fr(instance, reps, tol).to_dict()
    else:
        record = check_detectability(instance, reps, args.eps_threshold, tol).to_dict()
    record["what"] = what
    _emit(record, args.out)
    return EXIT_OK if record["holds"] else EXIT_FAIL


def _construct(args) -> ConstructedProblem:
    kind = args.kind
    if kind in ("trivial", "hard-set"):
        if not args.source:
            raise ReplearnError(f"--kind {kind} needs --from <problem file>")
        instance, reps, _ = load_problem(args.source)
        if kind == "trivial":
            aug = augment_with_trivial(reps, *instance.shape)
            return ConstructedProblem(instance, aug, (), "trivial")
        return build_hard_set(instance, args.d)
    if kind == "nested":
        dims = [int(v) for v in args.dims.split(",")]
        return build_nested_family(args.X, args.A, args.gap, dims)
    if kind == "policy-class":
        scaffold = build_policy_class_features(args.d, args.N, args.A)
        return scaffold.member(args.policy, args.eps)
    if kind == "binarized":
        scaffold = build_binarized_arms(args.d, args.A)
        rng = np.random.default_rng(args.seed)
        theta = rng.uniform(0.1, 1.0, size=args.d)
        return ConstructedProblem(
            scaffold.instance(theta), RepresentationSet((scaffold.rep,)), (), "binarized",
            {"d": args.d, "A": args.A, "seed": args.seed},
            {"theta": theta.tolist(), "copies": scaffold.copies,
             "zero_feature_arms": scaffold.zero_feature_arms})
    return build_fr_example(args.eps)


def cmd_construct(args) -> int:
    prob = _construct(args)
    meta = dict(prob.metadata)
    meta.update({"kind": prob.kind, "params": prob.params,
                 "analytic_claims": [c.to_dict() for c in prob.analytic_claims]})
    text = dumps_problem(prob.instance, prob.reps, meta)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _seeds(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(s) for s in text.split(",")]
    return list(range(int(text)))


def cmd_simulate(args) -> int:
    instance, reps, _ = load_problem(args.path, strict=not args.lenient)
    cfg = AlgorithmConfig(kind=Kind(args.alg), reps=reps if len(reps) else None, rep=args.rep,
                          family=args.family, solver=SolverOptions(max_iters=300))
    if args.checkpoints:
        cps = np.array([int(c) for c in args.checkpoints.split(",")])
    else:
        cps = None
    curves = [run(Environment(instance, s), cfg, args.T, cps) for s in _seeds(args.seeds)]
    if args.out:
        write_curves(args.out, curves)
    else:
        write_curves(sys.stdout, curves)
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance, reps, _ = load_problem(args.path, strict=not args.lenient)
    grid = GridSpec(levels=args.levels)
    brute = brute_force_complexity(instance, reps, grid)
    record = {"brute_force": brute}
    if args.compare:
        sol = solve_replearn(instance, reps, solver_options(args))
        record["solver"] = sol.value
        denom = max(abs(sol.value), 1e-12)
        record["relative_gap"] = abs(brute - sol.value) / denom
    _emit(record, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replearn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_path(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("path")
        sp.add_argument("--lenient", action="store_true", help="ignore unknown fields")
        return sp

    sp = with_path("validate", "check a problem file against the instance invariants")
    sp.set_defaults(func=cmd_validate)

    sp = with_path("complexity", "solve an allocation program")
    sp.add_argument("--family", default="replearn",
                    help="replearn | clb:<rep name> | unstructured | fr")
    sp.add_argument("--out")
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_complexity)

    sp = with_path("check", "decide a structural condition")
    sp.add_argument("--what", required=True,
                    choices=["realizable", "hls", "sublog", "sublog-fr", "detectability"])
    sp.add_argument("--eps-threshold", type=float, default=0.05)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("construct", help="build a problem family member")
    sp.add_argument("--kind", required=True,
                    choices=["trivial", "hard-set", "nested", "policy-class", "binarized",
                             "fr-example"])
    sp.add_argument("--from", dest="source")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--A", type=int, default=2)
    sp.add_argument("--X", type=int, default=2)
    sp.add_argument("--gap", type=float, default=0.2)
    sp.add_argument("--dims", default="3,5")
    sp.add_argument("--policy", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_construct)

    sp = with_path("simulate", "Monte-Carlo regret curves as CSV")
    sp.add_argument("--alg", required=True, choices=[k.value for k in Kind])
    sp.add_argument("--T", type=int, default=10000)
    sp.add_argument("--seeds", default="1", help="count N, range a-b, or list a,b,c")
    sp.add_argument("--checkpoints", default=None, help="comma-separated steps")
    sp.add_argument("--rep", default=None)
    sp.add_argument("--family", default="clb", choices=["clb", "replearn"])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = with_path("oracle", "brute-force complexity on tiny instances")
    sp.add_argument("--compare", action="store_true")
    sp.add_argument("--levels", type=int, default=None)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ReplearnError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
