"""Command-line front end.

Subcommands: simulate, compare, sweep, elbow, bias, solve-exact, verify,
table6, case-study.  Exit codes: 0 success, 2 input error, 3 resource or
convergence error, 4 verification failure.

Output conventions: benchmark tables (table6, case-study curves) print
floats with 3 decimals; other CSV output uses 6 decimals; JSON keeps full
precision.  Runs with identical seed and configuration produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .model import InputError, ProblemInstance, load_instance
from .policies import (
    ConfigurationError,
    EnumerationError,
    IndexPolicy,
    Policy,
    make_policy,
)
from .simulator import SimulationConfig, compare, elbow, simulate, sweep_reels
from .solver import (
    ConvergenceError,
    StateSpaceError,
    solve_exact,
    solve_single_reel,
)
from .verify import run_verification

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOURCE = 3
EXIT_VERIFY = 4

TABLE6_CASES = (1, 2, 3)
TABLE6_REELS = (2, 3, 4, 5, 8)
TABLE6_POLICIES = ("random", "ff", "bf", "index", "exact")


def _fmt(value, decimals) -> str:
    return "" if value is None else f"{value:.{decimals}f}"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sim_config(args) -> SimulationConfig:
    return SimulationConfig(
        horizon=args.horizon,
        warmup=args.warmup,
        replications=args.reps,
        seed=args.seed,
        threads=args.threads,
    )


def _instance(args) -> ProblemInstance:
    return load_instance(args.instance, reels=args.reels)


def _build_policy(name: str, instance: ProblemInstance, args,
                  bias_cache: dict | None = None) -> Policy:
    """Wire up a policy by name, solving whatever resources it needs."""
    bias_cache = bias_cache if bias_cache is not None else {}

    def bias_for(inst):
        key = (inst.capacity_B, inst.dist.weights, inst.dist.probs)
        if key not in bias_cache:
            bias_cache[key] = solve_single_reel(inst.dist, inst.capacity_B)
        return bias_cache[key]

    if name == "index":
        return IndexPolicy(bias_for(instance))
    if name == "rollout":
        base_name = getattr(args, "rollout_base", "index")
        base = _build_policy(base_name, instance, args, bias_cache)
        return make_policy(
            "rollout",
            rollout_base=base,
            rollouts=getattr(args, "rollouts", 32),
            rollout_horizon=getattr(args, "rollout_horizon", 50),
        )
    if name == "exact":
        return solve_exact(instance).policy
    return make_policy(name)


def _report_row(rep):
    return [
        rep.instance,
        rep.reel_count_N,
        rep.policy,
        _fmt(rep.mean_waste_per_component, 6),
        _fmt(rep.std_error, 6),
        _fmt(rep.ci95_halfwidth, 6),
        rep.horizon,
        rep.replications,
        rep.seed,
    ]


SIM_HEADER = ["instance", "N", "policy", "mean", "stderr", "ci95", "horizon", "reps", "seed"]


def _report_json(rep) -> dict:
    return {
        "instance": rep.instance,
        "N": rep.reel_count_N,
        "policy": rep.policy,
        "mean": rep.mean_waste_per_component,
        "stderr": rep.std_error,
        "ci95": rep.ci95_halfwidth,
        "per_replication_means": list(rep.per_replication_means),
        "total_components": rep.total_components,
        "total_waste": rep.total_waste,
        "replacement_count": rep.replacement_count,
        "horizon": rep.horizon,
        "warmup": rep.warmup,
        "reps": rep.replications,
        "seed": rep.seed,
    }


def cmd_simulate(args) -> int:
    instance = _instance(args)
    policy = _build_policy(args.policy, instance, args)
    rep = simulate(instance, policy, _sim_config(args))
    if args.format == "json":
        _write_text(args.out, _json_text(_report_json(rep)))
    else:
        _write_text(args.out, _csv_text(SIM_HEADER, [_report_row(rep)]))
    return EXIT_OK


def cmd_compare(args) -> int:
    instance = _instance(args)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    cache: dict = {}
    policies = [_build_policy(n, instance, args, cache) for n in names]
    result = compare(instance, policies, _sim_config(args))
    if args.format == "json":
        obj = {
            "policies": [_report_json(r) for r in result.reports],
            "differences": [
                {"a": a, "b": b, "mean": m, "stderr": s, "ci95": c}
                for a, b, m, s, c in result.diffs
            ],
        }
        _write_text(args.out, _json_text(obj))
    else:
        rows = [_report_row(r) for r in result.reports]
        for a, b, m, s, c in result.diffs:
            rows.append([instance.name, instance.reel_count_N, f"{a}-{b}",
                         _fmt(m, 6), _fmt(s, 6), _fmt(c, 6),
                         result.reports[0].horizon, result.reports[0].replications,
                         result.reports[0].seed])
        _write_text(args.out, _csv_text(SIM_HEADER, rows))
    return EXIT_OK


def _parse_reel_list(text: str) -> list[int]:
    try:
        ns = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad reel list {text!r}") from exc
    if not ns:
        raise InputError("empty reel list")
    return ns


def cmd_sweep(args) -> int:
    instance = _instance(args)
    policy = _build_policy(args.policy, instance, args)
    curves = sweep_reels(instance, policy, _parse_reel_list(args.reel_list),
                         _sim_config(args))
    reports = [curves[n] for n in sorted(curves)]
    if args.format == "json":
        _write_text(args.out, _json_text([_report_json(r) for r in reports]))
    else:
        _write_text(args.out, _csv_text(SIM_HEADER, [_report_row(r) for r in reports]))
    return EXIT_OK


def _read_curve(path: str) -> dict[int, float]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "N" not in rows[0] or "mean" not in rows[0]:
        raise InputError(f"curve file {path} needs columns N and mean")
    return {int(r["N"]): float(r["mean"]) for r in rows}


def cmd_elbow(args) -> int:
    if args.curve:
        curve = _read_curve(args.curve)
    else:
        instance = _instance(args)
        policy = _build_policy(args.policy, instance, args)
        curves = sweep_reels(instance, policy, _parse_reel_list(args.reel_list),
                             _sim_config(args))
        curve = {n: r.mean_waste_per_component for n, r in curves.items()}
    rep = elbow(curve)
    if args.format == "json":
        obj = {
            "second_differences": {str(n): v for n, v in rep.second_differences},
            "argmax_N": rep.argmax_n,
        }
        _write_text(args.out, _json_text(obj))
    else:
        rows = [[n, _fmt(v, 6), int(n == rep.argmax_n)] for n, v in rep.second_differences]
        _write_text(args.out, _csv_text(["N", "d2f", "argmax"], rows))
    return EXIT_OK


def cmd_bias(args) -> int:
    instance = _instance(args)
    table = solve_single_reel(instance.dist, instance.capacity_B)
    if args.format == "json":
        obj = {
            "gain": table.gain_g1,
            "residual": table.residual,
            "reference": table.reference,
            "iterations": table.iterations,
            "h1": list(table.h1),
        }
        _write_text(args.out, _json_text(obj))
    else:
        rows = [[w, f"{table.h1[w]:.12g}"] for w in range(instance.capacity_B)]
        _write_text(args.out, _csv_text(["w", "h1"], rows))
    return EXIT_OK


def cmd_solve_exact(args) -> int:
    instance = _instance(args)
    sol = solve_exact(instance, max_states=args.max_states)
    obj = {
        "instance": instance.name,
        "N": instance.reel_count_N,
        "gain": sol.gain,
        "state_count": sol.state_count,
        "residual": sol.residual,
        "iterations": sol.iterations,
    }
    if args.format == "csv":
        _write_text(args.out, _csv_text(
            ["instance", "N", "gain", "state_count", "residual", "iterations"],
            [[instance.name, instance.reel_count_N, f"{sol.gain:.12g}",
              sol.state_count, f"{sol.residual:.3e}", sol.iterations]],
        ))
    else:
        _write_text(args.out, _json_text(obj))
    return EXIT_OK


def cmd_verify(args) -> int:
    instances = None
    if args.instance:
        inst = load_instance(args.instance, reels=args.reels)
        instances = [inst]
    results = run_verification(instances=instances)
    lines = [r.line() for r in results]
    failures = [r for r in results if not r.passed]
    lines.append(f"{len(results) - len(failures)}/{len(results)} checks passed")
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_VERIFY if failures else EXIT_OK


def cmd_table6(args) -> int:
    cases = [int(c) for c in args.cases.split(",") if c.strip()]
    reels = _parse_reel_list(args.reel_list)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in names:
        if p not in TABLE6_POLICIES:
            raise InputError(f"table6 supports policies {TABLE6_POLICIES}, got {p!r}")
    cfg = _sim_config(args)
    cache: dict = {}
    rows = []
    for case_id in cases:
        base = load_instance(f"case{case_id}")
        for n in reels:
            inst = base.with_reels(n)
            for name in names:
                if name == "exact":
                    try:
                        sol = solve_exact(inst, max_states=args.max_states)
                        rows.append((case_id, n, "exact", sol.gain, None, None, "exact"))
                    except StateSpaceError:
                        rows.append((case_id, n, "exact", None, None, None, "unavailable"))
                    continue
                policy = _build_policy(name, inst, args, cache)
                rep = simulate(inst, policy, cfg)
                rows.append((case_id, n, name, rep.mean_waste_per_component,
                             rep.std_error, rep.ci95_halfwidth, "simulated"))
                if name == "random":
                    g1 = solve_single_reel(inst.dist, inst.capacity_B).gain_g1
                    rows.append((case_id, n, "random-analytic", g1, None, None, "analytic"))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    if args.format == "json":
        obj = [
            {"case": c, "N": n, "policy": p, "mean": m, "stderr": s, "ci95": ci,
             "kind": kind}
            for c, n, p, m, s, ci, kind in rows
        ]
        _write_text(args.out, _json_text(obj))
    else:
        out = [[c, n, p, _fmt(m, 3), _fmt(s, 3), _fmt(ci, 3), kind]
               for c, n, p, m, s, ci, kind in rows]
        _write_text(args.out, _csv_text(
            ["case", "N", "policy", "mean", "stderr", "ci95", "kind"], out))
    return EXIT_OK


def cmd_case_study(args) -> int:
    reels = _parse_reel_list(args.reel_list)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    cfg = _sim_config(args)
    cache: dict = {}
    base = load_instance("case4")
    curves: dict[str, dict[int, float]] = {}
    rows = []
    for name in names:
        policy = _build_policy(name, base.with_reels(reels[0]), args, cache)
        reports = sweep_reels(base, policy, reels, cfg)
        curves[name] = {n: r.mean_waste_per_component for n, r in reports.items()}
        for n in sorted(reports):
            r = reports[n]
            rows.append([r.instance, n, name, _fmt(r.mean_waste_per_component, 3),
                         _fmt(r.std_error, 3), _fmt(r.ci95_halfwidth, 3),
                         r.horizon, r.replications, r.seed])
    _write_text(args.out, _csv_text(SIM_HEADER, rows))

    # elbow on the most informed curve present
    for pick in ("index", "bf", "ff", "random"):
        if pick in curves:
            try:
                rep = elbow(curves[pick])
            except InputError as exc:
                sys.stdout.write(f"elbow skipped: {exc}\n")
                return EXIT_OK
            lines = [f"elbow policy: {pick}"]
            lines += [f"d2f({n}) = {v:.6f}" for n, v in rep.second_differences]
            lines.append(f"argmax N = {rep.argmax_n}")
            text = "\n".join(lines) + "\n"
            if args.elbow_out:
                _write_text(args.elbow_out, _csv_text(
                    ["N", "d2f", "argmax"],
                    [[n, _fmt(v, 6), int(n == rep.argmax_n)]
                     for n, v in rep.second_differences]))
            sys.stdout.write(text)
            break
    return EXIT_OK


def _add_common(p, reels_default=None):
    p.add_argument("--instance", default=None, help="builtin caseK or JSON config path")
    p.add_argument("--reels", type=int, default=reels_default, help="number of reels N")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)


def _add_sim(p):
    p.add_argument("--horizon", type=int, default=None,
                   help="components per replication (default max(1e6, 3NB/E[X]))")
    p.add_argument("--warmup", type=int, default=300)
    p.add_argument("--reps", type=int, default=30)


def _add_rollout(p):
    p.add_argument("--rollouts", type=int, default=32)
    p.add_argument("--rollout-horizon", type=int, default=50, dest="rollout_horizon")
    p.add_argument("--rollout-base", default="index", dest="rollout_base",
                   choices=("random", "ff", "bf", "index"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reelpack",
        description="Reel-assignment policies, exact solvers, and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="estimate average waste for one policy")
    _add_common(p)
    _add_sim(p)
    _add_rollout(p)
    p.add_argument("--policy", required=True,
                   choices=("random", "ff", "bf", "index", "rollout", "exact"))
    p.add_argument("--max-states", type=int, default=None, dest="max_states")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="paired comparison on shared streams")
    _add_common(p)
    _add_sim(p)
    _add_rollout(p)
    p.add_argument("--policies", required=True, help="comma list, e.g. random,index")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="waste curve over reel counts")
    _add_common(p)
    _add_sim(p)
    _add_rollout(p)
    p.add_argument("--policy", required=True,
                   choices=("random", "ff", "bf", "index", "rollout"))
    p.add_argument("--reel-list", default="2,3,4,5,8", dest="reel_list")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("elbow", help="second differences of a waste curve")
    _add_common(p)
    _add_sim(p)
    _add_rollout(p)
    p.add_argument("--curve", default=None, help="CSV with N and mean columns")
    p.add_argument("--policy", default="index",
                   choices=("random", "ff", "bf", "index", "rollout"))
    p.add_argument("--reel-list", default="2,3,4,5,8", dest="reel_list")
    p.set_defaults(func=cmd_elbow)

    p = sub.add_parser("bias", help="single-reel gain and bias table")
    _add_common(p)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("solve-exact", help="optimal gain on the reachable space")
    _add_common(p)
    p.add_argument("--max-states", type=int, default=None, dest="max_states")
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("verify", help="structural checks on small instances")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table6", help="benchmark table over cases 1-3")
    _add_common(p)
    _add_sim(p)
    p.add_argument("--cases", default="1,2,3")
    p.add_argument("--reel-list", default="2,3,4,5,8", dest="reel_list")
    p.add_argument("--policies", default="random,ff,bf,index,exact")
    p.add_argument("--max-states", type=int, default=None, dest="max_states")
    p.set_defaults(func=cmd_table6)

    p = sub.add_parser("case-study", help="waste curve and elbow on case 4")
    _add_common(p)
    _add_sim(p)
    p.add_argument("--reel-list", default="2,3,4,5,8", dest="reel_list")
    p.add_argument("--policies", default="random,ff,bf,index")
    p.add_argument("--elbow-out", default=None, dest="elbow_out")
    p.set_defaults(func=cmd_case_study)

    return parser


def _resolve_format(args) -> None:
    if args.format is None:
        if args.out and args.out.endswith(".json"):
            args.format = "json"
        elif args.out and args.out.endswith(".csv"):
            args.format = "csv"
        else:
            args.format = "json" if args.command == "solve-exact" else "csv"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "instance", None) is None and args.command not in ("verify", "table6", "case-study", "elbow"):
        parser.error(f"{args.command} requires --instance")
    if args.command == "elbow" and args.curve is None and args.instance is None:
        parser.error("elbow requires --curve or --instance")
    _resolve_format(args)
    try:
        return args.func(args)
    except (InputError, ConfigurationError, EnumerationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (StateSpaceError, ConvergenceError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
