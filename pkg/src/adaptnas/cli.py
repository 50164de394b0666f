"""Command-line entry point: ``adaptnas {run,compare,gen-problem,true-front,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .benchmarks import FAMILIES, SHIPPED_FAMILIES, ProblemSpec, make_problem, true_front
from .engine import RunConfig, RunError, compare, paired_configs, run
from .fitness import DEVICE_PROFILES, PROFILE_ALIASES, WORKERS_ENV
from .report import write_comparison, write_run_report, write_sweep

log = logging.getLogger("adaptnas")

PROFILE_CHOICES = sorted(DEVICE_PROFILES) + sorted(PROFILE_ALIASES)


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if args.generations is not None:
        overrides["generations"] = args.generations
    if args.population is not None:
        overrides["population_size"] = args.population
    if getattr(args, "problem", None):
        overrides["problem"] = ProblemSpec.load(args.problem).to_dict()
    return replace(config, **overrides)


def _summary(result) -> str:
    c = result.counts
    return (f"{result.config.mode} {result.problem_name} seed={result.config.seed} "
            f"front={len(result.front)} hv={result.generations[-1]['cumulative_hypervolume']:.6g} "
            f"evaluations={c['total_evaluations']}")


def cmd_run(args) -> int:
    config = _load_config(args)
    result = run(config)
    out = result.save(args.out)
    if args.report:
        write_run_report(out)
    print(_summary(result))
    print(f"wrote {out}")
    return 0


def _print_rows(rows) -> None:
    for row in rows:
        extra = f" igd_true={row['igd_true_front']:.6g}" if "igd_true_front" in row else ""
        print(f"  {row['label']:<9} hv={row['hypervolume']:.6g} igd={row['igd']:.6g} "
              f"dr={row['dominance_ratio']:.3f} front={row['front_size']}{extra}")


def cmd_compare(args) -> int:
    base = _load_config(args)
    out = Path(args.out)
    if not args.sweep:
        a, b = paired_configs(base)
        comp = compare(a, b)
        write_comparison(comp, out)
        print(comp.results[0].problem_name)
        _print_rows(comp.rows)
        print(f"wrote {out}")
        return 0
    families = args.families or list(SHIPPED_FAMILIES)
    profiles = args.profiles or sorted(DEVICE_PROFILES)
    done = []
    for profile in profiles:
        for family in families:
            problem = dict(base.problem, family=family, device_profile=profile, cardinalities=None)
            a, b = paired_configs(replace(base, problem=problem))
            comp = compare(a, b, exact_front=False)
            write_comparison(comp, out / f"{profile}_{family}")
            done.append((profile, family, comp))
            print(f"{profile} {family}")
            _print_rows(comp.rows)
    path = write_sweep(done, out, {"seed": base.seed, "generations": base.generations,
                                   "population_size": base.population_size})
    print(f"wrote {path}")
    return 0


def _problem_from_args(args) -> ProblemSpec:
    if getattr(args, "problem", None):
        return ProblemSpec.load(args.problem)
    cards = [int(c) for c in args.cardinalities.split(",")] if args.cardinalities else None
    return ProblemSpec(family=None if cards else args.family, cardinalities=cards, seed=args.seed,
                       device_profile=args.profile, n_planted=args.n_planted)


def cmd_gen_problem(args) -> int:
    spec = _problem_from_args(args)
    problem = make_problem(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    spec.save(out)
    if args.assets:
        assets = Path(args.assets)
        assets.mkdir(parents=True, exist_ok=True)
        problem.space.save(assets / "space.json")
        problem.lut.save(assets / "lut.json")
        (assets / "planted.json").write_text(problem.dumps() + "\n")
    print(f"{problem.name} m={problem.space.m} |space|={problem.space.cardinality()} "
          f"planted={sorted(problem.planted.tolist())}")
    print(f"wrote {out}")
    return 0


def cmd_true_front(args) -> int:
    problem = make_problem(_problem_from_args(args))
    front = true_front(problem)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"problem": problem.name, **front.to_dict()}, indent=1) + "\n")
    print(f"{problem.name} true front size={len(front)}")
    print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    files = write_run_report(args.run_dir, args.out)
    for name, path in files.items():
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptnas",
        description="Self-adaptive multi-objective evolutionary search over discrete design spaces.",
        epilog=f"Set {WORKERS_ENV} to evaluate fitness batches on a thread pool.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def budget(p):
        p.add_argument("--config", help="run configuration file (JSON)")
        p.add_argument("--problem", help="problem spec file; overrides the config's problem")
        p.add_argument("--seed", type=int)
        p.add_argument("--generations", type=int)
        p.add_argument("--population", type=int)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="run one search")
    budget(p)
    p.add_argument("--mode", choices=("adaptive", "static"))
    p.add_argument("--report", action="store_true", help="also render CSV tables and figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="adaptive vs static on the same problem and budget")
    budget(p)
    p.add_argument("--sweep", action="store_true", help="every family on every device profile")
    p.add_argument("--families", nargs="+", choices=sorted(FAMILIES))
    p.add_argument("--profiles", nargs="+", choices=PROFILE_CHOICES)
    p.set_defaults(func=cmd_compare)

    def problem_flags(p):
        p.add_argument("--problem", help="existing problem spec file")
        p.add_argument("--family", default="ofa", choices=sorted(FAMILIES))
        p.add_argument("--cardinalities", help="comma-separated cardinalities for a custom space")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--profile", default="medium", choices=PROFILE_CHOICES)
        p.add_argument("--n-planted", type=int, default=5)
        p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("gen-problem", help="write a synthetic problem spec")
    problem_flags(p)
    p.add_argument("--assets", help="directory for the space, cost table and planted parameters")
    p.set_defaults(func=cmd_gen_problem)

    p = sub.add_parser("true-front", help="exact Pareto front of an enumerable problem")
    problem_flags(p)
    p.set_defaults(func=cmd_true_front)

    p = sub.add_parser("report", help="render a saved run to CSV and PNG")
    p.add_argument("run_dir")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RunError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"adaptnas {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
