"""Command line: run, solve, certify and demo-necessity.

Exit status: 0 success, 1 invalid input or runtime error, 2 usage error,
3 a check ran to completion and failed (certification or necessity verdict).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..certify import (DEFAULT_ADVERSARIES, RandomUniformAdversary, WorstDeclaredAdversary,
                       certify_value_stability)
from ..core import ConfigurationError
from ..environments import EventuallyPeriodic, MdpSpec, mdp_environment, passive_environment
from ..mdp import solve_average_reward
from .config import ConfigError, build_member, load_document, parse_experiment
from .experiment import run_all
from .necessity import demo_necessity

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_FAILED = 0, 1, 2, 3

ADVERSARIES = {a.name: a for a in (RandomUniformAdversary(), WorstDeclaredAdversary())}
PASSIVE_GRID = {"k": [100, 1000], "n": [1000, 10000], "eps": [0.01, 0.05]}


def example_two_state() -> MdpSpec:
    """State 0: a stays and pays 1, b moves to 1; state 1: every action returns to 0."""
    return MdpSpec.from_tables(
        transition=[[[1, 0], [0, 1]], [[1, 0], [1, 0]]],
        reward=[[1, 0], [0, 0]],
        actions=("a", "b"), name="two_state_example")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="random seed (overrides config seeds)")
    parser.add_argument("--config", default=default, help="YAML experiment configuration")
    parser.add_argument("--out", default=default, help="output directory (wins over $SELFOPT_OUT)")
    parser.add_argument("--horizon", type=int, default=default, help="number of interaction steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfopt", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("run", "run the agent for every configured seed and write trajectory CSVs")
    p.add_argument("--workers", type=int, default=1, help="parallel seed workers")
    p = add("solve", "optimal gain, bias and policy of a finite MDP")
    p.add_argument("--example", choices=("two_state",), help="built-in example instead of --config")
    p = add("certify", "sampled value-stability certification of one environment")
    p.add_argument("--example", choices=("passive",), help="built-in example instead of --config")
    p.add_argument("--trials", type=int, help="trials per cell (default 200)")
    p = add("demo-necessity", "probe-policy demonstration on the trap family")
    p.add_argument("--S", type=int, default=3, help="number of traps the probe policy handles")
    return parser


def _cmd_run(args) -> int:
    if not args.config:
        raise ConfigError(["run needs --config"])
    doc = load_document(args.config)
    if args.horizon is not None:
        doc["horizon"] = args.horizon
    if args.seed is not None:
        doc["seeds"] = [args.seed]
    config = parse_experiment(doc)
    if args.workers < 1:
        raise ConfigError(["--workers must be >= 1"])
    summaries = run_all(config, args.out, workers=args.workers)
    out = config.output_dir(args.out)
    for s in summaries:
        print(f"seed {s.seed}: final average {s.final_average:.5f} (V* {s.v_star:.5f}, "
              f"error {s.abs_error:.5f}), s={s.final_s}, nu_t={s.final_nu_t} -> {out / s.trajectory}")
    print(f"run index: {out / 'runs_index.csv'}")
    return EXIT_OK


def _solve_spec(args) -> MdpSpec:
    if args.example == "two_state":
        return example_two_state()
    if not args.config:
        raise ConfigError(["solve needs --config or --example two_state"])
    doc = load_document(args.config)
    entry = doc.get("environment")
    if entry is None:
        members = (doc.get("class") or {}).get("members") or []
        entry = members[doc.get("true_member", 0)] if members else None
    if not isinstance(entry, dict) or entry.get("family") not in ("mdp", "two_state_mdp"):
        raise ConfigError(["solve needs an 'environment' of family mdp or two_state_mdp"])
    return build_member(entry).env.spec


def _cmd_solve(args) -> int:
    spec = _solve_spec(args)
    member = mdp_environment(spec)
    sol = solve_average_reward(member.env.mdp)
    actions = member.env.actions
    print(f"environment: {spec.name}")
    print(f"gain: {sol.gain:.12g}")
    print(f"span residual: {sol.residual:.3e} after {sol.iterations} iterations")
    print("state  action  bias")
    for s, (a, h) in enumerate(zip(sol.policy, sol.bias)):
        print(f"{s:>5}  {str(actions[a]):>6}  {h: .10g}")
    return EXIT_OK


def _certify_setup(args, doc):
    if args.example == "passive":
        member = passive_environment(EventuallyPeriodic("01"), name="passive_01")
        grid, trials, names = PASSIVE_GRID, 200, None
    else:
        if not args.config:
            raise ConfigError(["certify needs --config or --example passive"])
        entry = doc.get("environment")
        if not isinstance(entry, dict):
            raise ConfigError(["certify needs an 'environment' entry"])
        member = build_member(entry)
        section = doc.get("certify") or {}
        grid = section.get("grid") or {}
        trials = section.get("trials", 200)
        names = section.get("adversaries")
    problems = [f"certify.grid.{key} must be a nonempty list" for key in ("k", "n", "eps")
                if not isinstance(grid.get(key), list) or not grid.get(key)]
    if names is not None and (not isinstance(names, list) or set(names) - set(ADVERSARIES)):
        problems.append(f"certify.adversaries must be a subset of {sorted(ADVERSARIES)}")
    if problems:
        raise ConfigError(problems)
    if args.trials is not None:
        trials = args.trials
    if trials < 1:
        raise ConfigError(["trials must be >= 1"])
    adversaries = DEFAULT_ADVERSARIES if names is None else tuple(ADVERSARIES[n] for n in names)
    cells = [(k, n, e) for k in grid["k"] for n in grid["n"] for e in grid["eps"]]
    return member, cells, trials, adversaries


def _cmd_certify(args) -> int:
    doc = load_document(args.config) if args.config and args.example is None else {}
    member, cells, trials, adversaries = _certify_setup(args, doc)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    report = certify_value_stability(member, cells, trials, adversaries, rng=seed)
    out = args.out or doc.get("output")
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"certify_{member.env.name}_seed{seed}.csv").write_text(report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_necessity(args) -> int:
    report = demo_necessity(args.S, args.horizon or 100_000, args.seed or 0)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAILED


COMMANDS = {"run": _cmd_run, "solve": _cmd_solve, "certify": _cmd_certify,
            "demo-necessity": _cmd_necessity}


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("seed", "config", "out", "horizon"):
        if not hasattr(args, name):
            setattr(args, name, None)
    if args.horizon is not None and args.horizon < 1:
        print("error: --horizon must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(cli())
