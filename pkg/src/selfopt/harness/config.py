"""Experiment configuration: a versioned YAML document.

Schema (version 1)::

    schema_version: 1
    class:                      # the environment class, in numbering order
      members:
        - family: two_state_mdp # see FAMILIES
          params: {q_good: 0.35, q_bad: 0.1, good_state: 0}
          weight: 1             # optional; default weights are 2^-(position+1)
          overrides: {eps0: 0.5, power: 0.25}   # optional metadata overrides
    true_member: 0              # index of the member that generates percepts
    horizon: 200000
    seeds: [1, 2, 3]
    output: runs/example        # optional; --out and SELFOPT_OUT take precedence
    agent: {eps0: 0.5, k_cap: 10000000, m_cap: 10000000}   # all optional

    # used by `certify` and `solve` instead of `class`:
    environment: {family: passive, params: {period: "01"}}
    certify:
      grid: {k: [100, 1000], n: [1000, 10000], eps: [0.01, 0.05]}
      trials: 200
      adversaries: [random_uniform, worst_declared]

Overrides accepted per member: ``eps0``/``power`` (tolerance schedule),
``d_constant`` or ``d_sqrt_scale`` (loss allowance).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import yaml

from ..agent import DEFAULT_K_CAP, DEFAULT_M_CAP, ClassSpec
from ..core import ConfigurationError
from ..environments import (ClassMember, ConstantAllowance, MdpSpec, PowerSchedule, SqrtAllowance,
                            bandit_tower, mdp_environment, passive_environment, pomdp_environment,
                            steps_down, to_bottom, trap_environment, two_state_mdp)

SCHEMA_VERSION = 1
OUTPUT_ENV_VAR = "SELFOPT_OUT"


class ConfigError(ConfigurationError):
    """Invalid configuration; ``problems`` lists every issue found."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def _mdp(params: dict) -> ClassMember:
    spec = MdpSpec.from_tables(params["transition"], params["reward"], params.get("actions"),
                               params.get("initial_state", 0), params.get("r_max"),
                               params.get("name", "mdp"))
    return mdp_environment(spec)


def _two_state(params: dict) -> ClassMember:
    return mdp_environment(two_state_mdp(params["q_good"], params["q_bad"],
                                         params.get("good_state", 0), params.get("move_prob", 0.8),
                                         params.get("name")))


def _bandit(params: dict) -> ClassMember:
    down = params.get("down_steps")
    return bandit_tower(params["arms"], to_bottom if down is None else steps_down(int(down)),
                        params.get("name", "bandit"))


def _passive(params: dict) -> ClassMember:
    from ..environments import EventuallyPeriodic
    if "p" in params:
        return passive_environment(float(params["p"]), name=params.get("name", "passive"))
    rule = EventuallyPeriodic(str(params["period"]), str(params.get("prefix", "")))
    return passive_environment(rule, tuple(params.get("alphabet", ("0", "1"))),
                               params.get("name", "passive"))


def _pomdp(params: dict) -> ClassMember:
    return pomdp_environment(params["transition"], params["emission"], params["reward"],
                             params.get("actions"), params.get("observations"),
                             params.get("initial"), params.get("name", "pomdp"))


def _trap(params: dict) -> ClassMember:
    return trap_environment(int(params["s"]))


FAMILIES: dict[str, Callable[[dict], ClassMember]] = {
    "mdp": _mdp,
    "two_state_mdp": _two_state,
    "bandit_tower": _bandit,
    "passive": _passive,
    "pomdp": _pomdp,
    "trap": _trap,
}


def build_member(entry: dict, default_eps0: float | None = None) -> ClassMember:
    """Environment + metadata from one ``{family, params, overrides}`` entry."""
    family = entry.get("family")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown family {family!r}; known: {sorted(FAMILIES)}")
    try:
        member = FAMILIES[family](dict(entry.get("params") or {}))
    except KeyError as exc:
        raise ConfigurationError(f"family {family!r} is missing parameter {exc.args[0]!r}") from None
    overrides = dict(entry.get("overrides") or {})
    meta = member.meta
    eps0 = overrides.pop("eps0", default_eps0)
    power = overrides.pop("power", None)
    if eps0 is not None or power is not None:
        meta = meta.with_schedule(PowerSchedule(float(eps0 if eps0 is not None else 0.5),
                                                float(power if power is not None else 0.25)))
    if "d_constant" in overrides:
        meta = meta.with_allowance(ConstantAllowance(float(overrides.pop("d_constant"))))
    if "d_sqrt_scale" in overrides:
        meta = meta.with_allowance(SqrtAllowance(float(overrides.pop("d_sqrt_scale"))))
    if overrides:
        raise ConfigurationError(f"unknown metadata overrides {sorted(overrides)}")
    return ClassMember(member.env, meta)


@dataclass
class ExperimentConfig:
    members: list[dict]
    true_member: int
    horizon: int
    seeds: list[int]
    weights: list[float] | None = None
    output: str | None = None
    eps0: float | None = None
    k_cap: int = DEFAULT_K_CAP
    m_cap: int = DEFAULT_M_CAP
    source: dict = field(default_factory=dict)

    def build_class(self) -> ClassSpec:
        return ClassSpec.build([build_member(m, self.eps0) for m in self.members], self.weights)

    def output_dir(self, flag: str | None = None) -> Path:
        """--out flag, then $SELFOPT_OUT, then the config's ``output``, then ./runs."""
        return Path(flag or os.environ.get(OUTPUT_ENV_VAR) or self.output or "runs")


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_experiment(doc: dict[str, Any]) -> ExperimentConfig:
    """Validate a config document; every problem is reported at once."""
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError(["the configuration must be a mapping"])
    if doc.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    cls = doc.get("class")
    members = cls.get("members") if isinstance(cls, dict) else None
    if not isinstance(members, list) or not members:
        problems.append("class.members must be a nonempty list")
        members = []
    weights = None
    for i, m in enumerate(members):
        if not isinstance(m, dict) or m.get("family") not in FAMILIES:
            fam = m.get("family") if isinstance(m, dict) else m
            problems.append(f"class.members[{i}]: unknown family {fam!r} (known: {sorted(FAMILIES)})")
    if members and any(isinstance(m, dict) and "weight" in m for m in members):
        if not all(isinstance(m, dict) and "weight" in m for m in members):
            problems.append("either every member has a weight or none does")
        else:
            weights = [m["weight"] for m in members]
            if any(not isinstance(w, (int, float)) or w <= 0 for w in weights):
                problems.append("weights must be positive numbers")
    true_member = doc.get("true_member", 0)
    if not _is_int(true_member) or not 0 <= true_member < max(len(members), 1):
        problems.append(f"true_member must be an index into class.members, got {true_member!r}")
    horizon = doc.get("horizon")
    if not _is_int(horizon) or horizon < 1:
        problems.append(f"horizon must be an integer >= 1, got {horizon!r}")
    seeds = doc.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(_is_int(s) for s in seeds):
        problems.append("seeds must be a nonempty list of integers")
    agent = doc.get("agent") or {}
    if not isinstance(agent, dict):
        problems.append("agent must be a mapping")
        agent = {}
    unknown = set(agent) - {"eps0", "k_cap", "m_cap"}
    if unknown:
        problems.append(f"unknown agent parameters {sorted(unknown)}")
    eps0 = agent.get("eps0")
    if eps0 is not None and (not isinstance(eps0, (int, float)) or eps0 <= 0):
        problems.append("agent.eps0 must be positive")
    for key in ("k_cap", "m_cap"):
        v = agent.get(key)
        if v is not None and (not isinstance(v, (int, float)) or v < 1):
            problems.append(f"agent.{key} must be >= 1")
    if problems:
        raise ConfigError(problems)
    config = ExperimentConfig(
        members=members, true_member=true_member, horizon=horizon, seeds=list(seeds),
        weights=weights, output=doc.get("output"), eps0=eps0,
        k_cap=int(agent.get("k_cap", DEFAULT_K_CAP)), m_cap=int(agent.get("m_cap", DEFAULT_M_CAP)),
        source=doc)
    try:
        config.build_class()
    except (ConfigurationError, ValueError, TypeError) as exc:
        raise ConfigError([f"class could not be built: {exc}"]) from None
    return config


def load_document(path: str | os.PathLike) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {str(path)!r} does not exist"])
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"config file {str(path)!r} is not valid YAML: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"config file {str(path)!r} must contain a mapping"])
    return doc


def load_experiment(path: str | os.PathLike) -> ExperimentConfig:
    return parse_experiment(load_document(path))


def three_mdp_class_config(true_member: int = 0, horizon: int = 200_000,
                           seeds=tuple(range(10))) -> dict:
    """Three two-state MDPs with optimal values 0.3, 0.6 and 0.9."""
    return {
        "schema_version": SCHEMA_VERSION,
        "class": {"members": [
            {"family": "two_state_mdp", "params": {"q_good": 0.35, "q_bad": 0.1, "good_state": 0}},
            {"family": "two_state_mdp", "params": {"q_good": 0.7, "q_bad": 0.2, "good_state": 1}},
            {"family": "two_state_mdp", "params": {"q_good": 0.95, "q_bad": 0.7, "good_state": 0}},
        ]},
        "true_member": true_member,
        "horizon": horizon,
        "seeds": list(seeds),
    }
