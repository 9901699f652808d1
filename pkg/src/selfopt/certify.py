"""Sampled certification of value-stability metadata.

For a history z_<k produced by an adversary, the declared recovery policy
is run for the n + 1 steps k..k+n and its reward is compared with the
declared reference rewards.  A trial is a violation when

    r^ref_{k..k+n} - r_{k..k+n} > d(k, eps) + n eps,

and a cell passes when the violation frequency stays within phi(n, eps)
plus a 3-sigma binomial slack.  Only sampled histories are tested, so a
pass is evidence, not proof; and a failure cannot tell an environment
that is not value-stable from a recovery factory that is merely weak.
"""

from __future__ import annotations

import csv
import io
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np

from .core import ConfigurationError, Environment, History, Policy, RandomSource, StatePolicy
from .environments.metadata import ClassMember

CAVEAT = ("sampled certification: only adversarial and random prefixes were tried; a violation "
          "cannot distinguish a non-value-stable environment from a weak recovery factory")


class AdversaryStrategy(ABC):
    """Produces the k - 1 actions of the history z_<k that precedes recovery."""

    name = "adversary"

    @abstractmethod
    def prefix(self, env: Environment, k: int, rng: RandomSource) -> list: ...


class RandomUniformAdversary(AdversaryStrategy):
    name = "random_uniform"

    def prefix(self, env, k, rng):
        return [rng.choice(env.actions) for _ in range(k - 1)]


class WorstDeclaredAdversary(AdversaryStrategy):
    """Uses the environment's own ``worst_case_prefix`` hook."""

    name = "worst_declared"

    def prefix(self, env, k, rng):
        hook = getattr(env, "worst_case_prefix", None)
        if hook is None:
            raise ConfigurationError(f"{env.name} declares no worst-case prefix")
        return list(hook(k, rng))


class FixedPrefixAdversary(AdversaryStrategy):
    def __init__(self, actions: Sequence, name: str = "fixed"):
        self.actions = list(actions)
        self.name = name

    def prefix(self, env, k, rng):
        if len(self.actions) < k - 1:
            raise ValueError(f"fixed prefix has {len(self.actions)} actions, need {k - 1}")
        return self.actions[: k - 1]


DEFAULT_ADVERSARIES = (RandomUniformAdversary(), WorstDeclaredAdversary())


def play_prefix(env: Environment, actions: Sequence, rng: RandomSource) -> History:
    """History obtained by playing a fixed action sequence."""
    h = History()
    state = env.initial_state()
    for y in actions:
        env.check_action(y)
        x = env.sample(state, y, rng)
        state = env.advance(state, y, x)
        h = h.append(y, x)
    h.remember_state(env, state)
    return h


def recovery_rewards(env: Environment, policy: Policy, history: History, steps: int,
                     rng: RandomSource) -> np.ndarray:
    """Rewards of ``steps`` steps of ``policy`` after ``history``."""
    out = np.empty(steps)
    state = history.state_for(env)
    start = len(history) + 1
    if isinstance(policy, StatePolicy) and policy.env is env:
        act, sample, advance = policy.act_state, env.sample, env.advance
        value: dict = {}
        for t in range(steps):
            y = act(state, start + t)
            x = sample(state, y, rng)
            state = advance(state, y, x)
            r = value.get(id(x))
            if r is None:
                r = value[id(x)] = float(x.reward)
            out[t] = r
        return out
    h = history
    for t in range(steps):
        y = policy.act(h)
        env.check_action(y)
        x = env.sample(state, y, rng)
        state = env.advance(state, y, x)
        h = h.append(y, x)
        h.remember_state(env, state)
        out[t] = x.reward
    return out


def _recovery(member: ClassMember, history: History) -> Policy:
    factory = member.meta.recovery_policy_factory
    if factory is None:
        raise ConfigurationError(f"metadata of {member.env.name} declares no recovery policy factory")
    return factory(history)


@dataclass(frozen=True)
class CellResult:
    k: int
    n: int
    eps: float
    adversary: str
    trials: int
    violations: int
    frequency: float
    phi: float
    slack: float
    passed: bool
    loss_mean: float
    loss_q99: float
    loss_max: float


@dataclass
class CertificationReport:
    environment: str
    cells: list[CellResult] = field(default_factory=list)
    caveat: str = CAVEAT

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def cell(self, k: int, n: int, eps: float, adversary: str | None = None) -> CellResult:
        for c in self.cells:
            if (c.k, c.n, c.eps) == (k, n, eps) and adversary in (None, c.adversary):
                return c
        raise KeyError((k, n, eps, adversary))

    COLUMNS = ("k", "n", "eps", "adversary", "trials", "violations", "frequency", "phi",
               "slack", "verdict", "loss_mean", "loss_q99", "loss_max")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for c in self.cells:
            w.writerow([c.k, c.n, repr(c.eps), c.adversary, c.trials, c.violations,
                        f"{c.frequency:.6f}", f"{c.phi:.6g}", f"{c.slack:.6g}",
                        "pass" if c.passed else "fail",
                        f"{c.loss_mean:.6f}", f"{c.loss_q99:.6f}", f"{c.loss_max:.6f}"])
        return buf.getvalue()

    def summary(self) -> str:
        failed = [c for c in self.cells if not c.passed]
        lines = [f"certification of {self.environment}: {len(self.cells)} cells, "
                 f"{len(failed)} failed -> {'PASS' if not failed else 'FAIL'}"]
        for c in failed:
            lines.append(f"  fail k={c.k} n={c.n} eps={c.eps} [{c.adversary}]: "
                         f"frequency {c.frequency:.4f} > phi {c.phi:.4g} + slack {c.slack:.4g}")
        lines.append(f"  note: {self.caveat}")
        return "\n".join(lines)


def binomial_slack(phi: float, trials: int) -> float:
    """Three standard deviations of a violation frequency with rate phi."""
    return 3.0 * math.sqrt(max(phi * (1.0 - phi), 0.0) / trials)


def _losses(member: ClassMember, k: int, ns: Sequence[int], trials: int,
            adversary: AdversaryStrategy, rng: RandomSource) -> np.ndarray:
    """losses[t, j] = r^ref_{k..k+n_j} - r_{k..k+n_j} in trial t (one rollout serves every n)."""
    env, ref = member.env, member.meta.reference
    n_max = max(ns)
    ref_sums = np.array([ref.sum(k, k + n) for n in ns])
    idx = np.asarray(ns)
    out = np.empty((trials, len(ns)))
    for t in range(trials):
        history = play_prefix(env, adversary.prefix(env, k, rng), rng)
        rewards = recovery_rewards(env, _recovery(member, history), history, n_max + 1, rng)
        realized = np.cumsum(rewards)[idx]
        out[t] = ref_sums - realized
    return out


def certify_value_stability(member: ClassMember, grid: Iterable[tuple[int, int, float]],
                            trials: int, adversaries: Sequence[AdversaryStrategy] = DEFAULT_ADVERSARIES,
                            rng: RandomSource | int = 0) -> CertificationReport:
    """Estimate violation frequencies on a (k, n, eps) grid and compare them with phi.

    Cells sharing k and the adversary reuse the same seeded trials, so the
    frequency is monotone in eps for fixed (k, n).  Every (k, adversary)
    group draws from its own child stream of ``rng``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = sorted({(int(k), int(n), float(e)) for k, n, e in grid})
    if not grid:
        raise ValueError("the certification grid is empty")
    if any(k < 1 or n < 0 or e <= 0 for k, n, e in grid):
        raise ValueError("grid cells need k >= 1, n >= 0 and eps > 0")
    if member.meta.recovery_policy_factory is None:
        raise ConfigurationError(f"metadata of {member.env.name} declares no recovery policy factory")
    rng = rng if isinstance(rng, RandomSource) else RandomSource(rng)
    d, phi = member.meta.d, member.meta.phi
    report = CertificationReport(member.env.name)
    groups = [(k, list(cells)) for k, cells in groupby(grid, key=lambda c: c[0])]
    streams = iter(rng.spawn(len(groups) * len(adversaries)))
    for k, cells in groups:
        ns = sorted({n for _, n, _ in cells})
        for adversary in adversaries:
            losses = _losses(member, k, ns, trials, adversary, next(streams))
            for _, n, eps in cells:
                col = losses[:, ns.index(n)]
                violations = int(np.count_nonzero(col > float(d(k, eps)) + n * eps))
                p = float(phi(n, eps))
                slack = binomial_slack(p, trials)
                freq = violations / trials
                report.cells.append(CellResult(
                    k, n, eps, adversary.name, trials, violations, freq, p, slack,
                    freq <= p + slack, float(col.mean()), float(np.quantile(col, 0.99)),
                    float(col.max())))
    return report


@dataclass(frozen=True)
class LossSummary:
    mean: float
    q50: float
    q90: float
    q99: float
    max: float
    losses: np.ndarray

    def __str__(self):
        return (f"loss mean {self.mean:.4g}, q50 {self.q50:.4g}, q90 {self.q90:.4g}, "
                f"q99 {self.q99:.4g}, max {self.max:.4g}")


def estimate_recovery_loss(member: ClassMember, prefix, n: int, trials: int,
                           rng: RandomSource | int = 0) -> LossSummary:
    """Distribution of r^ref_{k..k+n} - r_{k..k+n} under the recovery policy.

    ``prefix`` is either a ``History`` (recovery always starts from it) or a
    sequence of k - 1 actions (its percepts are resampled in every trial).
    """
    rng = rng if isinstance(rng, RandomSource) else RandomSource(rng)
    env, ref = member.env, member.meta.reference
    losses = np.empty(trials)
    for t in range(trials):
        history = prefix if isinstance(prefix, History) else play_prefix(env, prefix, rng)
        k = len(history) + 1
        rewards = recovery_rewards(env, _recovery(member, history), history, n + 1, rng)
        losses[t] = ref.sum(k, k + n) - rewards.sum()
    q50, q90, q99 = np.quantile(losses, [0.5, 0.9, 0.99])
    return LossSummary(float(losses.mean()), float(q50), float(q90), float(q99),
                       float(losses.max()), losses)
