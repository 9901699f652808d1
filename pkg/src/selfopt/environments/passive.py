"""Passive sequence-prediction environments.

Observations ignore the actions.  Each step the environment reveals the
next observation and pays 1 iff the action just taken equals it, i.e. the
action is a prediction of the next symbol.
"""

from __future__ import annotations

import math
from fractions import Fraction

from ..core import Environment, Percept, StatePolicy, make_percept
from .metadata import (ClassMember, ConstantAllowance, PowerSchedule, ReferenceRewards,
                       ValueStabilityMetadata, ZeroTail)

_ONE, _ZERO = Fraction(1), Fraction(0)


class EventuallyPeriodic:
    """o_1 o_2 ... = prefix followed by ``period`` repeated forever."""

    def __init__(self, period: str, prefix: str = ""):
        if not period:
            raise ValueError("period must be nonempty")
        self.prefix = prefix
        self.period = period

    def __getitem__(self, i: int) -> str:
        """The (i+1)-th symbol (0-based)."""
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    @property
    def alphabet(self) -> tuple:
        return tuple(sorted(set(self.prefix) | set(self.period)))

    def __repr__(self):
        return f"EventuallyPeriodic(period={self.period!r}, prefix={self.prefix!r})"


class PassiveEnvironment(Environment):
    """Deterministic passive environment; tracker state = steps taken."""

    r_max = _ONE

    def __init__(self, rule: EventuallyPeriodic, alphabet=("0", "1"), name: str = "passive"):
        self.rule = rule
        self.actions = tuple(alphabet)
        self.observations = tuple(alphabet)
        if not set(rule.alphabet) <= set(alphabet):
            raise ValueError(f"sequence uses symbols outside {alphabet}")
        self.name = name
        self._hit = {o: make_percept(_ONE, o) for o in alphabet}
        self._miss = {o: make_percept(_ZERO, o) for o in alphabet}
        self._prefix, self._period = rule.prefix, rule.period

    def initial_state(self):
        return 0

    def symbol(self, i: int) -> str:
        """The observation revealed at step i + 1."""
        L = len(self._prefix)
        if i < L:
            return self._prefix[i]
        return self._period[(i - L) % len(self._period)]

    def percept(self, state, action) -> Percept:
        o = self.symbol(state)
        return self._hit[o] if action == o else self._miss[o]

    def distribution(self, state, action):
        return ((self.percept(state, action), 1.0),)

    def probability(self, state, action, percept):
        return 1.0 if percept == self.percept(state, action) else 0.0

    def sample(self, state, action, rng):
        return self.percept(state, action)

    def advance(self, state, action, percept):
        return state + 1

    def observation_distribution(self, state, action) -> dict:
        return {self.rule[state]: 1.0}

    def worst_case_prefix(self, k: int, rng) -> list:
        """Predict wrong at every step."""
        return [next(a for a in self.actions if a != self.rule[i]) for i in range(k - 1)]


class BernoulliPassive(Environment):
    """i.i.d. binary observations with P(o = "1") = p."""

    r_max = _ONE
    actions = ("0", "1")
    observations = ("0", "1")

    def __init__(self, p: float, name: str | None = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        self.p = float(p)
        self.name = name or f"bernoulli_{p:g}"
        self._dist = {}
        for y in self.actions:
            rows = []
            for o, q in (("1", self.p), ("0", 1.0 - self.p)):
                if q > 0:
                    rows.append((make_percept(_ONE if y == o else _ZERO, o), q))
            self._dist[y] = tuple(rows)

    def initial_state(self):
        return 0

    def distribution(self, state, action):
        return self._dist[action]

    def probability(self, state, action, percept):
        for x, q in self._dist[action]:
            if x == percept:
                return q
        return 0.0

    def advance(self, state, action, percept):
        return state + 1

    def observation_distribution(self, state, action) -> dict:
        return {x.observation: q for x, q in self._dist[action]}

    def worst_case_prefix(self, k: int, rng) -> list:
        minority = "0" if self.p >= 0.5 else "1"
        return [minority] * (k - 1)


class PredictSequence(StatePolicy):
    def __init__(self, env: PassiveEnvironment):
        self.env = env

    def act_state(self, state, step):
        return self.env.symbol(state)


class PredictSymbol(StatePolicy):
    def __init__(self, env: Environment, symbol: str):
        self.env = env
        self.symbol = symbol

    def act_state(self, state, step):
        return self.symbol


class BernoulliShortfall:
    """phi(n, eps) = exp(-2 (n eps)^2 / (n + 1)), Hoeffding over n+1 predictions."""

    def __call__(self, n, eps):
        return min(1.0, math.exp(-2.0 * (n * eps) ** 2 / (n + 1)))

    def __repr__(self):
        return "phi(n, eps) = exp(-2 (n eps)^2 / (n + 1))"


def passive_environment(rule, alphabet=("0", "1"), name: str = "passive",
                        epsilon_schedule=None) -> ClassMember:
    """Passive environment and metadata.

    ``rule`` is an ``EventuallyPeriodic`` sequence (deterministic; metadata
    d = 1, phi = 0, r_i = 1, V* = 1, recovery = predict the sequence) or a
    float p for i.i.d. Bernoulli(p) observations (V* = max(p, 1-p), recovery
    = always predict the likelier symbol, Hoeffding phi).
    """
    schedule = epsilon_schedule or PowerSchedule()
    if isinstance(rule, str):
        rule = EventuallyPeriodic(rule)
    if isinstance(rule, EventuallyPeriodic):
        env = PassiveEnvironment(rule, alphabet, name)
        recovery = PredictSequence(env)
        meta = ValueStabilityMetadata(
            optimal_value=1.0,
            reference=ReferenceRewards.constant(1.0),
            d=ConstantAllowance(1.0),
            phi=ZeroTail(),
            recovery_policy_factory=lambda history: recovery,
            epsilon_schedule=schedule,
            notes="deterministic passive: d = 1, phi = 0, r_i = 1",
        )
        return ClassMember(env, meta)
    p = float(rule)
    env = BernoulliPassive(p, name=None if name == "passive" else name)
    v_star = max(p, 1.0 - p)
    recovery = PredictSymbol(env, "1" if p >= 0.5 else "0")
    meta = ValueStabilityMetadata(
        optimal_value=v_star,
        reference=ReferenceRewards.constant(v_star),
        d=ConstantAllowance(1.0),
        phi=BernoulliShortfall(),
        recovery_policy_factory=lambda history: recovery,
        epsilon_schedule=schedule,
        notes="i.i.d. passive: predict the likelier symbol",
    )
    return ClassMember(env, meta)
