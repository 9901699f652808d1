"""Histories, percepts, the environment/policy interfaces and reward statistics.

An environment is a conditional law over percepts given the whole
action-percept history.  Every shipped family is implemented through a
*tracker state*: a small immutable summary of the history that is
sufficient for the next conditional distribution (the current MDP state,
the current bandit arm, a POMDP belief, ...).  ``History`` caches these
summaries so that per-step work stays O(1).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, NamedTuple, Sequence

import numpy as np

EMPTY = ""  # the observation of environments without observations

Action = Hashable
Observation = Hashable


class ConfigurationError(ValueError):
    """Raised for inconsistent alphabets, malformed specs and bad configs."""


def to_rational(x) -> Fraction:
    """Exact rational for a config value (``0.7`` becomes ``7/10``, not a binary float)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rewards")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


class Percept(NamedTuple):
    reward: Fraction
    observation: Observation = EMPTY


_INTERNED: dict = {}


def make_percept(reward, observation=EMPTY) -> Percept:
    """Canonical shared ``Percept`` instance.

    Environments build their percepts here, so equal percepts are usually the
    same object and probability tables can be keyed by identity.
    """
    key = (reward, observation)
    x = _INTERNED.get(key)
    if x is None:
        x = _INTERNED.setdefault(key, Percept(to_rational(reward), observation))
    return x


class RandomSource:
    """Seeded stream of uniforms backed by numpy's PCG64.

    Uniforms are drawn in blocks, so the stream depends only on the seed
    and on the number of ``uniform()`` calls made so far.
    """

    _BLOCK = 4096

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
            self.seed = int(seed.entropy) if isinstance(seed.entropy, int) else None
        else:
            self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
            self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))
        self._buf = np.empty(0)
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.generator.random(self._BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def choice(self, items: Sequence):
        return items[min(int(self.uniform() * len(items)), len(items) - 1)]

    def spawn(self, n: int) -> list["RandomSource"]:
        """Independent child streams (e.g. one per certification cell)."""
        return [RandomSource(s) for s in self._seq.spawn(n)]


class _Record:
    """Shared append-only storage behind one or more ``History`` views."""

    __slots__ = ("actions", "percepts", "prefix", "states")

    def __init__(self):
        self.actions: list = []
        self.percepts: list[Percept] = []
        self.prefix: list[Fraction] = [Fraction(0)]
        self.states: dict = {}

    def truncated(self, n: int) -> "_Record":
        rec = _Record()
        rec.actions = self.actions[:n]
        rec.percepts = self.percepts[:n]
        rec.prefix = self.prefix[: n + 1]
        return rec


class History:
    """The interaction record z_1 .. z_k.

    Views are immutable: ``append`` returns a new view.  Appending to the
    newest view of a record is O(1) because the storage is shared; appending
    to an older view copies its prefix first.
    """

    __slots__ = ("_rec", "_n")

    def __init__(self, steps: Iterable[tuple[Action, Percept]] = ()):
        self._rec = _Record()
        self._n = 0
        for action, percept in steps:
            self._push(action, percept)

    @classmethod
    def _view(cls, rec: _Record, n: int) -> "History":
        h = cls.__new__(cls)
        h._rec = rec
        h._n = n
        return h

    def _push(self, action, percept: Percept) -> None:
        rec = self._rec
        rec.actions.append(action)
        rec.percepts.append(percept)
        rec.prefix.append(rec.prefix[-1] + percept.reward)
        self._n += 1

    def append(self, action, percept: Percept) -> "History":
        rec = self._rec
        if self._n != len(rec.actions):
            rec = rec.truncated(self._n)
        h = History._view(rec, self._n)
        h._push(action, percept)
        return h

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> tuple[Action, Percept]:
        if not -self._n <= i < self._n:
            raise IndexError(i)
        i %= self._n
        return self._rec.actions[i], self._rec.percepts[i]

    def __iter__(self):
        return zip(self.actions, self.percepts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return self.actions == other.actions and self.percepts == other.percepts

    def __repr__(self) -> str:
        return f"History(length={self._n})"

    @property
    def actions(self) -> list:
        return self._rec.actions[: self._n]

    @property
    def percepts(self) -> list[Percept]:
        return self._rec.percepts[: self._n]

    @property
    def rewards(self) -> list[Fraction]:
        return [p.reward for p in self._rec.percepts[: self._n]]

    @property
    def last_action(self):
        return self._rec.actions[self._n - 1] if self._n else None

    @property
    def last_percept(self) -> Percept | None:
        return self._rec.percepts[self._n - 1] if self._n else None

    def prefix(self, k: int) -> "History":
        """The view z_1..z_k (shares storage)."""
        if not 0 <= k <= self._n:
            raise ValueError(f"prefix length {k} outside [0, {self._n}]")
        return History._view(self._rec, k)

    def total_reward(self) -> Fraction:
        return self._rec.prefix[self._n]

    def state_for(self, env: "Environment"):
        """Tracker state of ``env`` after this history, cached per record."""
        rec = self._rec
        entry = rec.states.get(env)
        if entry is not None and entry[0] <= self._n:
            start, state = entry
        else:
            start, state = 0, env.initial_state()
        acts, pers = rec.actions, rec.percepts
        for t in range(start, self._n):
            state = env.advance(state, acts[t], pers[t])
        if entry is None or entry[0] <= self._n:
            rec.states[env] = (self._n, state)
        return state

    def remember_state(self, env: "Environment", state) -> None:
        """Seed the tracker cache (used by callers that already advanced ``env``)."""
        self._rec.states[env] = (self._n, state)


class Environment(ABC):
    """A conditional percept law nu(x_k | z_<k y_k) with sampling.

    Subclasses describe the law through a tracker state.  States must be
    immutable: caches hold on to them.
    """

    actions: tuple
    observations: tuple
    r_max: Fraction
    name: str = "environment"

    @abstractmethod
    def initial_state(self) -> Any: ...

    @abstractmethod
    def distribution(self, state, action) -> Sequence[tuple[Percept, float]]:
        """Percepts with positive probability and their probabilities."""

    @abstractmethod
    def advance(self, state, action, percept: Percept) -> Any: ...

    def probability(self, state, action, percept: Percept) -> float:
        return sum(p for x, p in self.distribution(state, action) if x == percept)

    def sample(self, state, action, rng: RandomSource) -> Percept:
        outcomes = self.distribution(state, action)
        if len(outcomes) == 1:
            return outcomes[0][0]
        u = rng.uniform()
        acc = 0.0
        for x, p in outcomes:
            acc += p
            if u < acc:
                return x
        return outcomes[-1][0]

    def conditional(self, history: History, action) -> Sequence[tuple[Percept, float]]:
        """nu(. | z_<k y_k) for the given history and action."""
        self.check_action(action)
        return self.distribution(history.state_for(self), action)

    def check_action(self, action) -> None:
        if action not in self.actions:
            raise ConfigurationError(
                f"action {action!r} is not in the alphabet {self.actions!r} of {self.name}")

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class Policy(ABC):
    """A deterministic map from histories to actions."""

    @abstractmethod
    def act(self, history: History): ...


class StatePolicy(Policy):
    """Policy that only looks at ``env``'s tracker state and the step index.

    Rollouts that already track the state call ``act_state`` directly.
    """

    env: Environment

    @abstractmethod
    def act_state(self, state, step: int): ...

    def act(self, history: History):
        return self.act_state(history.state_for(self.env), len(history) + 1)


class FunctionPolicy(Policy):
    def __init__(self, fn: Callable[[History], Action], name: str = "policy"):
        self.fn = fn
        self.name = name

    def act(self, history: History):
        return self.fn(history)


class ActionSequencePolicy(Policy):
    """Plays a fixed open-loop action sequence, then ``tail`` forever."""

    def __init__(self, actions: Sequence, tail=None):
        self.sequence = list(actions)
        self.tail = tail

    def act(self, history: History):
        k = len(history)
        if k < len(self.sequence):
            return self.sequence[k]
        if self.tail is None:
            raise IndexError("action sequence exhausted")
        return self.tail


def sample_step(env: Environment, policy: Policy, history: History,
                rng: RandomSource) -> tuple[Action, Percept]:
    """One interaction cycle: y = policy(history), x ~ env(. | history, y)."""
    action = policy.act(history)
    env.check_action(action)
    return action, env.sample(history.state_for(env), action, rng)


def rollout(env: Environment, policy: Policy, steps: int, rng: RandomSource,
            history: History | None = None) -> History:
    """Extend ``history`` (default: empty) by ``steps`` interaction cycles."""
    h = History() if history is None else history
    state = h.state_for(env)
    fast = isinstance(policy, StatePolicy) and policy.env is env
    actions = set(env.actions)
    for _ in range(steps):
        y = policy.act_state(state, len(h) + 1) if fast else policy.act(h)
        if y not in actions:
            env.check_action(y)
        x = env.sample(state, y, rng)
        state = env.advance(state, y, x)
        h = h.append(y, x)
        h.remember_state(env, state)
    return h


def reward_sum(history: History, k: int, n: int) -> Fraction:
    """r_k + ... + r_n (1-based, inclusive)."""
    if not 1 <= k <= n <= len(history):
        raise ValueError(f"need 1 <= k <= n <= {len(history)}, got k={k}, n={n}")
    prefix = history._rec.prefix
    return prefix[n] - prefix[k - 1]


@dataclass(frozen=True)
class AverageValueEstimates:
    running: np.ndarray
    suffix_inf: np.ndarray
    suffix_sup: np.ndarray

    @property
    def lower(self) -> float:
        """Proxy for the lower average value: min of the running mean over the second half."""
        return float(self.suffix_inf[len(self.running) // 2])

    @property
    def upper(self) -> float:
        return float(self.suffix_sup[len(self.running) // 2])


def average_value_estimates(rewards: Sequence, m: int | None = None) -> AverageValueEstimates:
    """Running means (1/i) r_1..i for i <= m and their suffix extrema.

    ``suffix_inf[i]`` is min_{i <= j < m} of the running mean; at late
    indices it approximates the liminf, ``suffix_sup`` the limsup.
    """
    r = np.asarray([float(x) for x in rewards], dtype=float)
    if r.size == 0:
        raise ValueError("empty reward sequence")
    m = r.size if m is None else m
    if m < 1 or m > r.size:
        raise ValueError(f"horizon m={m} outside [1, {r.size}]")
    running = np.cumsum(r[:m]) / np.arange(1, m + 1)
    suffix_inf = np.minimum.accumulate(running[::-1])[::-1]
    suffix_sup = np.maximum.accumulate(running[::-1])[::-1]
    return AverageValueEstimates(running, suffix_inf, suffix_sup)
