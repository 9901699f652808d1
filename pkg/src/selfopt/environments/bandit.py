"""A finitely truncated tower of Bernoulli arms with g/u/d moves."""

from __future__ import annotations

import math
from collections import deque
from fractions import Fraction
from typing import Callable, Sequence

from ..core import EMPTY, ConfigurationError, Environment, Percept, StatePolicy, make_percept
from .metadata import (BernsteinTail, ClassMember, PowerSchedule, ReferenceRewards,
                       SqrtAllowance, ValueStabilityMetadata, ZeroTail)

PULL, UP, DOWN = "g", "u", "d"
_ZERO = make_percept(Fraction(0), EMPTY)
_ONE = make_percept(Fraction(1), EMPTY)


def to_bottom(arm: int) -> int:
    return 0


def steps_down(n: int) -> Callable[[int], int]:
    """Down rule moving ``n`` arms down (never below arm 0)."""
    if n < 1:
        raise ValueError("a down move must move at least one arm")

    def rule(arm: int) -> int:
        return max(arm - n, 0)

    rule.__name__ = f"steps_down_{n}"
    return rule


class BanditTower(Environment):
    """Arms 0..M-1 with Bernoulli means ``arm_params``.

    ``g`` pulls the current arm, ``u`` moves one arm up (clamped at the top),
    ``d`` moves to ``down_rule(arm)``; moves earn reward 0.  The tracker
    state is the current arm, which depends on the actions alone.
    """

    actions = (PULL, UP, DOWN)
    observations = (EMPTY,)
    r_max = Fraction(1)

    def __init__(self, arm_params: Sequence, down_rule: Callable[[int], int] = to_bottom,
                 name: str = "bandit"):
        if len(arm_params) == 0:
            raise ValueError("a bandit tower needs at least one arm")
        self.arm_params = tuple(float(p) for p in arm_params)
        if any(not 0.0 <= p <= 1.0 for p in self.arm_params):
            raise ValueError("arm parameters must lie in [0, 1]")
        self.down_rule = down_rule
        self.name = name
        M = len(self.arm_params)
        self._down = tuple(down_rule(i) for i in range(M))
        if any(not 0 <= j <= i for i, j in enumerate(self._down)):
            raise ConfigurationError("down_rule must map arm i into [0, i]")
        self._pull = tuple(
            ((_ONE, 1.0),) if p == 1.0 else ((_ZERO, 1.0),) if p == 0.0
            else ((_ONE, p), (_ZERO, 1.0 - p))
            for p in self.arm_params)

    @property
    def n_arms(self) -> int:
        return len(self.arm_params)

    def initial_state(self):
        return 0

    def move(self, arm: int, action) -> int:
        if action == UP:
            return min(arm + 1, self.n_arms - 1)
        if action == DOWN:
            return self._down[arm]
        return arm

    def distribution(self, state, action):
        if action == PULL:
            return self._pull[state]
        return ((_ZERO, 1.0),)

    def probability(self, state, action, percept):
        if action == PULL:
            p = self.arm_params[state]
            if percept == _ONE:
                return p
            return 1.0 - p if percept == _ZERO else 0.0
        return 1.0 if percept == _ZERO else 0.0

    def sample(self, state, action, rng):
        if action != PULL:
            return _ZERO
        p = self.arm_params[state]
        if p == 1.0:
            return _ONE
        if p == 0.0:
            return _ZERO
        return _ONE if rng.uniform() < p else _ZERO

    def advance(self, state, action, percept):
        return self.move(state, action)

    def shortest_moves(self, target: int) -> tuple[list, list[int]]:
        """First move and distance of a shortest u/d path from every arm to ``target``."""
        M = self.n_arms
        dist = [math.inf] * M
        first = [None] * M
        dist[target] = 0
        # reverse BFS over the deterministic move graph
        preds: list[list[tuple[int, str]]] = [[] for _ in range(M)]
        for i in range(M):
            for a in (UP, DOWN):
                j = self.move(i, a)
                if j != i:
                    preds[j].append((i, a))
        queue = deque([target])
        while queue:
            j = queue.popleft()
            for i, a in preds[j]:
                if dist[i] == math.inf:
                    dist[i] = dist[j] + 1
                    first[i] = a
                    queue.append(i)
        return first, dist

    def worst_case_prefix(self, k: int, rng) -> list:
        """Climb to the top arm and park there (the far-arm adversary)."""
        climb = min(k - 1, self.n_arms - 1)
        return [UP] * climb + [PULL] * (k - 1 - climb)


class GoToArmPolicy(StatePolicy):
    """Move along a shortest path to ``target``, then pull forever."""

    def __init__(self, env: BanditTower, target: int):
        self.env = env
        self.target = target
        self.first, self.dist = env.shortest_moves(target)
        if any(d == math.inf for d in self.dist):
            raise ConfigurationError(f"arm {target} is not reachable from every arm")

    def act_state(self, state, step):
        return PULL if state == self.target else self.first[state]


class SweepPolicy(StatePolicy):
    """The reference schedule: wait at arm 0 (action d) until ``start``, climb, pull.

    The arm index at step t never exceeds sqrt(t).
    """

    def __init__(self, env: BanditTower, target: int, start: int):
        self.env = env
        self.target = target
        self.start = start

    def act_state(self, state, step):
        if step < self.start:
            return DOWN
        if state < self.target:
            return UP
        return PULL


def bandit_tower(arm_params: Sequence, down_rule: Callable[[int], int] = to_bottom,
                 name: str = "bandit", epsilon_schedule=None) -> ClassMember:
    """Bandit tower with metadata V* = max arm mean and d(k, eps) = sqrt(k).

    The reference rewards are the expected rewards of ``SweepPolicy``:
    zero until step t0 + i* - 1 and the best mean afterwards, where i* is
    the best arm and t0 = max(D, i* + 1)^2 with D the longest shortest path
    to arm i*.  Recovery from any history walks to arm i* in at most D
    steps, which is within sqrt(k) of the reference for every k.  The
    remaining loss is the shortfall of i.i.d. pulls of the best arm, so phi
    is a Bernstein bound with that arm's variance.
    """
    env = BanditTower(arm_params, down_rule, name)
    best = max(env.arm_params)
    target = env.arm_params.index(best)
    recovery = GoToArmPolicy(env, target)
    D = max(recovery.dist)
    start = max(D, target + 1) ** 2
    head_len = start + target - 1
    reference = ReferenceRewards([0.0] * head_len, [best])
    var = best * (1.0 - best)
    meta = ValueStabilityMetadata(
        optimal_value=best,
        reference=reference,
        d=SqrtAllowance(),
        phi=BernsteinTail(var) if var > 0 else ZeroTail(),
        recovery_policy_factory=lambda history: recovery,
        epsilon_schedule=epsilon_schedule or PowerSchedule(),
        notes=f"best arm {target}; sweep reference starts climbing at step {start}",
    )
    env.reference_policy = SweepPolicy(env, target, start)
    return ClassMember(env, meta)
