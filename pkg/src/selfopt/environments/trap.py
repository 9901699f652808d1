"""Deterministic trap environments showing that d(k, eps) = o(k) is needed.

Actions ``a`` and ``b``, no observations.  In the base environment (s = 0)
``a`` pays 1 and ``b`` pays 0.  For s >= 1, ``a`` pays 1 and ``b`` pays 2
once the longest run of consecutive b's exceeds the number of a's taken so
far and that number is at least s; otherwise ``b`` pays 0.
"""

from __future__ import annotations

from fractions import Fraction

from ..core import EMPTY, Environment, Percept, StatePolicy, make_percept
from .metadata import (ClassMember, ConstantAllowance, LinearAllowance, PowerSchedule,
                       ReferenceRewards, ValueStabilityMetadata, ZeroTail)

A, B = "a", "b"
_R0 = make_percept(Fraction(0), EMPTY)
_R1 = make_percept(Fraction(1), EMPTY)
_R2 = make_percept(Fraction(2), EMPTY)


class TrapEnvironment(Environment):
    """Tracker state: (number of a's, current b-run length, longest b-run)."""

    actions = (A, B)
    observations = (EMPTY,)
    r_max = Fraction(2)

    def __init__(self, s: int, name: str | None = None):
        if s < 0:
            raise ValueError("s must be >= 0")
        self.s = int(s)
        self.name = name or f"trap_{self.s}"

    def initial_state(self):
        return (0, 0, 0)

    def reward(self, state, action) -> Percept:
        n_a, run, longest = state
        if action == A:
            return _R1
        if self.s == 0:
            return _R0
        longest = max(longest, run + 1)
        return _R2 if longest > n_a and n_a >= self.s else _R0

    def distribution(self, state, action):
        return ((self.reward(state, action), 1.0),)

    def probability(self, state, action, percept):
        return 1.0 if percept == self.reward(state, action) else 0.0

    def sample(self, state, action, rng):
        return self.reward(state, action)

    def advance(self, state, action, percept):
        n_a, run, longest = state
        if action == A:
            return (n_a + 1, 0, longest)
        run += 1
        return (n_a, run, max(longest, run))

    def worst_case_prefix(self, k: int, rng) -> list:
        """All a's: maximizes the b-run needed to unlock reward 2 again."""
        return [A] * (k - 1)


class TrapRecoveryPolicy(StatePolicy):
    """Optimal from any history: top the a-count up to s, then play b."""

    def __init__(self, env: TrapEnvironment):
        self.env = env

    def act_state(self, state, step):
        if self.env.s == 0:
            return A
        return A if state[0] < self.env.s else B


def trap_environment(s: int, epsilon_schedule=None) -> ClassMember:
    """Trap environment with its metadata.

    For s >= 1: V* = 2, reference rewards 1 (s times), 0 (s times), then 2
    forever, phi = 0 and a *linear* loss allowance d(k, eps) = r_max * k.
    For s = 0: V* = 1, reference 1 forever, d = 0, phi = 0.
    """
    env = TrapEnvironment(s)
    recovery = TrapRecoveryPolicy(env)
    if s == 0:
        reference = ReferenceRewards.constant(1.0)
        d = ConstantAllowance(0.0)
        v_star = 1.0
    else:
        reference = ReferenceRewards([1.0] * s + [0.0] * s, [2.0])
        d = LinearAllowance(float(env.r_max))
        v_star = 2.0
    meta = ValueStabilityMetadata(
        optimal_value=v_star,
        reference=reference,
        d=d,
        phi=ZeroTail(),
        recovery_policy_factory=lambda history: recovery,
        epsilon_schedule=epsilon_schedule or PowerSchedule(),
        notes="deterministic trap; d is linear in k for s >= 1",
    )
    return ClassMember(env, meta)
