"""Finite ergodic MDPs as history-dependent environments.

The observation is the state entered after the action, so the conditional
law of a percept depends on the history only through the last observation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..core import ConfigurationError, Environment, Percept, StatePolicy, make_percept, to_rational
from ..mdp import (FiniteMdp, NotErgodicError, absolute_spectral_gap, check_ergodic,
                   solve_average_reward)
from ..mdp import period as chain_period
from .metadata import (ClassMember, ConstantAllowance, ExponentialTail, PowerSchedule,
                       ReferenceRewards, ValueStabilityMetadata)

# reference sequences are tabulated until the state distribution is this close to periodic
_SETTLE_TOL = 1e-15
_SETTLE_CAP = 200_000


@dataclass
class MdpSpec:
    """Joint (next state, reward) law per (state, action).

    ``outcomes[(s, a)]`` is a list of ``(next_state, reward, probability)``
    where ``a`` is an action name.
    """

    n_states: int
    actions: tuple
    outcomes: dict
    initial_state: int = 0
    r_max: Fraction | None = None
    name: str = "mdp"

    @classmethod
    def from_tables(cls, transition, reward, actions: Sequence | None = None,
                    initial_state: int = 0, r_max=None, name: str = "mdp") -> "MdpSpec":
        """Deterministic-reward spec from P[s, a, s'] and R[s, a, s'] (or R[s, a])."""
        R = reward
        S, A = len(transition), len(transition[0])
        actions = tuple(actions) if actions is not None else tuple(str(a) for a in range(A))
        outcomes = {}
        for s in range(S):
            for a in range(A):
                rows = []
                for s2 in range(S):
                    p = transition[s][a][s2]
                    if p:
                        r = R[s][a] if np.ndim(R[s][a]) == 0 else R[s][a][s2]
                        rows.append((s2, r, p))
                outcomes[(s, actions[a])] = rows
        return cls(S, actions, outcomes, initial_state, r_max, name)


class MdpEnvironment(Environment):
    def __init__(self, spec: MdpSpec):
        self.spec = spec
        self.name = spec.name
        self.actions = tuple(spec.actions)
        self.observations = tuple(range(spec.n_states))
        if not self.actions:
            raise ConfigurationError("an MDP needs at least one action")
        if not 0 <= spec.initial_state < spec.n_states:
            raise ConfigurationError(f"initial state {spec.initial_state} out of range")
        S, A = spec.n_states, len(self.actions)
        self._dist: dict = {}
        self._prob: dict = {}
        self._prob_by_id: dict = {}
        P = np.zeros((S, A, S))
        R = np.zeros((S, A, S))
        rewards_seen = [Fraction(0)]
        for s in range(S):
            for ai, a in enumerate(self.actions):
                rows = spec.outcomes.get((s, a))
                if not rows:
                    raise ConfigurationError(f"no outcomes declared for state {s}, action {a!r}")
                merged: dict[Percept, float] = {}
                for s2, r, p in rows:
                    s2 = int(s2)
                    if not 0 <= s2 < S:
                        raise ConfigurationError(f"next state {s2} out of range")
                    p = float(to_rational(p)) if isinstance(p, str) else float(p)
                    if p < 0:
                        raise ConfigurationError("negative probability")
                    if p == 0:
                        continue
                    r = to_rational(r)
                    if r < 0:
                        raise ConfigurationError("rewards must be nonnegative")
                    rewards_seen.append(r)
                    x = make_percept(r, s2)
                    merged[x] = merged.get(x, 0.0) + p
                    P[s, ai, s2] += p
                    R[s, ai, s2] += p * float(r)
                total = sum(merged.values())
                if abs(total - 1.0) > 1e-12:
                    raise ConfigurationError(
                        f"outcome probabilities for state {s}, action {a!r} sum to {total!r}")
                self._dist[(s, a)] = tuple(merged.items())
                self._prob[(s, a)] = merged
                self._prob_by_id[(s, a)] = {id(x): p for x, p in merged.items()}
        with np.errstate(invalid="ignore", divide="ignore"):
            R = np.where(P > 0, R / np.where(P > 0, P, 1.0), 0.0)
        self.r_max = spec.r_max if spec.r_max is not None else max(rewards_seen)
        self.r_max = to_rational(self.r_max)
        if max(rewards_seen) > self.r_max:
            raise ConfigurationError(f"reward above r_max={self.r_max}")
        self.mdp = FiniteMdp(P, R, r_max=float(self.r_max) if self.r_max > 0 else 1.0)

    def initial_state(self):
        return self.spec.initial_state

    def distribution(self, state, action):
        return self._dist[(state, action)]

    def probability(self, state, action, percept):
        # percepts are interned, so the identity lookup almost always hits
        p = self._prob_by_id[(state, action)].get(id(percept))
        if p is None:
            return self._prob[(state, action)].get(percept, 0.0)
        return p

    def advance(self, state, action, percept):
        return percept.observation

    def worst_case_prefix(self, k: int, rng):
        """Open-loop prefix: repeat the action with the lowest mean reward."""
        worst = int(np.argmin(self.mdp.expected_reward.mean(axis=0)))
        return [self.actions[worst]] * (k - 1)


class TablePolicy(StatePolicy):
    """Stationary deterministic policy: action = table[current state]."""

    def __init__(self, env: MdpEnvironment, table):
        self.env = env
        self.table = tuple(env.actions[int(a)] for a in table)

    def act_state(self, state, step):
        return self.table[state]

    def __repr__(self):
        return f"TablePolicy({self.table})"


def reach_policy(mdp: FiniteMdp, targets, max_iters: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Actions minimizing the expected time to hit ``targets`` and those times.

    Value iteration on t(s) = 1 + min_a sum_s' P(s'|s,a) t(s'), t = 0 on targets.
    """
    S = mdp.n_states
    targets = np.asarray(sorted(targets), dtype=int)
    on_target = np.zeros(S, dtype=bool)
    on_target[targets] = True
    t = np.zeros(S)
    for _ in range(max_iters):
        q = 1.0 + mdp.transition @ t
        new = np.where(on_target, 0.0, q.min(axis=1))
        if np.abs(new - t).max() < 1e-12 * max(1.0, new.max()):
            t = new
            break
        t = new
    q = 1.0 + mdp.transition @ t
    actions = np.argmax(q <= q.min(axis=1, keepdims=True) + 1e-12, axis=1)
    return actions, t


def _closed_classes(P) -> list[np.ndarray]:
    """Closed communicating classes of a chain (its recurrent classes)."""
    n = P.shape[0]
    ncomp, labels = connected_components(P > 0, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(n), members)
        if not (P[np.ix_(members, outside)] > 0).any():
            closed.append(members)
    return closed


def reference_sequence(P, r, initial) -> ReferenceRewards:
    """Expected rewards E r(x_i) of a chain started in ``initial``, as head + cycle.

    ``initial`` is a state index or a distribution over states.
    """
    per = 1
    for members in _closed_classes(P):
        per = math.lcm(per, chain_period(P[np.ix_(members, members)]))
    if np.ndim(initial) == 0:
        dist = np.zeros(P.shape[0])
        dist[int(initial)] = 1.0
    else:
        dist = np.asarray(initial, dtype=float)
    recent: deque = deque(maxlen=per)
    values = []
    for i in range(_SETTLE_CAP):
        if i >= per and np.abs(dist - recent[0]).sum() < _SETTLE_TOL:
            return ReferenceRewards(values[: i - per], values[i - per:])
        values.append(float(dist @ r))
        recent.append(dist)
        dist = dist @ P
    return ReferenceRewards(values[:-per], values[-per:])


def mdp_environment(spec: MdpSpec, epsilon_schedule=None, tol: float = 1e-12) -> ClassMember:
    """Environment and value-stability metadata of a finite ergodic MDP.

    * V* and the optimal policy come from the average-reward solver.
    * Reference rewards are the expected rewards of that policy from the
      initial state.
    * Recovery: steer to the recurrent class of the optimal policy along
      minimal expected hitting times, then follow the optimal policy.
    * d(k, eps) is a constant (reach cost plus bias span) and phi decays
      exponentially with a rate set by the spectral gap of the optimal chain.
    """
    env = MdpEnvironment(spec)
    mdp = env.mdp
    check = check_ergodic(mdp)
    if not check:
        i, j = check.witness
        raise NotErgodicError(
            f"{spec.name}: not ergodic, state {j} unreachable from state {i}", check.witness)
    sol = solve_average_reward(mdp, tol=tol)
    P_opt = mdp.chain(sol.policy)
    r_opt = mdp.policy_reward(sol.policy)
    recurrent = np.concatenate(_closed_classes(P_opt))
    reach_actions, reach_times = reach_policy(mdp, recurrent)
    table = np.where(np.isin(np.arange(mdp.n_states), recurrent), sol.policy, reach_actions)
    recovery = TablePolicy(env, table)

    r_max = float(env.r_max)
    span = float(sol.bias.max() - sol.bias.min())
    c = r_max * (1.0 + float(reach_times.max())) + 2.0 * span
    gap = absolute_spectral_gap(P_opt)
    phi = ExponentialTail(A=2.0, rate=gap / (32.0 * max(r_max, 1e-12) ** 2))
    reference = reference_sequence(P_opt, r_opt, spec.initial_state)
    meta = ValueStabilityMetadata(
        optimal_value=sol.gain,
        reference=reference,
        d=ConstantAllowance(c),
        phi=phi,
        recovery_policy_factory=lambda history: recovery,
        epsilon_schedule=epsilon_schedule or PowerSchedule(),
        notes=f"optimal policy {recovery.table}; reach-then-follow recovery; gap {gap:.4g}",
    )
    env.optimal_policy = TablePolicy(env, sol.policy)
    env.solution = sol
    return ClassMember(env, meta)


def two_state_mdp(q_good: float, q_bad: float, good_state: int = 0, move_prob: float = 0.8,
                  name: str | None = None) -> MdpSpec:
    """Two states with Bernoulli rewards of mean q_good / q_bad (drawn in the current state).

    ``stay`` keeps the state and ``switch`` changes it, each with
    probability ``move_prob``.  The optimal policy stays in the good state
    and switches out of the bad one; its gain is
    move_prob * q_good + (1 - move_prob) * q_bad.
    """
    q = {good_state: to_rational(q_good), 1 - good_state: to_rational(q_bad)}
    p = to_rational(move_prob)
    outcomes = {}
    for s in (0, 1):
        for action, target in (("stay", s), ("switch", 1 - s)):
            rows = []
            for nxt, pn in ((target, p), (1 - target, 1 - p)):
                for r, pr in ((1, q[s]), (0, 1 - q[s])):
                    if pn * pr > 0:
                        rows.append((nxt, r, float(pn * pr)))
            outcomes[(s, action)] = rows
    return MdpSpec(2, ("stay", "switch"), outcomes, 0, Fraction(1),
                   name or f"two_state_{q_good:g}_{q_bad:g}")
