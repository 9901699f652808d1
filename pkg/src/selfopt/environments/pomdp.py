"""A small ergodic POMDP: hidden Markov dynamics seen through noisy observations.

The hidden chain ignores the actions.  Each step the hidden state moves
h -> h' ~ P(h, .), the agent sees o ~ E(h', .) and earns R(h', action).
One action is dominant (best in every hidden state), so the optimal
policy plays it forever and the belief never has to be planned over.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from ..core import ConfigurationError, Environment, Percept, StatePolicy, make_percept, to_rational
from ..mdp import absolute_spectral_gap, mixing_bound, period, require_irreducible
from .mdp_env import reference_sequence
from .metadata import (ClassMember, ConstantAllowance, ExponentialTail, PowerSchedule,
                       ValueStabilityMetadata)

_MIX_TOL = 1e-14


class HiddenChainEnvironment(Environment):
    """Tracker state: the belief over the current hidden state (a tuple)."""

    def __init__(self, transition, emission, reward, actions: Sequence | None = None,
                 observations: Sequence | None = None, initial=None, name: str = "pomdp"):
        P = np.asarray(transition, dtype=float)
        E = np.asarray(emission, dtype=float)
        H = P.shape[0]
        if P.shape != (H, H) or E.ndim != 2 or E.shape[0] != H:
            raise ConfigurationError("need transition (H, H) and emission (H, O)")
        for M, what in ((P, "transition"), (E, "emission")):
            if (M < 0).any() or np.abs(M.sum(axis=1) - 1).max() > 1e-12:
                raise ConfigurationError(f"{what} rows must be probability distributions")
        self.rewards = [[to_rational(x) for x in row] for row in reward]
        if len(self.rewards) != H or len({len(row) for row in self.rewards}) != 1:
            raise ConfigurationError("reward must have shape (H, A)")
        n_actions = len(self.rewards[0])
        self.actions = tuple(actions) if actions is not None else tuple(str(a) for a in range(n_actions))
        self.observations = (tuple(observations) if observations is not None
                             else tuple(range(E.shape[1])))
        if len(self.actions) != n_actions or len(self.observations) != E.shape[1]:
            raise ConfigurationError("alphabet sizes do not match the tables")
        flat = [r for row in self.rewards for r in row]
        if min(flat) < 0:
            raise ConfigurationError("rewards must be nonnegative")
        self.r_max = max(max(flat), Fraction(1))
        self.P, self.E = P, E
        self.R = np.array([[float(r) for r in row] for row in self.rewards])
        b0 = np.full(H, 1.0 / H) if initial is None else np.asarray(initial, dtype=float)
        if b0.shape != (H,) or abs(b0.sum() - 1) > 1e-12:
            raise ConfigurationError("initial belief must be a distribution over hidden states")
        self.initial_belief = b0
        self.name = name
        self._cache: dict = {}

    def initial_state(self):
        return tuple(self.initial_belief)

    def distribution(self, state, action):
        key = (state, action)
        out = self._cache.get(key)
        if out is None:
            a = self.actions.index(action)
            nxt = np.asarray(state) @ self.P
            mass: dict[Percept, float] = {}
            for h in np.flatnonzero(nxt > 0):
                for o in np.flatnonzero(self.E[h] > 0):
                    x = make_percept(self.rewards[h][a], self.observations[o])
                    mass[x] = mass.get(x, 0.0) + nxt[h] * self.E[h, o]
            total = sum(mass.values())
            out = tuple((x, p / total) for x, p in mass.items())
            if len(self._cache) < 100_000:
                self._cache[key] = out
        return out

    def advance(self, state, action, percept):
        a = self.actions.index(action)
        o = self.observations.index(percept.observation)
        post = np.asarray(state) @ self.P * self.E[:, o]
        post = post * np.array([r == percept.reward for r in (row[a] for row in self.rewards)])
        total = post.sum()
        if total <= 0:
            # percept impossible under this model; keep the prior prediction
            post = np.asarray(state) @ self.P
            total = post.sum()
        # rounding keeps beliefs hashable and the cache small
        return tuple(np.round(post / total, 12))

    def worst_case_prefix(self, k: int, rng) -> list:
        worst = int(np.argmin(self.R.mean(axis=0)))
        return [self.actions[worst]] * (k - 1)


class ConstantAction(StatePolicy):
    def __init__(self, env: Environment, action):
        self.env = env
        self.action = action

    def act_state(self, state, step):
        return self.action


def pomdp_environment(transition, emission, reward, actions=None, observations=None,
                      initial=None, name: str = "pomdp", epsilon_schedule=None) -> ClassMember:
    """Hidden-chain POMDP with a dominant action, plus its metadata.

    V* = pi . R(., a*).  Since actions do not move the hidden chain, the
    expected shortfall of the recovery policy after any prefix is at most
    2 r_max sum_t sup_h TV(P^t(h, .), pi), which is declared as the constant
    d; phi decays with the spectral gap of P.
    """
    env = HiddenChainEnvironment(transition, emission, reward, actions, observations, initial, name)
    P = env.P
    require_irreducible(P)
    if period(P) != 1:
        raise ConfigurationError("the hidden chain must be aperiodic")
    dominant = [a for a in range(len(env.actions))
                if (env.R[:, a][:, None] >= env.R - 1e-15).all()]
    if not dominant:
        raise ConfigurationError("no action is best in every hidden state")
    a_star = dominant[0]
    r_star = env.R[:, a_star]
    reference = reference_sequence(P, r_star, env.initial_belief @ P)
    v_star = reference.limit_mean
    r_max = float(env.r_max)
    mix_total, t = 0.0, 1
    while True:
        m = mixing_bound(P, t)
        mix_total += m
        if m < _MIX_TOL or t > 100_000:
            break
        t += 1
    recovery = ConstantAction(env, env.actions[a_star])
    gap = absolute_spectral_gap(P)
    meta = ValueStabilityMetadata(
        optimal_value=v_star,
        reference=reference,
        d=ConstantAllowance(1.0 + 2.0 * r_max * mix_total),
        phi=ExponentialTail(A=2.0, rate=gap / (32.0 * r_max ** 2)),
        recovery_policy_factory=lambda history: recovery,
        epsilon_schedule=epsilon_schedule or PowerSchedule(),
        notes=f"dominant action {env.actions[a_star]!r}; hidden-chain gap {gap:.4g}",
    )
    return ClassMember(env, meta)
