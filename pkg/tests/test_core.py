from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selfopt.core import (ActionSequencePolicy, FunctionPolicy, History, RandomSource,
                          average_value_estimates, make_percept, reward_sum, rollout, sample_step,
                          to_rational)
from selfopt.environments import (bandit_tower, mdp_environment, passive_environment,
                                  pomdp_environment, trap_environment, two_state_mdp)


def history_of(rewards):
    h = History()
    for r in rewards:
        h = h.append("a", make_percept(r))
    return h


def test_to_rational_reads_decimals_exactly():
    assert to_rational(0.1) == Fraction(1, 10)
    assert to_rational("3/4") == Fraction(3, 4)
    with pytest.raises(ValueError):
        to_rational(float("nan"))


def test_percepts_are_interned():
    assert make_percept(1, "x") is make_percept(Fraction(1), "x")


@pytest.mark.parametrize("rewards, k, n, expected", [
    ((1, 1, 1), 1, 3, 3),
    ((1, 2, 3, 4, 5), 2, 4, 9),
    ((0, 7, 0), 2, 2, 7),
])
def test_reward_sum_examples(rewards, k, n, expected):
    assert reward_sum(history_of(rewards), k, n) == expected


def test_reward_sum_rejects_bad_ranges():
    with pytest.raises(ValueError):
        reward_sum(history_of((1, 2)), 2, 3)


@given(st.lists(st.fractions(min_value=0, max_value=5, max_denominator=7), min_size=2, max_size=30),
       st.data())
def test_reward_sum_splits(rewards, data):
    h = history_of(rewards)
    n = len(rewards)
    k = data.draw(st.integers(1, n - 1))
    m = data.draw(st.integers(k, n - 1))
    last = data.draw(st.integers(m + 1, n))
    assert reward_sum(h, k, last) == reward_sum(h, k, m) + reward_sum(h, m + 1, last)
    assert reward_sum(h, k, last) == sum(rewards[k - 1:last])


def test_history_views_are_immutable():
    h1 = history_of((1, 2))
    h2 = h1.append("b", make_percept(3))
    h3 = h1.append("c", make_percept(5))
    assert len(h1) == 2 and h2.total_reward() == 6 and h3.total_reward() == 8
    assert h2.actions == ["a", "a", "b"] and h3.actions == ["a", "a", "c"]
    assert h2.prefix(2) == h1


def test_average_value_estimates_examples():
    est = average_value_estimates([1] * 50)
    assert np.all(est.running == 1) and est.lower == est.upper == 1
    est = average_value_estimates([1, 0, 0, 0])
    np.testing.assert_allclose(est.running, [1, 0.5, 1 / 3, 0.25])
    m = 1000
    est = average_value_estimates([0, 2] * (m // 2))
    assert abs(est.running[-1] - 1) < 1e-12
    assert abs(est.lower - 1) <= 1 / (m // 2) + 1e-12 and abs(est.upper - 1) <= 1 / (m // 2) + 1e-12


def test_sample_step_degenerate_and_trap(rng):
    passive = passive_environment("01").env
    y, x = sample_step(passive, FunctionPolicy(lambda h: "1"), History(), rng)
    assert x == make_percept(0, "0")
    trap = trap_environment(0).env
    for _ in range(5):
        y, x = sample_step(trap, FunctionPolicy(lambda h: "a"), History(), rng)
        assert x.reward == 1 and x.observation == trap.observations[0]


def test_bandit_arm_mean(rng):
    env = bandit_tower([0.3, 0.5]).env
    h = rollout(env, ActionSequencePolicy([], tail="g"), 100_000, rng)
    assert abs(float(h.total_reward()) / 100_000 - 0.3) < 0.01


def shipped_environments():
    P = [[0.7, 0.3], [0.2, 0.8]]
    E = [[0.9, 0.1], [0.3, 0.7]]
    return [
        mdp_environment(two_state_mdp(0.7, 0.2)).env,
        bandit_tower([0.2, 0.4, 0.6, 0.99, 0.5]).env,
        trap_environment(2).env,
        passive_environment("011", name="p011").env,
        passive_environment(0.8).env,
        pomdp_environment(P, E, [[1, 0], [0.5, 0.25]]).env,
    ]


@pytest.mark.parametrize("env", shipped_environments(), ids=lambda e: e.name)
def test_distributions_normalize(env):
    rng = RandomSource(3)
    g = np.random.default_rng(4)
    probes = 0
    while probes < 1000:
        h = rollout(env, FunctionPolicy(lambda h: env.actions[g.integers(len(env.actions))]),
                    int(g.integers(0, 12)), rng)
        state = h.state_for(env)
        for y in env.actions:
            dist = env.distribution(state, y)
            assert abs(sum(p for _, p in dist) - 1.0) <= 1e-12
            for x, p in dist:
                assert env.probability(state, y, x) == pytest.approx(p, abs=1e-15)
            probes += 1


@pytest.mark.parametrize("env", shipped_environments(), ids=lambda e: e.name)
def test_rollouts_are_deterministic_given_seed(env):
    policy = FunctionPolicy(lambda h: env.actions[len(h) % len(env.actions)])
    a = rollout(env, policy, 300, RandomSource(99))
    b = rollout(env, policy, 300, RandomSource(99))
    assert a == b
