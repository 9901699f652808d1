import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_gain
from selfopt.core import ActionSequencePolicy, FunctionPolicy, History, RandomSource, rollout
from selfopt.environments import (EventuallyPeriodic, MdpSpec, bandit_tower, mdp_environment,
                                  passive_environment, pomdp_environment, reference_reward_prefix,
                                  steps_down, trap_environment, two_state_mdp)
from selfopt.environments.bandit import DOWN, PULL, UP
from selfopt.mdp import expected_hitting_times

ARMS = (0.2, 0.4, 0.6, 0.99, 0.5)


def toggle_member():
    spec = MdpSpec.from_tables([[[1, 0], [0, 1]], [[1, 0], [1, 0]]], [[1, 0], [0, 0]], ("a", "b"))
    return mdp_environment(spec)


def replay(env, actions, rng=None):
    return rollout(env, ActionSequencePolicy(actions), len(actions), rng or RandomSource(0))


# ---------------------------------------------------------------- MDP family


def test_one_state_mdp_metadata():
    m = mdp_environment(MdpSpec.from_tables([[[1.0]]], [[0.7]], ("only",)))
    assert m.meta.optimal_value == pytest.approx(0.7)
    np.testing.assert_allclose(reference_reward_prefix(m.meta, 5), [0.7] * 5)
    assert m.meta.recovery_policy(History()).act(History()) == "only"


def test_toggle_mdp_metadata_and_recovery():
    m = toggle_member()
    assert m.meta.optimal_value == pytest.approx(1.0, abs=1e-12)
    assert expected_hitting_times(m.env.mdp.uniform_chain())[1, 0] == 1
    h = replay(m.env, ["b"])                     # adversary parks the walk in state 1
    assert h.state_for(m.env) == 1
    after = rollout(m.env, m.meta.recovery_policy(h), 20, RandomSource(1), history=h)
    assert after.rewards[1:] == [0] + [1] * 19   # one step back to state 0, then a forever
    assert after.actions[1] == "a" and set(after.actions[2:]) == {"a"}
    ref = reference_reward_prefix(m.meta, 10_000)
    assert abs(ref.mean() - 1.0) < 1e-3


def test_two_state_family_values():
    for (qg, qb, gs), v in (((0.35, 0.1, 0), 0.3), ((0.7, 0.2, 1), 0.6), ((0.95, 0.7, 0), 0.9)):
        m = mdp_environment(two_state_mdp(qg, qb, gs))
        oracle, _ = brute_force_gain(m.env.mdp.transition, m.env.mdp.expected_reward)
        assert oracle == pytest.approx(v, abs=1e-12)
        assert m.meta.optimal_value == pytest.approx(v, abs=1e-9)


# ---------------------------------------------------------------- bandit tower


def test_bandit_moves_and_rewards():
    env = bandit_tower([0.1] * 6).env
    h = replay(env, [UP])
    assert h.state_for(env) == 1 and h.rewards == [0]
    h = replay(env, [UP] * 5 + [DOWN])
    assert h.state_for(env) == 0 and h.total_reward() == 0
    stepper = bandit_tower([0.1] * 6, steps_down(2)).env
    assert replay(stepper, [UP] * 5 + [DOWN]).state_for(stepper) == 3


def test_bandit_pull_mean_and_independence():
    env = bandit_tower([0.1, 0.9, 0.5]).env
    h = rollout(env, ActionSequencePolicy([UP], tail=PULL), 100_001, RandomSource(5))
    r = np.array(h.rewards[1:], dtype=float)
    assert abs(r.mean() - 0.9) < 0.01
    x = r - r.mean()
    lag1 = (x[:-1] @ x[1:]) / (x @ x)
    assert abs(lag1) <= 3 / np.sqrt(len(r))


def test_bandit_metadata_and_reference():
    m = bandit_tower(ARMS)
    assert m.meta.optimal_value == 0.99
    ref = m.meta.reference
    assert ref.settles_at == 18 and ref.values(19).tolist() == [0.0] * 18 + [0.99]
    # the declared reference is the expected reward of the sweep policy
    sweep = rollout(m.env, m.env.reference_policy, 40, RandomSource(0))
    pulls = [i for i, y in enumerate(sweep.actions) if y == PULL]
    assert pulls == list(range(18, 40))
    assert m.meta.d(900, 0.05) == pytest.approx(30.0)


def test_bandit_recovery_reaches_best_arm_quickly():
    m = bandit_tower(ARMS)
    for prefix in ([UP] * 4, [UP] * 2, [], [UP, DOWN]):
        h = replay(m.env, prefix)
        policy = m.meta.recovery_policy(h)
        after = rollout(m.env, policy, 10, RandomSource(2), history=h)
        state_at = [after.prefix(len(h) + t).state_for(m.env) for t in range(4, 11)]
        assert set(state_at) == {3}


# ---------------------------------------------------------------- traps


@pytest.mark.parametrize("s", [0, 1, 3])
def test_trap_rewards_examples(s):
    env = trap_environment(s).env
    h = replay(env, ["a"] * 3)
    assert h.rewards == [1, 1, 1]
    if s == 0:
        assert replay(env, ["b"] * 10).total_reward() == 0


def test_trap_unlock_example():
    env = trap_environment(2).env
    h = replay(env, list("aabbb"))
    x = env.sample(h.state_for(env), "b", RandomSource(0))
    assert x.reward == 2
    assert replay(env, list("aabb")).rewards == [1, 1, 0, 0]


@given(st.lists(st.sampled_from("ab"), max_size=40), st.integers(0, 4))
def test_trap_reward_matches_prefix_statistics(actions, s):
    env = trap_environment(s).env
    h = replay(env, actions)
    assert replay(env, actions) == h
    for i, (y, x) in enumerate(h):
        past = actions[:i]
        n_a = past.count("a")
        runs = [len(r) for r in "".join(past + [y]).split("a")]
        if y == "a":
            expected = 1
        elif s == 0:
            expected = 0
        else:
            expected = 2 if max(runs) > n_a and n_a >= s else 0
        assert x.reward == expected


def test_trap_metadata_reference_is_recovery_run():
    for s in (1, 2, 4):
        m = trap_environment(s)
        h = rollout(m.env, m.meta.recovery_policy(History()), 30, RandomSource(0))
        np.testing.assert_array_equal(np.array(h.rewards, dtype=float),
                                      reference_reward_prefix(m.meta, 30))
        assert m.meta.optimal_value == 2


# ---------------------------------------------------------------- passive


def test_passive_examples():
    m = passive_environment("01")
    h = rollout(m.env, m.meta.recovery_policy(History()), 50, RandomSource(0))
    assert h.rewards == [1] * 50
    ones = passive_environment("1")
    h = rollout(ones.env, FunctionPolicy(lambda h: "1"), 30, RandomSource(0))
    assert h.total_reward() == 30
    np.testing.assert_array_equal(reference_reward_prefix(m.meta, 6), np.ones(6))


@given(st.lists(st.sampled_from("01"), min_size=1, max_size=60))
def test_passive_recovery_after_any_prefix(prefix):
    m = passive_environment(EventuallyPeriodic("011", "10"))
    h = replay(m.env, prefix)
    after = rollout(m.env, m.meta.recovery_policy(h), 30, RandomSource(0), history=h)
    assert after.rewards[len(h):] == [1] * 30


@pytest.mark.parametrize("member", [passive_environment(EventuallyPeriodic("011", "1")),
                                    passive_environment(0.3)], ids=["periodic", "bernoulli"])
def test_passivity_exhaustive(member):
    env = member.env
    for depth in range(9):
        for actions in itertools.product(env.actions, repeat=depth):
            h = replay(env, list(actions), RandomSource(depth))
            state = h.state_for(env)
            marginals = [env.observation_distribution(state, y) for y in env.actions]
            assert all(m == marginals[0] for m in marginals)


def test_bernoulli_passive_value():
    m = passive_environment(0.3)
    assert m.meta.optimal_value == pytest.approx(0.7)
    h = rollout(m.env, m.meta.recovery_policy(History()), 50_000, RandomSource(8))
    assert abs(float(h.total_reward()) / 50_000 - 0.7) < 0.01


# ---------------------------------------------------------------- POMDP


def small_pomdp():
    return pomdp_environment([[0.7, 0.3], [0.4, 0.6]], [[0.9, 0.1], [0.2, 0.8]],
                             [[1, 0], [0.5, 0.25]], actions=("x", "y"))


def test_pomdp_value_and_recovery():
    m = small_pomdp()
    pi = np.array([4 / 7, 3 / 7])
    assert m.meta.optimal_value == pytest.approx(pi @ [1, 0.5], abs=1e-12)
    h = rollout(m.env, m.meta.recovery_policy(History()), 100_000, RandomSource(3))
    assert abs(float(h.total_reward()) / 100_000 - m.meta.optimal_value) < 0.01


def test_pomdp_belief_update_is_bayes():
    m = small_pomdp()
    env = m.env
    state = env.initial_state()
    dist = dict(env.distribution(state, "x"))
    # joint over (next hidden, observation) from a uniform belief
    P, E = np.array([[0.7, 0.3], [0.4, 0.6]]), np.array([[0.9, 0.1], [0.2, 0.8]])
    prior = np.array([0.5, 0.5]) @ P
    for x, p in dist.items():
        h_next = 0 if x.reward == 1 else 1
        assert p == pytest.approx(prior[h_next] * E[h_next, x.observation], abs=1e-12)


# ---------------------------------------------------------------- metadata consistency


def all_members():
    return [
        ("mdp", mdp_environment(two_state_mdp(0.7, 0.2, 1))),
        ("toggle", toggle_member()),
        ("bandit", bandit_tower(ARMS)),
        ("trap2", trap_environment(2)),
        ("trap0", trap_environment(0)),
        ("passive", passive_environment("011")),
        ("bernoulli", passive_environment(0.8)),
        ("pomdp", small_pomdp()),
    ]


@pytest.mark.parametrize("name, member", all_members(), ids=lambda v: v if isinstance(v, str) else "")
def test_reference_mean_approaches_value(name, member):
    meta = member.meta
    ref = reference_reward_prefix(meta, 100_000)
    for n in (1_000, 10_000, 100_000):
        assert abs(ref[:n].mean() - meta.optimal_value) <= meta.mean_tolerance(n)


@pytest.mark.parametrize("name, member", all_members(), ids=lambda v: v if isinstance(v, str) else "")
def test_sublinear_allowances_vanish(name, member):
    d = member.meta.d
    ratios = [d(k, 0.05) / k for k in (10**2, 10**3, 10**4, 10**5)]
    if name == "trap2":
        assert not d.is_sublinear() and ratios == pytest.approx([2.0] * 4)
        return
    assert d.is_sublinear()
    assert all(b <= a for a, b in zip(ratios, ratios[1:])) and ratios[-1] < 0.01


def test_allowance_thresholds_are_exact():
    from selfopt.environments import ConstantAllowance, LinearAllowance, SqrtAllowance
    for d in (ConstantAllowance(3.5), SqrtAllowance(), SqrtAllowance(2.0)):
        for slope in (0.1, 0.0125, 0.003):
            m = d.threshold(0.05, slope)
            assert d(m, 0.05) <= slope * m and (m == 1 or d(m - 1, 0.05) > slope * (m - 1))
    assert LinearAllowance(2.0).threshold(0.05, 0.01) is None


def test_reference_sums_match_prefix_tables():
    ref = bandit_tower(ARMS).meta.reference
    vals = ref.values(200)
    S = np.concatenate([[0.0], np.cumsum(vals)])
    for a, b in ((1, 1), (1, 18), (10, 40), (19, 200)):
        assert ref.sum(a, b) == pytest.approx(S[b] - S[a - 1], abs=1e-12)
    assert Fraction(ref.prefix(0)) == 0
