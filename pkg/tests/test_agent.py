import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selfopt.agent import (AgentState, ClassSpec, Horizons, HorizonSearchError, MixtureState,
                           PrepareEvent, SelfOptimizingAgent, condition_i_holds, consistency_set,
                           exploration_step, horizon_k, horizon_k1, horizon_k3, run_agent,
                           select_nu_e, select_nu_t, update_mixture, verify_horizons)
from selfopt.core import History, RandomSource, make_percept, rollout
from selfopt.environments import (EventuallyPeriodic, MdpSpec, ReferenceRewards, mdp_environment,
                                  passive_environment, trap_environment, two_state_mdp)
from selfopt.harness import parse_experiment, three_mdp_class_config


def constant_mdp(r):
    return mdp_environment(MdpSpec.from_tables([[[1.0]]], [[r]], ("go",), name=f"const_{r}"))


def three_mdp_class():
    return parse_experiment(three_mdp_class_config()).build_class()


def feed(state, spec, steps):
    for y, x in steps:
        state = update_mixture(state, spec, y, x)
    return state


# ---------------------------------------------------------------- mixture


def test_default_weights_halve():
    spec = ClassSpec.build([constant_mdp(0.1), constant_mdp(0.2), constant_mdp(0.3)])
    assert spec.weights == pytest.approx([4 / 7, 2 / 7, 1 / 7])
    assert [spec.numbering(j) for j in range(7)] == [0, 1, 2, 0, 1, 2, 0]


def test_singleton_ratio_is_one():
    member = mdp_environment(two_state_mdp(0.7, 0.2))
    spec = ClassSpec.build([member])
    h = rollout(member.env, member.env.optimal_policy, 200, RandomSource(0))
    state = MixtureState.initial(spec)
    for y, x in h:
        state = update_mixture(state, spec, y, x)
        assert state.ratios()[0] == pytest.approx(1.0, abs=1e-12)


def test_identical_members_keep_ratio_one():
    spec = ClassSpec.build([passive_environment(0.6), passive_environment(0.6)], [0.5, 0.5])
    state = feed(MixtureState.initial(spec), spec, [("1", make_percept(1, "1"))] * 5
                 + [("1", make_percept(0, "0"))] * 3)
    np.testing.assert_allclose(state.ratios(), [1.0, 1.0], atol=1e-12)


def test_bernoulli_posterior_ratio():
    spec = ClassSpec.build([passive_environment(0.5), passive_environment(0.9)], [0.5, 0.5])
    state = feed(MixtureState.initial(spec), spec, [("1", make_percept(1, "1"))] * 3)
    expected = 0.729 / (0.5 * 0.125 + 0.5 * 0.729)
    assert state.ratios()[1] == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.707, abs=1e-3)


def test_consistency_threshold_example():
    b = 0.7 / 3.1
    weights = (1 - 2 * b, b, b)                  # makes sum w * ratio = 1 for ratios (1.7, 0.2, 0.1)
    state = MixtureState(tuple(math.log(r) for r in (1.7, 0.2, 0.1)), (None,) * 3,
                         tuple(math.log(w) for w in weights))
    assert state.log_xi == pytest.approx(0.0, abs=1e-12)
    assert consistency_set(state, 2) == frozenset({0})
    assert consistency_set(state, 3) == frozenset({0, 1})


def test_zero_probability_member_is_excluded_forever():
    a = passive_environment(EventuallyPeriodic("0"), name="zeros")
    b = passive_environment(EventuallyPeriodic("1"), name="ones")
    spec = ClassSpec.build([a, b])
    state = feed(MixtureState.initial(spec), spec, [("0", make_percept(1, "0"))])
    assert state.log_likelihood[1] == -math.inf
    for s in (1, 5, 50, 500):
        assert consistency_set(state, s) == frozenset({0})


@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=5), st.integers(0, 10**6),
       st.integers(1, 120))
def test_mixture_identities(ps, seed, steps):
    members = [passive_environment(p) for p in ps]
    spec = ClassSpec.build(members)
    rng = RandomSource(seed)
    h = rollout(members[seed % len(members)].env, members[0].meta.recovery_policy(History()),
                steps, rng)
    state = MixtureState.initial(spec)
    for y, x in h:
        state = update_mixture(state, spec, y, x)
        ratios = state.ratios()
        assert abs(float(np.dot(spec.weights, ratios)) - 1.0) <= 1e-9
        assert np.all(ratios <= 1.0 / np.array(spec.weights) + 1e-9)
        for s in (1, 3, 10):
            assert consistency_set(state, s)


# ---------------------------------------------------------------- selection


def test_select_nu_t_scans_the_numbering():
    spec = ClassSpec.build([constant_mdp(0.1), constant_mdp(0.2), constant_mdp(0.3)])
    mixture = MixtureState((-50.0, -50.0, 0.0), (0, 0, 0), spec.log_weights)
    state = AgentState(mixture, s=1, j_t=3)      # position 3 maps to member 0
    assert select_nu_t(state, spec) == 2
    assert state.j_t == 4
    assert ClassSpec.build([constant_mdp(0.5)]).size == 1
    single = AgentState(MixtureState.initial(ClassSpec.build([constant_mdp(0.5)])))
    assert select_nu_t(single, ClassSpec.build([constant_mdp(0.5)])) == 0


def test_select_nu_e_rules():
    spec = ClassSpec.build([constant_mdp(0.3), constant_mdp(0.9)])
    state = AgentState(MixtureState.initial(spec), nu_t=0)
    assert select_nu_e(state, spec) == 1 and state.j_e == 1
    top = AgentState(MixtureState.initial(spec), nu_t=1, j_e=5)
    assert select_nu_e(top, spec) is None and top.j_e == 5
    dead = AgentState(MixtureState((0.0, -math.inf), (0, 0), spec.log_weights), nu_t=0)
    assert select_nu_e(dead, spec) is None


def test_agent_idles_when_nu_t_is_best():
    spec = ClassSpec.build([constant_mdp(0.9), constant_mdp(0.3)])
    traj, agent, _ = run_agent(spec, 0, 50, RandomSource(0))
    assert set(traj.phase_names()[1:]) == {"idle_t"}
    assert traj.nu_e.tolist() == [-1] * 50 and not agent.events


# ---------------------------------------------------------------- horizons


def test_horizon_examples():
    assert horizon_k1(10, 0.5, 0.1) == 400
    assert horizon_k3(2, 1.0, 0.1) == 161
    assert horizon_k1(10, 0.0, 0.1) == 1


@given(st.integers(1, 500), st.floats(0.01, 2.0), st.floats(0.001, 0.5))
def test_k1_is_smallest_solution(i_h, v, eps):
    k = horizon_k1(i_h, v, eps)
    assert i_h * v / k <= eps / 8 and (k == 1 or i_h * v / (k - 1) > eps / 8)


@given(st.integers(0, 500), st.floats(0.1, 2.0), st.floats(0.001, 0.5))
def test_k3_is_smallest_solution(h, r_max, eps):
    k = horizon_k3(h, r_max, eps)
    assert h * r_max / k < eps / 8 and (k == 1 or h * r_max / (k - 1) >= eps / 8)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.floats(0.05, 0.9),
       st.floats(0.0, 0.3), st.integers(1, 300))
def test_gap_search_matches_brute_force(head, high, delta, start):
    ref_e = ReferenceRewards(head, [high])
    ref_t = ReferenceRewards.constant(0.1)
    k = horizon_k(ref_e, ref_t, delta, start, k_cap=5_000)
    S_e = np.concatenate([[0.0], np.cumsum(ref_e.values(15_000))])
    S_t = np.concatenate([[0.0], np.cumsum(ref_t.values(15_000))])
    ks = np.arange(start, 5_001)
    margin = (S_e[3 * ks] - S_e[ks - 1]) - (S_t[3 * ks] - S_t[ks - 1]) - 2 * ks * delta
    if k is None:
        assert not np.any(margin >= 1e-9)
    else:
        assert margin[k - start] >= -1e-9 and not np.any(margin[: k - start] >= 1e-9)


def test_linear_allowance_has_no_horizon():
    spec = ClassSpec.build([trap_environment(0), trap_environment(2)])
    agent = SelfOptimizingAgent(spec)
    with pytest.raises(HorizonSearchError):
        agent.act(History())


# ---------------------------------------------------------------- exploration


def exploring_state(spec, k, h, eps, T):
    st_ = AgentState(MixtureState.initial(spec), nu_t=0, nu_e=1, phase="explore", h=h, eps=eps, T=T)
    st_.horizons = Horizons(1, 1, 3, 1, 1, k)
    return st_


def test_condition_i_example():
    assert not condition_i_holds(10.0, 8.8, 120, 100, 0.2, 0.0)
    assert condition_i_holds(10.0, 9.1, 120, 100, 0.2, 0.0)


def test_exploration_breaks_ii_and_iii():
    low, high = constant_mdp(0.3), constant_mdp(0.9)
    spec = ClassSpec.build([low, high])
    h = rollout(high.env, high.meta.recovery_policy(History()), 40, RandomSource(0))
    st_ = exploring_state(spec, k=10, h=3, eps=0.2, T=frozenset({0, 1}))
    assert exploration_step(st_, spec, h.prefix(10)) is None       # fewer than h steps done
    assert exploration_step(st_, spec, h.prefix(28)) is None
    assert exploration_step(st_, spec, h.prefix(29)) == "ii"       # next step would be 3k
    st_.T = frozenset({0})
    assert exploration_step(st_, spec, h.prefix(20)) == "iii"
    bad = rollout(low.env, low.meta.recovery_policy(History()), 40, RandomSource(0))
    assert exploration_step(st_, spec, bad.prefix(20)) == "i"


# ---------------------------------------------------------------- whole runs


def test_singleton_mdp_agent_plays_optimal_policy():
    member = mdp_environment(two_state_mdp(0.7, 0.2, 1))
    spec = ClassSpec.build([member])
    traj, agent, history = run_agent(spec, 0, 2_000, RandomSource(4))
    policy = member.env.optimal_policy
    expected = [policy.act(history.prefix(t)) for t in range(len(history))]
    assert traj.action == expected
    assert not agent.events


def test_wrong_passive_member_is_dropped_on_first_disagreement():
    a = passive_environment(EventuallyPeriodic("0110"), name="a")
    b = passive_environment(EventuallyPeriodic("0111"), name="b")
    spec = ClassSpec.build([a, b])
    traj, agent, history = run_agent(spec, 0, 40, RandomSource(0))
    assert agent.state.mixture.log_likelihood[1] == -math.inf
    diag = SelfOptimizingAgent(spec)
    for t in range(1, 41):
        diag._sync(history.prefix(t))
        dead = diag.state.mixture.log_likelihood[1] == -math.inf
        assert dead == (t >= 4)


def test_nu_t_reselected_when_it_leaves_t():
    spec = ClassSpec.build([passive_environment(0.9), passive_environment(0.1)], [0.5, 0.5])
    traj, agent, _ = run_agent(spec, 1, 60, RandomSource(1))
    assert traj.nu_t[0] == 0 and traj.nu_t[-1] == 1
    switch = int(np.flatnonzero(traj.nu_t == 1)[0])
    assert traj.s[switch] == traj.s[switch - 1] + 1
    assert traj.phase_names()[switch] == "choose_t"


def test_short_three_mdp_run_invariants():
    spec = three_mdp_class()
    traj, agent, history = run_agent(spec, 1, 20_000, RandomSource(3), diagnostics=True)
    d = agent.diagnostics
    assert max(d.identity_error) <= 1e-9 and max(d.ratio_excess) <= 1e-9
    assert max(d.route_gap) <= 1e-9 and min(d.t_size) >= 1
    assert sum(traj.phase_time().values()) == 20_000
    values = spec.optimal_values
    for ev in agent.events:
        assert values[ev.nu_e] - values[ev.nu_t] >= 2 * ev.delta > 0
    for rec in agent.explorations:
        if rec.reason != "preempted":
            assert rec.end - rec.start + 1 >= rec.h and rec.end + 1 <= 3 * rec.k
    assert verify_horizons(spec, agent.events) == []


def test_verifier_catches_tampered_horizons():
    spec = three_mdp_class()
    _, agent, _ = run_agent(spec, 0, 5_000, RandomSource(2))
    ev = agent.events[0]
    hz = ev.horizons
    wrong = [
        PrepareEvent(ev.step, ev.n, ev.s, ev.h, ev.nu_t, ev.nu_e, ev.eps, ev.delta,
                     Horizons(hz.i_h, hz.k1, hz.k2, hz.k3, hz.k4, hz.k + 1)),
        PrepareEvent(ev.step, ev.n, ev.s, ev.h, ev.nu_t, ev.nu_e, ev.eps, ev.delta,
                     Horizons(hz.i_h, hz.k1 + 1, hz.k2, hz.k3, hz.k4, hz.k)),
        PrepareEvent(ev.step, ev.n, ev.s, ev.h, ev.nu_t, ev.nu_e, ev.eps / 2, ev.delta, hz),
    ]
    for w in wrong:
        assert verify_horizons(spec, [w])


def test_true_member_retained():
    spec = three_mdp_class()
    kept = 0
    for seed in range(20):
        _, agent, _ = run_agent(spec, seed % 3, 3_000, RandomSource(seed))
        kept += (seed % 3) in consistency_set(agent.state.mixture, agent.state.s)
    assert kept >= 19


def test_agent_refuses_to_rewind():
    spec = three_mdp_class()
    _, agent, history = run_agent(spec, 0, 10, RandomSource(0))
    with pytest.raises(ValueError):
        agent.act(history.prefix(3))
