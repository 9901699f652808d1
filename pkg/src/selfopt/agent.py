"""A self-optimizing agent for a finite class of value-stable environments.

The agent keeps the likelihood of the history under every member, tests
members for consistency against the Bayes mixture, exploits the current
hypothesis ``nu_t`` and periodically explores a member ``nu_e`` that
promises a higher optimal value.  Exploration horizons are derived from
each member's value-stability metadata so that a wrong hypothesis is
eventually refuted while the running average stays close to the optimum.

All likelihoods live in the log domain; a member that assigns probability
zero to an observed percept gets log-likelihood -inf and never returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import History, Percept, Policy, StatePolicy
from .environments.metadata import ClassMember, ReferenceRewards

LN2 = math.log(2.0)
NEG_INF = -math.inf

PHASES = ("choose_t", "choose_e", "prepare", "exploit_to_k", "explore", "idle_t")
PHASE_CODE = {p: i for i, p in enumerate(PHASES)}

DEFAULT_K_CAP = 10**7
DEFAULT_M_CAP = 10**7
_CHUNK = 1 << 16


class HorizonSearchError(RuntimeError):
    """No exploration length k satisfies the gap condition below ``k_cap``."""

    def __init__(self, nu_t: int, nu_e: int, k_cap: int, detail: str = ""):
        super().__init__(f"no exploration horizon k <= {k_cap} for nu_t={nu_t}, nu_e={nu_e}"
                         + (f": {detail}" if detail else ""))
        self.nu_t = nu_t
        self.nu_e = nu_e
        self.k_cap = k_cap


# ---------------------------------------------------------------- the class


@dataclass(frozen=True)
class ClassSpec:
    """Members in numbering order, their weights and the cyclic numbering j -> j mod M."""

    members: tuple
    weights: tuple

    def __post_init__(self):
        if not self.members:
            raise ValueError("an environment class needs at least one member")
        if len(self.weights) != len(self.members):
            raise ValueError("one weight per member is required")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(self.weights)!r}")

    @classmethod
    def build(cls, members: Sequence[ClassMember], weights: Sequence[float] | None = None) -> "ClassSpec":
        """Default weights are proportional to 2^-(position + 1)."""
        members = tuple(ClassMember(*m) for m in members)
        if weights is None:
            raw = [2.0 ** -(i + 1) for i in range(len(members))]
        else:
            raw = [float(w) for w in weights]
        total = math.fsum(raw)
        return cls(members, tuple(w / total for w in raw))

    @property
    def size(self) -> int:
        return len(self.members)

    def numbering(self, j: int) -> int:
        return j % len(self.members)

    @property
    def optimal_values(self) -> tuple:
        return tuple(float(m.meta.optimal_value) for m in self.members)

    @property
    def log_weights(self) -> tuple:
        return tuple(math.log(w) for w in self.weights)

    @property
    def r_max(self) -> float:
        return max(float(m.env.r_max) for m in self.members)


# ---------------------------------------------------------------- mixture


def _log_mixture(log_weights, log_likelihood) -> float:
    """log sum_nu w_nu nu(z_<i), via a max-shifted sum."""
    terms = [lw + ll for lw, ll in zip(log_weights, log_likelihood)]
    top = max(terms)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(math.fsum([math.exp(t - top) for t in terms]))


@dataclass(frozen=True)
class MixtureState:
    """Per-member log nu(z_<i) (policy factors omitted) and tracker states."""

    log_likelihood: tuple
    trackers: tuple
    log_weights: tuple
    log_xi: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "log_xi", _log_mixture(self.log_weights, self.log_likelihood))

    @classmethod
    def initial(cls, spec: ClassSpec) -> "MixtureState":
        return cls(tuple(0.0 for _ in spec.members),
                   tuple(m.env.initial_state() for m in spec.members),
                   spec.log_weights)

    def log_ratios(self) -> list[float]:
        """log nu(z_<i) / xi(z_<i) for every member."""
        lx = self.log_xi
        if lx == NEG_INF:
            return [NEG_INF] * len(self.log_likelihood)
        return [ll - lx if ll != NEG_INF else NEG_INF for ll in self.log_likelihood]

    def ratios(self) -> np.ndarray:
        return np.exp(np.array(self.log_ratios()))


def update_mixture(state: MixtureState, spec: ClassSpec, action, percept: Percept) -> MixtureState:
    """Add log nu(x | z_<k, y) to every member's log-likelihood."""
    lls, trackers = [], []
    for m, member in enumerate(spec.members):
        ll = state.log_likelihood[m]
        tracker = state.trackers[m]
        if ll != NEG_INF:
            p = member.env.probability(tracker, action, percept)
            if p > 0.0:
                ll += math.log(p)
                tracker = member.env.advance(tracker, action, percept)
            else:
                ll = NEG_INF
        lls.append(ll)
        trackers.append(tracker)
    return MixtureState(tuple(lls), tuple(trackers), state.log_weights)


def consistency_set(state: MixtureState, s: int) -> frozenset:
    """Members with nu(z_<i) / xi(z_<i) >= 2^-s."""
    cutoff = -s * LN2
    return frozenset(m for m, lr in enumerate(state.log_ratios()) if lr >= cutoff)


# ---------------------------------------------------------------- agent state


@dataclass(frozen=True)
class Horizons:
    i_h: int
    k1: int
    k2: int
    k3: int
    k4: int
    k: int


@dataclass
class AgentState:
    mixture: MixtureState
    s: int = 1
    j_t: int = 0
    j_e: int = 0
    h: int = 0
    n: int = 1
    nu_t: int | None = None
    nu_e: int | None = None
    phase: str = "choose_t"
    horizons: Horizons | None = None
    delta: float = math.nan
    eps: float = math.nan
    steps: int = 0
    T: frozenset = frozenset()

    @property
    def alpha_s(self) -> float:
        return 2.0 ** -self.s


@dataclass(frozen=True)
class PrepareEvent:
    """Everything needed to re-verify one horizon computation after the run."""

    step: int
    n: int
    s: int
    h: int
    nu_t: int
    nu_e: int
    eps: float
    delta: float
    horizons: Horizons


@dataclass(frozen=True)
class ExplorationRecord:
    start: int      # first exploration step (= k)
    end: int        # last exploration step
    h: int
    k: int
    nu_t: int
    nu_e: int
    reason: str     # "i", "ii", "iii" or "preempted"


def select_nu_t(state: AgentState, spec: ClassSpec) -> int:
    """First member in T at numbering positions j_t, j_t + 1, ...; then j_t += 1.

    If T is empty, s is incremented and T recomputed (never needed for a
    finite class, since the largest ratio is always at least 1).
    """
    if state.mixture.log_xi == NEG_INF:
        raise RuntimeError("the history has probability zero under every member of the class")
    while True:
        T = consistency_set(state.mixture, state.s)
        for q in range(state.j_t, state.j_t + spec.size):
            m = spec.numbering(q)
            if m in T:
                state.nu_t = m
                state.j_t += 1
                state.T = T
                return m
        state.s += 1


def select_nu_e(state: AgentState, spec: ClassSpec) -> int | None:
    """First member from position j_e on with a larger optimal value and positive likelihood.

    j_e is incremented only when a member is found.
    """
    values = spec.optimal_values
    v_t = values[state.nu_t]
    for q in range(state.j_e, state.j_e + spec.size):
        m = spec.numbering(q)
        if values[m] > v_t and state.mixture.log_likelihood[m] != NEG_INF:
            state.nu_e = m
            state.j_e += 1
            return m
    state.nu_e = None
    return None


# ---------------------------------------------------------------- horizons


def _smallest(pred, guess: int) -> int:
    m = max(1, int(guess))
    while m > 1 and pred(m - 1):
        m -= 1
    while not pred(m):
        m += 1
    return m


def horizon_k1(i_h: int, v_t: float, eps: float) -> int:
    """Smallest k1 with (i_h / k1) V* <= eps / 8."""
    if v_t <= 0:
        return 1
    return _smallest(lambda k: i_h * v_t / k <= eps / 8, math.ceil(8 * i_h * v_t / eps))


def horizon_k3(h: int, r_max: float, eps: float) -> int:
    """Smallest k3 with h r_max / k3 < eps / 8."""
    return _smallest(lambda k: h * r_max / k < eps / 8, math.floor(8 * h * r_max / eps) + 1)


def horizon_k2(ref: ReferenceRewards, v_t: float, i_h: int, eps: float,
               m_cap: int = DEFAULT_M_CAP) -> int:
    """Smallest k2 > 2 i_h with |r_{i_h+1..m} / (m - i_h) - V*| <= eps / 8 for all m > k2.

    Beyond i_h + 2B / (eps/8 - |mean - V*|), where B bounds the partial sums
    of r_i - mean and ``mean`` is the cycle mean, the band holds for every m;
    below that the band is checked at every m.
    """
    band = eps / 8
    mean = ref.limit_mean
    slack = band - abs(mean - v_t)
    if slack <= 0:
        raise ValueError(f"reference rewards average {mean!r}, too far from V* = {v_t!r}")
    B = ref.deviation_bound(mean)
    m_star = min(i_h + math.ceil(2 * B / slack) + 1, max(m_cap, 2 * i_h + 1))
    lo = 2 * i_h + 1
    last_bad = 0
    base = ref.prefix(i_h)
    for start in range(lo + 1, m_star + 1, _CHUNK):
        m = np.arange(start, min(start + _CHUNK, m_star + 1))
        dev = np.abs((ref.prefix(m) - base) / (m - i_h) - v_t)
        bad = np.flatnonzero(dev > band)
        if bad.size:
            last_bad = int(m[bad[-1]])
    return max(lo, last_bad)


def horizon_k4(d_e, d_t, i_h: int, eps: float) -> int | None:
    """Largest m violating one of the three d-bounds (so every m > k4 satisfies them)."""
    thresholds = [d_e.threshold(eps / 4, eps / 8), d_t.threshold(eps / 8, eps / 8)]
    if any(t is None for t in thresholds):
        return None
    c = float(d_t(i_h, eps / 8))
    thresholds.append(1 if c <= 0 else _smallest(lambda m: c / m <= eps / 8, math.ceil(8 * c / eps)))
    return max(thresholds) - 1


def horizon_k(ref_e: ReferenceRewards, ref_t: ReferenceRewards, delta: float,
              start: int, k_cap: int = DEFAULT_K_CAP) -> int | None:
    """Smallest k >= start with r^e_{k..3k} / 2k >= r^t_{k..3k} / 2k + delta."""
    lo = max(start, 1)
    size = 1024
    while lo <= k_cap:
        k = np.arange(lo, min(lo + size, k_cap + 1), dtype=np.int64)
        ok = ref_e.sum(k, 3 * k) - ref_t.sum(k, 3 * k) >= 2 * k * delta
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(k[hit[0]])
        lo = int(k[-1]) + 1
        size = min(size * 2, _CHUNK)
    return None


def prepare_exploration(state: AgentState, spec: ClassSpec, i_h: int,
                        k_cap: int = DEFAULT_K_CAP, m_cap: int = DEFAULT_M_CAP) -> Horizons:
    """Exploration horizons for the current (nu_t, nu_e, eps, delta, h)."""
    t, e = spec.members[state.nu_t].meta, spec.members[state.nu_e].meta
    eps, v_t = state.eps, float(t.optimal_value)
    k1 = horizon_k1(i_h, v_t, eps)
    k2 = horizon_k2(t.reference, v_t, i_h, eps, m_cap)
    k3 = horizon_k3(state.h, spec.r_max, eps)
    k4 = horizon_k4(e.d, t.d, i_h, eps)
    if k4 is None:
        raise HorizonSearchError(state.nu_t, state.nu_e, k_cap,
                                 "a loss allowance is not o(k) at this tolerance")
    k = horizon_k(e.reference, t.reference, state.delta, max(k1, k2, k3, k4) + 1, k_cap)
    if k is None:
        raise HorizonSearchError(state.nu_t, state.nu_e, k_cap)
    return Horizons(i_h, k1, k2, k3, k4, k)


# ---------------------------------------------------------------- exploration


def condition_i_holds(reference_sum: float, realized_sum: float, i: int, k: int,
                      eps: float, d_value: float) -> bool:
    """|r^e_{k..i} - realized_{k..i}| < (i - k) eps / 4 + d_e(k, eps / 4)."""
    return abs(reference_sum - realized_sum) < (i - k) * eps / 4 + d_value


def exploration_step(state: AgentState, spec: ClassSpec, history: History) -> str | None:
    """Break reason after the exploration steps k .. len(history), or None to continue.

    Conditions are only evaluated once at least h exploration steps are done.
    """
    k = state.horizons.k
    i = len(history)
    if i - k + 1 < state.h:
        return None
    e = spec.members[state.nu_e].meta
    realized = float(history._rec.prefix[i] - history._rec.prefix[k - 1])
    if not condition_i_holds(e.reference.sum(k, i), realized, i, k, state.eps,
                             float(e.d(k, state.eps / 4))):
        return "i"
    if i + 1 >= 3 * k:
        return "ii"
    if state.nu_e not in state.T:
        return "iii"
    return None


# ---------------------------------------------------------------- the policy


class SelfOptimizingAgent(Policy):
    """The agent as a deterministic policy over histories.

    ``act(history)`` first absorbs any steps of ``history`` it has not seen,
    then runs the consistency check and the phase machine and returns the
    action for step ``len(history) + 1``.  ``last_phase`` labels that step.
    """

    def __init__(self, spec: ClassSpec, k_cap: int = DEFAULT_K_CAP, m_cap: int = DEFAULT_M_CAP,
                 diagnostics: bool = False):
        self.spec = spec
        self.k_cap = k_cap
        self.m_cap = m_cap
        self.state = AgentState(MixtureState.initial(spec))
        self.events: list[PrepareEvent] = []
        self.explorations: list[ExplorationRecord] = []
        self.last_phase: str | None = None
        self._p_t: Policy | None = None
        self._p_e: Policy | None = None
        self._env_index = {id(m.env): i for i, m in enumerate(spec.members)}
        self.diagnostics = MixtureDiagnostics(spec) if diagnostics else None

    # -- bookkeeping

    def observe(self, action, percept: Percept) -> None:
        st = self.state
        st.mixture = update_mixture(st.mixture, self.spec, action, percept)
        st.steps += 1
        if self.diagnostics is not None:
            self.diagnostics.update(st.mixture, action, percept)

    def _sync(self, history: History) -> None:
        if len(history) < self.state.steps:
            raise ValueError("the agent cannot rewind; use a fresh agent for a new history")
        for t in range(self.state.steps, len(history)):
            self.observe(*history[t])

    def _run(self, policy: Policy, history: History):
        if isinstance(policy, StatePolicy):
            m = self._env_index.get(id(policy.env))
            if m is not None:
                return policy.act_state(self.state.mixture.trackers[m], len(history) + 1)
        return policy.act(history)

    def _recovery(self, member: int, history: History) -> Policy:
        return self.spec.members[member].meta.recovery_policy(history)

    # -- phase machine

    def act(self, history: History):
        self._sync(history)
        st, spec = self.state, self.spec
        i = len(history) + 1
        st.T = consistency_set(st.mixture, st.s)
        label = None
        if st.nu_t is not None and st.nu_t not in st.T:
            if st.phase == "explore":
                self._close_exploration(i - 1, "preempted")
            select_nu_t(st, spec)
            st.s += 1
            st.T = consistency_set(st.mixture, st.s)
            self._p_t = self._recovery(st.nu_t, history)
            st.nu_e = None
            st.phase = "choose_e"
            label = "choose_t"
        while True:
            phase = st.phase
            if phase == "choose_t":
                select_nu_t(st, spec)
                self._p_t = self._recovery(st.nu_t, history)
                st.phase = "choose_e"
                label = label or "choose_t"
            elif phase in ("choose_e", "idle_t"):
                if select_nu_e(st, spec) is None:
                    st.phase = "idle_t"
                    self.last_phase = label or "idle_t"
                    return self._run(self._p_t, history)
                label = label or "choose_e"
                self._start_loop()
            elif phase == "prepare":
                st.h += 1
                self._p_t = self._recovery(st.nu_t, history)
                st.horizons = prepare_exploration(st, spec, i, self.k_cap, self.m_cap)
                self.events.append(PrepareEvent(i, st.n, st.s, st.h, st.nu_t, st.nu_e,
                                                st.eps, st.delta, st.horizons))
                st.phase = "exploit_to_k"
                label = label or "prepare"
            elif phase == "exploit_to_k":
                if i < st.horizons.k:
                    self.last_phase = label or "exploit_to_k"
                    return self._run(self._p_t, history)
                self._p_e = self._recovery(st.nu_e, history)
                st.phase = "explore"
            elif phase == "explore":
                reason = exploration_step(st, spec, history)
                if reason is None:
                    self.last_phase = label or "explore"
                    return self._run(self._p_e, history)
                self._close_exploration(i - 1, reason)
                if st.nu_e not in st.T:
                    st.phase = "choose_e"
                else:
                    st.phase = "prepare"
            else:
                raise AssertionError(f"unknown phase {phase!r}")

    def _start_loop(self) -> None:
        st = self.state
        st.n += 1
        values = self.spec.optimal_values
        st.delta = (values[st.nu_e] - values[st.nu_t]) / 2
        st.eps = float(self.spec.members[st.nu_t].meta.epsilon_schedule(st.n))
        if st.eps < st.delta:
            st.delta = st.eps
        st.h = st.j_e
        st.phase = "prepare"

    def _close_exploration(self, last_step: int, reason: str) -> None:
        st = self.state
        k = st.horizons.k
        self.explorations.append(ExplorationRecord(k, last_step, st.h, k, st.nu_t, st.nu_e, reason))


# ---------------------------------------------------------------- diagnostics


class MixtureDiagnostics:
    """Per-step checks of the mixture by an independent route.

    Keeps posterior weights w_nu nu(z_<i) / xi(z_<i) by the normalized Bayes
    recursion (probability domain) and compares them with the log-domain
    ratios of the agent.  Each list holds one value per step.
    """

    def __init__(self, spec: ClassSpec):
        self.spec = spec
        self.weights = list(spec.weights)
        self.posterior = list(spec.weights)
        self.trackers = [m.env.initial_state() for m in spec.members]
        self.identity_error: list[float] = []
        self.ratio_excess: list[float] = []
        self.route_gap: list[float] = []
        self.t_size: list[int] = []

    def update(self, mixture: MixtureState, action, percept) -> None:
        post = []
        for m, member in enumerate(self.spec.members):
            q = 0.0
            if self.posterior[m] > 0:
                p = member.env.probability(self.trackers[m], action, percept)
                if p > 0:
                    self.trackers[m] = member.env.advance(self.trackers[m], action, percept)
                q = self.posterior[m] * p
            post.append(q)
        total = math.fsum(post)
        self.posterior = [q / total for q in post]
        ratios = [math.exp(lr) for lr in mixture.log_ratios()]
        w = self.weights
        self.identity_error.append(abs(math.fsum([wm * r for wm, r in zip(w, ratios)]) - 1.0))
        self.ratio_excess.append(max(r - 1.0 / wm for wm, r in zip(w, ratios)))
        self.route_gap.append(max(abs(wm * r - q) for wm, r, q in zip(w, ratios, self.posterior)))

    def record_t(self, size: int) -> None:
        self.t_size.append(size)


# ---------------------------------------------------------------- runs


@dataclass
class Trajectory:
    """Per-step record of an agent run (steps are 1..len)."""

    phase: np.ndarray
    nu_t: np.ndarray
    nu_e: np.ndarray
    s: np.ndarray
    action: list
    reward: list
    running_avg: np.ndarray
    events: list = field(default_factory=list)
    explorations: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.action)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    def phase_names(self) -> list[str]:
        return [PHASES[c] for c in self.phase]

    def phase_time(self) -> dict[str, int]:
        counts = np.bincount(self.phase, minlength=len(PHASES))
        return {p: int(c) for p, c in zip(PHASES, counts)}

    @property
    def final_average(self) -> float:
        return float(self.running_avg[-1])


def run_agent(spec: ClassSpec, true_env, horizon: int, rng, agent: SelfOptimizingAgent | None = None,
              diagnostics: bool = False) -> tuple[Trajectory, SelfOptimizingAgent, History]:
    """Run the agent against ``true_env`` (an Environment or a member index)."""
    if isinstance(true_env, (int, np.integer)):
        true_env = spec.members[int(true_env)].env
    if agent is None:
        agent = SelfOptimizingAgent(spec, diagnostics=diagnostics)
    phase = np.empty(horizon, dtype=np.int8)
    nu_t = np.empty(horizon, dtype=np.int64)
    nu_e = np.empty(horizon, dtype=np.int64)
    s = np.empty(horizon, dtype=np.int64)
    running = np.empty(horizon)
    actions, rewards = [], []
    history = History()
    state = history.state_for(true_env)
    diag = agent.diagnostics
    for t in range(horizon):
        y = agent.act(history)
        if diag is not None:
            diag.record_t(len(agent.state.T))
        x = true_env.sample(state, y, rng)
        state = true_env.advance(state, y, x)
        history = history.append(y, x)
        st = agent.state
        phase[t] = PHASE_CODE[agent.last_phase]
        nu_t[t] = st.nu_t
        nu_e[t] = -1 if st.nu_e is None else st.nu_e
        s[t] = st.s
        actions.append(y)
        rewards.append(x.reward)
        running[t] = history.total_reward() / (t + 1)
    agent._sync(history)
    traj = Trajectory(phase, nu_t, nu_e, s, actions, rewards, running,
                      list(agent.events), list(agent.explorations))
    return traj, agent, history


# ---------------------------------------------------------------- re-verification


def _explicit_sums(meta, n: int) -> np.ndarray:
    """S[j] = r_1 + ... + r_j for j = 0..n from the tabulated reference values."""
    return np.concatenate([[0.0], np.cumsum(meta.reference_rewards(n))])


def _band_holds_beyond(meta, v: float, i_h: int, k2: int, band: float) -> bool:
    """|r_{i_h+1..m} / (m - i_h) - v| <= band for every m > k2.

    Checked at every m up to a cutoff N; past N the periodic tail bounds the
    partial-sum deviation by its maximum over one period.
    """
    ref = meta.reference
    L, p = ref.settles_at, ref.period
    cycle = meta.reference_rewards(L + p)[L:]
    mean = float(np.mean(cycle))
    N = max(k2 + 1, i_h + L + p)
    while True:
        S = _explicit_sums(meta, N + p)
        m = np.arange(k2 + 1, N + 1)
        if np.any(np.abs((S[m] - S[i_h]) / (m - i_h) - v) > band):
            return False
        # for m >= max(L, i_h) the deviation from mean repeats with period p
        start = max(L, i_h, k2 + 1)
        tail = np.arange(start, start + p)
        worst = float(np.max(np.abs(S[tail] - S[i_h] - (tail - i_h) * mean)))
        if abs(mean - v) + worst / (N - i_h) <= band:
            return True
        N *= 2


def _allowance_grid(lo: int) -> np.ndarray:
    dense = np.arange(lo, lo + 100_000)
    sparse = np.unique(np.geomspace(lo + 100_000, 10**12, 400).astype(np.int64))
    return np.concatenate([dense, sparse])


def verify_horizons(spec: ClassSpec, events: Sequence[PrepareEvent]) -> list[str]:
    """Independently re-check every stored horizon; returns one message per violation."""
    problems = []
    values = spec.optimal_values
    r_max = spec.r_max
    for ev in events:
        hz = ev.horizons
        t, e = spec.members[ev.nu_t].meta, spec.members[ev.nu_e].meta
        v_t, v_e = values[ev.nu_t], values[ev.nu_e]
        tag = f"step {ev.step} (nu_t={ev.nu_t}, nu_e={ev.nu_e})"
        eps = float(t.epsilon_schedule(ev.n))
        if ev.eps != eps or ev.delta != min((v_e - v_t) / 2, eps) or not v_e > v_t:
            problems.append(f"{tag}: eps/delta do not match the schedule and the value gap")
        if hz.i_h != ev.step:
            problems.append(f"{tag}: i_h is not the step of the computation")
        if not (hz.k > max(hz.k1, hz.k2, hz.k3, hz.k4) and hz.k > 2 * hz.i_h and hz.k2 > 2 * hz.i_h):
            problems.append(f"{tag}: ordering k > max(k1..k4), k > 2 i_h violated")
        # Eq. for k1: i_h V*/k1 <= eps/8, k1 minimal
        if not hz.i_h * v_t / hz.k1 <= eps / 8 or (hz.k1 > 1 and hz.i_h * v_t / (hz.k1 - 1) <= eps / 8):
            problems.append(f"{tag}: k1={hz.k1} is not the smallest solution")
        # reference average band beyond k2
        if not _band_holds_beyond(t, v_t, hz.i_h, hz.k2, eps / 8):
            problems.append(f"{tag}: reference band fails beyond k2={hz.k2}")
        # k3: h r_max / k3 < eps/8, minimal
        if not ev.h * r_max / hz.k3 < eps / 8 or (hz.k3 > 1 and ev.h * r_max / (hz.k3 - 1) < eps / 8):
            problems.append(f"{tag}: k3={hz.k3} is not the smallest solution")
        # the three loss-allowance bounds for all m > k4
        m = _allowance_grid(hz.k4 + 1)
        bounds = (e.d(m, eps / 4) / m, t.d(m, eps / 8) / m, float(t.d(hz.i_h, eps / 8)) / m)
        if any(np.any(b > eps / 8) for b in bounds):
            problems.append(f"{tag}: a loss-allowance bound fails beyond k4={hz.k4}")
        if hz.k4 >= 1:
            at = [float(e.d(hz.k4, eps / 4)), float(t.d(hz.k4, eps / 8)), float(t.d(hz.i_h, eps / 8))]
            if all(x / hz.k4 <= eps / 8 for x in at):
                problems.append(f"{tag}: k4={hz.k4} is not the largest violation")
        # gap condition at k and its failure for every smaller admissible k
        S_e, S_t = _explicit_sums(e, 3 * hz.k), _explicit_sums(t, 3 * hz.k)
        ks = np.arange(max(hz.k1, hz.k2, hz.k3, hz.k4) + 1, hz.k + 1)
        gap = (S_e[3 * ks] - S_e[ks - 1]) - (S_t[3 * ks] - S_t[ks - 1]) >= 2 * ks * ev.delta
        if not gap[-1]:
            problems.append(f"{tag}: the gap condition fails at k={hz.k}")
        elif gap[:-1].any():
            problems.append(f"{tag}: k={hz.k} is not the smallest admissible solution")
    return problems
