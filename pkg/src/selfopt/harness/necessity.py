"""Why the loss allowance must be o(k): a policy tuned to traps fails the base environment.

The probe policy p_S optimizes every trap nu_1..nu_S: for s = 1..S it tops
its a-count up to s and then plays a run of s + 1 b's, which unlocks reward
2 in nu_s; once a 2 is seen it plays b forever.  On the base environment nu_0
every b pays 0, so at the end of the probes the running average has sunk
to (number of a's) / (number of steps), far below the optimal value 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..core import History, Policy, RandomSource, rollout
from ..environments.trap import A, B, trap_environment


class ProbePolicy(Policy):
    def __init__(self, S: int):
        if S < 1:
            raise ValueError("S must be >= 1")
        self.S = S
        plan = []
        for s in range(1, S + 1):
            plan += [A] * (s - plan.count(A)) + [B] * (s + 1)
        self.plan = plan
        self.block_ends = []
        n_a = length = 0
        for s in range(1, S + 1):
            length += (s - n_a) + s + 1
            n_a = s
            self.block_ends.append(length)
        self._seen = 0
        self._unlocked = False

    def act(self, history: History):
        k = len(history)
        if k < self._seen:
            self._seen, self._unlocked = 0, False
        for t in range(self._seen, k):
            if history[t][1].reward == 2:
                self._unlocked = True
        self._seen = k
        if self._unlocked:
            return B
        return self.plan[k] if k < len(self.plan) else A


class AlwaysA(Policy):
    def act(self, history):
        return A


@dataclass(frozen=True)
class NecessityReport:
    S: int
    horizon: int
    probe_dip: Fraction              # min running average on nu_0 from the end of the first probe
    probe_dip_step: int
    probe_end_average: Fraction      # running average on nu_0 when the last probe ends
    probe_final_average: Fraction
    always_a_min: Fraction
    always_a_max: Fraction
    trap_final_averages: dict        # s -> final running average of p_S on nu_s
    threshold: float = 0.55

    @property
    def passed(self) -> bool:
        return self.probe_dip <= Fraction(self.threshold) and self.always_a_min == self.always_a_max == 1

    def summary(self) -> str:
        lines = [
            f"probe policy p_{self.S} on nu_0 over {self.horizon} steps:",
            f"  running average dips to {float(self.probe_dip):.4f} at step {self.probe_dip_step}"
            f" (threshold {self.threshold})",
            f"  average when the probes end: {self.probe_end_average} = {float(self.probe_end_average):.4f}",
            f"  final average: {float(self.probe_final_average):.4f}",
            f"always-a on nu_0: running average in [{self.always_a_min}, {self.always_a_max}]",
        ]
        for s, v in sorted(self.trap_final_averages.items()):
            lines.append(f"p_{self.S} on nu_{s}: final average {float(v):.4f} (optimal 2)")
        lines.append("verdict: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _running_extremes(history: History, start: int):
    """(min, argmin, max) of the exact running average over steps start..len."""
    lo = hi = None
    at = start
    total = Fraction(0)
    for i, x in enumerate(history.rewards, start=1):
        total += x
        if i < start:
            continue
        avg = total / i
        if lo is None or avg < lo:
            lo, at = avg, i
        if hi is None or avg > hi:
            hi = avg
    return lo, at, hi


def demo_necessity(S: int = 3, horizon: int = 100_000, seed: int = 0,
                   threshold: float = 0.55) -> NecessityReport:
    """Run p_S and always-a on nu_0 (and p_S on nu_1..nu_S) and report the dip."""
    if S < 1:
        raise ValueError("S must be >= 1")
    rng = RandomSource(seed)   # the traps are deterministic; the stream is never drawn from
    probe = ProbePolicy(S)
    if horizon < probe.block_ends[-1]:
        raise ValueError(f"horizon must cover the {probe.block_ends[-1]} probe steps")
    base = trap_environment(0).env
    h = rollout(base, probe, horizon, rng)
    dip, dip_step, _ = _running_extremes(h, probe.block_ends[0])
    end = probe.block_ends[-1]
    end_avg = h.prefix(end).total_reward() / end
    always = rollout(base, AlwaysA(), horizon, rng)
    a_min, _, a_max = _running_extremes(always, 1)
    traps = {}
    for s in range(1, S + 1):
        ht = rollout(trap_environment(s).env, ProbePolicy(S), horizon, rng)
        traps[s] = ht.total_reward() / horizon
    return NecessityReport(S, horizon, dip, dip_step, end_avg, h.total_reward() / horizon,
                           a_min, a_max, traps, threshold)
