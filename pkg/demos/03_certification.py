"""Sampled certification of value-stability metadata.

Each environment declares how fast a recovery policy catches up with its
reference rewards after an arbitrary history: a loss allowance d(k, eps)
and a tail bound phi(n, eps).  The certifier plays adversarial and random
prefixes, runs the recovery policy and counts how often the loss exceeds
d(k, eps) + n eps.  A falsified allowance (d = 0 on the bandit tower) is
caught.

Run:  python3 demos/03_certification.py
"""

from selfopt.certify import WorstDeclaredAdversary, certify_value_stability, estimate_recovery_loss
from selfopt.core import RandomSource
from selfopt.environments import (ClassMember, ConstantAllowance, bandit_tower, mdp_environment,
                                  passive_environment, trap_environment, two_state_mdp)

grid = [(k, n, e) for k in (100, 400) for n in (400, 2000) for e in (0.02, 0.1)]
for member in (passive_environment("01", name="passive_01"),
               mdp_environment(two_state_mdp(0.7, 0.2, 1)),
               trap_environment(2)):
    report = certify_value_stability(member, grid, trials=50, rng=1)
    print(report.summary().splitlines()[0])

arms = (0.2, 0.4, 0.6, 0.99, 0.5)
bandit = bandit_tower(arms)
far = WorstDeclaredAdversary().prefix(bandit.env, 900, RandomSource(0))
print("\nbandit tower, parked at the top arm for 900 steps, then recovery for 10^4 steps:")
print(" ", estimate_recovery_loss(bandit, far, 10_000, 100, rng=2), "(allowance sqrt(900) = 30)")

broken = ClassMember(bandit.env, bandit.meta.with_allowance(ConstantAllowance(0.0)))
report = certify_value_stability(broken, [(900, 100, 0.01)], 200, [WorstDeclaredAdversary()])
print("\nbandit tower with d = 0:")
print(report.summary())
