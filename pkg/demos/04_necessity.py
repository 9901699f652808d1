"""Why the loss allowance has to be sublinear.

Trap nu_s pays 2 for b only after a long enough run of b's, and only once
at least s a's have been played; the base environment nu_0 pays 1 for a and
0 for b.  A policy that finds the reward of every trap nu_1..nu_S has to try
long b-runs, and on nu_0 those runs drag its running average far below 1.
No single policy is optimal for the whole family, which is why the trap's
allowance d(k, eps) = 2k (linear in k) rules it out of the learnable setting.

Run:  python3 demos/04_necessity.py [S]
"""

import sys

from selfopt.harness import ProbePolicy, demo_necessity

S = int(sys.argv[1]) if len(sys.argv) > 1 else 3
print("probe plan:", "".join(ProbePolicy(S).plan), "then a forever")
print(demo_necessity(S, horizon=20_000).summary())
