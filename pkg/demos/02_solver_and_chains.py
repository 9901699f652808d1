"""Average-reward solving and Markov-chain summaries.

Solves the toggle MDP (state 0 pays 1 for staying; state 1 pays nothing and
returns to 0) and a random 3-state MDP, and compares the solver with a plain
enumeration of all deterministic stationary policies.

Run:  python3 demos/02_solver_and_chains.py
"""

import itertools

import numpy as np

from selfopt.mdp import (FiniteMdp, analyze_chain, check_ergodic, policy_gain,
                         solve_average_reward)

P = np.array([[[1.0, 0.0], [0.0, 1.0]],
              [[1.0, 0.0], [1.0, 0.0]]])
R = np.array([[1.0, 0.0],
              [0.0, 0.0]])
toggle = FiniteMdp(P, R)
sol = solve_average_reward(toggle)
print("toggle MDP: ergodic =", bool(check_ergodic(toggle)))
print(f"  gain {sol.gain}, policy {sol.policy.tolist()}, bias {sol.bias.tolist()}")

g = np.random.default_rng(7)
P = g.dirichlet(np.ones(3), size=(3, 2))
R = g.random((3, 2))
mdp = FiniteMdp(P, R)
sol = solve_average_reward(mdp)
print("\nrandom 3-state MDP")
for policy in itertools.product(range(2), repeat=3):
    mark = "  <- solver" if list(policy) == sol.policy.tolist() else ""
    print(f"  policy {policy}: gain {policy_gain(mdp, policy):.12f}{mark}")
print(f"  solver gain {sol.gain:.12f} after {sol.iterations} iterations")

chain = analyze_chain(mdp.chain(sol.policy))
print("\noptimal chain")
print("  stationary distribution", np.round(chain.stationary_distribution, 6))
print("  mean first-passage times\n", np.round(chain.hitting_time_expectations, 4))
print("  distance to stationarity", {k: f"{v:.2e}" for k, v in chain.mixing.items()})
