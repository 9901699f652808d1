"""The agent on a class of three two-state MDPs.

The three members have optimal average rewards 0.3, 0.6 and 0.9.  The agent
does not know which one generates its percepts.  It exploits the member its
mixture currently trusts, and now and then explores a member that promises a
higher value, giving up once the promise is not kept.

Run:  python3 demos/01_three_mdps.py [horizon]
"""

import sys

import numpy as np

from selfopt.agent import run_agent, verify_horizons
from selfopt.core import RandomSource
from selfopt.harness import parse_experiment, three_mdp_class_config

horizon = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
spec = parse_experiment(three_mdp_class_config()).build_class()
print("optimal values of the members:", np.round(spec.optimal_values, 6))
print("prior weights:", np.round(spec.weights, 4))

for true in range(spec.size):
    traj, agent, _ = run_agent(spec, true, horizon, RandomSource(true))
    checkpoints = [horizon // 100, horizon // 10, horizon]
    averages = ", ".join(f"{traj.running_avg[t - 1]:.3f}@{t}" for t in checkpoints)
    print(f"\ntrue member {true} (V* = {spec.optimal_values[true]:.2f})")
    print(f"  running average: {averages}")
    print(f"  final s = {agent.state.s}, final nu_t = {agent.state.nu_t}")
    print(f"  phase time: {traj.phase_time()}")
    reasons = [r.reason for r in agent.explorations]
    print(f"  {len(agent.events)} horizon computations, explorations ended by {reasons[:8]}"
          + (" ..." if len(reasons) > 8 else ""))
    problems = verify_horizons(spec, agent.events)
    print(f"  independent re-check of every horizon: {len(problems)} violations")
