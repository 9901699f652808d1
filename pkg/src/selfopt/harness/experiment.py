"""Running the agent on a configured class and writing trajectories."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from ..agent import PHASES, SelfOptimizingAgent, Trajectory, run_agent
from ..core import RandomSource
from .config import ExperimentConfig, parse_experiment

CSV_COLUMNS = ("step", "phase", "nu_t", "nu_e", "s", "action", "reward", "running_avg")
INDEX_NAME = "runs_index.csv"
INDEX_COLUMNS = ("seed", "horizon", "true_member", "v_star", "final_average", "abs_error",
                 "final_s", "final_nu_t", "phase_time", "trajectory")


@dataclass(frozen=True)
class RunSummary:
    seed: int
    horizon: int
    true_member: int
    v_star: float
    final_average: float
    abs_error: float
    final_s: int
    final_nu_t: int
    phase_time: dict
    trajectory: str

    def row(self) -> list:
        d = asdict(self)
        d["phase_time"] = json.dumps(self.phase_time, sort_keys=True)
        d["v_star"] = repr(self.v_star)
        d["final_average"] = repr(self.final_average)
        d["abs_error"] = repr(self.abs_error)
        return [d[c] for c in INDEX_COLUMNS]


def _decimal(x) -> str:
    if isinstance(x, Fraction) and x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def write_trajectory(traj: Trajectory, path: Path) -> None:
    """One CSV row per step; the header is ``CSV_COLUMNS``."""
    names = PHASES
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in range(len(traj)):
            w.writerow((t + 1, names[traj.phase[t]], int(traj.nu_t[t]), int(traj.nu_e[t]),
                        int(traj.s[t]), traj.action[t], _decimal(traj.reward[t]),
                        repr(float(traj.running_avg[t]))))


def trajectory_path(out_dir: Path, seed: int) -> Path:
    return Path(out_dir) / f"trajectory_seed{seed}.csv"


def simulate(config: ExperimentConfig, seed: int, diagnostics: bool = False):
    """Run one seed; returns (trajectory, agent, history, class)."""
    spec = config.build_class()
    agent = SelfOptimizingAgent(spec, config.k_cap, config.m_cap, diagnostics=diagnostics)
    traj, agent, history = run_agent(spec, config.true_member, config.horizon,
                                     RandomSource(seed), agent=agent)
    return traj, agent, history, spec


def run_experiment(config: ExperimentConfig | dict, seed: int, out_dir=None,
                   index: bool = True) -> RunSummary:
    """Simulate one seed, write its trajectory CSV and (optionally) append to the run index."""
    if isinstance(config, dict):
        config = parse_experiment(config)
    out = config.output_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj, agent, _, spec = simulate(config, seed)
    path = trajectory_path(out, seed)
    write_trajectory(traj, path)
    v_star = float(spec.members[config.true_member].meta.optimal_value)
    summary = RunSummary(seed, config.horizon, config.true_member, v_star, traj.final_average,
                         abs(traj.final_average - v_star), agent.state.s, agent.state.nu_t,
                         traj.phase_time(), path.name)
    if index:
        append_index(out, [summary])
    return summary


def append_index(out_dir: Path, summaries: list[RunSummary]) -> Path:
    path = Path(out_dir) / INDEX_NAME
    new = not path.exists()
    with open(path, "a", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if new:
            w.writerow(INDEX_COLUMNS)
        for s in summaries:
            w.writerow(s.row())
    return path


def _worker(args) -> RunSummary:
    config, seed, out_dir = args
    return run_experiment(config, seed, out_dir, index=False)


def run_all(config: ExperimentConfig, out_dir=None, workers: int = 1) -> list[RunSummary]:
    """Every configured seed; the index is written once, after all runs finish."""
    jobs = [(config, seed, out_dir) for seed in config.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            summaries = list(pool.map(_worker, jobs))
    else:
        summaries = [_worker(j) for j in jobs]
    append_index(config.output_dir(out_dir), summaries)
    return summaries
