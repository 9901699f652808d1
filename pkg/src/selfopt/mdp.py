"""Average-reward analysis of finite MDPs and Markov chains.

Conventions: a chain is a row-stochastic ``(n, n)`` array; an MDP carries
``transition[s, a, s']`` and ``reward[s, a, s']`` (the expected reward of
that transition).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

STOCHASTIC_TOL = 1e-12


class NotErgodicError(ValueError):
    """Chain reducible / MDP not ergodic.  ``witness = (i, j)``: j unreachable from i."""

    def __init__(self, message: str, witness: tuple[int, int] | None = None):
        super().__init__(message)
        self.witness = witness


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class PeriodicChainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FiniteMdp:
    transition: np.ndarray
    reward: np.ndarray
    r_max: float = 1.0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        if R.ndim == 2:
            R = np.broadcast_to(R[:, :, None], P.shape).copy()
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} does not match transition {P.shape}")
        if (P < 0).any() or np.abs(P.sum(axis=2) - 1).max() > STOCHASTIC_TOL:
            raise ValueError("transition rows must be probability distributions")
        if (R < 0).any() or (R > self.r_max).any():
            raise ValueError(f"rewards must lie in [0, {self.r_max}]")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def expected_reward(self) -> np.ndarray:
        """r(s, a) = sum_s' P(s'|s,a) R(s,a,s')."""
        return (self.transition * self.reward).sum(axis=2)

    def chain(self, policy) -> np.ndarray:
        """Transition matrix of a deterministic stationary policy."""
        policy = np.asarray(policy, dtype=int)
        return self.transition[np.arange(self.n_states), policy]

    def policy_reward(self, policy) -> np.ndarray:
        policy = np.asarray(policy, dtype=int)
        return self.expected_reward[np.arange(self.n_states), policy]

    def uniform_chain(self) -> np.ndarray:
        return self.transition.mean(axis=1)


@dataclass(frozen=True)
class GainBiasSolution:
    gain: float
    bias: np.ndarray
    policy: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class ErgodicityCheck:
    ergodic: bool
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ergodic


@dataclass
class ChainAnalysis:
    stationary_distribution: np.ndarray
    hitting_time_expectations: np.ndarray
    period: int
    mixing: dict[int, float] = field(default_factory=dict)


def _as_chain(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"chain must be square, got shape {P.shape}")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1).max() > STOCHASTIC_TOL:
        raise ValueError("chain rows must be probability distributions")
    return P


def reachability_witness(P) -> tuple[int, int] | None:
    """A pair (i, j) with j not reachable from i, or None if irreducible."""
    adj = np.asarray(P) > 0
    n = adj.shape[0]
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    if ncomp == 1:
        return None
    for i in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[i] = True
        frontier = [i]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.flatnonzero(adj[u]):
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(v)
            frontier = nxt
        if not seen.all():
            return i, int(np.flatnonzero(~seen)[0])
    raise AssertionError("unreachable")


def require_irreducible(P) -> None:
    w = reachability_witness(P)
    if w is not None:
        raise NotErgodicError(f"chain is reducible: state {w[1]} is unreachable from state {w[0]}", w)


def period(P) -> int:
    """Period of an irreducible chain (gcd of level differences along edges)."""
    P = _as_chain(P)
    require_irreducible(P)
    n = P.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    queue = [0]
    g = 0
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(P[u] > 0):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def stationary_distribution(P) -> np.ndarray:
    """pi with pi P = pi, sum(pi) = 1, for an irreducible chain."""
    P = _as_chain(P)
    require_irreducible(P)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def hitting_times_to(P, targets) -> np.ndarray:
    """Expected number of steps to reach the set ``targets`` from each state."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    targets = np.atleast_1d(np.asarray(targets, dtype=int))
    rest = np.setdiff1d(np.arange(n), targets)
    h = np.zeros(n)
    if rest.size:
        Q = P[np.ix_(rest, rest)]
        try:
            h[rest] = np.linalg.solve(np.eye(rest.size) - Q, np.ones(rest.size))
        except np.linalg.LinAlgError:
            raise NotErgodicError(f"targets {targets.tolist()} are not reachable from every state")
        if (h[rest] < 0).any() or not np.isfinite(h).all():
            raise NotErgodicError(f"targets {targets.tolist()} are not reachable from every state")
    return h


def expected_hitting_times(P) -> np.ndarray:
    """Matrix H with H[a, b] = E l(a, b), the mean first-passage time a -> b.

    Solves h_b(a) = 1 + sum_{c != b} P[a, c] h_b(c) for every target b;
    the diagonal is 0 by convention.
    """
    P = _as_chain(P)
    require_irreducible(P)
    n = P.shape[0]
    H = np.empty((n, n))
    for b in range(n):
        H[:, b] = hitting_times_to(P, [b])
    return H


def mixing_bound(P, k: int) -> float:
    """sup_i TV(P^k(i, .), pi).

    This total-variation distance to stationarity is used as a computable
    surrogate for the alpha-mixing coefficient of the chain; it is
    nonincreasing in k.  Periodic chains do not mix and trigger a
    ``PeriodicChainWarning``.
    """
    P = _as_chain(P)
    if k < 0:
        raise ValueError("k must be nonnegative")
    pi = stationary_distribution(P)
    if period(P) > 1:
        warnings.warn("chain is periodic; the distance to stationarity does not decay",
                      PeriodicChainWarning, stacklevel=2)
    Pk = np.linalg.matrix_power(P, k)
    return float(0.5 * np.abs(Pk - pi).sum(axis=1).max())


def analyze_chain(P, ks=(1, 2, 4, 8, 16, 32)) -> ChainAnalysis:
    P = _as_chain(P)
    per = period(P)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PeriodicChainWarning)
        mixing = {int(k): mixing_bound(P, k) for k in ks}
    return ChainAnalysis(stationary_distribution(P), expected_hitting_times(P), per, mixing)


def absolute_spectral_gap(P) -> float:
    """1 - max |lambda| over the non-unit eigenvalues of the lazy chain (I + P)/2."""
    P = _as_chain(P)
    lazy = 0.5 * (np.eye(P.shape[0]) + P)
    ev = np.sort(np.abs(np.linalg.eigvals(lazy)))[::-1]
    return float(1.0 - ev[1]) if ev.size > 1 else 1.0


def check_ergodic(mdp: FiniteMdp) -> ErgodicityCheck:
    """Ergodic iff the uniform-over-actions policy induces an irreducible chain."""
    w = reachability_witness(mdp.uniform_chain())
    return ErgodicityCheck(w is None, w)


def _greedy(q: np.ndarray, tie_tol: float) -> np.ndarray:
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tie_tol, axis=1)


def solve_average_reward(mdp: FiniteMdp, tol: float = 1e-12, max_iters: int = 1_000_000,
                         reference_state: int = 0) -> GainBiasSolution:
    """Optimal gain, bias and policy by relative value iteration.

    Iterates on the aperiodic transform P' = (P + I) / 2, which has the same
    gain and optimal actions, until the span of the Bellman residual drops
    below ``tol``.  Ties go to the lowest action index.
    """
    check = check_ergodic(mdp)
    if not check:
        i, j = check.witness
        raise NotErgodicError(f"MDP is not ergodic: state {j} is unreachable from state {i}",
                              check.witness)
    tau = 0.5
    P = tau * mdp.transition + (1 - tau) * np.eye(mdp.n_states)[:, None, :]
    r = mdp.expected_reward
    h = np.zeros(mdp.n_states)
    residual = math.inf
    for it in range(1, max_iters + 1):
        q = r + P @ h
        th = q.max(axis=1)
        diff = th - h
        residual = float(diff.max() - diff.min())
        h = th - th[reference_state]
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"relative value iteration did not converge in {max_iters} iterations "
            f"(span residual {residual:.3e})", residual)
    gain = float(0.5 * (diff.max() + diff.min()))
    q = r + P @ h
    policy = _greedy(q, tie_tol=max(tol, 1e-12) * 10)
    # bias of the original MDP is tau * h' (h' solves the transformed equations)
    bias = tau * h
    exact = _evaluate_unichain(mdp, policy, reference_state)
    if exact is not None and abs(exact[0] - gain) <= max(1e-9, 10 * residual):
        gain, bias = exact
    return GainBiasSolution(gain=min(max(gain, 0.0), mdp.r_max), bias=bias, policy=policy,
                            residual=residual, iterations=it)


def _evaluate_unichain(mdp: FiniteMdp, policy, reference_state: int = 0):
    """Solve g + h = r_pi + P_pi h with h[ref] = 0; None if the system is singular."""
    n = mdp.n_states
    P = mdp.chain(policy)
    r = mdp.policy_reward(policy)
    # unknowns: h[0..n-1] with h[ref] replaced by g
    A = np.eye(n) - P
    A[:, reference_state] = 1.0
    try:
        x = np.linalg.solve(A, r)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(x).all() or np.linalg.cond(A) > 1e12:
        return None
    g = float(x[reference_state])
    h = x.copy()
    h[reference_state] = 0.0
    return g, h


def policy_gain(mdp: FiniteMdp, policy) -> float:
    """Long-run average reward of a stationary policy whose chain is irreducible."""
    P = mdp.chain(policy)
    return float(stationary_distribution(P) @ mdp.policy_reward(policy))


def expected_reward_sequence(P, r, initial, n: int) -> np.ndarray:
    """E[r(x_i)] for i = 1..n when x_1 ~ initial and x_{i+1} ~ P(x_i, .)."""
    dist = np.asarray(initial, dtype=float).copy()
    out = np.empty(n)
    for i in range(n):
        out[i] = dist @ r
        dist = dist @ P
    return out
