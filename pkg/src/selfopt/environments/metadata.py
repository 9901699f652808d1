"""Value-stability metadata shared by every environment family.

Each environment ships with the quantities of the value-stability
condition: its optimal average value, a deterministic reference reward
sequence, the loss allowance d(k, eps), the deviation probability
phi(n, eps), a tolerance schedule eps_n and a recovery-policy factory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ..core import Environment, History, Policy


class ReferenceRewards:
    """An eventually periodic reward sequence r_1, r_2, ...

    ``head`` holds r_1..r_L; afterwards the sequence repeats ``cycle``.
    Sums are O(1) and accept numpy index arrays.
    """

    def __init__(self, head, cycle):
        self.head = np.asarray(head, dtype=float).ravel()
        self.cycle = np.asarray(cycle, dtype=float).ravel()
        if self.cycle.size == 0:
            raise ValueError("reference rewards need a nonempty cycle")
        self._head_prefix = np.concatenate([[0.0], np.cumsum(self.head)])
        self._cycle_prefix = np.concatenate([[0.0], np.cumsum(self.cycle)])

    @classmethod
    def constant(cls, value: float) -> "ReferenceRewards":
        return cls([], [value])

    @property
    def settles_at(self) -> int:
        """Index L after which the sequence is purely periodic."""
        return self.head.size

    @property
    def period(self) -> int:
        return self.cycle.size

    @property
    def limit_mean(self) -> float:
        return float(self.cycle.mean())

    def prefix(self, n):
        """r_1 + ... + r_n (n >= 0; vectorized)."""
        n = np.asarray(n, dtype=np.int64)
        L, p = self.head.size, self.cycle.size
        tail = np.maximum(n - L, 0)
        full, rem = np.divmod(tail, p)
        out = (self._head_prefix[np.minimum(n, L)] + full * self._cycle_prefix[-1]
               + self._cycle_prefix[rem])
        return out if out.ndim else float(out)

    def sum(self, a, b):
        """r_a + ... + r_b, 1-based inclusive; zero when b < a."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = np.where(b >= a, self.prefix(np.maximum(b, 0)) - self.prefix(np.maximum(a - 1, 0)), 0.0)
        return out if out.ndim else float(out)

    def values(self, n: int) -> np.ndarray:
        """r_1..r_n."""
        if n < 1:
            raise ValueError("n must be >= 1")
        L = self.head.size
        if n <= L:
            return self.head[:n].copy()
        idx = np.arange(n - L) % self.cycle.size
        return np.concatenate([self.head, self.cycle[idx]])

    def deviation_bound(self, value: float) -> float:
        """sup_n |sum_{i<=n} (r_i - value)| for value = the cycle mean."""
        dev = np.cumsum(self.head - value)
        cyc = np.cumsum(self.cycle - value)
        base = dev[-1] if dev.size else 0.0
        worst = np.abs(dev).max() if dev.size else 0.0
        return float(max(worst, np.abs(base + cyc).max(), abs(base)))


class LossAllowance:
    """The function d(k, eps) together with an inversion helper.

    ``threshold(eps, slope)`` returns the smallest m0 >= 1 such that
    d(m, eps) / m <= slope for every m >= m0, or None if there is none.
    """

    description = "d(k, eps)"

    def __call__(self, k, eps: float) -> float:
        raise NotImplementedError

    def threshold(self, eps: float, slope: float) -> int | None:
        raise NotImplementedError

    def is_sublinear(self) -> bool:
        return True


def _smallest_int_satisfying(pred, guess: int) -> int:
    """Smallest m >= 1 with pred(m), for a monotone pred, starting near ``guess``."""
    m = max(1, guess)
    while m > 1 and pred(m - 1):
        m -= 1
    while not pred(m):
        m += 1
    return m


@dataclass(frozen=True)
class ConstantAllowance(LossAllowance):
    c: float

    @property
    def description(self):
        return f"d(k, eps) = {self.c:g}"

    def __call__(self, k, eps):
        return np.full(np.shape(k), float(self.c)) if np.ndim(k) else float(self.c)

    def threshold(self, eps, slope):
        if self.c <= 0:
            return 1
        return _smallest_int_satisfying(lambda m: self.c / m <= slope, math.ceil(self.c / slope))


@dataclass(frozen=True)
class SqrtAllowance(LossAllowance):
    scale: float = 1.0

    @property
    def description(self):
        return "d(k, eps) = sqrt(k)" if self.scale == 1 else f"d(k, eps) = {self.scale:g} sqrt(k)"

    def __call__(self, k, eps):
        return self.scale * np.sqrt(k) if np.ndim(k) else self.scale * math.sqrt(k)

    def threshold(self, eps, slope):
        # scale * sqrt(m) / m <= slope  <=>  m >= (scale / slope)^2
        return _smallest_int_satisfying(lambda m: self.scale * math.sqrt(m) / m <= slope,
                                        math.ceil((self.scale / slope) ** 2))


@dataclass(frozen=True)
class LinearAllowance(LossAllowance):
    slope: float = 1.0

    @property
    def description(self):
        return "d(k, eps) = k" if self.slope == 1 else f"d(k, eps) = {self.slope:g} k"

    def __call__(self, k, eps):
        return self.slope * np.asarray(k, dtype=float) if np.ndim(k) else self.slope * float(k)

    def threshold(self, eps, slope):
        return 1 if self.slope <= slope else None

    def is_sublinear(self):
        return self.slope == 0


class FunctionAllowance(LossAllowance):
    """User-supplied d; ``threshold`` is answered by probing a geometric grid."""

    def __init__(self, fn: Callable[[int, float], float], m_cap: int = 10**7,
                 description: str = "d(k, eps) (user function)"):
        self.fn = fn
        self.m_cap = m_cap
        self.description = description

    def __call__(self, k, eps):
        if np.ndim(k):
            return np.array([self.fn(int(m), eps) for m in np.ravel(k)]).reshape(np.shape(k))
        return float(self.fn(k, eps))

    def threshold(self, eps, slope):
        grid = probe_grid(1, self.m_cap)
        last_bad = 0
        for m in grid:
            if self.fn(m, eps) / m > slope:
                last_bad = m
        if last_bad >= self.m_cap:
            return None
        return last_bad + 1


def probe_grid(start: int, cap: int) -> list[int]:
    """start+1, 2 start, 4 start, ..., cap."""
    start = max(start, 1)
    grid = [start + 1]
    m = 2 * start
    while m < cap:
        if m > grid[-1]:
            grid.append(m)
        m *= 2
    if grid[-1] < cap:
        grid.append(cap)
    return grid


class PowerSchedule:
    """eps_n = eps0 * n ** (-power)."""

    def __init__(self, eps0: float = 0.5, power: float = 0.25):
        if eps0 <= 0 or power <= 0:
            raise ValueError("eps0 and power must be positive")
        self.eps0 = eps0
        self.power = power

    def __call__(self, n: int) -> float:
        return self.eps0 * n ** (-self.power)

    def __repr__(self):
        return f"PowerSchedule(eps0={self.eps0}, power={self.power})"


class ExponentialTail:
    """phi(n, eps) = min(1, A exp(-rate * eps^2 * n))."""

    def __init__(self, A: float, rate: float):
        self.A = A
        self.rate = rate

    def __call__(self, n, eps):
        return min(1.0, self.A * math.exp(-self.rate * eps * eps * n))

    def __repr__(self):
        return f"phi(n, eps) = min(1, {self.A:g} exp(-{self.rate:.4g} eps^2 n))"


class BernsteinTail:
    """Bernstein bound for the shortfall of at most n+1 bounded i.i.d. rewards.

    phi(n, eps) = exp(-(n eps)^2 / (2 ((n+1) var + width n eps / 3)))
    """

    def __init__(self, var: float, width: float = 1.0):
        self.var = var
        self.width = width

    def __call__(self, n, eps):
        t = n * eps
        if t <= 0:
            return 1.0
        return min(1.0, math.exp(-t * t / (2 * ((n + 1) * self.var + self.width * t / 3))))

    def __repr__(self):
        return f"phi(n, eps) = Bernstein(var={self.var:g}, width={self.width:g})"


class ZeroTail:
    def __call__(self, n, eps):
        return 0.0

    def __repr__(self):
        return "phi(n, eps) = 0"


@dataclass(frozen=True)
class ValueStabilityMetadata:
    optimal_value: float
    reference: ReferenceRewards
    d: LossAllowance
    phi: Callable[[int, float], float]
    recovery_policy_factory: Callable[[History], Policy]
    epsilon_schedule: Callable[[int], float] = field(default_factory=PowerSchedule)
    notes: str = ""

    def reference_rewards(self, n: int) -> np.ndarray:
        return self.reference.values(n)

    def mean_tolerance(self, n: int) -> float:
        """Declared bound on |(1/n) sum_{i<=n} r_i - V*|."""
        return (self.reference.deviation_bound(self.optimal_value) + 1e-9) / n

    def recovery_policy(self, history: History) -> Policy:
        if self.recovery_policy_factory is None:
            raise ValueError("metadata declares no recovery policy factory")
        return self.recovery_policy_factory(history)

    def with_schedule(self, schedule) -> "ValueStabilityMetadata":
        return _replace(self, epsilon_schedule=schedule)

    def with_allowance(self, d: LossAllowance) -> "ValueStabilityMetadata":
        return _replace(self, d=d)


def _replace(meta, **changes):
    from dataclasses import replace
    return replace(meta, **changes)


class ClassMember(NamedTuple):
    env: Environment
    meta: ValueStabilityMetadata


def reference_reward_prefix(meta: ValueStabilityMetadata, n: int) -> np.ndarray:
    """r_1 .. r_n of the declared reference sequence."""
    return meta.reference.values(n)
