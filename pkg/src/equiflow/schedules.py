"""Step-size schedules and the smoothness constants that validate them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ScheduleError

POWER = "power"
INVERSE = "inverse"
INVERSE_LOG = "inverse_log"

_FAMILIES = (POWER, INVERSE, INVERSE_LOG)


@dataclass(frozen=True)
class SmoothnessBundle:
    """Constants tying a game's geometry to admissible schedules.

    ``lipschitz_L`` bounds the gradient Lipschitz constant of the potential,
    ``mu_star`` is the smallest per-player strong-convexity constant, and
    ``diameter_DX`` the diameter of the joint strategy space in the working
    block norm (max over players of per-player l1).
    """

    lipschitz_L: float
    mu_star: float
    diameter_DX: float
    estimation_seed: int | None = None

    def __post_init__(self):
        for name in ("lipschitz_L", "mu_star", "diameter_DX"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v}")


class StepSchedule:
    """One of the three step-size families, with cached partial sums.

    power:       a_k = a0 * k**beta         (beta in [0, 1])
    inverse:     a_k = a0 / k
    inverse_log: a_k = a0 / ((k+1) * log(k+1))

    Partial sums A_k are maintained as a running sum so that
    ``A(k) - A(k-1) == a(k)`` holds exactly in floating point.  The cache
    only ever appends, so instances are safe to share between runs.
    """

    def __init__(self, family: str, a0: float, beta: float = 0.0):
        if family not in _FAMILIES:
            raise ScheduleError(f"unknown schedule family {family!r}")
        if not (np.isfinite(a0) and a0 > 0):
            raise ScheduleError(f"a0 must be positive, got {a0}")
        if family == POWER and not 0.0 <= beta <= 1.0:
            raise ScheduleError(f"power exponent must lie in [0, 1], got {beta}")
        self.family = family
        self.a0 = float(a0)
        self.beta = float(beta) if family == POWER else 0.0
        self._sums = [0.0]

    @classmethod
    def power(cls, a0: float, beta: float) -> "StepSchedule":
        return cls(POWER, a0, beta)

    @classmethod
    def inverse(cls, a0: float) -> "StepSchedule":
        return cls(INVERSE, a0)

    @classmethod
    def inverse_log(cls, a0: float) -> "StepSchedule":
        return cls(INVERSE_LOG, a0)

    def __repr__(self):
        if self.family == POWER:
            return f"StepSchedule.power(a0={self.a0}, beta={self.beta})"
        return f"StepSchedule.{self.family}(a0={self.a0})"

    def a(self, k: int) -> float:
        """Step size at iteration ``k >= 1``."""
        if k < 1:
            raise ScheduleError(f"step index must be >= 1, got {k}")
        if self.family == POWER:
            return self.a0 * float(k) ** self.beta
        if self.family == INVERSE:
            return self.a0 / k
        return self.a0 / ((k + 1) * np.log(k + 1.0))

    def partial_sum(self, k: int) -> float:
        """Running sum ``A_k = a_1 + ... + a_k``; ``A_0 = 0``."""
        if k < 0:
            raise ScheduleError(f"partial-sum index must be >= 0, got {k}")
        sums = self._sums
        while len(sums) <= k:
            sums.append(sums[-1] + self.a(len(sums)))
        return sums[k]

    def steps(self, horizon: int) -> np.ndarray:
        """Vector of a_1 .. a_horizon (vectorized, for validation sweeps)."""
        ks = np.arange(1, horizon + 1, dtype=float)
        if self.family == POWER:
            return self.a0 * ks**self.beta
        if self.family == INVERSE:
            return self.a0 / ks
        return self.a0 / ((ks + 1) * np.log(ks + 1))


def default_a0(family: str, bundle: SmoothnessBundle, beta: float = 0.0) -> float:
    """Largest a0 that keeps ``a_k**2 / A_k <= mu_star / L`` for every horizon.

    For the power family ``A_k >= a0 * k**(beta+1) / (beta+1)`` gives
    ``a_k**2 / A_k <= a0 * (beta+1)``, so ``a0 = mu/((beta+1) L)`` is always
    admissible.  The slow families only need the k = 1 term controlled.
    """
    ratio = bundle.mu_star / bundle.lipschitz_L
    if family == POWER:
        return ratio / (beta + 1.0)
    return ratio


def validate_schedule(sched: StepSchedule, bundle: SmoothnessBundle, horizon: int) -> bool:
    """True iff ``max_{k<=horizon} a_k**2 / A_k <= mu_star / lipschitz_L``."""
    if horizon < 1:
        raise ScheduleError(f"horizon must be >= 1, got {horizon}")
    a = sched.steps(horizon)
    partial = np.cumsum(a)
    worst = float(np.max(a * a / partial))
    return worst <= bundle.mu_star / bundle.lipschitz_L
