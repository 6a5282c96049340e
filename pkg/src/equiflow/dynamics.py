"""Accelerated mirror-descent equilibrium seeking, with and without delays.

Every player runs the same three-sequence accelerated update: a dual
accumulator ``z`` integrates gradient feedback, ``y`` averages mirror-map
images with schedule weights, and the played action is a convex
combination of the two.  Under delays, players keep the most recently
originated gradient they have received and reuse it until something newer
arrives; feedback with an older timestamp than the cached one is dropped.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DomainError, ScheduleError
from .geometry import EntropyRegularizer, ScaledSimplex
from .schedules import StepSchedule

_FLUSH_THRESHOLD = 1e-300

NONE = "none"
DETERMINISTIC_POWER = "deterministic_power"
STOCHASTIC_UNIFORM = "stochastic_uniform"

ALG1 = "alg1"
ALG2 = "alg2"


@runtime_checkable
class PotentialGameOracle(Protocol):
    """What the simulation driver needs from a game.

    ``partial_gradients`` must return the stack of per-player partial
    gradients of the potential at a joint profile, i.e. the pseudogradient.
    """

    spaces: Sequence[ScaledSimplex]

    @property
    def n_players(self) -> int: ...

    def potential(self, profile) -> float: ...

    def partial_gradients(self, profile) -> list[np.ndarray]: ...


@dataclass(frozen=True)
class DelayModel:
    """How long gradient feedback originated at iteration t stays in flight.

    none:                delivered at t (instantaneous).
    deterministic_power: delay ceil(D * t**alpha), identical for all players.
    stochastic_uniform:  delay uniform on [0, 2*D*t**alpha], mean D*t**alpha,
                         drawn independently per player.
    """

    kind: str
    D: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in (NONE, DETERMINISTIC_POWER, STOCHASTIC_UNIFORM):
            raise DomainError(f"unknown delay model kind {self.kind!r}")
        if self.kind != NONE:
            if not (np.isfinite(self.D) and self.D > 0):
                raise DomainError(f"delay scale D must be positive, got {self.D}")
            if not (np.isfinite(self.alpha) and self.alpha >= 0):
                raise DomainError(f"delay power must be >= 0, got {self.alpha}")

    @classmethod
    def none(cls) -> "DelayModel":
        return cls(NONE)

    @classmethod
    def deterministic(cls, D: float, alpha: float) -> "DelayModel":
        return cls(DETERMINISTIC_POWER, D, alpha)

    @classmethod
    def stochastic(cls, D: float, alpha: float) -> "DelayModel":
        return cls(STOCHASTIC_UNIFORM, D, alpha)


@dataclass(frozen=True)
class FeedbackMessage:
    """Gradient queried at iteration ``origin``, delivered at ``arrival``."""

    origin: int
    gradient: np.ndarray
    arrival: int

    def __post_init__(self):
        if self.arrival < self.origin:
            raise DomainError(
                f"message arrival {self.arrival} precedes origin {self.origin}"
            )


@dataclass(frozen=True)
class PlayerState:
    """One player's iterates plus its cached feedback.

    ``x_next`` is the action to play at the next iteration, ``y`` the
    averaged iterate, ``z`` the dual accumulator, ``v`` the cached mirror
    image of ``z``, and ``(g_star, s)`` the most recent accepted gradient
    with its origin timestamp.
    """

    x_next: np.ndarray
    y: np.ndarray
    z: np.ndarray
    v: np.ndarray
    g_star: np.ndarray
    s: int


def arrival_iteration(model: DelayModel, t: int, rng: np.random.Generator | None = None) -> int:
    """Iteration at which feedback originated at ``t`` is delivered.

    Stochastic models draw one uniform from ``rng``, which must be the
    per-player substream; consuming one draw per origin keeps arrivals
    deterministic given (seed, player, t).
    """
    if t < 1:
        raise DomainError(f"origin iteration must be >= 1, got {t}")
    if model.kind == NONE:
        return t
    bound = model.D * float(t) ** model.alpha
    if model.kind == DETERMINISTIC_POWER:
        return t + math.ceil(bound)
    if rng is None:
        raise DomainError("stochastic delay model needs a random generator")
    return math.ceil(t + rng.uniform(0.0, 2.0 * bound))


def post_message(pending: list, message: FeedbackMessage):
    """Queue an in-flight message; the store is a min-heap on arrival."""
    heapq.heappush(pending, (message.arrival, message.origin, message.gradient))


def deliver(pending: list, k: int) -> list[FeedbackMessage]:
    """Remove and return every queued message due at iteration ``k``."""
    out = []
    while pending and pending[0][0] <= k:
        arrival, origin, gradient = heapq.heappop(pending)
        out.append(FeedbackMessage(origin=origin, gradient=gradient, arrival=arrival))
    return out


def apply_feedback(state: PlayerState, inbox: list[FeedbackMessage]) -> PlayerState:
    """Keep only the most recently originated message, if newer than cached."""
    if not inbox:
        return state
    newest = max(inbox, key=lambda m: m.origin)
    if newest.origin <= state.s:
        return state
    return replace(state, s=newest.origin, g_star=np.asarray(newest.gradient, dtype=float))


class _Blocks:
    """Concatenated per-player geometry for vectorized mirror-map work.

    Segment reductions use ``reduceat`` so an N-player update performs the
    same arithmetic per segment regardless of how players are batched.
    """

    def __init__(self, spaces: Sequence[ScaledSimplex]):
        sizes = np.array([sp.dimension for sp in spaces])
        self.sizes = sizes
        self.starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        self.scales = np.array([sp.scale for sp in spaces])
        self.scales_rep = np.repeat(self.scales, sizes)
        self.total = int(np.sum(sizes))
        self.slices = [
            slice(int(s), int(s + n)) for s, n in zip(self.starts, sizes)
        ]

    def mirror(self, z: np.ndarray) -> np.ndarray:
        logits = self.scales_rep * z
        if not np.all(np.isfinite(logits)):
            raise DomainError("dual vector has non-finite entries")
        peak = np.maximum.reduceat(logits, self.starts)
        weights = np.exp(logits - np.repeat(peak, self.sizes))
        totals = np.add.reduceat(weights, self.starts)
        x = self.scales_rep * (weights / np.repeat(totals, self.sizes))
        tiny = x < _FLUSH_THRESHOLD
        if np.any(tiny):
            x[tiny] = 0.0
            sums = np.add.reduceat(x, self.starts)
            touched = np.logical_or.reduceat(tiny, self.starts)
            factor = np.where(touched, self.scales / sums, 1.0)
            x = x * np.repeat(factor, self.sizes)
        return x

    def grad_psi(self, x: np.ndarray) -> np.ndarray:
        if np.any(x <= 0.0):
            raise DomainError("entropy gradient requires strictly positive entries")
        return (np.log(x / self.scales_rep) + 1.0) / self.scales_rep


def _accelerated_update(blocks: _Blocks, z, y, g, a_k, A_prev, A_k, a_next, A_next):
    # The three coupled sequences, in the order the update equations apply.
    z1 = z - a_k * g
    v1 = blocks.mirror(z1)
    y1 = (A_prev / A_k) * y + (a_k / A_k) * v1
    x1 = (A_k / A_next) * y1 + (a_next / A_next) * v1
    return z1, v1, y1, x1


def _schedule_slots(sched: StepSchedule, k: int):
    a_k = sched.a(k)
    A_prev = sched.partial_sum(k - 1)
    A_k = sched.partial_sum(k)
    if A_k <= 0.0:
        raise ScheduleError(f"partial sum A_{k} is not positive")
    return a_k, A_prev, A_k, sched.a(k + 1), sched.partial_sum(k + 1)


def alg1_step(
    state: PlayerState,
    g_k: np.ndarray,
    reg: EntropyRegularizer,
    sched: StepSchedule,
    k: int,
) -> PlayerState:
    """One instantaneous-feedback update for a single player.

    Applies, in order: the dual step ``z <- z - a_k g``, the averaged
    iterate ``y``, and the next action ``x``.  ``g_k`` must be the exact
    partial gradient at the current joint profile.
    """
    a_k, A_prev, A_k, a_next, A_next = _schedule_slots(sched, k)
    blocks = _Blocks([reg.space])
    g_k = np.asarray(g_k, dtype=float)
    z1, v1, y1, x1 = _accelerated_update(
        blocks, state.z, state.y, g_k, a_k, A_prev, A_k, a_next, A_next
    )
    return replace(state, x_next=x1, y=y1, z=z1, v=v1, g_star=g_k)


def alg2_step(
    state: PlayerState,
    inbox: list[FeedbackMessage],
    reg: EntropyRegularizer,
    sched: StepSchedule,
    k: int,
) -> PlayerState:
    """One delayed-feedback update: refresh the cache, then step with it."""
    state = apply_feedback(state, inbox)
    return alg1_step(state, state.g_star, reg, sched, k)


@dataclass
class SimulationTrace:
    """Per-iteration diagnostics of one run, plus terminal iterates."""

    k: np.ndarray
    phi: np.ndarray
    gap: np.ndarray
    max_staleness: np.ndarray
    a: np.ndarray
    A: np.ndarray
    final_x: list[np.ndarray] | None = None
    final_y: list[np.ndarray] | None = None
    best_phi: float = math.nan
    best_y: list[np.ndarray] | None = None
    grad_diff_max: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.k)


def run_simulation(
    game: PotentialGameOracle,
    sched: StepSchedule,
    model: DelayModel | None,
    horizon: int,
    seed: int = 0,
    phi_star: float = 0.0,
    algorithm: str = "auto",
    x0: list[np.ndarray] | None = None,
    record_gradient_steps: bool = False,
) -> SimulationTrace:
    """Drive all players for ``horizon`` iterations and record the trace.

    ``algorithm`` may be "alg1" (instantaneous feedback only), "alg2"
    (message-passing with the given delay model), or "auto" which picks
    alg1 when the model is absent.  ``phi_star`` is an opaque reference
    value used only for the gap column.  Stochastic arrivals use one
    substream per player spawned from ``seed``, so traces are reproducible
    byte for byte.

    Iterates are mirror-map images and their convex combinations, hence
    feasible by construction; oracle evaluations inside the loop skip
    revalidation when the game exposes the flat fast path.
    """
    if model is None:
        model = DelayModel.none()
    if algorithm == "auto":
        algorithm = ALG1 if model.kind == NONE else ALG2
    if algorithm not in (ALG1, ALG2):
        raise DomainError(f"unknown algorithm {algorithm!r}")
    if algorithm == ALG1 and model.kind != NONE:
        raise DomainError("alg1 requires instantaneous feedback; use alg2 with delays")
    if horizon < 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")

    n = game.n_players
    blocks = _Blocks(game.spaces)
    if x0 is None:
        x0 = [space.uniform() for space in game.spaces]
    else:
        x0 = [
            space.require_member(x, f"x0[{i}]")
            for i, (space, x) in enumerate(zip(game.spaces, x0))
        ]

    X = np.concatenate([np.asarray(x, dtype=float) for x in x0])
    Z = blocks.grad_psi(X)
    V = blocks.mirror(Z)
    Y = np.zeros_like(X)

    def profile(flat):
        return [flat[sl] for sl in blocks.slices]

    if hasattr(game, "potential_flat") and hasattr(game, "partial_gradients_flat"):
        def eval_phi(flat):
            return game.potential_flat(flat, validate=False)

        def eval_grads(flat):
            return game.partial_gradients_flat(flat, validate=False)
    else:
        def eval_phi(flat):
            return game.potential(profile(flat))

        def eval_grads(flat):
            return np.concatenate(game.partial_gradients(profile(flat)))

    trace = SimulationTrace(
        k=np.zeros(horizon, dtype=np.int64),
        phi=np.zeros(horizon),
        gap=np.zeros(horizon),
        max_staleness=np.zeros(horizon, dtype=np.int64),
        a=np.zeros(horizon),
        A=np.zeros(horizon),
        grad_diff_max=np.zeros(horizon) if record_gradient_steps else None,
    )
    if horizon == 0:
        trace.final_x = profile(X.copy())
        return trace

    G = eval_grads(X)
    G_star = G.copy()
    s = np.ones(n, dtype=np.int64)
    prev_G = G.copy() if record_gradient_steps else None

    pending: list[list] = [[] for _ in range(n)]
    streams = [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(n)]

    best_phi = math.inf
    best_Y = None

    for k in range(1, horizon + 1):
        a_k, A_prev, A_k, a_next, A_next = _schedule_slots(sched, k)
        if algorithm == ALG2:
            for i in range(n):
                inbox = deliver(pending[i], k)
                if inbox:
                    newest = max(inbox, key=lambda m: m.origin)
                    if newest.origin > s[i]:
                        s[i] = newest.origin
                        G_star[blocks.slices[i]] = newest.gradient
        else:
            s[:] = k

        Z, V, Y, X = _accelerated_update(blocks, Z, Y, G_star, a_k, A_prev, A_k, a_next, A_next)

        phi = eval_phi(Y)
        row = k - 1
        trace.k[row] = k
        trace.phi[row] = phi
        trace.gap[row] = phi - phi_star
        trace.max_staleness[row] = k - int(np.min(s))
        trace.a[row] = a_k
        trace.A[row] = A_k
        if phi < best_phi:
            best_phi = phi
            best_Y = Y.copy()

        G = eval_grads(X)
        if record_gradient_steps:
            trace.grad_diff_max[row] = float(np.max(np.abs(G - prev_G)))
            prev_G = G
        if algorithm == ALG2:
            for i in range(n):
                arrival = arrival_iteration(model, k + 1, streams[i])
                if arrival <= horizon:
                    post_message(
                        pending[i],
                        FeedbackMessage(
                            origin=k + 1,
                            gradient=G[blocks.slices[i]],
                            arrival=arrival,
                        ),
                    )
        else:
            G_star = G

    trace.final_x = profile(X.copy())
    trace.final_y = profile(Y.copy())
    trace.best_phi = best_phi
    trace.best_y = profile(best_Y.copy()) if best_Y is not None else None
    return trace


def staleness_bound_check(trace: SimulationTrace, model: DelayModel) -> bool:
    """Check the worst-case staleness inequality on a deterministic run.

    For delays bounded by ``D * k**alpha`` the freshest held timestamp
    ``s`` must satisfy ``s + 1 + D*(s+1)**alpha > k`` at every iteration:
    anything older would already have been superseded.
    """
    if model.kind == STOCHASTIC_UNIFORM:
        raise DomainError("staleness bound applies to deterministic delay models")
    D = model.D if model.kind == DETERMINISTIC_POWER else 0.0
    alpha = model.alpha if model.kind == DETERMINISTIC_POWER else 0.0
    s = trace.k - trace.max_staleness
    return bool(np.all(s + 1 + D * (s + 1.0) ** alpha > trace.k))
