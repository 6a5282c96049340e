"""Congestion routing game: BPR edge costs, Beckmann potential, Wardrop gaps.

The game assigns each player a demand to split over a fixed set of routes.
Edge travel times follow the Bureau of Public Roads form, the potential is
the Beckmann integral of edge costs, and its partial gradients are exactly
the route costs, so minimizers of the potential are Wardrop equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import ScaledSimplex
from .paths import k_shortest_paths
from .schedules import SmoothnessBundle

_SMOOTHNESS_PAIRS = 1000
_SMOOTHNESS_SAFETY = 2.0


@dataclass(frozen=True)
class BprParams:
    """Parameters of one edge's BPR latency ``t0 * (1 + b * (load/c)**r)``."""

    free_flow_time: float
    coefficient: float
    capacity: float
    power: float

    def __post_init__(self):
        for name in ("free_flow_time", "coefficient", "capacity"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"BPR {name} must be positive, got {v}")
        if not (np.isfinite(self.power) and self.power >= 1.0):
            raise DomainError(f"BPR power must be >= 1, got {self.power}")


def bpr_cost(params: BprParams, load: float) -> float:
    """Edge travel time at the given load; nondecreasing in load."""
    if load < 0:
        raise DomainError(f"edge load must be nonnegative, got {load}")
    return params.free_flow_time * (
        1.0 + params.coefficient * (load / params.capacity) ** params.power
    )


def bpr_integral(params: BprParams, load: float) -> float:
    """Closed form of ``integral_0^load bpr_cost``.

    Equals ``t0*load + t0*b*load**(r+1) / ((r+1)*c**r)``.
    """
    if load < 0:
        raise DomainError(f"edge load must be nonnegative, got {load}")
    r = params.power
    return params.free_flow_time * load + (
        params.free_flow_time
        * params.coefficient
        * load ** (r + 1.0)
        / ((r + 1.0) * params.capacity**r)
    )


@dataclass(frozen=True)
class RoadNetwork:
    """Directed road graph with one BPR parameter set per edge."""

    node_count: int
    edges: tuple[tuple[int, int], ...]
    bpr: tuple[BprParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "bpr", tuple(self.bpr))
        if self.node_count < 1:
            raise DomainError(f"node count must be >= 1, got {self.node_count}")
        if len(self.edges) != len(self.bpr):
            raise DomainError(
                f"{len(self.edges)} edges but {len(self.bpr)} BPR parameter sets"
            )
        for idx, (tail, head) in enumerate(self.edges):
            if not (1 <= tail <= self.node_count and 1 <= head <= self.node_count):
                raise DomainError(f"edge {idx} endpoints ({tail}, {head}) out of range")
            if tail == head:
                raise DomainError(f"edge {idx} is a self-loop at node {tail}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def free_flow_times(self) -> np.ndarray:
        return np.array([p.free_flow_time for p in self.bpr])


@dataclass(frozen=True)
class PlayerSpec:
    """One origin/destination pair: demand plus its admissible routes."""

    origin: int
    destination: int
    demand: float
    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))
        if not (np.isfinite(self.demand) and self.demand > 0):
            raise DomainError(f"demand must be positive, got {self.demand}")
        if not self.routes:
            raise DomainError("player must have at least one route")
        if len(set(self.routes)) != len(self.routes):
            raise DomainError("duplicate routes in player specification")


@dataclass(frozen=True)
class RouteSet:
    """Enumerated routes; ``incomplete`` warns that fewer paths exist than asked."""

    routes: list[tuple[int, ...]]
    incomplete: bool


def enumerate_routes(network: RoadNetwork, origin: int, destination: int, count: int) -> RouteSet:
    """The ``count`` simple paths with smallest free-flow time.

    Ranked by total free-flow time with lexicographic edge-sequence
    tie-breaks.  Raises NoPathError when the destination is unreachable.
    """
    found = k_shortest_paths(
        network.node_count,
        network.edges,
        network.free_flow_times(),
        origin,
        destination,
        count,
    )
    routes = [path for _, path in found]
    return RouteSet(routes=routes, incomplete=len(routes) < count)


class RoutingGame:
    """Immutable routing game over a road network.

    Implements the potential-game oracle: joint profiles are lists of
    per-player route-mass vectors, the potential is the Beckmann integral,
    and partial gradients are route costs at the induced loads.
    """

    def __init__(
        self,
        network: RoadNetwork,
        players,
        smoothness: SmoothnessBundle | None = None,
        estimation_seed: int = 0,
    ):
        self.network = network
        self.players = tuple(players)
        if not self.players:
            raise DomainError("game needs at least one player")
        for spec in self.players:
            _validate_routes(network, spec)

        E = network.edge_count
        sizes = np.array([len(p.routes) for p in self.players])
        self._sizes = sizes
        self._starts = np.concatenate(([0], np.cumsum(sizes)))[:-1]
        total = int(np.sum(sizes))
        incidence = np.zeros((total, E))
        row = 0
        for spec in self.players:
            for route in spec.routes:
                incidence[row, list(route)] = 1.0
                row += 1
        self._incidence = incidence
        self.demands = np.array([p.demand for p in self.players])
        self._scales_rep = np.repeat(self.demands, sizes)
        self.spaces = [
            ScaledSimplex(int(n), float(s)) for n, s in zip(sizes, self.demands)
        ]

        p = network.bpr
        self._fft = np.array([q.free_flow_time for q in p])
        self._coeff = np.array([q.coefficient for q in p])
        self._cap = np.array([q.capacity for q in p])
        self._pow = np.array([q.power for q in p])
        # Precomputed coefficient of load**(r+1) in the Beckmann integral.
        self._int_coeff = self._fft * self._coeff / ((self._pow + 1.0) * self._cap**self._pow)

        if smoothness is None:
            smoothness = self._estimate_smoothness(estimation_seed)
        self.smoothness = smoothness

    @property
    def n_players(self) -> int:
        return len(self.players)

    # -- profile handling -------------------------------------------------

    def concat(self, profile) -> np.ndarray:
        if len(profile) != self.n_players:
            raise DomainError(
                f"profile has {len(profile)} players, game has {self.n_players}"
            )
        return np.concatenate([np.asarray(x, dtype=float) for x in profile])

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        return [
            flat[s : s + n] for s, n in zip(self._starts, self._sizes)
        ]

    def _validate_flat(self, flat: np.ndarray):
        if flat.shape != (self._incidence.shape[0],):
            raise DomainError("profile has the wrong total number of route entries")
        if np.any(flat < 0.0):
            raise DomainError("profile has negative route mass")
        sums = np.add.reduceat(flat, self._starts)
        if np.any(np.abs(sums - self.demands) > 1e-9 * self.demands):
            raise DomainError("per-player route masses do not sum to demand")

    # -- oracle surface ----------------------------------------------------

    def edge_loads(self, profile, validate: bool = True) -> np.ndarray:
        """Traffic load per edge induced by a joint profile."""
        flat = self.concat(profile)
        if validate:
            self._validate_flat(flat)
        return flat @ self._incidence

    def potential(self, profile, validate: bool = True) -> float:
        """Beckmann potential: summed integrals of edge costs up to the loads."""
        return self.potential_flat(self.concat(profile), validate=validate)

    def potential_flat(self, flat: np.ndarray, validate: bool = True) -> float:
        """Potential evaluated on a pre-concatenated profile (driver fast path)."""
        if validate:
            self._validate_flat(flat)
        loads = flat @ self._incidence
        return float(np.sum(self._fft * loads + self._int_coeff * loads ** (self._pow + 1.0)))

    def partial_gradients(self, profile, validate: bool = True) -> list[np.ndarray]:
        """Route costs for every player at the profile's loads."""
        return self.split(self.partial_gradients_flat(self.concat(profile), validate=validate))

    def partial_gradients_flat(self, flat: np.ndarray, validate: bool = True) -> np.ndarray:
        """Concatenated route costs on a pre-concatenated profile."""
        if validate:
            self._validate_flat(flat)
        return self._gradient_flat(flat)

    def partial_gradient(self, profile, i: int, validate: bool = True) -> np.ndarray:
        return self.partial_gradients(profile, validate=validate)[i]

    def _edge_costs(self, loads: np.ndarray) -> np.ndarray:
        return self._fft * (1.0 + self._coeff * (loads / self._cap) ** self._pow)

    def _gradient_flat(self, flat: np.ndarray) -> np.ndarray:
        return self._incidence @ self._edge_costs(flat @ self._incidence)

    def uniform_profile(self) -> list[np.ndarray]:
        return [space.uniform() for space in self.spaces]

    def free_flow_route_costs(self) -> np.ndarray:
        """Total free-flow time of every route of every player."""
        return self._incidence @ self._fft

    # -- smoothness estimation ---------------------------------------------

    def _random_flat(self, rng: np.random.Generator) -> np.ndarray:
        parts = []
        for space in self.spaces:
            g = rng.standard_normal(space.dimension)
            w = np.exp(g - np.max(g))
            parts.append(space.scale * w / np.sum(w))
        return np.concatenate(parts)

    def _estimate_smoothness(self, seed: int) -> SmoothnessBundle:
        """Sampled gradient-Lipschitz constant, capped by an analytic bound.

        The sampled ratio is taken under three block pairings of the l1/linf
        geometry (flat, max-block, and l2-of-blocks) and the largest is kept
        with a safety factor; the analytic bound dominates all three, so the
        smaller of the two is still valid.
        """
        rng = np.random.default_rng(seed)
        starts = self._starts
        worst = 0.0
        for trial in range(_SMOOTHNESS_PAIRS):
            x = self._random_flat(rng)
            if trial % 2 == 0:
                x2 = self._random_flat(rng)
            else:
                # Local pair: probe curvature at short range.
                x2 = x + 1e-3 * (self._random_flat(rng) - x)
            dg = np.abs(self._gradient_flat(x) - self._gradient_flat(x2))
            dx = np.abs(x - x2)
            g_blocks = np.maximum.reduceat(dg, starts)
            x_blocks = np.add.reduceat(dx, starts)
            denom_max = float(np.max(x_blocks))
            if denom_max <= 0.0:
                continue
            ratio_max = float(np.max(g_blocks)) / denom_max
            ratio_l2 = float(
                np.sqrt(np.sum(g_blocks**2)) / np.sqrt(np.sum(x_blocks**2))
            )
            worst = max(worst, ratio_max, ratio_l2)
        sampled = _SMOOTHNESS_SAFETY * worst

        # Analytic cap: N * max over routes of the summed worst-case cost
        # slopes along the route.
        used = np.zeros(self.network.edge_count)
        for spec, s, n in zip(self.players, starts, self._sizes):
            used += spec.demand * np.max(self._incidence[s : s + n], axis=0)
        slope = (
            self._fft * self._coeff * self._pow * used ** (self._pow - 1.0)
            / self._cap**self._pow
        )
        analytic = self.n_players * float(np.max(self._incidence @ slope))

        lipschitz = min(sampled, analytic) if sampled > 0 else analytic
        return SmoothnessBundle(
            lipschitz_L=lipschitz,
            mu_star=float(np.min(1.0 / self.demands**2)),
            diameter_DX=2.0 * float(np.max(self.demands)),
            estimation_seed=seed,
        )


def _validate_routes(network: RoadNetwork, spec: PlayerSpec):
    for route in spec.routes:
        if not route:
            raise DomainError("empty route")
        nodes = [network.edges[route[0]][0]]
        for idx in route:
            if not 0 <= idx < network.edge_count:
                raise DomainError(f"route references unknown edge {idx}")
            tail, head = network.edges[idx]
            if tail != nodes[-1]:
                raise DomainError("route edges are not contiguous")
            nodes.append(head)
        if nodes[0] != spec.origin or nodes[-1] != spec.destination:
            raise DomainError("route does not join the player's origin and destination")
        if len(set(nodes)) != len(nodes):
            raise DomainError("route revisits a node")


def wardrop_gap(profile, game: RoutingGame, support_tol: float = 1e-6) -> float:
    """Largest cost excess of a supported route over the player's best route.

    Zero exactly at a Wardrop equilibrium.  Routes carrying at most
    ``support_tol * demand`` mass are ignored.
    """
    grads = game.partial_gradients(profile)
    worst = 0.0
    for x, costs, demand in zip(profile, grads, game.demands):
        x = np.asarray(x, dtype=float)
        supported = x > support_tol * demand
        spread = float(np.max(costs[supported]) - np.min(costs))
        worst = max(worst, spread)
    return worst
