"""Shared fixtures and independent oracles used across the test modules."""

import numpy as np

from equiflow import BprParams, PlayerSpec, RoadNetwork, RoutingGame


def diamond_network():
    """Two parallel 2-edge corridors 1->4: top costs 2, bottom costs 3."""
    edges = ((1, 2), (2, 4), (1, 3), (3, 4))
    bpr = tuple(
        BprParams(fft, 1.0, 10.0, 1.0) for fft in (1.0, 1.0, 1.5, 1.5)
    )
    return RoadNetwork(node_count=4, edges=edges, bpr=bpr)


def line_network():
    edges = ((1, 2), (2, 3))
    return RoadNetwork(
        node_count=3,
        edges=edges,
        bpr=tuple(BprParams(1.0, 1.0, 10.0, 1.0) for _ in edges),
    )


def two_player_game(demand1=2.0, demand2=1.5, smoothness=None):
    """Two players with two routes each, sharing edge (2,3).

    Edges: 0=(1,2) 1=(2,3) 2=(1,3) 3=(4,2) 4=(4,3).
    Player 1 goes 1->3 via [0,1] or [2]; player 2 goes 4->3 via [3,1] or [4].
    """
    edges = ((1, 2), (2, 3), (1, 3), (4, 2), (4, 3))
    bpr = (
        BprParams(2.0, 3.0, 10.0, 2.0),
        BprParams(1.0, 2.0, 8.0, 1.5),
        BprParams(3.0, 1.0, 12.0, 1.0),
        BprParams(1.5, 2.5, 9.0, 2.0),
        BprParams(2.5, 1.5, 11.0, 1.25),
    )
    network = RoadNetwork(node_count=4, edges=edges, bpr=bpr)
    players = (
        PlayerSpec(origin=1, destination=3, demand=demand1, routes=((0, 1), (2,))),
        PlayerSpec(origin=4, destination=3, demand=demand2, routes=((3, 1), (4,))),
    )
    return RoutingGame(network, players, smoothness=smoothness)


def parallel_two_route_game(demand=4.0):
    """One player, two identical parallel edges: symmetric by construction."""
    edges = ((1, 2), (1, 2))
    bpr = tuple(BprParams(2.0, 3.0, 10.0, 2.0) for _ in edges)
    network = RoadNetwork(node_count=2, edges=edges, bpr=bpr)
    players = (PlayerSpec(origin=1, destination=2, demand=demand, routes=((0,), (1,))),)
    return RoutingGame(network, players)


def single_route_game(demand=5.0):
    edges = ((1, 2), (2, 3))
    bpr = tuple(BprParams(2.0, 3.0, 10.0, 2.0) for _ in edges)
    network = RoadNetwork(node_count=3, edges=edges, bpr=bpr)
    players = (PlayerSpec(origin=1, destination=3, demand=demand, routes=((0, 1),)),)
    return RoutingGame(network, players)


def random_profile(game, rng):
    """Strictly interior random profile (softmax of Gaussians per player)."""
    out = []
    for space in game.spaces:
        g = rng.standard_normal(space.dimension)
        w = np.exp(g - np.max(g))
        out.append(space.scale * w / np.sum(w))
    return out


def fd_gradient(game, profile, i, h=1e-5):
    """Central finite differences of the potential in player i's coordinates.

    Steps leave the simplex, so validation is bypassed; the potential is
    well defined for any nonnegative loads.
    """
    base = [np.asarray(x, dtype=float).copy() for x in profile]
    grad = np.zeros_like(base[i])
    for p in range(len(grad)):
        up = [x.copy() for x in base]
        dn = [x.copy() for x in base]
        up[i][p] += h
        dn[i][p] -= h
        grad[p] = (
            game.potential(up, validate=False) - game.potential(dn, validate=False)
        ) / (2.0 * h)
    return grad


def all_simple_paths(node_count, edges, source, target):
    """Exhaustive DFS enumeration of simple paths as edge-index tuples."""
    out_edges = [[] for _ in range(node_count + 1)]
    for idx, (tail, head) in enumerate(edges):
        out_edges[tail].append((idx, head))
    found = []

    def walk(node, visited, path):
        if node == target:
            found.append(tuple(path))
            return
        for idx, head in out_edges[node]:
            if head not in visited:
                visited.add(head)
                path.append(idx)
                walk(head, visited, path)
                path.pop()
                visited.remove(head)

    walk(source, {source}, [])
    return found
