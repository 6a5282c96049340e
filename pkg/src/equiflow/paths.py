"""Shortest and k-shortest loopless path search on directed edge lists.

Paths are represented as tuples of edge indices.  All ties are broken by
the lexicographic order of the edge-index sequence, which makes every
result deterministic and independent of insertion order.
"""

from __future__ import annotations

import heapq

from .errors import DomainError, NoPathError


def build_adjacency(node_count: int, edges) -> list[list[tuple[int, int]]]:
    """Outgoing (edge index, head) lists per node, sorted by edge index."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(node_count + 1)]
    for idx, (tail, head) in enumerate(edges):
        adj[tail].append((idx, head))
    return adj


def shortest_path(
    adj,
    weights,
    source: int,
    target: int,
    banned_nodes: frozenset[int] = frozenset(),
    banned_edges: frozenset[int] = frozenset(),
):
    """Lexicographically smallest minimum-weight simple path, or None.

    Dijkstra with heap keys ``(distance, edge sequence)``.  With strictly
    positive weights, prefixes of key-minimal paths are key-minimal, so the
    first finalization of a node carries its optimal key.
    """
    if source == target:
        return 0.0, ()
    heap = [(0.0, (), source)]
    done = set(banned_nodes)
    while heap:
        dist, path, node = heapq.heappop(heap)
        if node in done:
            continue
        if node == target:
            return dist, path
        done.add(node)
        for idx, head in adj[node]:
            if head in done or idx in banned_edges:
                continue
            heapq.heappush(heap, (dist + weights[idx], path + (idx,), head))
    return None


def k_shortest_paths(node_count: int, edges, weights, source: int, target: int, k: int):
    """Yen's algorithm: up to ``k`` loopless paths in (cost, edges) order.

    Returns a list of ``(cost, edge tuple)`` pairs sorted by cost with
    lexicographic edge-sequence tie-breaks; shorter than ``k`` when the
    graph has fewer simple paths.  Raises NoPathError if the target is
    unreachable.
    """
    if k < 1:
        raise DomainError(f"requested path count must be >= 1, got {k}")
    for w in weights:
        if not w > 0:
            raise DomainError("path weights must be strictly positive")
    adj = build_adjacency(node_count, edges)
    first = shortest_path(adj, weights, source, target)
    if first is None:
        raise NoPathError(f"no directed path from {source} to {target}")
    accepted = [first]
    accepted_set = {first[1]}
    candidates: dict[tuple[int, ...], float] = {}
    while len(accepted) < k:
        _, prev_path = accepted[-1]
        prev_nodes = _node_sequence(prev_path, edges, source)
        root_cost = 0.0
        for i in range(len(prev_path)):
            spur_node = prev_nodes[i]
            root = prev_path[:i]
            banned_edges = {
                path[i]
                for _, path in accepted
                if len(path) > i and path[:i] == root
            }
            banned_nodes = frozenset(prev_nodes[:i])
            spur = shortest_path(
                adj, weights, spur_node, target,
                banned_nodes=banned_nodes,
                banned_edges=frozenset(banned_edges),
            )
            if spur is not None:
                spur_cost, spur_path = spur
                detour = root + spur_path
                if detour not in accepted_set and detour not in candidates:
                    candidates[detour] = root_cost + spur_cost
            root_cost += weights[prev_path[i]]
        if not candidates:
            break
        best = min(candidates, key=lambda p: (candidates[p], p))
        accepted.append((candidates.pop(best), best))
        accepted_set.add(best)
    return accepted


def _node_sequence(path, edges, source: int) -> list[int]:
    nodes = [source]
    for idx in path:
        nodes.append(edges[idx][1])
    return nodes
