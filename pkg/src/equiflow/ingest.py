"""Network ingestion: TNTP files, synthetic grids, scenario sampling, JSON.

TNTP is the plain-text exchange format of the TransportationNetworks
repository: angle-bracket metadata headers, ``~`` comment lines, then one
whitespace-separated link row per edge terminated by ``;``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatchError,
    InfeasibleScenarioError,
    ParseError,
    SchemaError,
)
from .routing import BprParams, PlayerSpec, RoadNetwork, RoutingGame, enumerate_routes
from .schedules import SmoothnessBundle

SCHEMA_VERSION = 1

_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class TntpLink:
    init_node: int
    term_node: int
    capacity: float
    length: float
    free_flow_time: float
    b: float
    power: float
    speed: float
    toll: float
    link_type: str


@dataclass(frozen=True)
class TntpNetwork:
    """Raw parse of a ``*_net.tntp`` file."""

    zone_count: int | None
    node_count: int
    first_through_node: int | None
    link_count: int
    links: tuple[TntpLink, ...]


def parse_tntp(text: str | bytes) -> TntpNetwork:
    """Parse TNTP network text; raises ParseError with the offending line.

    The declared link count must match the number of parsed rows, and node
    ids must stay inside the declared range.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    metadata: dict[str, str] = {}
    links: list[TntpLink] = []
    in_body = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("~"):
            continue
        if not in_body:
            if line.startswith("<"):
                key, _, value = line.partition(">")
                key = key[1:].strip()
                if key == "END OF METADATA":
                    in_body = True
                else:
                    metadata[key] = value.strip()
                continue
            # Some files omit the end-of-metadata marker before the body.
            in_body = True
        links.append(_parse_link_row(line, lineno))

    node_count = _require_int(metadata, "NUMBER OF NODES")
    link_count = _require_int(metadata, "NUMBER OF LINKS")
    zone_count = _optional_int(metadata, "NUMBER OF ZONES")
    first_through = _optional_int(metadata, "FIRST THRU NODE")

    if len(links) != link_count:
        raise CountMismatchError(
            f"metadata declares {link_count} links but {len(links)} rows were parsed"
        )
    for link in links:
        if not (1 <= link.init_node <= node_count and 1 <= link.term_node <= node_count):
            raise ParseError(
                f"link ({link.init_node}, {link.term_node}) outside node range 1..{node_count}"
            )
    return TntpNetwork(
        zone_count=zone_count,
        node_count=node_count,
        first_through_node=first_through,
        link_count=link_count,
        links=tuple(links),
    )


def load_tntp(path) -> TntpNetwork:
    return parse_tntp(Path(path).read_text())


def _parse_link_row(line: str, lineno: int) -> TntpLink:
    if line.endswith(";"):
        line = line[:-1]
    fields = line.split()
    if len(fields) < 10:
        raise ParseError(f"expected 10 link fields, got {len(fields)}", line=lineno)
    try:
        return TntpLink(
            init_node=int(fields[0]),
            term_node=int(fields[1]),
            capacity=float(fields[2]),
            length=float(fields[3]),
            free_flow_time=float(fields[4]),
            b=float(fields[5]),
            power=float(fields[6]),
            speed=float(fields[7]),
            toll=float(fields[8]),
            link_type=fields[9],
        )
    except ValueError as exc:
        raise ParseError(f"bad link field: {exc}", line=lineno) from None


def _require_int(metadata: dict[str, str], key: str) -> int:
    if key not in metadata:
        raise ParseError(f"missing metadata header <{key}>")
    try:
        return int(metadata[key])
    except ValueError:
        raise ParseError(f"metadata <{key}> is not an integer: {metadata[key]!r}") from None


def _optional_int(metadata: dict[str, str], key: str) -> int | None:
    if key not in metadata:
        return None
    try:
        return int(metadata[key])
    except ValueError:
        return None


_PLACEHOLDER_BPR = BprParams(1.0, 1.0, 1.0, 1.0)


def to_road_network(tntp: TntpNetwork, use_native_bpr: bool = False) -> RoadNetwork:
    """Topology in file order; BPR columns are kept only when asked.

    By default every edge gets placeholder parameters, matching the
    benchmark protocol of overwriting the dataset's BPR columns with
    sampled ones.
    """
    edges = tuple((link.init_node, link.term_node) for link in tntp.links)
    if use_native_bpr:
        bpr = tuple(
            BprParams(
                free_flow_time=link.free_flow_time,
                coefficient=link.b,
                capacity=link.capacity,
                power=link.power,
            )
            for link in tntp.links
        )
    else:
        bpr = tuple(_PLACEHOLDER_BPR for _ in tntp.links)
    return RoadNetwork(node_count=tntp.node_count, edges=edges, bpr=bpr)


def grid_network(rows: int, cols: int) -> RoadNetwork:
    """Bidirectional grid graph with placeholder BPR parameters.

    Nodes are numbered row-major from 1; every horizontally or vertically
    adjacent pair gets a directed edge each way.  A 5x5 grid has 25 nodes
    and 80 directed edges.
    """
    edges: list[tuple[int, int]] = []

    def node(r, c):
        return r * cols + c + 1

    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((node(r, c), node(r, c + 1)))
                edges.append((node(r, c + 1), node(r, c)))
            if r + 1 < rows:
                edges.append((node(r, c), node(r + 1, c)))
                edges.append((node(r + 1, c), node(r, c)))
    return RoadNetwork(
        node_count=rows * cols,
        edges=tuple(edges),
        bpr=tuple(_PLACEHOLDER_BPR for _ in edges),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Sampling ranges for a benchmark scenario (standard defaults)."""

    player_count: int = 200
    routes_per_player: int = 20
    free_flow_range: tuple[float, float] = (2.0, 3.0)
    coefficient_range: tuple[float, float] = (3.0, 13.0)
    capacity_range: tuple[float, float] = (60.0, 80.0)
    power_range: tuple[float, float] = (1.0, 1.5)
    demand_range: tuple[float, float] = (10.0, 20.0)
    seed: int = 0


def sample_scenario(topology: RoadNetwork, config: ScenarioConfig) -> RoutingGame:
    """Draw a full routing game from the topology, determined by the seed.

    BPR parameters are overwritten with i.i.d. uniforms in fixed
    edge-index order, origin/destination pairs are drawn uniformly over
    distinct reachable ordered node pairs, routes come from the k-shortest
    enumeration on the sampled free-flow times, and demands are uniform.
    All uniform draws are half-open on the right, as produced by the
    underlying generator.
    """
    rng = np.random.default_rng(config.seed)
    E = topology.edge_count
    fft = rng.uniform(*config.free_flow_range, E)
    coeff = rng.uniform(*config.coefficient_range, E)
    cap = rng.uniform(*config.capacity_range, E)
    power = rng.uniform(*config.power_range, E)
    network = RoadNetwork(
        node_count=topology.node_count,
        edges=topology.edges,
        bpr=tuple(
            BprParams(float(a), float(b), float(c), float(r))
            for a, b, c, r in zip(fft, coeff, cap, power)
        ),
    )

    reachable = _reachability(network)
    players: list[PlayerSpec] = []
    used: set[tuple[int, int]] = set()
    rejections = 0
    while len(players) < config.player_count:
        origin = int(rng.integers(1, network.node_count + 1))
        dest = int(rng.integers(1, network.node_count + 1))
        pair = (origin, dest)
        if origin == dest or pair in used or dest not in reachable[origin]:
            rejections += 1
            if rejections >= _MAX_REJECTIONS:
                raise InfeasibleScenarioError(
                    f"gave up after {rejections} consecutive O/D rejections"
                )
            continue
        rejections = 0
        used.add(pair)
        routes = enumerate_routes(network, origin, dest, config.routes_per_player)
        demand = float(rng.uniform(*config.demand_range))
        players.append(
            PlayerSpec(origin=origin, destination=dest, demand=demand, routes=routes.routes)
        )
    return RoutingGame(network, players, estimation_seed=config.seed)


def _reachability(network: RoadNetwork) -> dict[int, set[int]]:
    out: dict[int, list[int]] = {v: [] for v in range(1, network.node_count + 1)}
    for tail, head in network.edges:
        out[tail].append(head)
    reach: dict[int, set[int]] = {}
    for source in range(1, network.node_count + 1):
        seen = {source}
        frontier = [source]
        while frontier:
            nxt = []
            for v in frontier:
                for w in out[v]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        seen.discard(source)
        reach[source] = seen
    return reach


def save_scenario(game: RoutingGame, path):
    """Write a versioned JSON document; floats keep full round-trip precision."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "node_count": game.network.node_count,
        "edges": [list(e) for e in game.network.edges],
        "bpr": {
            "free_flow_time": [p.free_flow_time for p in game.network.bpr],
            "coefficient": [p.coefficient for p in game.network.bpr],
            "capacity": [p.capacity for p in game.network.bpr],
            "power": [p.power for p in game.network.bpr],
        },
        "players": [
            {
                "origin": spec.origin,
                "destination": spec.destination,
                "demand": spec.demand,
                "routes": [list(route) for route in spec.routes],
            }
            for spec in game.players
        ],
        "smoothness": {
            "lipschitz_L": game.smoothness.lipschitz_L,
            "mu_star": game.smoothness.mu_star,
            "diameter_DX": game.smoothness.diameter_DX,
            "estimation_seed": game.smoothness.estimation_seed,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_scenario(path) -> RoutingGame:
    """Rebuild a game from its JSON document; gradients match to the bit."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario file is not valid JSON: {exc}") from None
    return scenario_from_document(doc)


def scenario_from_document(doc: dict) -> RoutingGame:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r}")
    for key in ("node_count", "edges", "bpr", "players", "smoothness"):
        if key not in doc:
            raise SchemaError(f"scenario document is missing {key!r}")
    bpr_doc = doc["bpr"]
    for key in ("free_flow_time", "coefficient", "capacity", "power"):
        if key not in bpr_doc:
            raise SchemaError(f"scenario bpr table is missing {key!r}")
    network = RoadNetwork(
        node_count=doc["node_count"],
        edges=tuple(tuple(e) for e in doc["edges"]),
        bpr=tuple(
            BprParams(a, b, c, r)
            for a, b, c, r in zip(
                bpr_doc["free_flow_time"],
                bpr_doc["coefficient"],
                bpr_doc["capacity"],
                bpr_doc["power"],
            )
        ),
    )
    players = []
    for entry in doc["players"]:
        for key in ("origin", "destination", "demand", "routes"):
            if key not in entry:
                raise SchemaError(f"player entry is missing {key!r}")
        players.append(
            PlayerSpec(
                origin=entry["origin"],
                destination=entry["destination"],
                demand=entry["demand"],
                routes=tuple(tuple(r) for r in entry["routes"]),
            )
        )
    sm = doc["smoothness"]
    for key in ("lipschitz_L", "mu_star", "diameter_DX"):
        if key not in sm:
            raise SchemaError(f"smoothness record is missing {key!r}")
    bundle = SmoothnessBundle(
        lipschitz_L=sm["lipschitz_L"],
        mu_star=sm["mu_star"],
        diameter_DX=sm["diameter_DX"],
        estimation_seed=sm.get("estimation_seed"),
    )
    return RoutingGame(network, players, smoothness=bundle)
