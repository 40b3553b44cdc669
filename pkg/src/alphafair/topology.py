"""Network graph, fixed shortest-path routing and the link utilization matrix."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from alphafair.errors import ConfigError, DimensionMismatch, NoPathError
from alphafair.traffic import TrafficModel

_COST_TOL = 1e-9


@dataclass(frozen=True)
class Link:
    id: int
    a: str
    b: str
    length: float | None = None

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a

    def weight(self) -> float:
        return 1.0 if self.length is None else float(self.length)


@dataclass(frozen=True)
class Topology:
    """Undirected fiber graph where every link carries ``slots_per_link`` slots."""

    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    slots_per_link: int
    _adjacency: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.slots_per_link < 1:
            raise ConfigError("slots_per_link must be >= 1")
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise ConfigError("duplicate node identifiers")
        seen = set()
        adjacency: dict[str, list[Link]] = {v: [] for v in self.nodes}
        for link in self.links:
            if link.id in seen:
                raise ConfigError(f"duplicate link id {link.id}")
            seen.add(link.id)
            if link.a not in known or link.b not in known:
                raise ConfigError(f"link {link.id} references an unknown node")
            if link.a == link.b:
                raise ConfigError(f"link {link.id} is a self-loop")
            if link.length is not None and link.length < 0:
                raise ConfigError(f"link {link.id} has negative length")
            adjacency[link.a].append(link)
            adjacency[link.b].append(link)
        for v in adjacency:
            adjacency[v].sort(key=lambda l: l.id)
        object.__setattr__(self, "_adjacency", adjacency)

    @property
    def k(self) -> int:
        return len(self.links)

    def link(self, link_id: int) -> Link:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(link_id)

    def column_of(self) -> dict[int, int]:
        """Map link id to its column in the utilization matrix."""
        return {link.id: col for col, link in enumerate(self.links)}

    def neighbours(self, node: str) -> list[Link]:
        return self._adjacency[node]

    def to_dict(self) -> dict:
        links = []
        for link in self.links:
            entry = {"id": link.id, "a": link.a, "b": link.b}
            if link.length is not None:
                entry["length"] = link.length
            links.append(entry)
        return {"nodes": list(self.nodes), "links": links, "slots_per_link": self.slots_per_link}

    @classmethod
    def from_dict(cls, doc: dict, slots_per_link: int | None = None) -> "Topology":
        try:
            links = tuple(
                Link(int(e["id"]), str(e["a"]), str(e["b"]), e.get("length"))
                for e in doc["links"]
            )
            slots = int(doc["slots_per_link"]) if slots_per_link is None else slots_per_link
            return cls(tuple(str(v) for v in doc["nodes"]), links, slots)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed topology document: {exc}") from exc


def load_topology(path: str | Path, slots_per_link: int | None = None) -> Topology:
    with open(path) as fh:
        return Topology.from_dict(json.load(fh), slots_per_link)


def builtin_topology(name: str = "dt14", slots_per_link: int | None = None) -> Topology:
    if name != "dt14":
        raise ConfigError(f"unknown builtin topology {name!r}")
    text = resources.files("alphafair.data").joinpath("dt14.json").read_text()
    return Topology.from_dict(json.loads(text), slots_per_link)


@dataclass(frozen=True)
class ConnectionRequest:
    id: int
    source: str
    destination: str
    traffic: TrafficModel

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "destination": self.destination,
            "traffic": {"mu": self.traffic.mu, "sigma2": self.traffic.sigma2},
        }


def connections_from_list(docs: list, topology: Topology) -> list[ConnectionRequest]:
    conns = []
    for doc in docs:
        try:
            model = TrafficModel(
                mu=float(doc["traffic"]["mu"]),
                sigma2=float(doc["traffic"]["sigma2"]),
                cap=float(topology.slots_per_link),
            )
            conn = ConnectionRequest(int(doc["id"]), str(doc["source"]), str(doc["destination"]), model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed connection entry {doc!r}: {exc}") from exc
        if conn.source == conn.destination:
            raise ConfigError(f"connection {conn.id}: source equals destination")
        for v in (conn.source, conn.destination):
            if v not in topology.nodes:
                raise ConfigError(f"connection {conn.id}: unknown node {v!r}")
        conns.append(conn)
    conns.sort(key=lambda c: c.id)
    if [c.id for c in conns] != list(range(len(conns))):
        raise ConfigError("connection ids must be exactly 0..n-1")
    return conns


def load_connections(path: str | Path, topology: Topology) -> list[ConnectionRequest]:
    with open(path) as fh:
        return connections_from_list(json.load(fh), topology)


@dataclass(frozen=True)
class Route:
    connection: int
    links: tuple[int, ...]

    @property
    def hops(self) -> int:
        return len(self.links)


def _distances(topology: Topology, origin: str) -> dict[str, float]:
    dist = {origin: 0.0}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for link in topology.neighbours(v):
            w = link.other(v)
            nd = d + link.weight()
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def path_cost(topology: Topology, links: Iterable[int]) -> float:
    return sum(topology.link(l).weight() for l in links)


def shortest_route(topology: Topology, source: str, destination: str, connection: int = 0) -> Route:
    """Minimum-cost simple path; equal-cost paths resolved by the smallest link-id sequence.

    Cost is hop count unless links carry a length.
    """
    for v in (source, destination):
        if v not in topology.nodes:
            raise ConfigError(f"unknown node {v!r}")
    if source == destination:
        raise ConfigError("source and destination coincide")
    to_dest = _distances(topology, destination)
    if source not in to_dest:
        raise NoPathError(f"no path {source} -> {destination}")
    best = to_dest[source]

    # DFS over tight links in ascending id order: the first complete path found
    # is the lexicographically smallest among the shortest ones.
    def descend(v: str, spent: float, visited: set, path: list) -> list | None:
        if v == destination:
            return path
        for link in topology.neighbours(v):
            w = link.other(v)
            if w in visited or w not in to_dest:
                continue
            through = spent + link.weight() + to_dest[w]
            if abs(through - best) > _COST_TOL * max(1.0, best):
                continue
            visited.add(w)
            path.append(link.id)
            found = descend(w, spent + link.weight(), visited, path)
            if found is not None:
                return found
            path.pop()
            visited.discard(w)
        return None

    found = descend(source, 0.0, {source}, [])
    if found is None:  # only reachable with zero-length cycles
        raise NoPathError(f"no simple shortest path {source} -> {destination}")
    return Route(connection, tuple(found))


@dataclass(frozen=True)
class LinkUtilizationMatrix:
    """Binary n x k incidence of connections on links (rows: connections)."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def route_columns(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[i])

    def hops(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def contending(self) -> np.ndarray:
        """True for connections sharing at least one link with another connection."""
        load = self.matrix.sum(axis=0)
        return ((self.matrix * (load > 1)).sum(axis=1) > 0)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "LinkUtilizationMatrix":
        return cls(np.asarray(rows, dtype=np.int8).reshape(len(rows), -1))


def build_link_utilization(routes: Sequence[Route], topology: Topology, n: int | None = None) -> LinkUtilizationMatrix:
    if n is not None and len(routes) != n:
        raise DimensionMismatch(f"{len(routes)} routes for {n} connections")
    cols = topology.column_of()
    p = np.zeros((len(routes), topology.k), dtype=np.int8)
    for i, route in enumerate(routes):
        for link_id in route.links:
            if link_id not in cols:
                raise DimensionMismatch(f"route {i} uses unknown link {link_id}")
            p[i, cols[link_id]] = 1
    return LinkUtilizationMatrix(p)


def route_all(topology: Topology, connections: Sequence[ConnectionRequest]) -> list[Route]:
    return [shortest_route(topology, c.source, c.destination, c.id) for c in connections]


def check_route(topology: Topology, route: Route, source: str, destination: str) -> bool:
    """Walk the route link by link and confirm it chains source to destination."""
    here = source
    used = set()
    for link_id in route.links:
        if link_id in used:
            return False
        used.add(link_id)
        link = topology.link(link_id)
        if here not in (link.a, link.b):
            return False
        here = link.other(here)
    return here == destination
