"""Contiguous, non-overlapping slot placement of fixed connection sizes.

Occupancy is kept as one Python int bitmask per link; bit ``s - 1`` stands
for slot ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from alphafair.topology import LinkUtilizationMatrix

POLICIES = ("longest-first", "id-order")


@dataclass(frozen=True)
class SpectrumAssignment:
    starts: tuple[int | None, ...] | None
    conflict: frozenset[int] | None = None

    @property
    def ok(self) -> bool:
        return self.starts is not None


def placement_order(sizes: Sequence[int], P: LinkUtilizationMatrix, policy: str = "longest-first") -> list[int]:
    served = [i for i, u in enumerate(sizes) if u > 0]
    if policy == "longest-first":
        hops = P.hops()
        return sorted(served, key=lambda i: (-int(hops[i]), -int(sizes[i]), i))
    if policy == "id-order":
        return served
    raise ValueError(f"unknown spectrum policy {policy!r}")


def _fit(occupied: int, size: int, M: int, first_slot: int) -> int | None:
    block = (1 << size) - 1
    for s in range(first_slot, M - size + 2):
        if not occupied & (block << (s - 1)):
            return s
    return None


def _first_fit(order, sizes, routes, k, M, first_slot):
    """Place ``order`` greedily; return (starts dict, failing connection or None)."""
    links = [0] * k
    starts = {}
    for i in order:
        occ = 0
        for l in routes[i]:
            occ |= links[l]
        s = _fit(occ, sizes[i], M, first_slot)
        if s is None:
            return starts, i
        block = ((1 << sizes[i]) - 1) << (s - 1)
        for l in routes[i]:
            links[l] |= block
        starts[i] = s
    return starts, None


def _routes(P: LinkUtilizationMatrix) -> list[tuple[int, ...]]:
    return [tuple(int(c) for c in P.route_columns(i)) for i in range(P.n)]


def assign_spectrum(sizes: Sequence[int], P: LinkUtilizationMatrix, M: int,
                    policy: str = "longest-first", first_slot: int = 1) -> SpectrumAssignment:
    """First-fit placement in policy order.

    On failure the result carries a conflict set: the failing connection plus the
    placed connections it shares links with, pruned by a deletion filter until
    every member is needed to reproduce a first-fit failure.
    """
    sizes = [int(u) for u in sizes]
    if len(sizes) != P.n:
        raise ValueError("one size per connection required")
    routes = _routes(P)
    order = placement_order(sizes, P, policy)
    starts, failed = _first_fit(order, sizes, routes, P.k, M, first_slot)
    if failed is None:
        return SpectrumAssignment(tuple(starts.get(i) for i in range(len(sizes))))

    failed_links = set(routes[failed])
    members = [i for i in order if i in starts and failed_links.intersection(routes[i])] + [failed]
    for j in list(members):
        if j == failed:
            continue
        trial = [i for i in members if i != j]
        sub_order = [i for i in order if i in trial]
        _, still = _first_fit(sub_order, sizes, routes, P.k, M, first_slot)
        if still is not None:
            members = trial
    return SpectrumAssignment(None, frozenset(members))


def exhaustive_placement(sizes: Sequence[int], P: LinkUtilizationMatrix, M: int,
                         first_slot: int = 1, node_limit: int | None = None,
                         policy: str = "longest-first") -> tuple[tuple[int | None, ...] | None, bool]:
    """Complete backtracking search over start slots.

    Returns ``(starts, complete)``; ``complete`` is False when the node limit cut
    the search short, in which case a ``None`` placement proves nothing.
    """
    sizes = [int(u) for u in sizes]
    routes = _routes(P)
    order = placement_order(sizes, P, policy)
    links = [0] * P.k
    starts: dict[int, int] = {}
    budget = [node_limit if node_limit is not None else -1]

    def place(depth: int) -> bool | None:
        if depth == len(order):
            return True
        i = order[depth]
        size = sizes[i]
        block = (1 << size) - 1
        occ = 0
        for l in routes[i]:
            occ |= links[l]
        for s in range(first_slot, M - size + 2):
            mask = block << (s - 1)
            if occ & mask:
                continue
            if budget[0] == 0:
                return None
            budget[0] -= 1
            for l in routes[i]:
                links[l] |= mask
            starts[i] = s
            res = place(depth + 1)
            if res is not False:
                return res
            for l in routes[i]:
                links[l] &= ~mask
            del starts[i]
        return False

    res = place(0)
    if res is True:
        return tuple(starts.get(i) for i in range(len(sizes))), True
    return None, res is False

