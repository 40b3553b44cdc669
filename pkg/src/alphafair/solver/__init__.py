"""Alpha-fair RSA solvers: exact branch-and-bound, two-stage heuristic, brute-force oracle."""

from __future__ import annotations

import time

import numpy as np

from alphafair.errors import DimensionMismatch, NonPositiveUtility
from alphafair.solver.model import (
    EXACT,
    HEURISTIC,
    Allocation,
    SolverConfig,
    read_allocation_csv,
    validate_allocation,
    validate_bitmap,
    write_allocation_csv,
)
from alphafair.solver.oracle import brute_force_oracle, max_min_normalized
from alphafair.solver.search import SizeSearch
from alphafair.solver.spectrum import SpectrumAssignment, assign_spectrum, exhaustive_placement
from alphafair.topology import LinkUtilizationMatrix
from alphafair.welfare import (
    LOG_BRANCH_TOL,
    NormalizedUtilityMatrix,
    UtilityMatrix,
    check_alpha,
    welfare_terms,
)

__all__ = [
    "Allocation",
    "SolverConfig",
    "SpectrumAssignment",
    "assign_spectrum",
    "brute_force_oracle",
    "exhaustive_placement",
    "is_lexicographic",
    "max_min_normalized",
    "read_allocation_csv",
    "solve_alpha_fair",
    "validate_allocation",
    "validate_bitmap",
    "write_allocation_csv",
]


def is_lexicographic(alpha: float) -> bool:
    """From alpha = 1 upward every served term is <= 0, so served count is ranked first."""
    return alpha >= 1 - LOG_BRANCH_TOL


def _objective(sizes, U: UtilityMatrix, Uhat: NormalizedUtilityMatrix, alpha: float) -> float:
    g = U.granule
    picked = [Uhat.values[i, u // g - 1] for i, u in enumerate(sizes) if u > 0]
    return float(welfare_terms(picked, alpha).sum()) if picked else 0.0


def _menus(U: UtilityMatrix, Uhat: NormalizedUtilityMatrix, alpha: float):
    choices, values, uhat = [], [], []
    for i in range(U.n):
        mask = U.values[i] > 0
        choices.append(U.values[i][mask])
        uhat.append(Uhat.values[i][mask])
        values.append(welfare_terms(Uhat.values[i][mask], alpha))
    return choices, values, uhat


def solve_alpha_fair(P: LinkUtilizationMatrix, U: UtilityMatrix, Uhat: NormalizedUtilityMatrix,
                     M: int, alpha: float, config: SolverConfig | None = None,
                     trace=None) -> Allocation:
    """Maximise W_alpha of the normalized allocation subject to all RSA constraints.

    ``trace``, if given, is called as ``trace(node, incumbent, bound, decision)``.
    """
    config = config or SolverConfig()
    alpha = check_alpha(alpha)
    if not (P.n == U.n == Uhat.values.shape[0]) or U.values.shape != Uhat.values.shape:
        raise DimensionMismatch("P, U and Uhat must agree on the number of connections")
    if U.M != M:
        raise DimensionMismatch(f"utility matrix built for M={U.M}, solver called with M={M}")
    if np.any(~(Uhat.values > 0)):
        raise NonPositiveUtility("normalized utilities must be strictly positive")
    if config.mode == "oracle":
        return brute_force_oracle(P, U, Uhat, M, alpha, config.strict_first_slot)

    started = time.monotonic()
    deadline = started + config.time_budget
    capacity = M - (config.first_slot - 1)
    routes = [P.route_columns(i) for i in range(P.n)]
    choices, values, uhat = _menus(U, Uhat, alpha)
    lex = is_lexicographic(alpha)

    def search(leaf_check, nogoods=(), strict_ties=False, node_limit=config.node_limit):
        return SizeSearch(routes, P.k, capacity, choices, values, uhat, lex,
                          leaf_check=leaf_check, nogoods=nogoods, strict_ties=strict_ties,
                          node_limit=node_limit, deadline=deadline, trace=trace)

    if config.mode == "exact":
        sizes, starts, stats = _solve_exact(search, P, M, config)
    else:
        sizes, starts, stats = _solve_two_stage(search, P, U, M, config, choices)
    stats["seconds"] = time.monotonic() - started
    status = EXACT if config.mode == "exact" and stats["proven"] else HEURISTIC
    return Allocation(tuple(int(u) for u in sizes), tuple(starts), alpha,
                      _objective(sizes, U, Uhat, alpha), config.mode, status, stats)


def _solve_exact(search, P, M, config):
    placement_gaps = []

    def leaf_check(sizes):
        placed = assign_spectrum(sizes, P, M, config.spectrum_policy, config.first_slot)
        if placed.ok:
            return placed.starts
        starts, complete = exhaustive_placement(sizes, P, M, config.first_slot,
                                                config.placement_node_limit, config.spectrum_policy)
        if not complete:
            placement_gaps.append(sizes)
        return starts

    engine = search(leaf_check, strict_ties=True)
    result = engine.run()
    best = result.best
    stats = {
        "nodes": result.nodes,
        "proven": result.complete and not placement_gaps,
        "timed_out": engine.stopped_by == "time",
    }
    return best.sizes, best.starts, stats


def _solve_two_stage(search, P, U, M, config, choices):
    nogoods: list[dict[int, int]] = []
    nodes, timed_out = 0, False
    placed = None
    sizes: list[int] = []
    for _ in range(config.cut_limit + 1):
        remaining = config.node_limit - nodes
        if remaining <= 0:
            break
        engine = search(None, nogoods=nogoods, node_limit=remaining)
        result = engine.run()
        nodes += result.nodes
        timed_out = timed_out or engine.stopped_by == "time"
        sizes = list(result.best.sizes)
        placed = assign_spectrum(sizes, P, M, config.spectrum_policy, config.first_slot)
        if placed.ok:
            break
        nogoods.append({i: sizes[i] for i in placed.conflict})
        if timed_out:
            break

    degraded = 0
    while placed is None or not placed.ok:
        if placed is None:
            placed = assign_spectrum(sizes, P, M, config.spectrum_policy, config.first_slot)
            continue
        victim = max(sorted(placed.conflict), key=lambda i: sizes[i])
        sizes[victim] = _step_down(choices[victim], sizes[victim])
        degraded += 1
        placed = assign_spectrum(sizes, P, M, config.spectrum_policy, config.first_slot)

    sizes, starts, lifted = _lift(sizes, placed.starts, P, M, config, choices)
    stats = {"nodes": nodes, "proven": False, "timed_out": timed_out,
             "cuts": len(nogoods), "degraded": degraded, "lifted": lifted}
    return sizes, starts, stats


def _step_down(menu, size):
    smaller = [int(u) for u in menu if u < size]
    return smaller[-1] if smaller else 0


def _lift(sizes, starts, P, M, config, choices):
    """Raise sizes one menu step at a time while a first-fit placement still exists.

    Every accepted step raises the welfare, so this never worsens a solution;
    connections alone on their links always end at their largest menu entry.
    """
    capacity = M - (config.first_slot - 1)
    p = P.matrix.astype(np.int64)
    load = np.asarray(sizes, dtype=np.int64) @ p
    lifted = 0
    for i in range(P.n):
        route = P.route_columns(i)
        for nxt in (int(u) for u in choices[i] if u > sizes[i]):
            extra = nxt - sizes[i]
            if np.any(load[route] + extra > capacity):
                break
            trial = list(sizes)
            trial[i] = nxt
            placed = assign_spectrum(trial, P, M, config.spectrum_policy, config.first_slot)
            if not placed.ok:
                break
            sizes, starts = trial, placed.starts
            load[route] += extra
            lifted += 1
    return sizes, starts, lifted
