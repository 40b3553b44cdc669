"""Exhaustive reference solver for tiny instances."""

from __future__ import annotations

import itertools

import numpy as np

from alphafair.errors import TooLarge
from alphafair.solver.model import EXACT, Allocation
from alphafair.topology import LinkUtilizationMatrix
from alphafair.welfare import NormalizedUtilityMatrix, UtilityMatrix, check_alpha, welfare

MAX_N, MAX_M, MAX_SLOTS = 5, 4, 10
_TOL = 1e-9


def _sharing(P: LinkUtilizationMatrix) -> np.ndarray:
    p = P.matrix.astype(int)
    return (p @ p.T) > 0


def _find_placement(sizes, shares, M, first_slot):
    """Try every start slot for every served connection, in id order."""
    served = [i for i, u in enumerate(sizes) if u > 0]
    starts: dict[int, int] = {}

    def clash(i, s):
        hi = s + sizes[i] - 1
        for j, t in starts.items():
            if shares[i, j] and not (hi < t or t + sizes[j] - 1 < s):
                return True
        return False

    def place(d):
        if d == len(served):
            return True
        i = served[d]
        for s in range(first_slot, M - sizes[i] + 2):
            if clash(i, s):
                continue
            starts[i] = s
            if place(d + 1):
                return True
            del starts[i]
        return False

    if place(0):
        return tuple(starts.get(i) for i in range(len(sizes)))
    return None


def _menu(U: UtilityMatrix, Uhat: NormalizedUtilityMatrix, i: int):
    return [(0, None)] + [(int(U.values[i, j]), float(Uhat.values[i, j]))
                          for j in range(U.m) if U.values[i, j] > 0]


def enumerate_feasible(P: LinkUtilizationMatrix, U: UtilityMatrix, M: int, first_slot: int = 1):
    """Yield ``(sizes, starts)`` for every size vector that admits a placement."""
    p = P.matrix.astype(int)
    shares = _sharing(P)
    options = [[0] + [int(v) for v in U.values[i] if v > 0] for i in range(P.n)]
    for sizes in itertools.product(*options):
        if np.any(np.asarray(sizes) @ p > M):
            continue
        starts = _find_placement(sizes, shares, M, first_slot)
        if starts is not None:
            yield sizes, starts


def brute_force_oracle(P: LinkUtilizationMatrix, U: UtilityMatrix, Uhat: NormalizedUtilityMatrix,
                       M: int, alpha: float, strict_first_slot: bool = False) -> Allocation:
    """Globally optimal allocation by enumerating every size vector and start slot.

    Candidates are visited best-first by objective; the first one with a valid
    placement fixes the optimum, and later candidates within tolerance of it
    compete on the deterministic tie-break.
    """
    alpha = check_alpha(alpha)
    if P.n > MAX_N or U.m > MAX_M or M > MAX_SLOTS:
        raise TooLarge(f"oracle limited to n<={MAX_N}, m<={MAX_M}, M<={MAX_SLOTS}")
    lexicographic = alpha >= 1 - _TOL
    first_slot = 2 if strict_first_slot else 1
    p = P.matrix.astype(int)
    shares = _sharing(P)

    scored = []
    for combo in itertools.product(*(_menu(U, Uhat, i) for i in range(P.n))):
        sizes = tuple(u for u, _ in combo)
        if np.any(np.asarray(sizes) @ p > M):
            continue
        served_uhat = [h for _, h in combo if h is not None]
        w = welfare(served_uhat, alpha)
        normalized = tuple(sorted(h if h is not None else 0.0 for _, h in combo))
        served = len(served_uhat) if lexicographic else 0
        scored.append((served, w, (normalized, sizes), sizes))
    scored.sort(key=lambda c: (c[0], c[1]), reverse=True)

    best = None
    for served, w, tie, sizes in scored:
        if best is not None:
            b_served, b_w, b_tie = best[0], best[1], best[2]
            if served < b_served or w < b_w - _TOL * max(1.0, abs(b_w)):
                break
            if tie <= b_tie:
                continue
        starts = _find_placement(sizes, shares, M, first_slot)
        if starts is None:
            continue
        if best is None:
            best = (served, w, tie, sizes, starts)
        else:
            best = (best[0], best[1], tie, sizes, starts)

    _, w, _, sizes, starts = best
    return Allocation(tuple(sizes), starts, alpha, float(w), "oracle", EXACT)


def max_min_normalized(P: LinkUtilizationMatrix, U: UtilityMatrix, M: int, first_slot: int = 1) -> float:
    """Largest achievable minimum of u_i / u_imax over all feasible allocations (blocked = 0)."""
    peaks = np.asarray(U.peaks, dtype=float)
    best = 0.0
    for sizes, _ in enumerate_feasible(P, U, M, first_slot):
        best = max(best, float(np.min(np.asarray(sizes) / peaks)))
    return best
