"""Depth-first branch-and-bound over per-connection size choices.

Each node fixes the size of one more connection. The bound relaxes the
per-link capacity rows with non-negative multipliers, which decouples the
free connections; the multipliers are tightened by projected subgradient
steps and inherited by child nodes. Under the lexicographic objective
(served count first, welfare second) the served count is bounded separately
by the number of free connections whose smallest size still fits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

REL_TOL = 1e-9
_SUBGRADIENT_ROOT_ITERS = 60
_SUBGRADIENT_NODE_ITERS = 12


def tol(value: float) -> float:
    return REL_TOL * max(1.0, abs(value))


@dataclass
class Candidate:
    sizes: tuple[int, ...]
    starts: tuple[int | None, ...] | None
    served: int
    welfare: float
    tie_key: tuple


@dataclass
class SearchResult:
    best: Candidate | None
    complete: bool
    nodes: int


class BudgetExhausted(Exception):
    pass


class SizeSearch:
    """Maximise the welfare of a size vector under per-link capacity.

    ``choices[i]`` / ``values[i]`` hold the selectable nonzero sizes of
    connection ``i`` (ascending) and their welfare terms; size 0 (blocked)
    is always selectable and is worth 0. ``leaf_check`` maps a complete size
    vector to start slots, or ``None`` when no placement exists; without it
    only capacity is enforced.
    """

    def __init__(self, routes: Sequence[Sequence[int]], k: int, capacity: int,
                 choices: Sequence[np.ndarray], values: Sequence[np.ndarray],
                 uhat: Sequence[np.ndarray], lexicographic: bool,
                 leaf_check: Callable[[tuple[int, ...]], tuple | None] | None = None,
                 nogoods: Sequence[dict[int, int]] = (), strict_ties: bool = False,
                 node_limit: int = 1_000_000, deadline: float | None = None,
                 trace: Callable[[int, float, float, str], None] | None = None):
        self.n = len(routes)
        self.k = k
        self.capacity = capacity
        self.routes = [tuple(int(l) for l in r) for r in routes]
        self.lex = lexicographic
        self.leaf_check = leaf_check
        self.strict_ties = strict_ties
        self.node_limit = node_limit
        self.deadline = deadline
        self.trace = trace
        self.nodes = 0
        self.stopped_by: str | None = None
        self.uhat = [np.asarray(u, dtype=float) for u in uhat]

        width = 2 + max((len(c) for c in choices), default=0)
        self.S = np.full((self.n, width), np.iinfo(np.int64).max // 4, dtype=np.int64)
        self.V = np.full((self.n, width), -np.inf)
        self.S[:, 0] = 0
        self.V[:, 0] = 0.0
        for i, (c, v) in enumerate(zip(choices, values)):
            c = np.asarray(c, dtype=np.int64)
            keep = c <= capacity
            c, v = c[keep], np.asarray(v, dtype=float)[keep]
            self.S[i, 1:1 + len(c)] = c
            self.V[i, 1:1 + len(c)] = v
        self.ncols = np.array([1 + int(np.sum(np.asarray(c) <= capacity)) for c in choices], dtype=int)
        self.A = np.zeros((self.n, k))
        for i, r in enumerate(self.routes):
            self.A[i, list(r)] = 1.0

        load = self.A.sum(axis=0)
        contention = [int(sum(load[l] - 1 for l in r)) for r in self.routes]
        self.fixed_free = [i for i in range(self.n) if contention[i] == 0]
        self.order = sorted((i for i in range(self.n) if contention[i] > 0),
                            key=lambda i: (-contention[i], -len(self.routes[i]), i))
        self.position = {i: d for d, i in enumerate(self.order)}

        self.nogoods = []
        for ng in nogoods:
            if any(i not in self.position for i in ng):
                continue  # involves a connection that is not branched on; cannot recur
            depth = max(self.position[i] for i in ng)
            self.nogoods.append((depth, dict(ng)))

        self.best: Candidate | None = None

    # -- objective bookkeeping -------------------------------------------------

    def _candidate(self, cols: np.ndarray, starts) -> Candidate:
        rows = np.arange(self.n)
        sizes = tuple(int(s) for s in self.S[rows, cols])
        welfare = float(self.V[rows, cols].sum())
        served = sum(1 for s in sizes if s > 0)
        normalized = tuple(sorted(float(self.uhat[i][c - 1]) if c > 0 else 0.0 for i, c in enumerate(cols)))
        return Candidate(sizes, starts, served, welfare, (normalized, sizes))

    def _better(self, cand: Candidate, inc: Candidate | None) -> bool:
        if inc is None:
            return True
        if self.lex and cand.served != inc.served:
            return cand.served > inc.served
        if cand.welfare > inc.welfare + tol(inc.welfare):
            return True
        if cand.welfare < inc.welfare - tol(inc.welfare):
            return False
        return self.strict_ties and cand.tie_key > inc.tie_key

    # -- bounding --------------------------------------------------------------

    def _lagrangian(self, free: np.ndarray, residual: np.ndarray, allow_block: np.ndarray,
                    lam: np.ndarray, threshold: float, iters: int):
        """Upper bound on the welfare obtainable by ``free`` within ``residual``.

        Returns (bound, multipliers, reduced value matrix for the free rows).
        Stops early once the bound drops below ``threshold``.
        """
        S = self.S[free]
        minres = np.array([min(residual[l] for l in self.routes[i]) for i in free])
        V = np.where(S <= minres[:, None], self.V[free], -np.inf)
        V[:, 0] = np.where(allow_block, 0.0, -np.inf)
        if free.size == 0:
            return 0.0, lam, V
        A = self.A[free]
        Sf = np.where(np.isfinite(V), S, 0).astype(float)
        rows = np.arange(free.size)
        best, best_lam, theta, stall = math.inf, lam, 1.0, 0
        R = V
        for _ in range(iters):
            price = A @ lam
            R = V - Sf * price[:, None]
            pick = np.argmax(R, axis=1)
            value = float(lam @ residual + R[rows, pick].sum())
            if value < best - tol(best if math.isfinite(best) else value):
                best, best_lam, stall = value, lam, 0
            else:
                stall += 1
                if stall >= 3:
                    theta *= 0.5
                    stall = 0
            if best < threshold or not math.isfinite(value):
                break
            grad = residual - A.T @ Sf[rows, pick]
            if np.all(grad >= 0) and abs(float(lam @ grad)) <= tol(value):
                break  # relaxation solved exactly at these multipliers
            norm = float(grad @ grad)
            if norm == 0:
                break
            target = threshold if math.isfinite(threshold) else value - 0.05 * abs(value) - 1e-3
            gap = max(value - target, 0.05 * abs(value) + 1e-6)
            lam = np.maximum(lam - theta * gap / norm * grad, 0.0)
            if theta < 1e-4:
                break
        if best_lam is not lam:
            R = V - Sf * (A @ best_lam)[:, None]
        return best, best_lam, R

    def _check_budget(self):
        self.nodes += 1
        if self.nodes > self.node_limit:
            self.stopped_by = "nodes"
            raise BudgetExhausted
        if self.deadline is not None and (self.nodes & 15) == 1 and time.monotonic() > self.deadline:
            self.stopped_by = "time"
            raise BudgetExhausted

    # -- search ----------------------------------------------------------------

    def _offer(self, cols: np.ndarray) -> None:
        cand = self._candidate(cols, None)
        sizes = cand.sizes
        for _, ng in self.nogoods:
            if all(sizes[i] == u for i, u in ng.items()):
                return
        if not self._better(cand, self.best):
            return
        if self.leaf_check is not None:
            starts = self.leaf_check(sizes)
            if starts is None:
                return
            cand.starts = starts
        self.best = cand

    def _greedy(self, cols: np.ndarray, residual: np.ndarray) -> None:
        """Marginal-gain filling used to seed the incumbent."""
        cols = cols.copy()
        residual = residual.copy()

        def room(i):
            return min(residual[l] for l in self.routes[i])

        def completes_nogood(i, c):
            # sizes only grow here, so a match can only appear on the step that completes it
            for _, ng in self.nogoods:
                if i in ng and ng[i] == self.S[i, c] and all(
                        self.S[j, cols[j]] == u for j, u in ng.items() if j != i):
                    return True
            return False

        if self.lex:
            for i in self.order:
                if self.ncols[i] > 1 and self.S[i, 1] <= room(i):
                    cols[i] = 1
                    residual[list(self.routes[i])] -= self.S[i, 1]
        while True:
            pick, pick_gain = None, -math.inf
            for i in self.order:
                c = cols[i]
                if c + 1 >= self.ncols[i]:
                    continue
                if self.lex and c == 0:
                    continue
                extra = self.S[i, c + 1] - self.S[i, c]
                if extra > room(i) or completes_nogood(i, c + 1):
                    continue
                gain = (self.V[i, c + 1] - self.V[i, c]) / (extra * len(self.routes[i]))
                if gain > pick_gain:
                    pick, pick_gain = i, gain
            if pick is None or pick_gain <= 0:
                break
            extra = self.S[pick, cols[pick] + 1] - self.S[pick, cols[pick]]
            residual[list(self.routes[pick])] -= extra
            cols[pick] += 1
        self._offer(cols)

    def run(self) -> SearchResult:
        cols = np.zeros(self.n, dtype=int)
        residual = np.full(self.k, float(self.capacity))
        for i in self.fixed_free:
            cols[i] = self.ncols[i] - 1
            residual[list(self.routes[i])] -= self.S[i, cols[i]]
        base_served = int(sum(1 for i in self.fixed_free if cols[i] > 0))
        base_welfare = float(sum(self.V[i, cols[i]] for i in self.fixed_free))

        self._offer(cols)
        self._greedy(cols, residual)
        complete = True
        try:
            self._dive(0, cols, residual, base_served, base_welfare, np.zeros(self.k), root=True)
        except BudgetExhausted:
            complete = False
        if self.trace is not None:
            inc = self.best.welfare if self.best else -math.inf
            self.trace(self.nodes, inc, inc, "done" if complete else "budget")
        return SearchResult(self.best, complete, self.nodes)

    def _dive(self, depth, cols, residual, served, welfare, lam, root=False):
        self._check_budget()
        free = np.array(self.order[depth:], dtype=int)
        inc = self.best

        if depth == len(self.order):
            self._offer(cols)
            return

        minres = np.array([min(residual[l] for l in self.routes[i]) for i in free])
        fits = (self.ncols[free] > 1) & (self.S[free, 1] <= minres)
        if self.lex:
            served_ub = served + int(fits.sum())
            inc_served = inc.served if inc else -1
            if served_ub < inc_served:
                self._note(inc, -math.inf, "prune-served")
                return
            # Only completions serving every fitting connection can beat the incumbent.
            allow_block = ~fits if served_ub == inc_served else np.ones(free.size, dtype=bool)
            compare = served_ub == inc_served
        else:
            allow_block = np.ones(free.size, dtype=bool)
            compare = inc is not None

        if compare:
            needed = inc.welfare - welfare
            threshold = needed - tol(inc.welfare) if self.strict_ties else needed + tol(inc.welfare)
        else:
            threshold = -math.inf
        iters = _SUBGRADIENT_ROOT_ITERS if root else _SUBGRADIENT_NODE_ITERS
        bound, lam, R = self._lagrangian(free, residual, allow_block, lam, threshold, iters)
        if compare and (bound < threshold or (not self.strict_ties and bound <= threshold)):
            self._note(inc, welfare + bound, "prune-bound")
            return
        self._note(inc, welfare + bound, "branch")

        i = int(free[0])
        row = R[0]
        options = [c for c in range(self.ncols[i]) if np.isfinite(row[c])]
        # served count ranks first under lex, so try serving before blocking
        options.sort(key=lambda c: (self.lex and c == 0, -row[c], -c))
        for c in options:
            cols[i] = c
            size = int(self.S[i, c])
            if size:
                residual[list(self.routes[i])] -= size
            if not self._nogood_hit(depth, cols):
                self._dive(depth + 1, cols, residual, served + (c > 0),
                           welfare + float(self.V[i, c]), lam)
            if size:
                residual[list(self.routes[i])] += size
            cols[i] = 0

    def _nogood_hit(self, depth, cols) -> bool:
        for d, ng in self.nogoods:
            if d == depth and all(self.S[i, cols[i]] == u for i, u in ng.items()):
                return True
        return False

    def _note(self, inc, bound, decision):
        if self.trace is not None:
            self.trace(self.nodes, inc.welfare if inc else -math.inf, bound, decision)
