"""Allocation result type, solver settings and the constraint validator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from alphafair.errors import ConfigError
from alphafair.topology import LinkUtilizationMatrix
from alphafair.welfare import UtilityMatrix

MODES = ("exact", "heuristic", "oracle")
EXACT = "exact-optimal"
HEURISTIC = "heuristic"
DEFAULT_NODE_LIMITS = {"exact": 2_000_000, "heuristic": 20_000, "oracle": 2_000_000}


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "exact"
    time_budget: float = 600.0
    node_limit: int | None = None  # None: per-mode default
    spectrum_policy: str = "longest-first"
    cut_limit: int = 25
    # Literal reading of the first-slot boundary constraint: slot 1 is never used.
    strict_first_slot: bool = False
    placement_node_limit: int = 200_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.node_limit is None:
            object.__setattr__(self, "node_limit", DEFAULT_NODE_LIMITS[self.mode])
        if not self.time_budget > 0 or self.node_limit < 1 or self.placement_node_limit < 1:
            raise ConfigError("solver budgets must be positive")
        if self.cut_limit < 0:
            raise ConfigError("cut_limit must be >= 0")

    @property
    def first_slot(self) -> int:
        return 2 if self.strict_first_slot else 1


@dataclass(frozen=True)
class Allocation:
    """One alpha-fair allocation: size and start slot per connection (0/None if blocked)."""

    sizes: tuple[int, ...]
    starts: tuple[int | None, ...]
    alpha: float
    objective: float
    mode: str
    status: str
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def blocked(self) -> tuple[bool, ...]:
        return tuple(u == 0 for u in self.sizes)

    @property
    def served(self) -> int:
        return sum(1 for u in self.sizes if u > 0)

    def normalized(self, peaks: Sequence[int]) -> np.ndarray:
        return np.asarray(self.sizes, dtype=float) / np.asarray(peaks, dtype=float)


def write_allocation_csv(allocation: Allocation, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["connection_id", "size_fs", "start_slot", "blocked"])
        for i, (u, s) in enumerate(zip(allocation.sizes, allocation.starts)):
            writer.writerow([i, u, "" if s is None else s, int(u == 0)])


def read_allocation_csv(path) -> tuple[list[int], list[int | None]]:
    sizes, starts = [], []
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["connection_id"]))
    for expect, row in enumerate(rows):
        if int(row["connection_id"]) != expect:
            raise ConfigError("allocation dump must list connections 0..n-1")
        sizes.append(int(row["size_fs"]))
        starts.append(int(row["start_slot"]) if row["start_slot"] not in ("", None) else None)
    return sizes, starts


def _bitmap(sizes, starts, M):
    # Slot 0 is a virtual always-empty slot; columns 1..M are the real slots.
    y = np.zeros((len(sizes), M + 1), dtype=np.int64)
    for i, (u, s) in enumerate(zip(sizes, starts)):
        if u <= 0 or s is None:
            continue
        lo, hi = max(s, 1), min(s + u - 1, M)
        if lo <= hi:
            y[i, lo:hi + 1] = 1
    return y


def validate_allocation(sizes: Sequence[int], starts: Sequence[int | None], P: LinkUtilizationMatrix,
                        U: UtilityMatrix, M: int, strict_first_slot: bool = False) -> list[str]:
    """Check every RSA constraint; returns violation messages (empty when feasible)."""
    sizes = [int(u) for u in sizes]
    n = len(sizes)
    if n != P.n or n != U.n or len(starts) != n:
        return [f"dimension mismatch: {n} sizes, {len(starts)} starts, P has {P.n}, U has {U.n}"]
    problems = []
    for i, u in enumerate(sizes):
        if u > 0 and starts[i] is None:
            problems.append(f"connection {i}: served without a start slot")
        if u > 0 and starts[i] is not None and not 1 <= starts[i] <= M:
            problems.append(f"connection {i}: start slot {starts[i]} outside 1..{M}")
    return problems + validate_bitmap(sizes, _bitmap(sizes, starts, M)[:, 1:], P, U, M, strict_first_slot)


def validate_bitmap(sizes: Sequence[int], y: np.ndarray, P: LinkUtilizationMatrix, U: UtilityMatrix,
                    M: int, strict_first_slot: bool = False) -> list[str]:
    """Constraint check on an explicit n x M slot-usage matrix (column s-1 is slot s)."""
    sizes = [int(u) for u in sizes]
    p = P.matrix.astype(np.int64)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (len(sizes), M):
        return [f"bitmap shape {y.shape} != ({len(sizes)}, {M})"]
    problems = []

    # at most one menu entry per connection
    for i, u in enumerate(sizes):
        if u != 0 and u not in set(int(v) for v in U.values[i] if v > 0):
            problems.append(f"connection {i}: size {u} is not an entry of its utility row")

    # link capacity
    load = np.asarray(sizes, dtype=np.int64) @ p
    for l in np.flatnonzero(load > M):
        problems.append(f"link {l}: capacity exceeded ({load[l]} > {M})")

    # slot count equals chosen size
    for i, u in enumerate(sizes):
        if y[i].sum() != u:
            problems.append(f"connection {i}: occupies {y[i].sum()} slots, expected {u}")

    # no slot shared on a link
    per_link = p.T @ y
    for l, s in zip(*np.nonzero(per_link > 1)):
        problems.append(f"link {l}: slot {s + 1} used by {per_link[l, s]} connections")

    # one block start per connection, with an always-empty virtual slot 0
    padded = np.concatenate([np.zeros((len(sizes), 1), dtype=np.int64), y], axis=1)
    starts = np.maximum(padded[:, 1:] - padded[:, :-1], 0)
    for i in np.flatnonzero(starts.sum(axis=1) > 1):
        problems.append(f"connection {i}: slots are not contiguous")

    if strict_first_slot:
        for i in np.flatnonzero(y[:, 0]):
            problems.append(f"connection {i}: slot 1 used under strict boundary rule")
    return problems
