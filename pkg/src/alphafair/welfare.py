"""Discrete spectrum-allocation menus and the constant-elasticity welfare function."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from alphafair.errors import BadGranularity, EpsilonTooLarge, NonPositiveUtility

LOG_BRANCH_TOL = 1e-9
DEFAULT_EPSILON = 1e-3


def is_log_branch(alpha: float) -> bool:
    return abs(alpha - 1.0) < LOG_BRANCH_TOL


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return alpha


@dataclass(frozen=True)
class UtilityMatrix:
    """n x m grid of FS counts; entry (i, j) is (j+1)*granule or 0 above the peak."""

    values: np.ndarray
    peaks: tuple[int, ...]
    M: int
    m: int

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def granule(self) -> int:
        return self.M // self.m

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def choices(self, i: int) -> np.ndarray:
        """Selectable nonzero sizes of connection i, ascending."""
        row = self.values[i]
        return row[row > 0]

    def largest_choice(self, i: int) -> int:
        row = self.choices(i)
        return int(row[-1]) if row.size else 0


@dataclass(frozen=True)
class NormalizedUtilityMatrix:
    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        self.values.setflags(write=False)


def build_utility_matrix(peaks: Sequence[int], M: int, m: int) -> UtilityMatrix:
    if m < 1 or m > M:
        raise BadGranularity(f"need 1 <= m <= M, got m={m}, M={M}")
    if M % m:
        raise BadGranularity(f"M={M} is not divisible by m={m}")
    g = M // m
    peaks = tuple(int(p) for p in peaks)
    for p in peaks:
        if not 1 <= p <= M:
            raise ValueError(f"peak demand {p} outside [1, {M}]")
    steps = g * np.arange(1, m + 1)
    u = np.array([np.where(steps <= p, steps, 0) for p in peaks], dtype=np.int64).reshape(len(peaks), m)
    return UtilityMatrix(u, peaks, M, m)


def normalize_utilities(U: UtilityMatrix, peaks: Sequence[int] | None = None,
                        epsilon: float = DEFAULT_EPSILON) -> NormalizedUtilityMatrix:
    peaks = np.asarray(U.peaks if peaks is None else peaks, dtype=float)
    if len(peaks) != U.n:
        raise ValueError("one peak per connection required")
    bound = U.granule / peaks.max() if peaks.size else np.inf
    if not 0 < epsilon < bound:
        raise EpsilonTooLarge(f"epsilon must lie in (0, {bound:g}), got {epsilon}")
    with np.errstate(divide="ignore", invalid="ignore"):
        uhat = np.where(U.values > 0, U.values / peaks[:, None], epsilon)
    return NormalizedUtilityMatrix(uhat, float(epsilon))


def welfare_terms(uhat, alpha: float) -> np.ndarray:
    uhat = np.asarray(uhat, dtype=float)
    if is_log_branch(alpha):
        return np.log(uhat)
    return uhat ** (1.0 - alpha) / (1.0 - alpha)


def welfare(values: Sequence[float], alpha: float) -> float:
    """W_alpha of a vector of strictly positive (normalized) utilities."""
    alpha = check_alpha(alpha)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if np.any(~(values > 0)):
        raise NonPositiveUtility("welfare is defined for strictly positive utilities only")
    return float(welfare_terms(values, alpha).sum())


def write_matrices_csv(U: UtilityMatrix, Uhat: NormalizedUtilityMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "u_ij", "u_hat_ij"])
        for i in range(U.n):
            for j in range(U.m):
                writer.writerow([i, j + 1, int(U.values[i, j]), repr(float(Uhat.values[i, j]))])
