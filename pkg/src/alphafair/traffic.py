"""Tidal traffic as truncated, scaled log-normal demand per connection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from alphafair.errors import EmptySamples, InvalidModel


@dataclass(frozen=True)
class TrafficModel:
    """Log-normal FS demand; ``sigma2`` is the variance of the underlying normal."""

    mu: float
    sigma2: float
    scale_divisor: float = 2.0
    cap: float = 100.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidModel(f"sigma2 must be positive, got {self.sigma2}")
        if not self.scale_divisor > 0:
            raise InvalidModel("scale_divisor must be positive")
        if not self.cap > 0:
            raise InvalidModel("cap must be positive")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raw = rng.lognormal(mean=self.mu, sigma=math.sqrt(self.sigma2), size=size)
        return np.minimum(raw / self.scale_divisor, self.cap)


@dataclass(frozen=True)
class FluctuationSet:
    """T x n matrix of sampled FS demands (rows: time samples)."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def means(self) -> np.ndarray:
        return self.values.mean(axis=0)


def connection_rng(seed: int, connection: int) -> np.random.Generator:
    # One sub-stream per (seed, connection) so a connection's draws do not depend on n.
    return np.random.default_rng(np.random.SeedSequence([seed, connection]))


def sample_fluctuations(models: Sequence[TrafficModel], T: int, seed: int) -> FluctuationSet:
    if T < 1:
        raise ValueError("T must be >= 1")
    cols = []
    for i, model in enumerate(models):
        if not model.sigma2 > 0:
            raise InvalidModel(f"connection {i}: sigma2 must be positive")
        cols.append(model.sample(T, connection_rng(seed, i)))
    values = np.column_stack(cols) if cols else np.zeros((T, 0))
    return FluctuationSet(values, seed)


def peak_demand(samples: Sequence[float] | np.ndarray, M: int) -> int:
    """Peak-rate demand: ceiling of the largest sampled fluctuation, capped at M."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySamples("no samples to derive a peak from")
    return int(min(M, max(1, math.ceil(float(samples.max())))))


def peak_demands(fluct: FluctuationSet, M: int) -> list[int]:
    return [peak_demand(fluct.column(i), M) for i in range(fluct.n)]


def write_fluctuations_csv(fluct: FluctuationSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "connection_id", "f"])
        for t in range(fluct.T):
            for i in range(fluct.n):
                writer.writerow([t, i, repr(float(fluct.values[t, i]))])
