"""Evaluation measures of an allocation against sampled demand fluctuations."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from alphafair.errors import DimensionMismatch, ZeroBaseline, ZeroMean
from alphafair.topology import LinkUtilizationMatrix
from alphafair.traffic import FluctuationSet

CSV_FIELDS = ("alpha", "blocking_pct", "utilization_fs_link", "cop", "cup", "icop", "icup",
              "cv_u", "cv_uminus")


@dataclass(frozen=True)
class ProvisioningProfile:
    u_plus: np.ndarray   # expected excess FSs per connection
    u_minus: np.ndarray  # expected unserved FSs per connection


@dataclass(frozen=True)
class MetricsReport:
    alpha: float
    blocking_percent: float
    resource_utilization: int
    utilization_fs: int
    cop: float
    cup: float
    icop: float | None
    icup: float | None
    cv_utilities: float | None
    cv_unserved: float | None

    def row(self) -> list[str]:
        return [_fmt(v) for v in (self.alpha, self.blocking_percent, self.resource_utilization,
                                  self.cop, self.cup, self.icop, self.icup,
                                  self.cv_utilities, self.cv_unserved)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def excess_and_unserved(sizes: Sequence[int], fluct: FluctuationSet | np.ndarray) -> ProvisioningProfile:
    f = fluct.values if isinstance(fluct, FluctuationSet) else np.asarray(fluct, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    u = np.asarray(sizes, dtype=float)
    if f.shape[1] != u.size:
        raise DimensionMismatch(f"{u.size} allocations vs {f.shape[1]} fluctuation columns")
    diff = u[None, :] - f
    T = f.shape[0]
    u_plus = np.where(diff > 0, diff, 0.0).sum(axis=0) / T
    u_minus = np.where(diff < 0, -diff, 0.0).sum(axis=0) / T
    return ProvisioningProfile(u_plus, u_minus)


def improvement_measures(report_alpha: MetricsReport, report_zero: MetricsReport) -> tuple[float, float]:
    """Relative COP/CUP reduction with respect to the utilitarian (alpha=0) report."""
    if report_zero.cop == 0 or report_zero.cup == 0:
        raise ZeroBaseline("baseline COP or CUP is zero")
    icop = (report_zero.cop - report_alpha.cop) / report_zero.cop
    icup = (report_zero.cup - report_alpha.cup) / report_zero.cup
    return icop, icup


def _improvement(base: float, value: float) -> float | None:
    return None if base == 0 else (base - value) / base


def coefficient_of_variation(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("coefficient of variation needs at least two values")
    mean = v.mean()
    if mean == 0:
        raise ZeroMean("mean is zero")
    return math.sqrt(float(np.sum((v - mean) ** 2)) / (v.size - 1) / mean ** 2)


def _cv_or_none(values) -> float | None:
    try:
        return coefficient_of_variation(values)
    except (ZeroMean, ValueError):
        return None


def blocking_and_utilization(sizes: Sequence[int], P: LinkUtilizationMatrix) -> tuple[float, int]:
    u = np.asarray(sizes, dtype=np.int64)
    if u.size != P.n:
        raise DimensionMismatch(f"{u.size} allocations for {P.n} connections")
    blocking = 100.0 * float(np.sum(u == 0)) / u.size if u.size else 0.0
    return blocking, int(u @ P.hops().astype(np.int64))


def evaluate(sizes: Sequence[int], alpha: float, fluct: FluctuationSet, P: LinkUtilizationMatrix,
             baseline: MetricsReport | None = None) -> MetricsReport:
    """Full report for one allocation; ICOP/ICUP stay empty without a baseline."""
    profile = excess_and_unserved(sizes, fluct)
    blocking, util = blocking_and_utilization(sizes, P)
    report = MetricsReport(
        alpha=float(alpha),
        blocking_percent=blocking,
        resource_utilization=util,
        utilization_fs=int(np.sum(sizes)),
        cop=float(profile.u_plus.sum()),
        cup=float(profile.u_minus.sum()),
        icop=None,
        icup=None,
        cv_utilities=_cv_or_none(sizes),
        cv_unserved=_cv_or_none(profile.u_minus),
    )
    if baseline is not None:
        report = with_baseline(report, baseline)
    return report


def with_baseline(report: MetricsReport, baseline: MetricsReport) -> MetricsReport:
    return replace(report, icop=_improvement(baseline.cop, report.cop),
                   icup=_improvement(baseline.cup, report.cup))
