"""End-to-end experiments: instance generation, alpha sweeps and their outputs."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from alphafair import metrics
from alphafair.errors import ConfigError
from alphafair.solver import Allocation, SolverConfig, solve_alpha_fair, write_allocation_csv
from alphafair.topology import (
    ConnectionRequest,
    LinkUtilizationMatrix,
    Route,
    Topology,
    build_link_utilization,
    builtin_topology,
    load_connections,
    load_topology,
    route_all,
)
from alphafair.traffic import (
    FluctuationSet,
    TrafficModel,
    peak_demands,
    sample_fluctuations,
    write_fluctuations_csv,
)
from alphafair.welfare import (
    DEFAULT_EPSILON,
    NormalizedUtilityMatrix,
    UtilityMatrix,
    build_utility_matrix,
    normalize_utilities,
    write_matrices_csv,
)

log = logging.getLogger(__name__)

MU_RANGE = (2.5, 4.5)
SIGMA2_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str = "dt14"
    connections: str | None = None
    n: int = 20
    m: int = 50
    M: int = 100
    T: int = 1000
    alpha_start: float = 0.0
    alpha_stop: float = 5.0
    alpha_step: float = 0.1
    seed: int = 0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(mode="heuristic"))
    epsilon: float = DEFAULT_EPSILON
    out_dir: str | None = None
    workers: int = 1
    plots: bool = False

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.M < 1 or self.T < 1:
            raise ConfigError("n, m, M and T must be positive")
        if not self.alpha_step > 0:
            raise ConfigError("alpha step must be positive")
        if self.alpha_start < 0 or self.alpha_stop < self.alpha_start:
            raise ConfigError("alpha grid must satisfy 0 <= start <= stop")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def alpha_grid(self) -> list[float]:
        count = int(math.floor((self.alpha_stop - self.alpha_start) / self.alpha_step + 1e-9)) + 1
        return [round(self.alpha_start + i * self.alpha_step, 10) for i in range(count)]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["routing_weight"] = "link length if given, else hop count"
        return doc


def parse_alpha_grid(text: str) -> tuple[float, float, float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"alpha grid must look like start:stop:step, got {text!r}") from exc
    return start, stop, step


@dataclass(frozen=True)
class Instance:
    topology: Topology
    connections: tuple[ConnectionRequest, ...]
    routes: tuple[Route, ...]
    P: LinkUtilizationMatrix
    fluct: FluctuationSet
    peaks: tuple[int, ...]
    U: UtilityMatrix
    Uhat: NormalizedUtilityMatrix

    @property
    def M(self) -> int:
        return self.topology.slots_per_link


def _load_topology(config: ExperimentConfig) -> Topology:
    if config.topology == "dt14":
        return builtin_topology("dt14", slots_per_link=config.M)
    path = Path(config.topology)
    if not path.exists():
        raise ConfigError(f"topology {config.topology!r} is neither a builtin nor a file")
    return load_topology(path, slots_per_link=config.M)


def generate_instance(config: ExperimentConfig) -> tuple[Topology, list[ConnectionRequest]]:
    """Random source-destination pairs with log-normal traffic parameters, seeded."""
    topology = _load_topology(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    pairs = [(a, b) for x, a in enumerate(topology.nodes) for b in topology.nodes[x + 1:]]
    if config.n > len(pairs):
        raise ConfigError(f"n={config.n} exceeds the {len(pairs)} distinct node pairs")
    picked = rng.choice(len(pairs), size=config.n, replace=False)
    flips = rng.random(config.n) < 0.5
    conns = []
    for i, (idx, flip) in enumerate(zip(picked, flips)):
        a, b = pairs[int(idx)]
        if flip:
            a, b = b, a
        mu = float(rng.uniform(*MU_RANGE))
        sigma2 = 0.0
        while sigma2 <= 0.0:
            sigma2 = float(rng.uniform(*SIGMA2_RANGE))
        conns.append(ConnectionRequest(i, a, b, TrafficModel(mu, sigma2, cap=float(config.M))))
    route_all(topology, conns)  # raises NoPathError if any pair is disconnected
    return topology, conns


def prepare_instance(config: ExperimentConfig) -> Instance:
    if config.connections:
        topology = _load_topology(config)
        conns = load_connections(config.connections, topology)
    else:
        topology, conns = generate_instance(config)
    routes = route_all(topology, conns)
    P = build_link_utilization(routes, topology, len(conns))
    fluct = sample_fluctuations([c.traffic for c in conns], config.T, config.seed)
    peaks = peak_demands(fluct, config.M)
    U = build_utility_matrix(peaks, config.M, config.m)
    Uhat = normalize_utilities(U, peaks, config.epsilon)
    return Instance(topology, tuple(conns), tuple(routes), P, fluct, tuple(peaks), U, Uhat)


def fingerprint(config: ExperimentConfig, instance: Instance) -> str:
    doc = {
        "topology": instance.topology.to_dict(),
        "connections": [c.to_dict() for c in instance.connections],
        "seed": config.seed, "T": config.T, "M": config.M, "m": config.m,
        "epsilon": config.epsilon, "solver": asdict(config.solver),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    allocation: Allocation
    report: metrics.MetricsReport


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    fingerprint: str
    instance: Instance

    @property
    def timed_out(self) -> bool:
        return any(p.allocation.stats.get("timed_out") for p in self.points)

    def at(self, alpha: float) -> SweepPoint:
        for p in self.points:
            if abs(p.alpha - alpha) < 1e-9:
                return p
        raise KeyError(alpha)


def _solve_point(args):
    instance, alpha, solver = args
    return solve_alpha_fair(instance.P, instance.U, instance.Uhat, instance.M, alpha, solver)


def run_sweep(config: ExperimentConfig, instance: Instance | None = None) -> SweepResult:
    """Solve every grid alpha (plus alpha=0) and evaluate against one fluctuation set."""
    instance = instance or prepare_instance(config)
    grid = config.alpha_grid()
    if not any(abs(a) < 1e-12 for a in grid):
        grid = [0.0] + grid
    jobs = [(instance, a, config.solver) for a in grid]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            allocations = list(pool.map(_solve_point, jobs))  # map keeps alpha order
    else:
        allocations = [_solve_point(job) for job in jobs]

    reports = [metrics.evaluate(a.sizes, a.alpha, instance.fluct, instance.P) for a in allocations]
    baseline = reports[[i for i, a in enumerate(grid) if abs(a) < 1e-12][0]]
    points = tuple(SweepPoint(a, alloc, metrics.with_baseline(rep, baseline))
                   for a, alloc, rep in zip(grid, allocations, reports))
    result = SweepResult(points, fingerprint(config, instance), instance)
    if config.out_dir:
        write_outputs(config, result)
    return result


def solve_single(config: ExperimentConfig, alpha: float, instance: Instance | None = None):
    """Solve one alpha; the report carries ICOP/ICUP against an alpha=0 solve of the same instance."""
    instance = instance or prepare_instance(config)
    alloc = _solve_point((instance, alpha, config.solver))
    base_alloc = alloc if alpha == 0 else _solve_point((instance, 0.0, config.solver))
    baseline = metrics.evaluate(base_alloc.sizes, 0.0, instance.fluct, instance.P)
    report = metrics.evaluate(alloc.sizes, alpha, instance.fluct, instance.P, baseline)
    return instance, alloc, report


SWEEP_FIELDS = metrics.CSV_FIELDS + ("utilization_fs", "served", "objective", "status", "timed_out")


def sweep_rows(result: SweepResult) -> list[list[str]]:
    rows = []
    for p in result.points:
        a = p.allocation
        rows.append(p.report.row() + [str(p.report.utilization_fs), str(a.served),
                                      format(a.objective, ".12g"), a.status,
                                      str(int(bool(a.stats.get("timed_out"))))])
    return rows


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:.4f}".rstrip("0").rstrip(".") if alpha else "0"


def write_instance_files(out: Path, topology: Topology, connections) -> None:
    with open(out / "topology.json", "w") as fh:
        json.dump(topology.to_dict(), fh, indent=1)
    with open(out / "connections.json", "w") as fh:
        json.dump([c.to_dict() for c in connections], fh, indent=1)


def write_outputs(config: ExperimentConfig, result: SweepResult) -> Path:
    out = Path(config.out_dir)
    (out / "allocations").mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        writer.writerows(sweep_rows(result))
    with open(out / "sweep_long.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha", "metric", "value"])
        for row in sweep_rows(result):
            for name, value in zip(SWEEP_FIELDS[1:-2], row[1:-2]):
                writer.writerow([row[0], name, value])
    for p in result.points:
        write_allocation_csv(p.allocation, out / "allocations" / f"alpha_{_alpha_tag(p.alpha)}.csv")
    write_instance_files(out, result.instance.topology, result.instance.connections)
    write_fluctuations_csv(result.instance.fluct, out / "fluctuations.csv")
    write_matrices_csv(result.instance.U, result.instance.Uhat, out / "matrices.csv")
    with open(out / "run.json", "w") as fh:
        json.dump({"config": config.to_dict(), "fingerprint": result.fingerprint,
                   "alphas": [p.alpha for p in result.points]}, fh, indent=1, sort_keys=True)
    if config.plots:
        render_plots(result, out)
    return out


def render_plots(result: SweepResult, out: Path) -> None:
    """Static SVG line charts of each metric against alpha."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return
    alphas = [p.alpha for p in result.points]
    panels = [
        ("blocking_pct", "Connection blocking (%)", lambda r: r.blocking_percent),
        ("utilization", "Resource utilization (FS x links)", lambda r: r.resource_utilization),
        ("cop", "COP (FS)", lambda r: r.cop),
        ("cup", "CUP (FS)", lambda r: r.cup),
        ("icop", "ICOP", lambda r: r.icop),
        ("icup", "ICUP", lambda r: r.icup),
        ("cv_u", "CV of allocations", lambda r: r.cv_utilities),
        ("cv_uminus", "CV of unserved traffic", lambda r: r.cv_unserved),
    ]
    for name, label, get in panels:
        ys = [get(p.report) for p in result.points]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(alphas, [np.nan if y is None else y for y in ys], marker=".")
        ax.set_xlabel("alpha")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / f"{name}.svg", metadata={"Date": None})
        plt.close(fig)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


__all__ = [
    "ExperimentConfig",
    "Instance",
    "SweepPoint",
    "SweepResult",
    "default_workers",
    "fingerprint",
    "generate_instance",
    "parse_alpha_grid",
    "prepare_instance",
    "run_sweep",
    "solve_single",
    "write_instance_files",
    "write_outputs",
]
