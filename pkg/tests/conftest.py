import json

import numpy as np
import pytest

from alphafair.topology import LinkUtilizationMatrix
from alphafair.welfare import build_utility_matrix, normalize_utilities

# (M, m) pairs within the oracle guard (m <= 4, M <= 10) with M divisible by m.
TINY_GRIDS = [(8, 4), (10, 2), (9, 3), (6, 3), (4, 4), (8, 2), (4, 2)]


def tiny_instance(seed, n_max=5, k_max=6):
    """Random instance small enough for exhaustive enumeration."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    M, m = TINY_GRIDS[int(rng.integers(0, len(TINY_GRIDS)))]
    P = np.zeros((n, k), dtype=int)
    for i in range(n):
        cols = rng.choice(k, size=int(rng.integers(1, k + 1)), replace=False)
        P[i, cols] = 1
    peaks = rng.integers(1, M + 1, size=n)
    U = build_utility_matrix(peaks, M, m)
    Uhat = normalize_utilities(U, epsilon=1e-3)
    return LinkUtilizationMatrix.from_rows(P), U, Uhat, M


@pytest.fixture
def tiny():
    return tiny_instance


@pytest.fixture
def small_files(tmp_path):
    """A 4-link chain plus chord with three connections, M=8."""
    topo = {
        "nodes": ["A", "B", "C", "D"],
        "links": [
            {"id": 0, "a": "A", "b": "B"},
            {"id": 1, "a": "B", "b": "C"},
            {"id": 2, "a": "C", "b": "D"},
            {"id": 3, "a": "B", "b": "D"},
        ],
        "slots_per_link": 8,
    }
    conns = [
        {"id": 0, "source": "A", "destination": "C", "traffic": {"mu": 1.6, "sigma2": 0.3}},
        {"id": 1, "source": "B", "destination": "C", "traffic": {"mu": 1.9, "sigma2": 0.2}},
        {"id": 2, "source": "A", "destination": "D", "traffic": {"mu": 1.4, "sigma2": 0.4}},
    ]
    tp, cp = tmp_path / "topology.json", tmp_path / "connections.json"
    tp.write_text(json.dumps(topo))
    cp.write_text(json.dumps(conns))
    return tp, cp


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
