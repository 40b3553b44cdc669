import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphafair.errors import DimensionMismatch
from alphafair.solver import (
    SolverConfig,
    brute_force_oracle,
    is_lexicographic,
    read_allocation_csv,
    solve_alpha_fair,
    validate_allocation,
    validate_bitmap,
    write_allocation_csv,
)
from alphafair.solver.oracle import enumerate_feasible
from alphafair.topology import LinkUtilizationMatrix
from alphafair.welfare import build_utility_matrix, normalize_utilities, welfare

from conftest import tiny_instance

ALPHAS = (0.0, 0.5, 1.0, 2.0, 8.0)
EXACT = SolverConfig(mode="exact")
HEUR = SolverConfig(mode="heuristic", node_limit=5000)


def setup(rows, peaks, M, m):
    P = LinkUtilizationMatrix.from_rows(rows)
    U = build_utility_matrix(peaks, M, m)
    return P, U, normalize_utilities(U, epsilon=1e-3)


def close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def pareto_violations(alloc, P, U):
    return [i for i in np.flatnonzero(~P.contending()) if alloc.sizes[i] != U.largest_choice(i)]


def test_single_connection_gets_its_peak():
    P, U, Uh = setup([[1, 1]], [10], 10, 5)
    for alpha in (0, 0.3, 1, 2, 8):
        for cfg in (EXACT, HEUR):
            a = solve_alpha_fair(P, U, Uh, 10, alpha, cfg)
            assert a.sizes == (10,) and a.starts == (1,)


def test_contended_link_split_fairly():
    # two connections on one link of 8 slots, each wanting all 8
    P, U, Uh = setup([[1], [1]], [8, 8], 8, 4)
    utilitarian = solve_alpha_fair(P, U, Uh, 8, 0.0, EXACT)
    assert sum(utilitarian.sizes) == 8
    fair = solve_alpha_fair(P, U, Uh, 8, 2.0, EXACT)
    assert fair.sizes == (4, 4)


def test_status_and_stats():
    P, U, Uh = setup([[1, 0], [1, 1], [0, 1]], [6, 8, 4], 8, 4)
    a = solve_alpha_fair(P, U, Uh, 8, 1.0, EXACT)
    assert a.status == "exact-optimal" and a.stats["proven"] and not a.stats["timed_out"]
    h = solve_alpha_fair(P, U, Uh, 8, 1.0, HEUR)
    assert h.status == "heuristic" and {"cuts", "degraded", "lifted"} <= set(h.stats)


def test_dimension_checks():
    P, U, Uh = setup([[1], [1]], [8, 8], 8, 4)
    with pytest.raises(DimensionMismatch):
        solve_alpha_fair(P, U, Uh, 10, 0.0)
    P3 = LinkUtilizationMatrix.from_rows([[1], [1], [1]])
    with pytest.raises(DimensionMismatch):
        solve_alpha_fair(P3, U, Uh, 8, 0.0)


def test_lexicographic_switch():
    assert not is_lexicographic(0.99) and is_lexicographic(1.0) and is_lexicographic(3)


def test_lexicographic_serves_more_connections():
    # the long connection blocks both short ones unless it shrinks
    P, U, Uh = setup([[1, 1], [1, 0], [0, 1]], [8, 8, 8], 8, 4)
    for alpha in (1.0, 2.0, 8.0):
        a = solve_alpha_fair(P, U, Uh, 8, alpha, EXACT)
        assert a.served == 3


def test_trace_callback_sees_nodes():
    seen = []
    P, U, Uh = setup([[1, 0], [1, 1], [0, 1]], [6, 8, 4], 8, 4)
    solve_alpha_fair(P, U, Uh, 8, 0.5, EXACT, trace=lambda *a: seen.append(a))
    assert seen and seen[-1][3] in ("done", "budget")


def test_node_limit_marks_unproven():
    inst = tiny_instance(17)
    P, U, Uh, M = inst
    a = solve_alpha_fair(P, U, Uh, M, 0.5, SolverConfig(mode="exact", node_limit=1))
    assert not validate_allocation(a.sizes, a.starts, P, U, M)


@pytest.mark.parametrize("seed", range(60))
def test_exact_matches_oracle(seed):
    P, U, Uh, M = tiny_instance(seed)
    for alpha in ALPHAS:
        ref = brute_force_oracle(P, U, Uh, M, alpha)
        got = solve_alpha_fair(P, U, Uh, M, alpha, EXACT)
        assert close(got.objective, ref.objective)
        if is_lexicographic(alpha):
            assert got.served == ref.served
        assert got.sizes == ref.sizes  # identical deterministic tie-break
        assert got.status == "exact-optimal"
        assert not validate_allocation(got.sizes, got.starts, P, U, M)
        assert not validate_allocation(ref.sizes, ref.starts, P, U, M)


@pytest.mark.parametrize("seed", range(60))
def test_heuristic_is_feasible_and_never_beats_exact(seed):
    P, U, Uh, M = tiny_instance(seed)
    for alpha in ALPHAS:
        ex = solve_alpha_fair(P, U, Uh, M, alpha, EXACT)
        h = solve_alpha_fair(P, U, Uh, M, alpha, HEUR)
        assert not validate_allocation(h.sizes, h.starts, P, U, M)
        assert not pareto_violations(h, P, U)
        if is_lexicographic(alpha):
            assert (h.served, h.objective) <= (ex.served, ex.objective + 1e-9)
        else:
            assert h.objective <= ex.objective + 1e-9


@pytest.mark.parametrize("seed", range(40))
def test_strict_first_slot_mode(seed):
    P, U, Uh, M = tiny_instance(seed)
    cfg = SolverConfig(mode="exact", strict_first_slot=True)
    for alpha in (0.0, 2.0):
        a = solve_alpha_fair(P, U, Uh, M, alpha, cfg)
        ref = brute_force_oracle(P, U, Uh, M, alpha, strict_first_slot=True)
        assert close(a.objective, ref.objective)
        assert not validate_allocation(a.sizes, a.starts, P, U, M, strict_first_slot=True)
        assert all(s is None or s >= 2 for s in a.starts)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(ALPHAS + (0.3, 1.5, 4.0)))
def test_pareto_for_non_contending(seed, alpha):
    P, U, Uh, M = tiny_instance(seed)
    for cfg in (EXACT, HEUR):
        a = solve_alpha_fair(P, U, Uh, M, alpha, cfg)
        assert not pareto_violations(a, P, U)


def test_allocation_csv_roundtrip(tmp_path):
    P, U, Uh = setup([[1, 0], [1, 1], [0, 1]], [6, 8, 4], 8, 4)
    a = solve_alpha_fair(P, U, Uh, 8, 1.0, EXACT)
    path = tmp_path / "alloc.csv"
    write_allocation_csv(a, path)
    sizes, starts = read_allocation_csv(path)
    assert tuple(sizes) == a.sizes and tuple(starts) == a.starts


class TestValidator:
    P = LinkUtilizationMatrix.from_rows([[1, 1], [0, 1]])
    U = build_utility_matrix([6, 8], 10, 5)

    def check(self, sizes, starts, **kw):
        return validate_allocation(sizes, starts, self.P, self.U, 10, **kw)

    def test_accepts_feasible(self):
        assert self.check([4, 6], [1, 5]) == []
        assert self.check([0, 8], [None, 1]) == []

    def test_overlap(self):
        assert any("slot" in p for p in self.check([4, 6], [1, 4]))

    def test_capacity(self):
        assert any("capacity" in p for p in self.check([6, 8], [1, 3]))

    def test_size_not_on_menu(self):
        assert any("utility row" in p for p in self.check([3, 6], [1, 5]))
        assert any("utility row" in p for p in self.check([8, 2], [1, 9]))  # above peak 6

    def test_out_of_range(self):
        assert self.check([4, 6], [1, 6])  # runs past slot 10
        assert self.check([4, 6], [None, 5])

    def test_strict_first_slot(self):
        assert self.check([4, 6], [1, 5]) == []
        assert any("strict" in p for p in self.check([4, 6], [1, 5], strict_first_slot=True))
        assert self.check([4, 4], [2, 6], strict_first_slot=True) == []

    def test_non_contiguous_bitmap(self):
        y = np.zeros((2, 10), dtype=int)
        y[0, [0, 1, 4, 5]] = 1  # slots 1,2,5,6 : right count, two blocks
        y[1, 6:10] = 1
        problems = validate_bitmap([4, 4], y, self.P, self.U, 10)
        assert problems == ["connection 0: slots are not contiguous"]

    def test_bitmap_slot_count(self):
        y = np.zeros((2, 10), dtype=int)
        y[0, 0:3] = 1
        y[1, 4:8] = 1
        assert any("occupies 3" in p for p in validate_bitmap([4, 4], y, self.P, self.U, 10))


def objective_oracle(sizes, U, Uh, alpha):
    g = U.granule
    served = [Uh.values[i, u // g - 1] for i, u in enumerate(sizes) if u > 0]
    return (len(served) if is_lexicographic(alpha) else 0, welfare(served, alpha))


@pytest.mark.parametrize("seed", range(25))
def test_oracle_beats_every_feasible_allocation(seed):
    P, U, Uh, M = tiny_instance(seed)
    feasible = list(enumerate_feasible(P, U, M))
    for alpha in ALPHAS:
        ref = brute_force_oracle(P, U, Uh, M, alpha)
        key = objective_oracle(ref.sizes, U, Uh, alpha)
        assert key[1] == pytest.approx(ref.objective, rel=1e-12, abs=1e-12)
        for sizes, _ in feasible:
            other = objective_oracle(sizes, U, Uh, alpha)
            assert other[0] < key[0] or (other[0] == key[0] and other[1] <= key[1] + 1e-9 * max(1, abs(key[1])))


def test_heuristic_keeps_everyone_served_after_cuts():
    # full-scale instance where a no-good cut once coincided with the greedy seed
    from alphafair.harness import ExperimentConfig, prepare_instance

    inst = prepare_instance(ExperimentConfig(seed=4))
    a = solve_alpha_fair(inst.P, inst.U, inst.Uhat, inst.M, 1.1, SolverConfig(mode="heuristic"))
    assert a.stats["cuts"] >= 1
    assert a.served == inst.P.n
    assert not validate_allocation(a.sizes, a.starts, inst.P, inst.U, inst.M)


def test_mode_dependent_node_limit():
    assert SolverConfig(mode="heuristic").node_limit == 20_000
    assert SolverConfig(mode="exact").node_limit == 2_000_000
    assert SolverConfig(mode="exact", node_limit=7).node_limit == 7
