from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest

from dlas.batch import simulate_batch
from dlas.graph import build_complete_tree, build_interval, build_path, build_star
from dlas.instructions import InitialCondition, InitialSpec
from dlas.oracle import (BudgetExceeded, EnumerationBudget, ExactDistribution, count_dp,
                         coupled_marginals, enumerate_exact, enumerate_idla_exact, exact_h_curve,
                         mixture, parking_root_law, sequential_idla)

F = Fraction


def test_exact_distribution_basics():
    d = ExactDistribution.from_weights({2: F(1, 4), 0: F(3, 4)})
    assert d.support == (0, 2) and d.mean == F(1, 2)
    assert d.prob(1) == 0 and d.prob(2) == F(1, 4)
    with pytest.raises(ValueError):
        ExactDistribution((0, 1), (F(1, 2), F(1, 3)))
    with pytest.raises(ValueError):
        ExactDistribution((1, 0), (F(1, 2), F(1, 2)))
    m = mixture([(F(1, 2), ExactDistribution.point(0)), (F(1, 2), d)])
    assert m.prob(0) == F(7, 8)


def test_exact_distribution_csv(tmp_path):
    d = ExactDistribution.from_weights({0: F(1, 3), 5: F(2, 3)})
    d.to_csv(tmp_path / "law.csv")
    assert (tmp_path / "law.csv").read_text().splitlines() == [
        "value,numerator,denominator", "0,1,3", "5,2,3"]


def _within_bands(exact, values):
    """Atoms with >= 20 expected hits, plus the pooled rest, inside 4-sigma bands."""
    n = len(values)
    rest_p, rest_hits = 0.0, 0
    for v, p in zip(exact.support, exact.probabilities):
        p, hits = float(p), int(np.sum(values == float(v)))
        if p * n < 20:
            rest_p, rest_hits = rest_p + p, rest_hits + hits
            continue
        assert abs(hits / n - p) <= 4 * math.sqrt(p * (1 - p) / n), (v, hits / n, p)
    rest_p += float(exact.tail)
    rest_hits = n - sum(int(np.sum(values == float(v))) for v in exact.support) + rest_hits
    assert abs(rest_hits / n - rest_p) <= 4 * math.sqrt(max(rest_p, 1 / n) / n)


def test_single_free_particle():
    g = build_interval(0, 2)
    for method in ("dp", "worlds"):
        d = enumerate_exact(g, {1: 1}, 2, H=range(3), method=method)
        assert d == ExactDistribution.point(2)


def test_no_a_particles():
    g = build_path(4)
    assert enumerate_exact(g, {1: -1, 2: -2}, 3, H=[0, 1]) == ExactDistribution.point(0)


def _hand_walk(g, start, b_site, H, T):
    """One A-particle against one B-particle, by explicit path tree."""
    law = defaultdict(Fraction)

    def go(pos, m, acc, p):
        if m == T:
            law[acc] += p
            return
        acc += int(pos in H)
        nb = g.neighbors[pos]
        for u in nb:
            if u == b_site:
                law[acc] += p / len(nb)
            else:
                go(u, m + 1, acc, p / len(nb))

    go(start, 0, 0, F(1))
    return ExactDistribution.from_weights(dict(law))


def test_double_entry_small_instances():
    g = build_interval(0, 3)
    d = enumerate_exact(g, {1: -1, 2: 1}, 3, H=[0])
    assert d == _hand_walk(g, 2, 1, {0}, 3) == ExactDistribution.point(0)
    assert d == enumerate_exact(g, {1: -1, 2: 1}, 3, H=[0], method="worlds")
    d = enumerate_exact(g, {2: -1, 1: 1}, 4, H=[0, 1])
    assert d == _hand_walk(g, 1, 2, {0, 1}, 4)
    assert d == enumerate_exact(g, {2: -1, 1: 1}, 4, H=[0, 1], method="worlds")
    assert len(d.support) > 1


def test_bravery_rankings_matter_and_agree():
    g = build_path(4)
    xi0 = {0: 2, 2: -1, 3: 1}
    a = enumerate_exact(g, xi0, 4, H=[1, 2, 3], method="dp")
    b = enumerate_exact(g, xi0, 4, H=[1, 2, 3], method="worlds")
    assert a == b


def test_exact_matches_monte_carlo():
    g = build_path(4)
    xi0 = InitialCondition({0: 2, 2: -1})
    exact = enumerate_exact(g, xi0, 4, H=[1, 2, 3])
    _within_bands(exact, simulate_batch(g, xi0, 4, 12345, 100_000, H=[1, 2, 3]).V)


def test_budget_refuses():
    g = build_star(6)
    with pytest.raises(BudgetExceeded):
        enumerate_exact(g, {0: 2}, 3, method="worlds",
                        budget=EnumerationBudget(max_branching=4))
    with pytest.raises(BudgetExceeded):
        enumerate_exact(build_path(3), {0: 1}, 9, budget=EnumerationBudget(horizon=6))


def test_h_curve_free_walkers():
    g = build_path(3)
    rows = exact_h_curve(g, {}, 1, range(-2, 3), "identity", 3, range(3))
    for k, h, dh, d2h in rows:
        assert h == max(k, 0) * 3
        assert dh in (0, 3) and d2h >= 0


@pytest.mark.parametrize("phi", ["identity", "square", ("stoploss", 1)])
def test_h_curve_with_neighbor_b(phi):
    g = build_interval(0, 3)
    rows = exact_h_curve(g, {2: -1}, 1, range(-2, 3), phi, 4, [0, 1])
    assert all(dh >= 0 and d2h >= 0 for _, _, dh, d2h in rows)


def test_coupled_marginals_match_direct_laws():
    g = build_path(4)
    xi0 = InitialCondition({0: 1, 2: -1})
    m = coupled_marginals(g, xi0, 1, 3, [0, 3])
    assert m["phi"] == count_dp(g, xi0, 3, [0, 3])
    assert m["phi_x"] == m["phi_y"] == count_dp(g, xi0.plus_a(1), 3, [0, 3])
    assert m["phi_xy"] == count_dp(g, xi0.plus_a(1, 2), 3, [0, 3])


def test_idla_small_cases():
    g = build_path(4)
    assert enumerate_idla_exact(g, 0, 0, cutoff=20) == ExactDistribution.point(0)
    # root unoccupied: the first particle settles at once
    assert enumerate_idla_exact(g, 0, 1, cutoff=20, root_occupied=False) == \
        ExactDistribution.point(0)
    assert sequential_idla(g, 0, 1, 3, root_occupied=False) == 0
    assert enumerate_idla_exact(g, 0, 1, cutoff=20) == ExactDistribution.point(1)


def test_idla_matches_dlas_motion_time():
    g = build_path(4)
    for n in (1, 2, 3):
        dlas = count_dp(g, {0: n, 1: -1, 2: -1, 3: -1}, math.inf, statistic="motion", cutoff=30)
        assert dlas == enumerate_idla_exact(g, 0, n, cutoff=30)


def test_sequential_idla_matches_exact():
    g = build_star(5)
    exact = enumerate_idla_exact(g, 0, 2, cutoff=60)
    _within_bands(exact, np.array([sequential_idla(g, 0, 2, s) for s in range(40_000)]))


def test_parking_law_matches_simulation():
    tree = build_complete_tree(2, 3, directed=True)
    spec = InitialSpec(default={-1: F(1, 2), 1: F(1, 2)})
    law = parking_root_law(tree, spec)
    res = simulate_batch(tree, spec, math.inf, 3, 50_000, H=[tree.root])
    assert abs(res.root_arrivals.mean() - float(law.mean)) < 4 * res.root_arrivals.std() / 50_000 ** .5
    assert parking_root_law(tree, InitialSpec(default=0)) == ExactDistribution.point(0)
