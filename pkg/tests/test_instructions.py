from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from dlas.engine import System
from dlas.graph import GraphError, build_graph, build_interval, build_path, build_star
from dlas.instructions import (CONTINUOUS, ConcreteForm, InitialCondition, InitialSpec,
                               Instructions, make_instructions, sample_initial,
                               sample_initial_batch)
from dlas.tracer import FLIPPED_VIEWS, TRACER_VIEWS


def test_paths_start_at_site():
    g = build_interval(0, 2)
    instr = make_instructions(7, g)
    for x in range(3):
        assert instr.step(x, 1, 0) == x


def test_queries_are_deterministic():
    g = build_interval(0, 2)
    a, b = make_instructions(7, g), make_instructions(7, g)
    assert a.braveness(1, 1) == a.braveness(1, 1) == b.braveness(1, 1)
    assert [a.step(1, 3, n) for n in range(10)] == [b.step(1, 3, n) for n in range(10)]


def test_step_from_middle_is_fair():
    g = build_interval(0, 2)
    instr = make_instructions(7, g)
    N = 100_000
    hits = sum(instr.step(1, j, 1) == 0 for j in range(1, N + 1))
    assert abs(hits / N - 0.5) <= 3 * (0.25 / N) ** 0.5


def test_negative_index_paths_are_constant():
    instr = make_instructions(3, build_path(4))
    assert all(instr.step(2, -1, n) == 2 for n in range(6))


def test_steps_are_uniform_over_neighbors():
    g = build_star(5)
    instr = make_instructions(21, g)
    counts = np.zeros(5)
    for j in range(1, 20_001):
        counts[instr.step(0, j, 1)] += 1
    assert counts[0] == 0
    assert stats.chisquare(counts[1:]).pvalue > 0.001


def test_bravenesses_are_uniform():
    g = build_path(5)
    instr = make_instructions(4, g)
    b = [instr.braveness(x, j) for x in range(5) for j in range(1, 2001)]
    assert len(set(b)) == len(b)
    assert stats.kstest(b, "uniform").pvalue > 0.001
    assert min(b) > -1


def test_continuous_holds_are_positive():
    instr = make_instructions(4, build_path(3), CONTINUOUS)
    holds = [instr.hold(0, 1, n) for n in range(1, 5001)]
    assert min(holds) > 0 and abs(np.mean(holds) - 1) < 0.06
    assert instr.jump_time(0, 1, 3) == pytest.approx(sum(holds[:3]))


def test_isolated_vertex_rejected():
    with pytest.raises(GraphError):
        make_instructions(1, build_graph(3, [(0, 1)]))


class Recording(Instructions):
    def __init__(self, seed, graph):
        super().__init__(seed, graph)
        object.__setattr__(self, "answers", {})

    def jump(self, x, j, n, here):
        out = super().jump(x, j, n, here)
        self.answers[("jump", x, j, n, here)] = out
        return out

    def braveness(self, x, j, salt=0):
        out = super().braveness(x, j, salt)
        self.answers[("brave", x, j, salt)] = out
        return out


def test_coupled_systems_see_identical_instructions():
    g = build_path(5)
    xi0 = InitialCondition({0: 2, 1: -1, 3: -2, 4: 1})
    logs = []
    for kind in ("base", "tracer", "flipped"):
        instr = Recording(99, g)
        if kind == "base":
            s = System(g, xi0, instr, H=range(5))
        else:
            views, pri = (TRACER_VIEWS, "Y") if kind == "tracer" else (FLIPPED_VIEWS, "X")
            bx, by = (-2.0, -1.0) if kind == "tracer" else (-1.0, -2.0)
            s = System(g, xi0, instr, H=range(5), views=views, tracer_site=2, prioritized=pri,
                       brav_x=bx, brav_y=by)
        s.run(8)
        logs.append(instr.answers)
    fresh = make_instructions(99, g)
    for log in logs:
        for key, value in log.items():
            if key[0] == "jump":
                assert fresh.jump(*key[1:]) == value
            else:
                assert fresh.braveness(*key[1:]) == value
    shared = set(logs[0]) & set(logs[1]) & set(logs[2])
    assert shared and all(logs[0][k] == logs[1][k] == logs[2][k] for k in shared)


def test_sample_initial_examples():
    g = build_interval(-3, 5)
    det = InitialSpec(site_pmfs={g.vertex(1): {-1: 1}, g.vertex(2): {1: 1}})
    assert sample_initial(det, g, 5) == {g.vertex(1): -1, g.vertex(2): 1}
    assert sample_initial(InitialSpec(), g, 5) == {}
    spec = InitialSpec(site_pmfs={g.vertex(1): {0: 0.5, -2: 0.5}})
    seeds = np.arange(100_000, dtype=np.uint64)
    draws = sample_initial_batch(spec, g, seeds)[:, g.vertex(1)]
    freq = np.mean(draws == -2)
    assert set(np.unique(draws)) == {0, -2}
    assert abs(freq - 0.5) <= 3 * (0.25 / len(seeds)) ** 0.5


def test_concrete_form_shares_uniform():
    g = build_path(6)
    half = {0: Fraction(1, 2), 2: Fraction(1, 2)}
    plain = InitialSpec(concrete=ConcreteForm(0.5, half, half, primed=False))
    primed = InitialSpec(concrete=ConcreteForm(0.5, half, half, primed=True))
    seeds = np.arange(2000, dtype=np.uint64)
    a, b = sample_initial_batch(plain, g, seeds), sample_initial_batch(primed, g, seeds)
    assert set(np.unique(a)) <= {-1, 1}
    # same U(x): a +1 site of xi_0 carries A's (or nothing) in xi_0', a -1 site B's
    assert np.all(b[a == 1] >= 0) and np.all(b[a == -1] <= 0)
    assert plain.site_law_exact(0) == {1: Fraction(1, 2), -1: Fraction(1, 2)}
    assert primed.site_law_exact(0) == {0: Fraction(1, 2), 2: Fraction(1, 4), -2: Fraction(1, 4)}


def test_concrete_form_needs_mean_one():
    with pytest.raises(ValueError, match="mean 1"):
        ConcreteForm(0.5, {0: 0.5, 1: 0.5}, {1: 1})


def test_initial_condition_helpers():
    xi = InitialCondition({0: -1, 2: 3})
    assert xi.plus_a(0) == {2: 3}
    assert xi.plus_a(0, 2) == {0: 1, 2: 3}
    assert xi.with_site(2, 0) == {0: -1}
    assert (xi.n_a(), xi.n_b()) == (3, 1)
    with pytest.raises(GraphError):
        InitialCondition({7: 1}).validate(build_path(3))
