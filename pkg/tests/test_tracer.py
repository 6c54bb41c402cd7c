from __future__ import annotations

import pytest

from dlas.graph import build_interval, build_path, random_connected_graph
from dlas.instructions import CONTINUOUS, DISCRETE, InitialCondition, make_instructions
from dlas.tracer import CoupledRun, CouplingViolation, run_coupled, zeta_view


def test_empty_background_tracers_never_pause():
    g = build_path(5)
    for time_model in (DISCRETE, CONTINUOUS):
        out = run_coupled(g, InitialCondition(), 2, make_instructions(3, g, time_model), 6.5,
                          range(5))
        assert out.life_x == out.life_y == out.life_hat_x == out.life_hat_y == pytest.approx(6.5)
        assert out.second_difference == pytest.approx(0)
        assert all(row[2] == row[4] for row in out.lives)


def test_example_line_second_difference_nonnegative():
    g = build_interval(-12, 14)
    xi0 = InitialCondition({g.vertex(1): -1, g.vertex(2): 1})
    for seed in range(200):
        for time_model in (DISCRETE, CONTINUOUS):
            out = run_coupled(g, xi0, g.vertex(2), make_instructions(seed, g, time_model), 10,
                              [g.vertex(0)])
            assert out.second_difference >= -1e-9
            assert out.phi_x >= out.phi and out.phi_y >= out.phi


def test_b_at_tracer_site_is_cleared_at_time_zero():
    g = build_path(4)
    xi0 = InitialCondition({1: -1, 3: 1})
    run = CoupledRun(g, xi0, 1, make_instructions(8, g), range(4))
    assert run.k == 1
    for system in (run.tracer, run.flipped):
        assert system.b_at[1] == []
        states = sorted(t.state for t in system.tracers)
        assert states == ["A", "B"]
    # rule (d): Y keeps state A in the tracer system, X in the flipped system
    assert run.tracer.ty.state == "A" and run.flipped.tx.state == "A"


def test_zeta_views_by_hand():
    g = build_path(3)
    run = CoupledRun(g, InitialCondition(), 1, make_instructions(1, g), range(3))
    z = zeta_view(run)
    assert (z.zeta[1], z.zeta_X[1], z.zeta_XY[1]) == (0, 1, 2)
    assert (z.zeta_hat[1], z.zeta_hat_Y[1], z.zeta_hat_YX[1]) == (0, 1, 2)
    # X-tracer paused in state B with nothing else around
    run.tracer.tx.set_state("B", 0.0)
    z = zeta_view(run)
    assert (z.zeta[1], z.zeta_X[1]) == (-1, 0)


def test_zeta_matches_base_counts_mid_run():
    for seed in range(30):
        g = random_connected_graph(6, seed)
        xi0 = InitialCondition({0: 1, 1: -1, 3: -2, 4: 2})
        run = CoupledRun(g, xi0, 1, make_instructions(seed, g), range(6))
        for T in (1, 2, 3, 5):
            run.advance(T)
            z = zeta_view(run)
            assert z.zeta == z.zeta_hat == run.base.counts()


def test_life_dominance_is_sometimes_strict():
    g = build_interval(-8, 10)
    xi0 = InitialCondition({g.vertex(1): -1, g.vertex(3): -1, g.vertex(2): 0})
    strict = 0
    for seed in range(300):
        out = run_coupled(g, xi0, g.vertex(2), make_instructions(seed, g), 8, range(g.n))
        strict += out.strict["life"]
    assert strict > 0


def test_inverted_priority_is_detected():
    hits = 0
    for seed in range(300):
        g = random_connected_graph(5, seed)
        xi0 = InitialCondition({0: -1, 2: -2, 3: 1})
        try:
            run_coupled(g, xi0, 1, make_instructions(seed, g), 6, range(5),
                        invert_priority=True)
        except CouplingViolation as err:
            hits += 1
            assert err.dump["seed"] == seed and err.dump["invert_priority"]
    assert hits > 0


def test_coupled_runs_need_finite_horizon():
    g = build_path(3)
    with pytest.raises(ValueError):
        run_coupled(g, InitialCondition(), 0, make_instructions(1, g), float("inf"), [0])
