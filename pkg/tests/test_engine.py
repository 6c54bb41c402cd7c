from __future__ import annotations

import math

import pytest

from dlas.engine import (EngineError, System, aggregate_motion_time, occupation_time,
                         resolve_site, simulate)
from dlas.graph import build_interval, build_path, random_connected_graph
from dlas.instructions import CONTINUOUS, DISCRETE, InitialCondition, make_instructions, \
    path_occupation


def test_resolve_site_examples():
    assert resolve_site([0.9, 0.2], [0.5]) == ([0.2], [], [(0.9, 0.5)])
    assert resolve_site([], [0.3]) == ([], [0.3], [])
    a, b, pairs = resolve_site([0.1, 0.2, 0.3], [0.5, 0.6])
    assert pairs == [(0.3, 0.6), (0.2, 0.5)] and a == [0.1] and b == []


@pytest.mark.parametrize("time_model", [DISCRETE, CONTINUOUS])
def test_example_line_base_system_never_visits(time_model):
    g = build_interval(-25, 35)
    xi0 = InitialCondition({g.vertex(1): -1, g.vertex(2): 1})
    for seed in range(40):
        for T in (1, 5, 20):
            traj = simulate(g, xi0, make_instructions(seed, g, time_model), T, H=[g.vertex(0)])
            assert traj.V == 0


def test_empty_system_has_no_events():
    g = build_path(4)
    traj = simulate(g, InitialCondition(), make_instructions(1, g), 10)
    assert traj.events == [] and traj.V == 0
    assert occupation_time(traj, range(4), 10) == 0


def test_single_particle_one_round():
    g = build_interval(0, 2)
    traj = simulate(g, InitialCondition({0: 1}), make_instructions(3, g), 1, H=range(3))
    assert traj.V == 1


def test_free_particles_aggregate_motion():
    g = build_path(5)
    for time_model in (DISCRETE, CONTINUOUS):
        traj = simulate(g, InitialCondition({0: 2, 3: 1}), make_instructions(4, g, time_model), 7.5)
        assert aggregate_motion_time(traj, 7.5) == pytest.approx(3 * 7.5)


def test_immortal_particle_inside_h():
    g = build_path(2)
    traj = simulate(g, InitialCondition({0: 1}), make_instructions(2, g, CONTINUOUS), 4.25,
                    H=[0, 1])
    assert occupation_time(traj, [0, 1], 4.25) == pytest.approx(4.25)


def test_double_heads_is_sum_of_local_times():
    g = build_interval(-22, 32)
    zero, two = g.vertex(0), g.vertex(2)
    for seed in range(30):
        instr = make_instructions(seed, g)
        traj = simulate(g, InitialCondition({two: 2}), instr, 20, H=[zero])
        direct = sum(path_occupation(instr, two, j, 20, [zero]) for j in (1, 2))
        assert traj.V == direct


def test_replay_and_occupation_from_log():
    for seed in range(20):
        g = random_connected_graph(6, seed)
        xi0 = InitialCondition({0: 2, 2: -1, 3: 1, 5: -2})
        for time_model in (DISCRETE, CONTINUOUS):
            traj = simulate(g, xi0, make_instructions(seed, g, time_model), 6, H=[1, 2, 3])
            assert traj.replay() == traj.final
            assert occupation_time(traj, [1, 2, 3], 6) == pytest.approx(traj.V, rel=1e-12)


def test_conservation_and_sign_consistency():
    def observer(s):
        for z in range(s.graph.n):
            assert not (s.a_at[z] and s.b_at[z])
    for seed in range(20):
        g = random_connected_graph(7, seed)
        xi0 = InitialCondition({v: (2 if v % 3 == 0 else -1) for v in range(7)})
        traj = simulate(g, xi0, make_instructions(seed, g), 10, observers=[observer])
        initial, final = sum(xi0.values()), sum(traj.final)
        # each annihilation removes one A and one B, so the signed total is conserved
        assert initial == final


def test_determinism():
    g = random_connected_graph(6, 1)
    xi0 = InitialCondition({0: 3, 4: -2})
    runs = [simulate(g, xi0, make_instructions(77, g, CONTINUOUS), 9) for _ in range(2)]
    assert runs[0].events == runs[1].events and runs[0].V == runs[1].V


def test_run_to_extinction_and_horizon_errors():
    g = build_path(4)
    xi0 = InitialCondition({0: 1, 1: -1, 2: -1, 3: -1})
    traj = simulate(g, xi0, make_instructions(5, g), math.inf)
    assert sum(traj.final) == -2 and traj.V >= 1
    with pytest.raises(EngineError):
        System(g, xi0, make_instructions(5, g), H=range(4)).run(-1)
    with pytest.raises(EngineError):
        occupation_time(simulate(g, xi0, make_instructions(5, g), 3), [0], 4)


def test_checkpoints():
    g = build_path(3)
    traj = simulate(g, InitialCondition({1: 1}), make_instructions(1, g), 5, checkpoints=[1, 3])
    assert traj.checkpoints == [(1, 1.0), (3, 3.0)]
