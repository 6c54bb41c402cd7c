from __future__ import annotations

import math

import numpy as np

from dlas import rng
from dlas.batch import replica_seeds, run_batch, simulate_batch
from dlas.engine import System
from dlas.graph import build_complete_tree, build_interval, random_connected_graph
from dlas.instructions import InitialCondition, InitialSpec, make_instructions, sample_initial


def _scalar(g, xi0, seed, T, H):
    s = System(g, xi0, make_instructions(seed, g), H=H, count_root=True)
    s.run(T)
    return s.totals["xi"], s.root_arrivals, s.counts()


def test_batch_matches_scalar_engine():
    for inst in range(10):
        g = random_connected_graph(7, inst)
        spec = InitialSpec(default={-2: 0.15, -1: 0.25, 0: 0.2, 1: 0.25, 2: 0.15})
        res = simulate_batch(g, spec, 9, rng.derive_seed(5, inst), 60, H=[0, 3, 4])
        for r in range(60):
            seed = int(res.seeds[r])
            xi0 = InitialCondition.from_array(res.initial[r])
            assert xi0 == sample_initial(spec, g, seed)
            V, _, final = _scalar(g, xi0, seed, 9, [0, 3, 4])
            assert res.V[r] == V and list(res.final[r]) == final


def test_directed_batch_matches_scalar():
    tree = build_complete_tree(2, 3, directed=True)
    spec = InitialSpec(default={-1: 0.5, 1: 0.5})
    res = simulate_batch(tree, spec, math.inf, 8, 200, H=[tree.root])
    for r in range(200):
        xi0 = InitialCondition.from_array(res.initial[r])
        V, arrivals, _ = _scalar(tree, xi0, int(res.seeds[r]), math.inf, [tree.root])
        assert res.root_arrivals[r] == arrivals


def test_chunking_does_not_change_results():
    g = build_interval(-6, 8)
    xi0 = {g.vertex(2): 2, g.vertex(1): -1}
    a = simulate_batch(g, xi0, 6, 3, 500, H=[g.vertex(0)])
    b = simulate_batch(g, xi0, 6, 3, 500, H=[g.vertex(0)], chunk=77)
    c = simulate_batch(g, xi0, 6, 3, 200, H=[g.vertex(0)], start=300)
    assert np.array_equal(a.V, b.V) and np.array_equal(a.V[300:], c.V)
    assert np.array_equal(replica_seeds(3, 5), [rng.derive_seed(3, r) for r in range(5)])


def test_finite_horizon_extends_after_extinction():
    g = build_interval(0, 3)
    init = np.array([[0, 0, 0, 0]])
    out = run_batch(g, init, replica_seeds(1, 1), 5)
    assert out.V[0] == 0
    out = run_batch(g, np.array([[1, 0, 0, 0]]), replica_seeds(1, 1), 5)
    assert out.V[0] == 5
