from __future__ import annotations

import pytest

from dlas.graph import (GraphError, ball, build_interval, build_lattice_box, build_path,
                        build_star, draw_from_pmf, sample_galton_watson, validate_pmf, vertex_set)
from dlas import rng


def test_interval_small():
    g = build_interval(0, 2)
    assert g.n == 3
    assert sorted(g.edges()) == [(0, 1), (1, 2)]


def test_interval_example_window():
    g = build_interval(-30, 40)
    assert g.n == 71
    assert g.vertex(-30) == 0 and g.labels[g.vertex(0)] == 0


def test_interval_empty_range():
    with pytest.raises(GraphError):
        build_interval(5, 5)


def test_lattice_boxes():
    assert build_lattice_box([3]).neighbors == build_interval(0, 2).neighbors
    sq = build_lattice_box([2, 2])
    assert sq.n == 4 and len(sq.edges()) == 4 and all(len(nb) == 2 for nb in sq.neighbors)
    box = build_lattice_box([3, 3])
    assert box.n == 9 and len(box.edges()) == 12
    with pytest.raises(GraphError):
        build_lattice_box([])
    with pytest.raises(GraphError):
        build_lattice_box([2, 0])


def test_galton_watson_examples():
    assert sample_galton_watson({2: 1}, 2, seed=0).n == 7
    assert sample_galton_watson({0: 1}, 5, seed=0).n == 1


def test_galton_watson_replay():
    pmf = {0: 0.5, 2: 0.5}
    g = sample_galton_watson(pmf, 3, seed=99)
    # independent level-order replay of the same streams
    size, frontier = 1, [(0, 0)]
    next_id = 1
    while frontier:
        nxt = []
        for v, d in frontier:
            if d >= 3:
                continue
            kids = 0 if rng.uniform(99, rng.GW, v) < 0.5 else 2
            for _ in range(kids):
                nxt.append((next_id, d + 1))
                next_id += 1
        size += len(nxt)
        frontier = nxt
    assert g.n == size


def test_galton_watson_invalid_pmf():
    with pytest.raises(ValueError):
        sample_galton_watson({0: 0.5, 2: 0.4}, 3, seed=1)


def test_directed_tree_reaches_root():
    g = sample_galton_watson({1: 0.3, 2: 0.7}, 4, seed=5, directed=True)
    assert g.directed_to_root and g.neighbors[g.root] == ()
    for v in range(g.n):
        steps, pos = 0, v
        while pos != g.root:
            (pos,) = g.neighbors[pos]
            steps += 1
        assert steps <= 4


def test_ball_examples():
    p = build_path(4)
    b = ball(p, [0], 1)
    assert b.labels == (0, 1) and b.source_ids == (0, 1)
    assert ball(p, [0], 10).n == 4
    box = build_lattice_box([3, 3])
    plus = ball(box, [box.vertex((1, 1))], 1)
    assert plus.n == 5 and len(plus.edges()) == 4
    with pytest.raises(GraphError):
        ball(p, [9], 1)


def test_vertex_set_rules():
    g = build_path(3)
    assert vertex_set(g, [2, 0]) == (0, 2)
    with pytest.raises(GraphError):
        vertex_set(g, [1, 1])
    with pytest.raises(GraphError):
        vertex_set(g, [3])


def test_star_and_pmf_helpers():
    s = build_star(5)
    assert s.root == 0 and len(s.neighbors[0]) == 4
    assert validate_pmf({"0": "1/2", "2": 0.5}) == {0: 0.5, 2: 0.5}
    with pytest.raises(ValueError, match="sums to 0.9"):
        validate_pmf({0: 0.4, 1: 0.5})
    with pytest.raises(ValueError):
        validate_pmf({0.5: 1})
    assert draw_from_pmf({0: 0.5, 2: 0.5}, 0.49) == 0
    assert draw_from_pmf({0: 0.5, 2: 0.5}, 0.5) == 2


def test_edge_csv_export(tmp_path):
    g = build_interval(0, 2)
    g.write_edge_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines() == ["u,v", "0,1", "1,2"]
