from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from dlas.experiments import (ExperimentError, SweepFamily, concrete_specs, coupling_sweep,
                              example_line,
                              example_line_exact, example_line_values, idla_spec, idla_via_dlas,
                              minimal_config, parking_root_count, run_example_line, run_parking,
                              window_convergence, write_outputs)
from dlas.graph import build_complete_tree, build_path
from dlas.instructions import CONTINUOUS
from dlas.oracle import EnumerationBudget
from dlas.orders import NOT_FALSIFIED, EmpiricalSample, icx_dominates, two_sample_equal

HALF = {0: Fraction(1, 2), 2: Fraction(1, 2)}


def test_example_line_variants():
    assert np.all(example_line_values("xi", 20, replicas=3000, seed=1) == 0)
    s1 = example_line("xi'", 20, replicas=20_000, seed=2)
    exact = example_line_exact("xi1", 20)
    p = float(exact.prob(0))
    assert abs(np.mean(s1.values == 0) - p) < 4 * (p * (1 - p) / 20_000) ** 0.5


def test_example_line_exact_means_agree():
    m1, m2 = example_line_exact("xi1", 20).mean, example_line_exact("xi2", 20).mean
    assert m1 == m2 == Fraction(245935, 262144)
    assert example_line_exact("xi", 20).mean == 0


def test_example_line_window_checks():
    with pytest.raises(ExperimentError, match="too small"):
        example_line_values("xi1", 20, (-5, 40), 10, 0)
    with pytest.raises(ExperimentError, match="contain 0, 1 and 2"):
        example_line_values("xi1", 2, (3, 10), 10, 0, time_model=CONTINUOUS)
    with pytest.raises(ExperimentError):
        example_line_values("zeta", 20, None, 10, 0)


def test_minimal_config_identical_specs():
    one = {1: 1}
    spec, spec1 = concrete_specs(0.5, one, one)
    assert all(spec.site_law_exact(v) == spec1.site_law_exact(v) for v in range(5))
    sX, sY, exact, _ = minimal_config(build_path(5), 0.5, one, one, 6, [0], 2000, 4,
                                      exact_budget=EnumerationBudget(max_a=5))
    assert exact[0] == exact[1]
    assert two_sample_equal(sX, sY).decision == "not_rejected"


def test_minimal_config_not_falsified():
    g = build_path(5)
    for p in (0.5, 1.0):
        sX, sY, exact, _ = minimal_config(g, p, HALF, HALF, 6, [0], 20_000, 5)
        assert icx_dominates(sX, sY).verdict == NOT_FALSIFIED


def test_minimal_config_mean_must_be_one():
    with pytest.raises(ValueError):
        minimal_config(build_path(5), 0.5, {0: 0.5, 1: 0.5}, HALF, 6, [0], 10, 0)


def test_parking_trivial_laws():
    tree = build_complete_tree(2, 3, directed=True)
    assert np.all(parking_root_count(tree, {0: 1}, 500, 1) == 0)
    assert np.all(parking_root_count(tree, {1: 1}, 500, 1) == 0)
    with pytest.raises(ExperimentError):
        parking_root_count(build_complete_tree(2, 2), HALF, 10, 1)


def test_parking_against_exact():
    tree = build_complete_tree(2, 3, directed=True)
    res = run_parking(tree, HALF, 40_000, 9)
    assert res.summary["band_check"]["ok"]


def test_idla_rules():
    g = build_path(4, root=0)
    assert np.all(idla_via_dlas(g, 0, 0, 200, 1) == 0)
    with pytest.raises(ExperimentError):
        idla_spec(g, 0, 4)
    L = idla_via_dlas(g, 0, {1: 1}, 20_000, 2)
    L1 = idla_via_dlas(g, 0, HALF, 20_000, 3)
    assert icx_dominates(EmpiricalSample.of(L), EmpiricalSample.of(L1)).verdict == NOT_FALSIFIED


def test_sweep_families():
    rep = coupling_sweep(SweepFamily(max_vertices=4), 300, 1)
    assert rep["violations"] == 0 and rep["strict_fractions"]["e"] > 0
    zero = coupling_sweep(SweepFamily(count_range=(0, 0), k_values=(0,), line_fraction=0.0),
                          100, 2)
    assert zero["violations"] == 0 and zero["strict_counts"]["e"] == 0
    assert zero["strict_counts"]["life"] == 0


def test_window_convergence_reports():
    stable = window_convergence("xi2", 6, [8, 16], 300, 3, time_model="discrete")
    assert stable["pairs"][0]["stable_fraction"] == 1.0
    unstable = window_convergence("xi2", 20, [2, 40], 400, 3, time_model=CONTINUOUS)
    assert unstable["pairs"][0]["stable_fraction"] < 1.0
    with pytest.raises(ExperimentError):
        window_convergence("xi2", 6, [16, 8], 10, 0)


def test_outputs_are_reproducible(tmp_path):
    stamp = {"spec_hash": "abc", "master_seed": 4}
    files = []
    for d in ("a", "b"):
        res = run_example_line(10, None, 2000, 4)
        write_outputs(res, tmp_path / d, stamp)
        files.append({f: (tmp_path / d / f).read_bytes()
                      for f in ("summary.json", "replicas.csv", "stoploss.tsv")})
    assert files[0] == files[1]
    header = files[0]["replicas.csv"].decode().splitlines()[0]
    assert header == "replica,spec_hash,master_seed,V_xi,V_xi1,V_xi2"
