from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from dlas.oracle import ExactDistribution
from dlas.orders import (FAILS, HOLDS, INCONCLUSIVE, NOT_FALSIFIED, EmpiricalSample,
                         consequence_panel, icx_dominates, icx_on_pmfs, sd_dominates, stop_loss,
                         stop_loss_curve, two_sample_equal, write_stoploss_tsv)

F = Fraction
ONE = ExactDistribution.point(1)
ZERO = ExactDistribution.point(0)
SPREAD = ExactDistribution.from_weights({0: F(1, 2), 2: F(1, 2)})


def test_stop_loss_examples():
    assert stop_loss(ONE, 0).value == 1
    assert stop_loss(SPREAD, 1).value == F(1, 2)
    s = stop_loss(EmpiricalSample.of(np.full(500, 3.0)), 1)
    assert s.value == 2 and s.lower == s.upper == 2


def test_icx_examples():
    assert icx_dominates(ONE, SPREAD).verdict == HOLDS
    v = icx_dominates(ONE, ZERO)
    assert v.verdict == FAILS and v.witness == 0 and v.witness_gap < 0
    same = icx_dominates(SPREAD, SPREAD)
    assert same.verdict == HOLDS and all(g == 0 for g in same.gaps)


def test_sd_examples():
    assert sd_dominates(ZERO, ONE).verdict == HOLDS
    v = sd_dominates(ONE, SPREAD)
    assert v.verdict == FAILS and v.witness == 1
    assert sd_dominates(SPREAD, SPREAD).verdict == HOLDS


def test_empirical_verdicts():
    gen = np.random.default_rng(0)
    x = EmpiricalSample.of(np.ones(5000), seed=0)
    y = EmpiricalSample.of(gen.choice([0.0, 2.0], 5000), seed=0)
    assert icx_dominates(x, y).verdict == NOT_FALSIFIED
    fails = icx_dominates(x, EmpiricalSample.of(np.zeros(5000)))
    assert fails.verdict == FAILS and fails.witness_band[1] < 0
    assert icx_dominates(EmpiricalSample.of(np.ones(50)), y).verdict == INCONCLUSIVE
    with pytest.raises(ValueError):
        EmpiricalSample.of([])


def test_verdict_serialization():
    d = json.loads(icx_dominates(ONE, ZERO).to_json())
    assert d["verdict"] == FAILS and d["relation"] == "icx"


def test_consequence_panel_examples():
    p = consequence_panel(ONE, SPREAD)
    assert p["mean"]["status"] == "tie"
    assert p["variance"]["status"] == "consistent" and p["p_zero"]["status"] == "consistent"
    assert (p["p_zero"]["X"], p["p_zero"]["Y"]) == (0.0, 0.5)
    same = consequence_panel(SPREAD, SPREAD)
    assert {same[k]["status"] for k in ("mean", "variance", "p_zero")} == {"tie"}
    e = EmpiricalSample.of(np.r_[np.zeros(600), np.ones(400)])
    emp = consequence_panel(e, e)
    assert {emp[k]["status"] for k in ("mean", "variance", "p_zero")} == {"tie"}


def test_two_sample():
    gen = np.random.default_rng(3)
    a = EmpiricalSample.of(gen.poisson(2, 400))
    b = EmpiricalSample.of(gen.poisson(2, 400))
    assert two_sample_equal(a, b).decision == "not_rejected"
    zeros, ones = EmpiricalSample.of(np.zeros(300)), EmpiricalSample.of(np.ones(300))
    assert two_sample_equal(zeros, ones).decision == "reject"
    assert two_sample_equal(EmpiricalSample.of(np.zeros(20)), ones).decision == INCONCLUSIVE


def test_two_sample_calibration():
    gen = np.random.default_rng(11)
    rejections = sum(
        two_sample_equal(EmpiricalSample.of(gen.normal(size=300)),
                         EmpiricalSample.of(gen.normal(size=300))).decision == "reject"
        for _ in range(300))
    assert rejections <= 9


def test_pmf_icx_and_curves(tmp_path):
    assert icx_on_pmfs({1: 1}, {0: 0.5, 2: 0.5}).verdict == HOLDS
    assert stop_loss_curve(SPREAD, [0, 1, 2]) == [1.0, 0.5, 0.0]
    write_stoploss_tsv(tmp_path / "s.tsv", {"one": ONE, "spread": SPREAD}, [0, 1], header="h=1")
    lines = (tmp_path / "s.tsv").read_text().splitlines()
    assert lines[0] == "# h=1" and lines[1].split("\t") == ["a", "one", "spread"]
