"""The acceptance suite: one function per criterion, shared by ``dlas verify``
and ``tests/test_acceptance.py``.

``scale="full"`` uses the replica counts of the criteria; ``scale="smoke"``
shrinks them for quick checks (pass/fail thresholds are unchanged).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import rng
from .batch import simulate_batch
from .experiments import (SweepFamily, coupling_sweep, example_line_exact, example_line_values,
                          idla_exact_pair, idla_via_dlas, minimal_config, parallel_map,
                          run_h_curve, window_convergence)
from .graph import build_complete_tree, build_interval, build_path, build_star, \
    random_connected_graph
from .instructions import InitialCondition, make_instructions
from .oracle import BudgetExceeded, EnumerationBudget, count_dp, coupled_marginals
from .orders import EmpiricalSample, icx_dominates, two_sample_equal
from .tracer import run_coupled

SCALES = {
    "full": {"line": 100_000, "sweep": 10_000, "ks_experiments": 100, "ks_size": 200,
             "minimal": 100_000, "idla": 100_000, "window": 10_000, "mutation": 2_000},
    "smoke": {"line": 20_000, "sweep": 1_000, "ks_experiments": 20, "ks_size": 120,
              "minimal": 20_000, "idla": 20_000, "window": 1_000, "mutation": 500},
}


@dataclass
class CriterionResult:
    ident: str
    title: str
    passed: bool
    detail: str
    violation: bool = False
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.ident}. {self.title}: {self.detail}"


@dataclass
class SuiteConfig:
    seed: int = 2024
    scale: str = "full"
    workers: int = 1
    invert_priority: bool = False
    assertions: str = "full"

    @property
    def n(self) -> dict:
        return SCALES[self.scale]


def _z(freq: float, p: float, n: int) -> float:
    se = math.sqrt(p * (1 - p) / n) if 0 < p < 1 else 1.0 / n
    return abs(freq - p) / se


# --- 1 and 2: the example on Z -------------------------------------------------

_LINE_CACHE: dict = {}


def _line_samples(cfg: SuiteConfig, T: int = 20):
    key = (cfg.seed, cfg.scale, T)
    if key not in _LINE_CACHE:
        N = cfg.n["line"]
        _LINE_CACHE[key] = {
            v: example_line_values(v, T, (-22, 32), N, rng.derive_seed(cfg.seed, 1, i))
            for i, v in enumerate(("xi", "xi1", "xi2"))}
    return _LINE_CACHE[key]


def criterion_1(cfg: SuiteConfig) -> list[CriterionResult]:
    """Atoms at 0 of the three example variants, read literally, plus the exact mixture."""
    T = 20
    s = _line_samples(cfg, T)
    N = cfg.n["line"]
    p1 = float(np.mean(s["xi1"] == 0))
    p2 = float(np.mean(s["xi2"] == 0))
    all_zero = bool(np.all(s["xi"] == 0))
    literal = all_zero and abs(p1 - 0.5) <= 0.006 and abs(p2 - 0.75) <= 0.006
    out = [CriterionResult(
        "1", "Example-line atoms (literal 1/2, 3/4 +- 0.006)", literal,
        f"V=0 in all replicas: {all_zero}; P(V'=0)={p1:.4f} (target 0.5+-0.006); "
        f"P(V''=0)={p2:.4f} (target 0.75+-0.006); N={N}",
        data={"p_zero_xi1": p1, "p_zero_xi2": p2, "all_zero_xi": all_zero})]
    # the displayed laws are 1/2 d0 + 1/2 L_T and 3/4 d0 + 1/4 (L_T + L'_T), whose atoms
    # at 0 also collect P(L_T = 0) > 0; check those exact values instead
    e1, e2 = example_line_exact("xi1", T), example_line_exact("xi2", T)
    g = build_interval(-T, T + 2)
    free = count_dp(g, InitialCondition({g.vertex(2): 1}), T, [g.vertex(0)])
    free2 = count_dp(g, InitialCondition({g.vertex(2): 2}), T, [g.vertex(0)])
    q1 = free.prob(0)
    q2 = free2.prob(0)
    mixture_ok = (e1.prob(0) == Fraction(1, 2) + q1 / 2
                  and e2.prob(0) == Fraction(3, 4) + q2 / 4)
    z1, z2 = _z(p1, float(e1.prob(0)), N), _z(p2, float(e2.prob(0)), N)
    ok = all_zero and mixture_ok and z1 <= 4 and z2 <= 4
    out.append(CriterionResult(
        "1b", "Example-line atoms vs exact mixture laws", ok,
        f"exact P(V'=0)=1/2+P(L_T=0)/2={float(e1.prob(0)):.5f} (z={z1:.2f}); "
        f"exact P(V''=0)=3/4+P(L_T+L'_T=0)/4={float(e2.prob(0)):.5f} (z={z2:.2f}); "
        f"mixture identities exact: {mixture_ok}",
        data={"exact_p_zero_xi1": str(e1.prob(0)), "exact_p_zero_xi2": str(e2.prob(0))}))
    return out


def _boot_mean_diff(a: np.ndarray, b: np.ndarray, level: float, seed: int, B: int = 2000):
    gen = np.random.default_rng(seed)
    out = []
    for x in (a, b):
        u, c = np.unique(x, return_counts=True)
        w = gen.multinomial(len(x), c / len(x), size=B) / len(x)
        out.append(w @ u)
    diff = out[1] - out[0]
    lo, hi = np.quantile(diff, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def criterion_2(cfg: SuiteConfig) -> CriterionResult:
    s = _line_samples(cfg)
    # two statements share one 99% family: Bonferroni 99.5% each
    lo01, hi01 = _boot_mean_diff(s["xi"], s["xi1"], 0.995, rng.derive_seed(cfg.seed, 2, 0))
    lo12, hi12 = _boot_mean_diff(s["xi1"], s["xi2"], 0.995, rng.derive_seed(cfg.seed, 2, 1))
    m = [float(s[v].mean()) for v in ("xi", "xi1", "xi2")]
    ok = lo01 > 0 and lo12 <= 0 <= hi12
    return CriterionResult(
        "2", "Example-line means E V < E V' = E V''", ok,
        f"means {m[0]:.4f}, {m[1]:.4f}, {m[2]:.4f}; E V'-E V band [{lo01:.4f}, {hi01:.4f}]; "
        f"E V''-E V' band [{lo12:.4f}, {hi12:.4f}] (joint 99%)")


# --- 3 and 9: pathwise coupling suite -------------------------------------------

def criterion_3(cfg: SuiteConfig) -> CriterionResult:
    rep = coupling_sweep(SweepFamily(), cfg.n["sweep"], rng.derive_seed(cfg.seed, 3),
                         assertions=cfg.assertions, invert_priority=cfg.invert_priority,
                         workers=cfg.workers)
    fr = rep["strict_fractions"]
    strict_ok = all(v >= 0.01 for v in fr.values())
    ok = rep["violations"] == 0 and strict_ok
    detail = (f"{rep['runs']} coupled runs, {rep['violations']} violations"
              + (f" ({', '.join(rep['violated_checks'])}; first replay seed "
                 f"{rep['violation_log'][0]['seed']})" if rep["violations"] else "")
              + "; strict fractions " + ", ".join(f"{k}={v:.3f}" for k, v in fr.items()))
    return CriterionResult("3", "Coupling pathwise suite", ok, detail,
                           violation=rep["violations"] > 0, data=rep)


def criterion_9(cfg: SuiteConfig) -> CriterionResult:
    rep = coupling_sweep(SweepFamily(), cfg.n["mutation"], rng.derive_seed(cfg.seed, 9),
                         assertions="full", invert_priority=True, workers=cfg.workers)
    ok = rep["violations"] > 0 and "life_dominance" in rep["violated_checks"]
    return CriterionResult(
        "9", "Mutation sensitivity (tracer priority inverted)", ok,
        f"{rep['violations']}/{rep['runs']} runs violated {rep['violated_checks']}")


# --- 4: distributional identities -----------------------------------------------

def exact_identity_instances(count: int = 24, seed: int = 4, cap: int = 60_000):
    """Small instances (<= 5 vertices, T <= 4, <= 3 background particles) within budget."""
    budget = EnumerationBudget(horizon=4, max_a=5, max_branching=4, cap=cap)
    out = []
    r = 0
    while len(out) < count:
        s = rng.derive_seed(seed, r)
        r += 1
        n = 2 + rng.index(rng.hash64(s, rng.MISC, 1), 4)
        g = random_connected_graph(n, s)
        T = 2 + rng.index(rng.hash64(s, rng.MISC, 2), 3)
        xi0 = {}
        budget_particles = 1 + rng.index(rng.hash64(s, rng.MISC, 3), 3)
        for i in range(budget_particles):
            v = rng.index(rng.hash64(s, rng.MISC, 4, i), n)
            xi0[v] = xi0.get(v, 0) + (1 if rng.uniform(s, rng.MISC, 5, i) < 0.4 else -1)
        xi0 = InitialCondition(xi0).pruned()
        x = rng.index(rng.hash64(s, rng.MISC, 6), n)
        H = [v for v in range(n) if rng.uniform(s, rng.MISC, 7, v) < 0.5] or [x]
        try:
            budget.check(g, xi0.n_a() + 2, T, walkers=xi0.n_a() + 2,
                         rankings=math.factorial(xi0.n_a() + xi0.n_b()))
        except BudgetExceeded:
            continue
        out.append((g, xi0, x, H, T, budget))
    return out


def _coupled_sample(args):
    g, xi0, x, H, T, master, size = args
    vals = np.empty((size, 3))
    for r in range(size):
        seed = rng.derive_seed(master, r)
        o = run_coupled(g, xi0, x, make_instructions(seed, g), T, H, assertions="invariants")
        vals[r] = (o.phi_x, o.phi_y, o.phi_xy)
    return vals


def criterion_4(cfg: SuiteConfig) -> list[CriterionResult]:
    instances = exact_identity_instances(seed=rng.derive_seed(cfg.seed, 4))
    mismatches = []
    for i, (g, xi0, x, H, T, budget) in enumerate(instances):
        m = coupled_marginals(g, xi0, x, T, H, budget=budget)
        direct = count_dp(g, xi0, T, H)
        direct_x = count_dp(g, xi0.plus_a(x), T, H)
        direct_xx = count_dp(g, xi0.plus_a(x, 2), T, H)
        checks = {"phi": m["phi"] == direct, "phi_x": m["phi_x"] == direct_x,
                  "phi_y": m["phi_y"] == direct_x, "phi_xy": m["phi_xy"] == direct_xx,
                  "phi_yx": m["phi_yx"] == direct_xx}
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            mismatches.append((i, g.name, bad))
    exact = CriterionResult(
        "4", "Distributional identities (exact rational laws)", not mismatches,
        f"{len(instances)} instances; laws of V^X, V^Y vs xi^x and V^XY, hat V^YX vs xi^xx "
        f"{'all equal' if not mismatches else f'differ on {mismatches}'}")

    E, size = cfg.n["ks_experiments"], cfg.n["ks_size"]
    not_rejected = {"X": 0, "Y": 0, "XY": 0}
    jobs = []
    for e in range(E):
        s = rng.derive_seed(cfg.seed, 40, e)
        n = 6 + rng.index(rng.hash64(s, rng.MISC, 1), 3)
        g = random_connected_graph(n, s)
        xi0 = InitialCondition({v: [-2, -1, -1, 0, 1, 2][rng.index(rng.hash64(s, rng.MISC, 2, v), 6)]
                                for v in range(n)}).pruned()
        x = rng.index(rng.hash64(s, rng.MISC, 3), n)
        H = [v for v in range(n) if rng.uniform(s, rng.MISC, 4, v) < 0.5] or [x]
        T = 8
        jobs.append((g, xi0, x, H, T, rng.derive_seed(s, 1), size))
    coupled = parallel_map(_coupled_sample, jobs, cfg.workers)
    for (g, xi0, x, H, T, master, _), vals in zip(jobs, coupled):
        dx = simulate_batch(g, xi0.plus_a(x), T, rng.derive_seed(master, 2), size, H=H).V
        dxx = simulate_batch(g, xi0.plus_a(x, 2), T, rng.derive_seed(master, 3), size, H=H).V
        for key, col, ref in (("X", 0, dx), ("Y", 1, dx), ("XY", 2, dxx)):
            res = two_sample_equal(EmpiricalSample.of(vals[:, col]), EmpiricalSample.of(ref))
            not_rejected[key] += res.decision == "not_rejected"
    frac = {k: v / E for k, v in not_rejected.items()}
    ks = CriterionResult(
        "4b", "Distributional identities at scale (two-sample KS, 1%)",
        all(f >= 0.95 for f in frac.values()),
        f"{E} paired experiments of {size}+{size} replicas; not rejected: "
        + ", ".join(f"V^{k} {v}/{E}" for k, v in not_rejected.items()))
    return [exact, ks]


# --- 5: discrete convexity -------------------------------------------------------

def criterion_5(cfg: SuiteConfig) -> CriterionResult:
    res = run_h_curve()
    inst = res.summary["instances"]
    n_phi = len(next(iter(inst.values())))
    return CriterionResult(
        "5", "Discrete convexity Dh >= 0, D2h >= 0", not res.falsified,
        f"{len(inst)} instances x {n_phi} test functions (identity, square, 3 stop-loss), "
        f"k in -2..2; failures: {res.falsified or 'none'}")


# --- 6: theorem-level icx monotonicity ----------------------------------------------

def criterion_6(cfg: SuiteConfig) -> CriterionResult:
    half = {0: Fraction(1, 2), 2: Fraction(1, 2)}
    N = cfg.n["minimal"]
    parts = []
    ok = True
    for i, (g, T) in enumerate(((build_path(5), 6), (build_complete_tree(2, 3), 6))):
        budget = EnumerationBudget(horizon=T, max_a=10, cap=400_000) if g.n <= 5 else None
        sX, sY, exact, _ = minimal_config(g, Fraction(1, 2), half, half, T, [0], N,
                                          rng.derive_seed(cfg.seed, 6, i), exact_budget=budget)
        mc = icx_dominates(sX, sY)
        txt = f"{g.name}: MC {mc.verdict} (min lower band {min(mc.lower):.4f})"
        good = mc.verdict != "fails"
        if exact is not None:
            ev = icx_dominates(*exact)
            txt += f", exact {ev.verdict}"
            good = good and ev.verdict == "holds"
        ok = ok and good
        parts.append(txt)
    return CriterionResult("6", "Minimal-config icx monotonicity V <=icx V'", ok,
                           "; ".join(parts) + f"; N={N}")


# --- 7: IDLA equivalence --------------------------------------------------------------

def criterion_7(cfg: SuiteConfig) -> list[CriterionResult]:
    cutoff = 40
    bad = []
    for g in (build_path(4), build_star(5)):
        for n in (1, 2, 3):
            dlas, idla = idla_exact_pair(g, 0, n, cutoff)
            if dlas != idla:
                bad.append(f"{g.name} n={n}")
    exact = CriterionResult(
        "7", "IDLA equivalence (exact laws, values < 40 plus tail mass)", not bad,
        "4-path and 5-star, n = 1, 2, 3: " + ("all equal" if not bad else f"differ: {bad}"))
    N = cfg.n["idla"]
    verdicts = []
    for i, g in enumerate((build_path(4), build_star(5))):
        s = rng.derive_seed(cfg.seed, 7, i)
        L = idla_via_dlas(g, 0, {1: 1}, N, rng.derive_seed(s, 0))
        L1 = idla_via_dlas(g, 0, {0: Fraction(1, 2), 2: Fraction(1, 2)}, N, rng.derive_seed(s, 1))
        verdicts.append((g.name, icx_dominates(EmpiricalSample.of(L), EmpiricalSample.of(L1))))
    mc = CriterionResult(
        "7b", "IDLA icx L(delta_1) <=icx L(1/2 delta_0 + 1/2 delta_2)",
        all(v.verdict != "fails" for _, v in verdicts),
        "; ".join(f"{name}: {v.verdict}" for name, v in verdicts) + f"; N={N}")
    return [exact, mc]


# --- 8: finite approximation ----------------------------------------------------------

def criterion_8(cfg: SuiteConfig) -> CriterionResult:
    T = 20
    rep = window_convergence("xi2", T, [2 * T, 4 * T, 8 * T], cfg.n["window"],
                             rng.derive_seed(cfg.seed, 8), workers=cfg.workers)
    fr = [p["stable_fraction"] for p in rep["pairs"]]
    return CriterionResult(
        "8", "Finite approximation (continuous time, radii 40/80/160)", fr[-1] >= 0.999,
        f"matched-seed stable fractions {fr[0]:.4f} (40->80), {fr[1]:.4f} (80->160); "
        f"replicas={rep['replicas']}")


CRITERIA: dict[int, Callable] = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
                                 5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
                                 9: criterion_9}


def run_suite(cfg: SuiteConfig, criteria=None, report: Callable | None = None) -> list[CriterionResult]:
    """Run the chosen criteria in order; ``report`` is called with each result."""
    results = []
    for c in (criteria or sorted(CRITERIA)):
        if c == 9 and cfg.invert_priority:
            continue
        out = CRITERIA[c](cfg)
        for r in out if isinstance(out, list) else [out]:
            results.append(r)
            if report is not None:
                report(r)
    return results


def exit_code(results: list[CriterionResult]) -> int:
    if any(r.violation for r in results):
        return 2
    if any(not r.passed for r in results):
        return 3
    return 0
