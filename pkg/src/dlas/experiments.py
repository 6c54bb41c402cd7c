"""Preset experiments: the example on Z, the minimal configuration, parking,
IDLA, coupling sweeps, h-curves and finite-window convergence.

Every preset returns an :class:`ExperimentResult`; :func:`write_outputs`
turns it into ``summary.json``, ``replicas.csv`` and ``stoploss.tsv``.
Replica ``r`` of a preset with master seed ``s`` always uses the seed
``derive_seed(s, r)``, so results do not depend on chunking or worker count.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import rng
from .batch import simulate_batch
from .engine import System
from .graph import (Graph, build_graph, build_interval, build_path, build_star,
                    random_connected_graph, validate_pmf)
from .instructions import (CONTINUOUS, DISCRETE, ConcreteForm, InitialCondition, InitialSpec,
                           make_instructions, sample_initial)
from .oracle import (BudgetExceeded, EnumerationBudget, ExactDistribution, count_dp,
                     enumerate_idla_exact, exact_h_curves, parking_root_law)
from .orders import (EmpiricalSample, consequence_panel, default_grid, icx_dominates,
                     icx_on_pmfs, write_stoploss_tsv)
from .tracer import CouplingViolation, run_coupled

VARIANTS = ("xi", "xi1", "xi2")
VARIANT_ALIASES = {"xi": "xi", "ξ": "xi", "xi'": "xi1", "ξ'": "xi1", "xi1": "xi1",
                   "xi''": "xi2", "ξ''": "xi2", "xi2": "xi2"}


class ExperimentError(ValueError):
    """A preset precondition failed (reported as a usage/config error)."""


@dataclass
class ExperimentResult:
    preset: str
    summary: dict
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    falsified: list = field(default_factory=list)


# --- helpers -----------------------------------------------------------------

def parallel_map(fn: Callable, jobs: Sequence, workers: int = 1) -> list:
    """Ordered map; a process pool when ``workers > 1``."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def jsonable(v):
    if isinstance(v, Fraction):
        return {"fraction": f"{v.numerator}/{v.denominator}", "value": float(v)}
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def exact_summary(d: ExactDistribution) -> dict:
    out = {"support": list(d.support),
           "probabilities": [f"{p.numerator}/{p.denominator}" for p in d.probabilities]}
    if d.tail:
        out["tail"] = {"cutoff": d.cutoff, "mass": f"{d.tail.numerator}/{d.tail.denominator}"}
    else:
        out["mean"] = float(d.mean)
    return out


def sample_summary(values: np.ndarray) -> dict:
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    p0 = float(np.mean(values == 0))
    return {
        "n": int(n),
        "mean": float(values.mean()),
        "mean_se": float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "var": float(values.var(ddof=1)) if n > 1 else 0.0,
        "p_zero": p0,
        "p_zero_se": math.sqrt(p0 * (1 - p0) / n),
        "max": float(values.max()),
    }


def _scalar_runs(args) -> np.ndarray:
    """Continuous-time (or scalar discrete) replicas ``lo..hi`` of one preset."""
    graph, init, T, H, master, lo, hi, time_model = args
    out = np.empty(hi - lo)
    for i, r in enumerate(range(lo, hi)):
        seed = rng.derive_seed(master, r)
        xi0 = sample_initial(init, graph, seed) if isinstance(init, InitialSpec) else init
        system = System(graph, xi0, make_instructions(seed, graph, time_model), H=H)
        system.run(T)
        out[i] = system.totals["xi"]
    return out


def run_replicas(graph: Graph, init, T: float, H: Iterable[int], master: int, replicas: int, *,
                 time_model: str = DISCRETE, workers: int = 1) -> np.ndarray:
    """Occupation time of ``H`` for ``replicas`` seeded runs."""
    H = list(H)
    if time_model == DISCRETE:
        return simulate_batch(graph, init, T, master, replicas, H=H).V
    jobs = [(graph, init, T, H, master, lo, hi, time_model)
            for lo, hi in _chunks(replicas, 500)]
    parts = parallel_map(_scalar_runs, jobs, workers)
    return np.concatenate(parts) if parts else np.zeros(0)


# --- example on Z ----------------------------------------------------------------

def example_window(T: int) -> tuple[int, int]:
    return (-(T + 2), T + 12)


def example_line_spec(graph: Graph, variant: str) -> InitialSpec:
    v = VARIANT_ALIASES.get(variant)
    if v is None:
        raise ExperimentError(f"unknown example-line variant {variant!r}")
    one, two = graph.vertex(1), graph.vertex(2)
    if v == "xi":
        pmfs = {one: {-1: 1}, two: {1: 1}}
    elif v == "xi1":
        pmfs = {one: {0: Fraction(1, 2), -2: Fraction(1, 2)}, two: {1: 1}}
    else:
        pmfs = {one: {0: Fraction(1, 2), -2: Fraction(1, 2)},
                two: {0: Fraction(1, 2), 2: Fraction(1, 2)}}
    return InitialSpec(site_pmfs=pmfs)


def _line_graph(T: float, window, time_model: str) -> Graph:
    lo, hi = example_window(int(T)) if window is None else (int(window[0]), int(window[1]))
    if not (lo <= 0 and hi >= 2):
        raise ExperimentError(f"window [{lo}, {hi}] must contain 0, 1 and 2")
    if time_model == DISCRETE and (lo > -T or hi < 2 + T):
        raise ExperimentError(
            f"window [{lo}, {hi}] too small: a discrete walk can exit within T={T} "
            f"(need lo <= {-int(T)} and hi >= {int(T) + 2})")
    return build_interval(lo, hi)


def example_line_values(variant: str, T: int = 20, window=None, replicas: int = 100_000,
                        seed: int = 0, *, time_model: str = DISCRETE,
                        workers: int = 1) -> np.ndarray:
    """Per-replica ``V_T`` with ``H = {0}`` for one variant of the example on Z."""
    g = _line_graph(T, window, time_model)
    spec = example_line_spec(g, variant)
    return run_replicas(g, spec, T, [g.vertex(0)], seed, replicas, time_model=time_model,
                        workers=workers)


def example_line(variant: str, T: int = 20, window=None, replicas: int = 100_000,
                 seed: int = 0, *, time_model: str = DISCRETE, workers: int = 1) -> EmpiricalSample:
    """Empirical law of ``V_T`` for one variant of the example on Z."""
    V = example_line_values(variant, T, window, replicas, seed, time_model=time_model,
                            workers=workers)
    return EmpiricalSample.of(V, seed, VARIANT_ALIASES[variant])


def example_line_exact(variant: str, T: int) -> ExactDistribution:
    """Exact law of ``V_T`` (discrete time) by the count DP on an exit-proof window."""
    g = _line_graph(T, (-T, T + 2), DISCRETE)
    return count_dp(g, example_line_spec(g, variant), T, [g.vertex(0)])


def run_example_line(T: int = 20, window=None, replicas: int = 100_000, seed: int = 0, *,
                     time_model: str = DISCRETE, workers: int = 1, exact: bool = True,
                     level: float = 0.99) -> ExperimentResult:
    raw = {v: example_line_values(v, T, window, replicas, rng.derive_seed(seed, i),
                                  time_model=time_model, workers=workers)
           for i, v in enumerate(VARIANTS)}
    samples = {v: EmpiricalSample.of(raw[v], seed, v) for v in VARIANTS}
    summary: dict = {"T": T, "window": list(window or example_window(T)),
                     "replicas": replicas, "time_model": time_model,
                     "variants": {v: sample_summary(s.values) for v, s in samples.items()}}
    if exact and time_model == DISCRETE:
        summary["exact"] = {}
        for v in VARIANTS:
            law = example_line_exact(v, T)
            summary["exact"][v] = {"p_zero": jsonable(law.prob(0)), "mean": jsonable(law.mean)}
    verdicts = {
        "V<=icx V'": icx_dominates(samples["xi"], samples["xi1"], level=level),
        "V'<=icx V''": icx_dominates(samples["xi1"], samples["xi2"], level=level),
    }
    summary["icx"] = {k: _verdict_brief(v) for k, v in verdicts.items()}
    summary["panel"] = {"V vs V'": consequence_panel(samples["xi"], samples["xi1"], level=level),
                        "V' vs V''": consequence_panel(samples["xi1"], samples["xi2"],
                                                       level=level)}
    falsified = [k for k, v in verdicts.items() if v.verdict == "fails"]
    return ExperimentResult("example-line", summary, {f"V_{v}": raw[v] for v in VARIANTS},
                            samples, falsified=falsified)


def _verdict_brief(v) -> dict:
    out = {"relation": v.relation, "verdict": v.verdict, "mode": v.mode}
    if v.witness is not None:
        out["witness"] = jsonable(v.witness)
        out["witness_gap"] = jsonable(v.witness_gap)
        out["witness_band"] = jsonable(list(v.witness_band))
    if v.lower:
        out["min_lower_band"] = float(min(v.lower))
    return out


# --- minimal configuration -------------------------------------------------------

def concrete_specs(p, alpha, beta) -> tuple[InitialSpec, InitialSpec]:
    """``(xi_0, xi_0')``: the +-1 law and its volatile counterpart."""
    return (InitialSpec(concrete=ConcreteForm(p, alpha, beta, primed=False)),
            InitialSpec(concrete=ConcreteForm(p, alpha, beta, primed=True)))


def minimal_config(graph: Graph, p, alpha, beta, T: float, H: Iterable[int], replicas: int,
                   seed: int, *, time_model: str = DISCRETE, workers: int = 1,
                   exact_budget: EnumerationBudget | None = None):
    """Paired laws ``(V, V')``; exact laws are added when the count DP fits the budget."""
    spec, spec1 = concrete_specs(p, alpha, beta)
    H = list(H)
    V = run_replicas(graph, spec, T, H, rng.derive_seed(seed, 0), replicas,
                     time_model=time_model, workers=workers)
    V1 = run_replicas(graph, spec1, T, H, rng.derive_seed(seed, 1), replicas,
                      time_model=time_model, workers=workers)
    exact = None
    if exact_budget is not None and time_model == DISCRETE:
        try:
            exact = (count_dp(graph, spec, T, H, max_states=exact_budget.cap),
                     count_dp(graph, spec1, T, H, max_states=exact_budget.cap))
        except BudgetExceeded:
            exact = None
    return EmpiricalSample.of(V, seed, "V"), EmpiricalSample.of(V1, seed, "V'"), exact, (V, V1)


def run_minimal_config(graph: Graph, p, alpha, beta, T: float, H, replicas: int, seed: int, *,
                       time_model: str = DISCRETE, workers: int = 1, level: float = 0.99,
                       exact_budget: EnumerationBudget | None = None) -> ExperimentResult:
    sX, sY, exact, (V, V1) = minimal_config(graph, p, alpha, beta, T, H, replicas, seed,
                                            time_model=time_model, workers=workers,
                                            exact_budget=exact_budget)
    verdict = icx_dominates(sX, sY, level=level)
    summary = {"graph": graph.name, "T": T, "H": [graph.labels[v] for v in H],
               "replicas": replicas, "V": sample_summary(V), "V'": sample_summary(V1),
               "icx": _verdict_brief(verdict), "panel": consequence_panel(sX, sY, level=level)}
    falsified = ["V<=icx V'"] if verdict.verdict == "fails" else []
    if exact is not None:
        ev = icx_dominates(*exact)
        summary["exact"] = {"V": exact_summary(exact[0]), "V'": exact_summary(exact[1]),
                            "icx": _verdict_brief(ev)}
        if ev.verdict == "fails":
            falsified.append("exact V<=icx V'")
    return ExperimentResult("minimal-config", summary, {"V": V, "V'": V1},
                            {"V": sX, "V'": sY}, falsified=falsified)


# --- parking ---------------------------------------------------------------------

def parking_spec(eta_pmf) -> InitialSpec:
    """One B per site plus ``eta`` A's, with the overlapping pair cancelled."""
    eta = validate_pmf(eta_pmf)
    if any(k < 0 for k in eta):
        raise ExperimentError("eta must live on the nonnegative integers")
    return InitialSpec(default={int(k) - 1: p for k, p in eta_pmf.items()})


def parking_root_count(tree: Graph, eta_pmf, replicas: int, seed: int) -> np.ndarray:
    if not tree.directed_to_root:
        raise ExperimentError("parking needs a tree directed to its root")
    res = simulate_batch(tree, parking_spec(eta_pmf), math.inf, seed, replicas, H=[tree.root])
    return res.root_arrivals


def run_parking(tree: Graph, eta_pmf, replicas: int, seed: int, *,
                level: float = 0.99) -> ExperimentResult:
    arrivals = parking_root_count(tree, eta_pmf, replicas, seed)
    spec = parking_spec(eta_pmf)
    summary = {"tree": tree.name, "vertices": tree.n, "replicas": replicas,
               "root_arrivals": sample_summary(arrivals)}
    law = parking_root_law(tree, spec)
    summary["exact"] = exact_summary(law)
    summary["band_check"] = binomial_band_check(law, arrivals)
    return ExperimentResult("parking", summary, {"root_arrivals": arrivals},
                            {"root_arrivals": EmpiricalSample.of(arrivals, seed)})


def binomial_band_check(law: ExactDistribution, values: np.ndarray, sigmas: float = 4.0) -> dict:
    """Does every exact atom lie within ``sigmas`` binomial standard errors?"""
    n = len(values)
    worst = 0.0
    for v, p in zip(law.support, law.probabilities):
        pf = float(p)
        freq = float(np.mean(values == v))
        se = math.sqrt(pf * (1 - pf) / n) if 0 < pf < 1 else 1.0 / n
        worst = max(worst, abs(freq - pf) / se)
    outside = float(np.mean(~np.isin(values, np.asarray(law.support, dtype=np.float64))))
    return {"max_z": worst, "mass_outside_support": outside,
            "ok": bool(worst <= sigmas and outside == 0.0)}


# --- IDLA ------------------------------------------------------------------------

def idla_spec(graph: Graph, root: int, n_or_eta) -> InitialSpec:
    if isinstance(n_or_eta, dict):
        eta = validate_pmf(n_or_eta)
        top = max(eta)
        pmf = n_or_eta
    else:
        top = int(n_or_eta)
        pmf = {top: 1}
    if min(int(k) for k in pmf) < 0:
        raise ExperimentError("particle counts must be nonnegative")
    if top > graph.n - 1:
        raise ExperimentError(
            f"n={top} exceeds the {graph.n - 1} non-root sites; the run would not terminate")
    return InitialSpec(site_pmfs={root: pmf}, default=-1)


def idla_via_dlas(graph: Graph, root: int, n_or_eta, replicas: int, seed: int) -> np.ndarray:
    """Aggregate motion time run to extinction (``T = inf``)."""
    if not graph.is_connected():
        raise ExperimentError("IDLA needs a connected graph")
    spec = idla_spec(graph, root, n_or_eta)
    return simulate_batch(graph, spec, math.inf, seed, replicas).V


def idla_exact_pair(graph: Graph, root: int, n: int, cutoff: int):
    """(DLAS motion-time law, sequential IDLA law), both truncated at ``cutoff``."""
    xi0 = InitialCondition({root: n, **{v: -1 for v in range(graph.n) if v != root}}).pruned()
    dlas = count_dp(graph, xi0, math.inf, statistic="motion", cutoff=cutoff)
    idla = enumerate_idla_exact(graph, root, n, cutoff=cutoff)
    return dlas, idla


def _as_pmf(n_or_eta) -> dict:
    return n_or_eta if isinstance(n_or_eta, dict) else {int(n_or_eta): 1}


def run_idla(graph: Graph, root: int, eta, eta_prime, replicas: int, seed: int, *,
             exact_n: Sequence[int] = (), cutoff: int = 40, level: float = 0.99) -> ExperimentResult:
    L = idla_via_dlas(graph, root, eta, replicas, rng.derive_seed(seed, 0))
    L1 = idla_via_dlas(graph, root, eta_prime, replicas, rng.derive_seed(seed, 1))
    sX, sY = EmpiricalSample.of(L, seed, "L(eta)"), EmpiricalSample.of(L1, seed, "L(eta')")
    verdict = icx_dominates(sX, sY, level=level)
    summary = {"graph": graph.name, "root": root, "replicas": replicas,
               "eta_icx": _verdict_brief(icx_on_pmfs(_as_pmf(eta), _as_pmf(eta_prime))),
               "L_eta": sample_summary(L), "L_eta_prime": sample_summary(L1),
               "icx": _verdict_brief(verdict)}
    summary["exact"] = {}
    for n in exact_n:
        dlas, idla = idla_exact_pair(graph, root, n, cutoff)
        summary["exact"][str(n)] = {"equal": dlas == idla, "dlas": exact_summary(dlas),
                                    "idla": exact_summary(idla)}
    falsified = ["L(eta)<=icx L(eta')"] if verdict.verdict == "fails" else []
    return ExperimentResult("idla", summary, {"L_eta": L, "L_eta_prime": L1},
                            {"L_eta": sX, "L_eta_prime": sY}, falsified=falsified)


# --- coupling sweep ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepFamily:
    """Random instances for the coupling assertions.

    Each run draws a graph (random connected on ``min_vertices..max_vertices``
    vertices, or the example-line arena with probability ``line_fraction``),
    background counts in ``count_range`` with density ``density``, a tracer
    site ``x`` and ``xi_0(x) = k`` with ``k`` cycling through ``k_values``.
    """

    min_vertices: int = 2
    max_vertices: int = 8
    k_values: tuple[int, ...] = (-2, -1, 0, 1, 2)
    count_range: tuple[int, int] = (-2, 2)
    density: float = 0.5
    horizon: float = 6.0
    time_models: tuple[str, ...] = (DISCRETE, CONTINUOUS)
    line_fraction: float = 0.1
    line_horizon: float = 8.0


def sweep_instance(family: SweepFamily, master: int, r: int):
    seed = rng.derive_seed(master, r)
    u = rng.uniform(seed, rng.MISC, 1)
    k = family.k_values[r % len(family.k_values)]
    time_model = family.time_models[(r // len(family.k_values)) % len(family.time_models)]
    if u < family.line_fraction:
        T = family.line_horizon
        g = build_interval(-int(T) - 2, int(T) + 4)
        xi0 = {g.vertex(1): -int(1 + rng.index(rng.hash64(seed, rng.MISC, 2), 2)),
               g.vertex(2): int(rng.index(rng.hash64(seed, rng.MISC, 3), 3))}
        x = g.vertex([0, 1, 2][rng.index(rng.hash64(seed, rng.MISC, 4), 3)])
        H = [g.vertex(0)]
    else:
        T = family.horizon
        span = family.max_vertices - family.min_vertices + 1
        n = family.min_vertices + rng.index(rng.hash64(seed, rng.MISC, 5), span)
        g = random_connected_graph(n, seed)
        lo, hi = family.count_range
        xi0 = {}
        for v in range(n):
            if rng.uniform(seed, rng.MISC, 6, v) < family.density:
                xi0[v] = lo + rng.index(rng.hash64(seed, rng.MISC, 7, v), hi - lo + 1)
        x = rng.index(rng.hash64(seed, rng.MISC, 8), n)
        H = [v for v in range(n) if rng.uniform(seed, rng.MISC, 9, v) < 0.5] or [x]
    xi0[x] = k
    return g, InitialCondition(xi0).pruned(), x, H, T, seed, time_model


def _sweep_chunk(args):
    family, master, lo, hi, assertions, invert = args
    strict = {"d_x": 0, "d_y": 0, "e": 0, "life": 0}
    violations = []
    for r in range(lo, hi):
        g, xi0, x, H, T, seed, time_model = sweep_instance(family, master, r)
        instr = make_instructions(seed, g, time_model)
        try:
            out = run_coupled(g, xi0, x, instr, T, H, assertions=assertions,
                              invert_priority=invert)
        except CouplingViolation as exc:
            violations.append({"run": r, "seed": seed, "check": exc.check,
                               "message": str(exc).split(" | ")[0], "replay": exc.dump})
            continue
        for key, flag in out.strict.items():
            strict[key] += int(flag)
    return strict, violations


def coupling_sweep(family: SweepFamily, runs: int, seed: int, *, assertions: str = "full",
                   invert_priority: bool = False, workers: int = 1) -> dict:
    jobs = [(family, seed, lo, hi, assertions, invert_priority)
            for lo, hi in _chunks(runs, 250)]
    strict = {"d_x": 0, "d_y": 0, "e": 0, "life": 0}
    violations = []
    for s, v in parallel_map(_sweep_chunk, jobs, workers):
        for key in strict:
            strict[key] += s[key]
        violations.extend(v)
    completed = runs - len(violations)
    return {
        "runs": runs,
        "violations": len(violations),
        "violation_log": violations[:50],
        "violated_checks": sorted({v["check"] for v in violations}),
        "strict_counts": strict,
        "strict_fractions": {k: (c / completed if completed else 0.0) for k, c in strict.items()},
        "invert_priority": invert_priority,
    }


def run_coupling_sweep(family: SweepFamily, runs: int, seed: int, *, assertions: str = "full",
                       invert_priority: bool = False, workers: int = 1) -> ExperimentResult:
    report = coupling_sweep(family, runs, seed, assertions=assertions,
                            invert_priority=invert_priority, workers=workers)
    return ExperimentResult("coupling-sweep", report, violations=report["violation_log"])


# --- h-curves --------------------------------------------------------------------

H_CURVE_PHIS = ("identity", "square")


def h_curve_instances() -> list[tuple[str, Graph, InitialCondition, int, list[int], int]]:
    """Small instances for the discrete convexity check: (name, graph, xi0, x, H, T)."""
    p3, p4, star, cyc = build_path(3), build_path(4), build_star(4), build_graph(
        4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    tri = build_graph(3, [(0, 1), (1, 2), (0, 2)])
    return [
        ("path4-B-neighbor", p4, InitialCondition({1: -1}), 0, [0, 1, 2, 3], 3),
        ("path4-B-neighbor-H0", p4, InitialCondition({1: -1}), 0, [0], 4),
        ("path4-A-and-B", p4, InitialCondition({2: -1, 3: 1}), 1, [0, 1], 3),
        ("path3-two-B", p3, InitialCondition({0: -2}), 1, [1, 2], 4),
        ("path3-free", p3, InitialCondition({}), 0, [0, 1, 2], 3),
        ("star-B-leaves", star, InitialCondition({1: -1, 2: -1}), 0, [0], 3),
        ("star-mixed", star, InitialCondition({1: -1, 3: 1}), 2, [0, 2], 3),
        ("cycle-B", cyc, InitialCondition({2: -2}), 0, [0, 1], 3),
        ("cycle-A-B", cyc, InitialCondition({1: 1, 2: -1}), 3, [2, 3], 3),
        ("triangle", tri, InitialCondition({1: -1, 2: 1}), 0, [0, 1, 2], 3),
        ("path4-far-H", p4, InitialCondition({1: -1}), 3, [0], 4),
        ("random5-a", random_connected_graph(5, 11), InitialCondition({1: -1, 3: -1, 4: 1}),
         0, [0, 2], 4),
        ("random5-b", random_connected_graph(5, 12), InitialCondition({2: -2, 4: 1}), 1, [1], 4),
        ("random4-c", random_connected_graph(4, 13), InitialCondition({0: 1, 3: -1}), 2,
         [0, 1, 2, 3], 4),
    ]


def h_curve_report(graph: Graph, xi0, x: int, H, T: int, phis, k_range=range(-2, 3),
                   budget: EnumerationBudget | None = None) -> dict:
    budget = budget or EnumerationBudget(horizon=max(T, 6), max_a=8)
    out = {}
    curves = exact_h_curves(graph, xi0, x, k_range, phis, T, H, budget=budget)
    for phi, rows in zip(phis, curves):
        key = phi if isinstance(phi, str) else f"stoploss@{phi[1]}"
        out[key] = {"rows": [[k, str(h), str(dh), str(d2h)] for k, h, dh, d2h in rows],
                    "ok": all(dh >= 0 and d2h >= 0 for _, _, dh, d2h in rows)}
    return out


def default_phis(T: int, H) -> list:
    """Identity, square and stop-loss at three grid points of the range of V_T."""
    top = T * 2
    return list(H_CURVE_PHIS) + [("stoploss", a) for a in (0.5, top / 4, top / 2)]


def run_h_curve(instances=None) -> ExperimentResult:
    instances = instances or h_curve_instances()
    summary = {}
    bad = []
    for name, g, xi0, x, H, T in instances:
        rep = h_curve_report(g, xi0, x, H, T, default_phis(T, H))
        summary[name] = rep
        bad.extend(f"{name}:{phi}" for phi, r in rep.items() if not r["ok"])
    return ExperimentResult("h-curve", {"instances": summary, "failures": bad}, falsified=bad)


# --- finite-window convergence ---------------------------------------------------

def window_convergence(variant: str, T: float, radii: Sequence[int], replicas: int, seed: int, *,
                       time_model: str = CONTINUOUS, workers: int = 1) -> dict:
    """Matched-seed ``V_T`` on windows ``[-R, R]`` around ``H = {0}``."""
    radii = list(radii)
    if radii != sorted(set(radii)):
        raise ExperimentError("radii must be strictly increasing")
    values = {}
    for R in radii:
        if R < 2:
            raise ExperimentError("radius must be at least 2 to contain the initial particles")
        g = build_interval(-R, R)
        spec = example_line_spec(g, variant)
        values[R] = run_replicas(g, spec, T, [g.vertex(0)], seed, replicas,
                                 time_model=time_model, workers=workers)
    pairs = []
    for a, b in zip(radii, radii[1:]):
        same = values[a] == values[b]
        pairs.append({"radii": [a, b], "stable_fraction": float(same.mean()),
                      "changed_replicas": np.nonzero(~same)[0][:20].tolist()})
    return {"variant": variant, "T": T, "radii": radii, "replicas": replicas,
            "time_model": time_model, "pairs": pairs,
            "means": {str(R): float(v.mean()) for R, v in values.items()},
            "values": values}


def run_window_convergence(variant: str, T: float, radii, replicas: int, seed: int, *,
                           time_model: str = CONTINUOUS, workers: int = 1,
                           threshold: float = 0.999) -> ExperimentResult:
    rep = window_convergence(variant, T, radii, replicas, seed, time_model=time_model,
                             workers=workers)
    values = rep.pop("values")
    last = rep["pairs"][-1]["stable_fraction"] if rep["pairs"] else 1.0
    rep["stabilized"] = last >= threshold
    return ExperimentResult("window-convergence", rep,
                            {f"V_R{R}": v for R, v in values.items()},
                            {f"R{R}": EmpiricalSample.of(v, seed) for R, v in values.items()})


# --- output files ------------------------------------------------------------------

def write_outputs(result: ExperimentResult, out_dir, stamp: dict) -> list[str]:
    """Write summary.json, replicas.csv and stoploss.tsv; returns the file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"preset": result.preset, **stamp, "summary": jsonable(result.summary),
               "violations": jsonable(result.violations), "falsified": result.falsified}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True,
                                                 ensure_ascii=False) + "\n", encoding="utf-8")
    names = list(result.columns)
    length = max((len(c) for c in result.columns.values()), default=0)
    with open(out / "replicas.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "spec_hash", "master_seed"] + names)
        for i in range(length):
            row = [i, stamp.get("spec_hash", ""), stamp.get("master_seed", "")]
            for name in names:
                col = result.columns[name]
                row.append(_fmt(col[i]) if i < len(col) else "")
            w.writerow(row)
    curves = result.curves
    if curves:
        grid = _curve_grid(list(curves.values()))
    else:
        grid = []
    write_stoploss_tsv(out / "stoploss.tsv", curves, grid,
                       header=f"spec_hash={stamp.get('spec_hash', '')} "
                              f"master_seed={stamp.get('master_seed', '')}")
    return ["summary.json", "replicas.csv", "stoploss.tsv"]


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _curve_grid(dists) -> list[float]:
    samples = [d for d in dists if isinstance(d, EmpiricalSample)]
    pts: set[float] = set()
    for d in dists:
        if isinstance(d, ExactDistribution):
            pts.update(float(v) for v in d.support)
    if samples:
        merged = EmpiricalSample.of(np.concatenate([s.values for s in samples]))
        pts.update(default_grid(merged, merged).tolist())
    return sorted(pts)
