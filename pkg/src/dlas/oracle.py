"""Exact ground truth for small discrete-time instances.

Two independent routes:

* :func:`count_dp` propagates the law of the count vector ``xi_t`` forward in
  time with rational weights.  A-particles on one site are exchangeable, so a
  round of jumps is a product of multinomials; no instruction oracle is used.
* :func:`enumerate_worlds` drives real engine code with
  :class:`ScriptedInstructions`, which branches lazily over every path step and
  every braveness ranking the run actually queries.

Agreement between the two is what the tests and the acceptance suite check.
"""
from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from . import rng
from .graph import Graph
from .instructions import DISCRETE, InitialCondition, InitialSpec


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate, cap):
        super().__init__(f"enumeration refused: estimated {estimate} worlds exceeds cap {cap}")
        self.estimate = estimate
        self.cap = cap


@dataclass(frozen=True)
class ExactDistribution:
    """Finite law with rational masses.

    ``tail`` is the mass of values ``>= cutoff`` that were not resolved (used
    for run-to-extinction statistics whose support is infinite).
    """

    support: tuple
    probabilities: tuple[Fraction, ...]
    tail: Fraction = Fraction(0)
    cutoff: float | None = None

    def __post_init__(self):
        if len(self.support) != len(self.probabilities):
            raise ValueError("support and probabilities differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("duplicate support points")
        if list(self.support) != sorted(self.support):
            raise ValueError("support must be sorted")
        if any(p <= 0 for p in self.probabilities):
            raise ValueError("probabilities must be positive")
        if sum(self.probabilities, Fraction(0)) + self.tail != 1:
            raise ValueError("probabilities do not sum to 1")

    @classmethod
    def from_weights(cls, weights: Mapping, tail: Fraction = Fraction(0),
                     cutoff: float | None = None) -> "ExactDistribution":
        items = sorted((v, Fraction(p)) for v, p in weights.items() if p != 0)
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items), Fraction(tail), cutoff)

    @classmethod
    def point(cls, value) -> "ExactDistribution":
        return cls((value,), (Fraction(1),))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probabilities))

    def prob(self, value) -> Fraction:
        return self.as_dict().get(value, Fraction(0))

    def expect(self, fn: Callable) -> Fraction:
        if self.tail:
            raise ValueError("expectation undefined with unresolved tail mass")
        return sum((p * Fraction(fn(v)) for v, p in zip(self.support, self.probabilities)),
                   Fraction(0))

    @property
    def mean(self) -> Fraction:
        return self.expect(lambda v: v)

    def map(self, fn: Callable) -> "ExactDistribution":
        out: dict = defaultdict(Fraction)
        for v, p in zip(self.support, self.probabilities):
            out[fn(v)] += p
        return ExactDistribution.from_weights(out, self.tail, self.cutoff)

    def truncate(self, cutoff) -> "ExactDistribution":
        """Move all mass at values ``>= cutoff`` into the tail."""
        keep = {v: p for v, p in self.as_dict().items() if v < cutoff}
        tail = self.tail + sum((p for v, p in self.as_dict().items() if v >= cutoff), Fraction(0))
        return ExactDistribution.from_weights(keep, tail, cutoff)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "numerator", "denominator"])
            for v, p in zip(self.support, self.probabilities):
                w.writerow([v, p.numerator, p.denominator])
            if self.tail:
                w.writerow([f">={self.cutoff}", self.tail.numerator, self.tail.denominator])


def mixture(parts: Iterable[tuple[Fraction, ExactDistribution]]) -> ExactDistribution:
    out: dict = defaultdict(Fraction)
    tail = Fraction(0)
    cutoff = None
    for w, d in parts:
        for v, p in zip(d.support, d.probabilities):
            out[v] += w * p
        tail += w * d.tail
        cutoff = d.cutoff if cutoff is None else cutoff
    return ExactDistribution.from_weights(out, tail, cutoff)


@dataclass(frozen=True)
class EnumerationBudget:
    horizon: int = 6
    max_a: int = 6
    max_branching: int = 4
    cap: int = 2_000_000

    def check(self, graph: Graph, a_particles: int, T, walkers: int | None = None,
              rankings: int = 1, worlds: bool = True) -> int:
        """Upper bound on enumerated worlds; raises if any limit is exceeded.

        With ``worlds=False`` (count DP) only the size limits apply; the DP
        caps its own number of live states instead.
        """
        if a_particles > self.max_a:
            raise BudgetExceeded(f"{a_particles} A-particles", f"max_a={self.max_a}")
        if T is not None and not math.isinf(T) and T > self.horizon:
            raise BudgetExceeded(f"horizon {T}", f"horizon={self.horizon}")
        deg = max((len(nb) for nb in graph.neighbors), default=1)
        if deg > self.max_branching:
            raise BudgetExceeded(f"branching {deg}", f"max_branching={self.max_branching}")
        if not worlds:
            return 0
        steps = int(T) if T is not None and not math.isinf(T) else self.horizon
        w = walkers if walkers is not None else a_particles
        estimate = max(deg, 1) ** (w * steps) * rankings
        if estimate > self.cap:
            raise BudgetExceeded(estimate, self.cap)
        return estimate


DEFAULT_BUDGET = EnumerationBudget()


# --- route 1: forward DP on count vectors -----------------------------------

def _compositions(c: int, d: int):
    """All ways to send ``c`` exchangeable walkers to ``d`` targets, with weights."""
    fc = math.factorial(c)
    denom = d ** c
    for cut in itertools.combinations_with_replacement(range(d), c):
        ks = [0] * d
        for i in cut:
            ks[i] += 1
        coef = fc
        for k in ks:
            coef //= math.factorial(k)
        yield ks, Fraction(coef, denom)


def _round(graph: Graph, counts: tuple[int, ...]):
    """Law of the next count vector (and root arrivals) after one discrete round."""
    root = graph.root if graph.directed_to_root else None
    base = [c if c < 0 else 0 for c in counts]
    if root is not None and counts[root] > 0:
        base[root] = counts[root]
    per_site = []
    for z, c in enumerate(counts):
        if c <= 0 or z == root:
            continue
        nbrs = graph.neighbors[z]
        per_site.append([(tuple(nbrs[i] for i, k in enumerate(ks) for _ in range(k)), w)
                         for ks, w in _compositions(c, len(nbrs))])
    out: dict = defaultdict(Fraction)
    for combo in itertools.product(*per_site):
        new = list(base)
        w = Fraction(1)
        arrivals = 0
        for targets, wt in combo:
            w *= wt
            for t in targets:
                new[t] += 1
                if t == root:
                    arrivals += 1
        out[(tuple(new), arrivals)] += w
    return out


def _initial_law(graph: Graph, init) -> dict[tuple[int, ...], Fraction]:
    if isinstance(init, InitialSpec):
        laws = [sorted(init.site_law_exact(v).items()) for v in range(graph.n)]
        out: dict = defaultdict(Fraction)
        for combo in itertools.product(*laws):
            w = Fraction(1)
            for _, p in combo:
                w *= p
            out[tuple(k for k, _ in combo)] += w
        return dict(out)
    xi0 = InitialCondition(init).validate(graph)
    return {tuple(xi0[v] for v in range(graph.n)): Fraction(1)}


def count_dp(graph: Graph, init, T, H: Iterable[int] | None = None, *,
             statistic: str = "occupation", cutoff: int | None = None,
             max_states: int = 2_000_000) -> ExactDistribution:
    """Exact law of a statistic of the discrete-time DLAS by forward DP.

    ``statistic`` is ``"occupation"`` (V_T on ``H``), ``"motion"`` (V_T with
    H = all vertices) or ``"root_arrivals"`` (directed trees).  ``T`` may be
    ``inf``; then the run continues until nothing can move and values
    ``>= cutoff`` are lumped into the tail.
    """
    if statistic == "motion":
        H = range(graph.n)
    elif H is None:
        H = range(graph.n)
    Hset = frozenset(H)
    root = graph.root if graph.directed_to_root else None
    if math.isinf(T) and cutoff is None and statistic != "root_arrivals":
        raise ValueError("run-to-extinction needs a cutoff")
    layer: dict = defaultdict(Fraction)
    for counts, p in _initial_law(graph, init).items():
        start = max(counts[root], 0) if (root is not None and statistic == "root_arrivals") else 0
        layer[(counts, start)] += p
    done: dict = defaultdict(Fraction)
    tail = Fraction(0)
    m = 0
    while layer:
        if not math.isinf(T) and m >= T:
            for (counts, v), p in layer.items():
                done[v] += p
            break
        nxt: dict = defaultdict(Fraction)
        for (counts, v), p in layer.items():
            movers = any(c > 0 and z != root for z, c in enumerate(counts))
            if statistic == "root_arrivals":
                step_value = 0
            else:
                step_value = sum(c for z, c in enumerate(counts) if c > 0 and z in Hset)
            if not movers:
                # only A-particles parked at an absorbing root can remain; an
                # infinite horizon means "until the last move"
                done[v if math.isinf(T) else v + step_value * (T - m)] += p
                continue
            for (new, arrivals), w in _round(graph, counts).items():
                nv = v + (arrivals if statistic == "root_arrivals" else step_value)
                if cutoff is not None and nv >= cutoff:
                    tail += p * w
                    continue
                nxt[(new, nv)] += p * w
        if len(nxt) > max_states:
            raise BudgetExceeded(len(nxt), max_states)
        layer = nxt
        m += 1
    return ExactDistribution.from_weights(done, tail, cutoff if tail else None)


# --- route 2: lazy world enumeration through the real engine ---------------

class ScriptedInstructions:
    """Instruction oracle whose every random answer is a recorded choice.

    It mimics :class:`~dlas.instructions.Instructions` in discrete time.
    Bravenesses are inserted lazily into a growing ranking; each new value
    picks one of ``m + 1`` equally likely slots among the ``m`` values already
    drawn, which yields a uniform ranking.
    """

    time_model = DISCRETE
    discrete = True

    def __init__(self, graph: Graph, prefix: list[list[int]]):
        self.graph = graph
        self.master_seed = -1
        self.prefix = prefix
        self.trace: list[list[int]] = []
        self.steps: dict = {}
        self.brav: dict = {}
        self.ranked: list[Fraction] = []

    def _choose(self, n: int) -> int:
        if n == 1:
            return 0
        pos = len(self.trace)
        if pos < len(self.prefix):
            choice = self.prefix[pos][0]
        else:
            choice = 0
        self.trace.append([choice, n])
        return choice

    def jump(self, x: int, j: int, n: int, here: int) -> int:
        if j < 0:
            return here
        key = (x, j, n)
        if key in self.steps:
            prev_here, there = self.steps[key]
            if prev_here != here:
                raise RuntimeError("inconsistent path query")
            return there
        nbrs = self.graph.neighbors[here]
        if not nbrs:
            there = here
        else:
            there = nbrs[self._choose(len(nbrs))]
        self.steps[key] = (here, there)
        return there

    def step(self, x: int, j: int, n: int) -> int:
        pos = x
        for m in range(1, n + 1):
            pos = self.jump(x, j, m, pos)
        return pos

    def hold(self, x: int, j: int, n: int) -> float:
        return 1.0

    def jump_time(self, x: int, j: int, n: int) -> float:
        return float(n)

    def braveness(self, x: int, j: int, salt: int = 0) -> Fraction:
        key = (x, j)
        if key not in self.brav:
            slot = self._choose(len(self.ranked) + 1)
            lo = self.ranked[slot - 1] if slot > 0 else Fraction(0)
            hi = self.ranked[slot] if slot < len(self.ranked) else Fraction(1)
            value = (lo + hi) / 2
            self.ranked.insert(slot, value)
            self.brav[key] = value
        return self.brav[key]

    def weight(self) -> Fraction:
        w = Fraction(1)
        for _, n in self.trace:
            w /= n
        return w


def enumerate_worlds(graph: Graph, fn: Callable[[ScriptedInstructions], object], *,
                     cap: int = 2_000_000) -> ExactDistribution:
    """Exact law of ``fn(instr)`` over all instruction realizations it queries."""
    out: dict = defaultdict(Fraction)
    prefix: list[list[int]] = []
    worlds = 0
    while True:
        script = ScriptedInstructions(graph, prefix)
        value = fn(script)
        out[value] += script.weight()
        worlds += 1
        if worlds > cap:
            raise BudgetExceeded(f">{cap}", cap)
        trace = script.trace
        while trace and trace[-1][0] == trace[-1][1] - 1:
            trace.pop()
        if not trace:
            break
        trace[-1][0] += 1
        prefix = trace
    return ExactDistribution.from_weights(out)


def _num(v: float):
    return int(v) if float(v).is_integer() else v


STATISTICS = ("occupation", "motion", "root_arrivals", "quadruple")


def enumerate_exact(graph: Graph, xi0, T: int, statistic: str = "occupation", *,
                    H: Iterable[int] | None = None, x: int | None = None,
                    budget: EnumerationBudget = DEFAULT_BUDGET,
                    method: str = "dp", cutoff: int | None = None) -> ExactDistribution:
    """Exact pushforward law of a DLAS statistic on a small discrete-time instance.

    ``statistic="quadruple"`` returns the joint law of
    ``(Phi, Phi^X, Phi^Y, Phi^{X,Y})`` from the tracer coupling at site ``x``
    and always uses world enumeration.  Other statistics use the count DP
    (``method="dp"``) or world enumeration through the engine
    (``method="worlds"``).
    """
    from .engine import System
    from .tracer import CoupledRun

    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    if isinstance(xi0, InitialSpec):
        if statistic == "quadruple" or method == "worlds":
            raise ValueError("world enumeration needs a deterministic initial condition")
        n_a = sum(max(max(xi0.site_law_exact(v)), 0) for v in range(graph.n))
        budget.check(graph, n_a, T, worlds=False)
        return count_dp(graph, xi0, T, H, statistic=statistic, cutoff=cutoff, max_states=budget.cap)
    xi0 = InitialCondition(xi0).validate(graph)
    n_a = xi0.n_a()
    H = tuple(range(graph.n)) if (H is None or statistic == "motion") else tuple(H)
    if statistic == "quadruple":
        if x is None:
            raise ValueError("quadruple statistic needs the tracer site x")
        # base, tracer and flipped systems share paths; the two tracer paths add walkers
        budget.check(graph, n_a + 2, T, walkers=n_a + 2,
                     rankings=math.factorial(n_a + xi0.n_b()))

        def fn(instr):
            run = CoupledRun(graph, xi0, x, instr, H, assertions="full")
            run.advance(T)
            return tuple(_num(v) for v in run.outcome().quadruple())

        return enumerate_worlds(graph, fn, cap=budget.cap)
    budget.check(graph, n_a, T, rankings=math.factorial(n_a + xi0.n_b()),
                 worlds=method != "dp")
    if method == "dp":
        return count_dp(graph, xi0, T, H, statistic=statistic, cutoff=cutoff,
                        max_states=budget.cap)

    def fn(instr):
        s = System(graph, xi0, instr, H=H, count_root=statistic == "root_arrivals")
        s.run(T)
        if statistic == "root_arrivals":
            return s.root_arrivals
        return _num(s.totals["xi"])

    return enumerate_worlds(graph, fn, cap=budget.cap)


def coupled_marginals(graph: Graph, xi0, x: int, T: int, H: Iterable[int], *,
                      budget: EnumerationBudget = DEFAULT_BUDGET) -> dict[str, ExactDistribution]:
    """Exact laws of every coupled occupation time (one world enumeration)."""
    from .tracer import CoupledRun

    xi0 = InitialCondition(xi0).validate(graph)
    H = tuple(H)
    n_a = xi0.n_a()
    budget.check(graph, n_a + 2, T, walkers=n_a + 2, rankings=math.factorial(n_a + xi0.n_b()))

    def fn(instr):
        run = CoupledRun(graph, xi0, x, instr, H, assertions="full")
        run.advance(T)
        o = run.outcome()
        return tuple(_num(v) for v in (o.phi, o.phi_x, o.phi_y, o.phi_xy, o.phi_yx))

    joint = enumerate_worlds(graph, fn, cap=budget.cap)
    names = ("phi", "phi_x", "phi_y", "phi_xy", "phi_yx")
    return {name: joint.map(lambda v, i=i: v[i]) for i, name in enumerate(names)}


# --- h-curves for the discrete convexity check --------------------------------

def test_function(tag) -> Callable[[Fraction], Fraction]:
    """``"identity"``, ``"square"`` or ``("stoploss", a)``."""
    if tag == "identity":
        return lambda v: Fraction(v)
    if tag == "square":
        return lambda v: Fraction(v) ** 2
    if isinstance(tag, (tuple, list)) and tag[0] == "stoploss":
        a = Fraction(str(tag[1]))
        return lambda v: max(Fraction(v) - a, Fraction(0))
    raise ValueError(f"unknown test function {tag!r}")


def exact_h_curve(graph: Graph, xi0, x: int, k_range: Iterable[int], phi, T: int,
                  H: Iterable[int], *, budget: EnumerationBudget = DEFAULT_BUDGET):
    """Rows ``(k, h(k), Dh(k), D2h(k))`` with ``h(k) = E phi(V_T)`` under ``xi_{0,k}``."""
    return exact_h_curves(graph, xi0, x, k_range, [phi], T, H, budget=budget)[0]


def exact_h_curves(graph: Graph, xi0, x: int, k_range: Iterable[int], phis: Sequence, T: int,
                   H: Iterable[int], *, budget: EnumerationBudget = DEFAULT_BUDGET) -> list:
    """:func:`exact_h_curve` for several test functions, sharing the laws of ``V_T``."""
    xi0 = InitialCondition(xi0)
    ks = list(k_range)
    H = tuple(H)
    laws = {k: enumerate_exact(graph, xi0.with_site(x, k), T, "occupation", H=H, budget=budget)
            for k in range(min(ks), max(ks) + 3)}
    curves = []
    for phi in phis:
        fn = test_function(phi)
        h = {k: law.expect(fn) for k, law in laws.items()}
        curves.append([(k, h[k], h[k + 1] - h[k], h[k + 2] - 2 * h[k + 1] + h[k]) for k in ks])
    return curves


# --- internal DLA ---------------------------------------------------------------

def sequential_idla(graph: Graph, root: int, n: int, seed: int, *,
                    root_occupied: bool = True) -> int:
    """Total steps walked by ``n`` sequential IDLA particles released at ``root``.

    With ``root_occupied`` the root counts as settled before the first
    release, so every particle settles on a non-root vertex.
    """
    limit = graph.n - 1 if root_occupied else graph.n
    if n > limit:
        raise ValueError(f"n={n} exceeds the {limit} available sites")
    occupied = {root} if root_occupied else set()
    total = 0
    for i in range(n):
        pos = root
        m = 0
        while pos in occupied:
            m += 1
            nbrs = graph.neighbors[pos]
            pos = nbrs[rng.index(rng.hash64(seed, rng.IDLA, i, m), len(nbrs))]
        occupied.add(pos)
        total += m
    return total


def enumerate_idla_exact(graph: Graph, root: int, n: int, *, cutoff: int,
                         root_occupied: bool = True) -> ExactDistribution:
    """Exact law of the IDLA total path length; values ``>= cutoff`` go to the tail."""
    limit = graph.n - 1 if root_occupied else graph.n
    if n > limit:
        raise ValueError(f"n={n} exceeds the {limit} available sites")
    occupied = frozenset({root}) if root_occupied else frozenset()
    if n == 0:
        return ExactDistribution.point(0)
    if not root_occupied:
        occupied = frozenset({root})
        n -= 1
        if n == 0:
            return ExactDistribution.point(0)
    # state: (occupied set, walker position, walkers still to settle incl. current)
    layer = {(occupied, root, n): Fraction(1)}
    done: dict = defaultdict(Fraction)
    tail = Fraction(0)
    m = 0
    while layer:
        m += 1
        nxt: dict = defaultdict(Fraction)
        for (occ, pos, left), p in layer.items():
            nbrs = graph.neighbors[pos]
            for u in nbrs:
                w = p / len(nbrs)
                if u in occ:
                    state = (occ, u, left)
                elif left == 1:
                    if m >= cutoff:
                        tail += w
                    else:
                        done[m] += w
                    continue
                else:
                    state = (occ | {u}, root, left - 1)
                if m >= cutoff:
                    tail += w
                else:
                    nxt[state] += w
        layer = nxt
    return ExactDistribution.from_weights(done, tail, cutoff if tail else None)


# --- parking on directed trees ------------------------------------------------

def _add_laws(a: dict, b: dict) -> dict:
    out: dict = defaultdict(Fraction)
    for x, p in a.items():
        for y, q in b.items():
            out[x + y] += p * q
    return out


def parking_root_law(tree: Graph, init: InitialSpec) -> ExactDistribution:
    """Law of the number of A-particles ever at the root, by subtree recursion.

    Total flux out of a subtree does not depend on the order in which cars
    move, so ``out(v) = max(0, xi_0(v) + sum_children out(c))`` and the root
    count is ``max(xi_0(root), 0) + sum_children out(c)``.
    """
    if not tree.directed_to_root:
        raise ValueError("parking needs a tree directed to its root")
    children: dict[int, list[int]] = defaultdict(list)
    for v, nb in enumerate(tree.neighbors):
        if nb:
            children[nb[0]].append(v)
    order = []
    stack = [tree.root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    flux: dict[int, dict] = {}
    for v in reversed(order):
        inflow = {0: Fraction(1)}
        for c in children[v]:
            inflow = _add_laws(inflow, flux[c])
        site = init.site_law_exact(v)
        total = _add_laws(inflow, site)
        if v == tree.root:
            law: dict = defaultdict(Fraction)
            for s, p in site.items():
                for i, q in inflow.items():
                    law[max(s, 0) + i] += p * q
            return ExactDistribution.from_weights(law)
        out: dict = defaultdict(Fraction)
        for t, p in total.items():
            out[max(t, 0)] += p
        flux[v] = out
    raise RuntimeError("unreachable")
