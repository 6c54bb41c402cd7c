"""Instruction oracle ``(S, h)`` and initial conditions ``xi_0``.

Every path step, holding time and braveness is a pure function of
``(master_seed, stream, origin key, j, n)``.  Engines that share an
:class:`Instructions` value therefore see literally the same paths without
storing them, which is what the tracer coupling needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from . import rng
from .graph import Graph, GraphError, validate_pmf

DISCRETE = "discrete"
CONTINUOUS = "continuous"
TIME_MODELS = (DISCRETE, CONTINUOUS)

# tracer sentinels sit below every generated braveness in [0, 1)
TRACER_LOW = -2.0
TRACER_HIGH = -1.0


class InstructionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Instructions:
    master_seed: int
    graph: Graph
    time_model: str = DISCRETE
    log: list | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.time_model not in TIME_MODELS:
            raise ValueError(f"unknown time model {self.time_model!r}")
        if self.graph.n == 0:
            raise GraphError("empty graph")

    @property
    def discrete(self) -> bool:
        return self.time_model == DISCRETE

    def _record(self, *entry) -> None:
        if self.log is not None:
            self.log.append(entry)

    def jump(self, x: int, j: int, n: int, here: int) -> int:
        """Vertex reached by the ``n``-th jump of path ``(x, j)`` from ``here``."""
        self._record("jump", x, j, n, here)
        if j < 0:
            return here
        nbrs = self.graph.neighbors[here]
        if not nbrs:
            if self.graph.directed_to_root and here == self.graph.root:
                return here
            raise InstructionError(f"vertex {here} has no neighbor to step to")
        h = rng.hash64(self.master_seed, rng.STEP, self.graph.keys[x], j, n)
        return nbrs[rng.index(h, len(nbrs))]

    def step(self, x: int, j: int, n: int) -> int:
        """Position of path ``S^{x,j}`` after ``n`` jumps."""
        pos = x
        for m in range(1, n + 1):
            pos = self.jump(x, j, m, pos)
        return pos

    def hold(self, x: int, j: int, n: int) -> float:
        """Waiting time before the ``n``-th jump (1 in discrete time)."""
        if self.discrete:
            return 1.0
        self._record("hold", x, j, n)
        return rng.exponential(self.master_seed, rng.HOLD, self.graph.keys[x], j, n)

    def jump_time(self, x: int, j: int, n: int) -> float:
        """Path time of the ``n``-th jump (prefix sum of holds)."""
        if self.discrete:
            return float(n)
        t = 0.0
        for m in range(1, n + 1):
            t += self.hold(x, j, m)
        return t

    def braveness(self, x: int, j: int, salt: int = 0) -> float:
        self._record("brave", x, j, salt)
        return rng.uniform(self.master_seed, rng.BRAVE, self.graph.keys[x], j, salt)


def make_instructions(master_seed: int, graph: Graph, time_model: str = DISCRETE) -> Instructions:
    for v, nb in enumerate(graph.neighbors):
        if not nb and not (graph.directed_to_root and v == graph.root):
            raise GraphError(f"vertex {v} has no neighbors")
    return Instructions(int(master_seed), graph, time_model)


class InitialCondition(dict):
    """Signed counts per vertex: positive = A-particles, negative = B-particles.

    Missing vertices hold 0.
    """

    def __missing__(self, key):
        return 0

    @classmethod
    def from_labels(cls, graph: Graph, counts: Mapping) -> "InitialCondition":
        return cls({graph.vertex(lab): int(c) for lab, c in counts.items() if int(c) != 0})

    @classmethod
    def from_array(cls, arr) -> "InitialCondition":
        return cls({int(v): int(c) for v, c in enumerate(arr) if c != 0})

    def validate(self, graph: Graph) -> "InitialCondition":
        for v in self:
            if not 0 <= v < graph.n:
                raise GraphError(f"initial condition refers to vertex {v} outside the arena")
        return self

    def array(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=np.int64)
        for v, c in self.items():
            out[v] = c
        return out

    def with_site(self, x: int, k: int) -> "InitialCondition":
        """``xi_{0,k}``: same counts except ``k`` at ``x``."""
        out = InitialCondition(self)
        out[x] = k
        return out.pruned()

    def plus_a(self, x: int, m: int = 1) -> "InitialCondition":
        """``xi^x`` (or ``xi^{x,x}`` for m=2): add A-particles at ``x``."""
        return self.with_site(x, self[x] + m)

    def pruned(self) -> "InitialCondition":
        return InitialCondition({v: c for v, c in self.items() if c != 0})

    def restricted(self, vertices) -> "InitialCondition":
        keep = set(vertices)
        return InitialCondition({v: c for v, c in self.items() if v in keep})

    def n_a(self) -> int:
        return sum(c for c in self.values() if c > 0)

    def n_b(self) -> int:
        return sum(-c for c in self.values() if c < 0)


def exact_mean(pmf: Mapping) -> Fraction:
    return sum((Fraction(str(p)) if isinstance(p, (float, str)) else Fraction(p)) * int(k)
               for k, p in pmf.items())


@dataclass(frozen=True)
class ConcreteForm:
    """Per-site ``+-1`` law or its volatile counterpart built from the same U(x).

    ``xi_0(x) = 1{U <= p_x} - 1{U > p_x}`` when ``primed`` is false, otherwise
    ``1{U <= p_x} alpha(x) - 1{U > p_x} beta(x)``.
    """

    p: Mapping[int, float] | float
    alpha: Mapping[int, float]
    beta: Mapping[int, float]
    primed: bool = True

    def __post_init__(self):
        for name, pmf in (("alpha", self.alpha), ("beta", self.beta)):
            clean = validate_pmf(pmf)
            if any(k < 0 for k in clean):
                raise ValueError(f"{name} must live on the nonnegative integers")
            mean = exact_mean(pmf)
            if abs(float(mean) - 1.0) > 1e-12:
                raise ValueError(f"{name} must have mean 1, has mean {float(mean):.12g}")

    def p_at(self, v: int) -> float:
        if isinstance(self.p, Mapping):
            return float(self.p.get(v, 0.0))
        return float(self.p)


@dataclass(frozen=True)
class InitialSpec:
    """Independent per-site laws for ``xi_0``.

    ``site_pmfs`` maps vertex -> pmf over signed integers; vertices not listed
    use ``default`` (a pmf or an int).  If ``concrete`` is given it replaces
    both.
    """

    site_pmfs: Mapping[int, Mapping[int, float]] = field(default_factory=dict)
    default: Mapping[int, float] | int = 0
    concrete: ConcreteForm | None = None

    def __post_init__(self):
        for pmf in self.site_pmfs.values():
            validate_pmf(pmf)
        if isinstance(self.default, Mapping):
            validate_pmf(self.default)

    def site_law(self, v: int) -> dict[int, float]:
        """The pmf of ``xi_0(v)`` (used by exact enumeration and icx checks)."""
        if self.concrete is not None:
            c = self.concrete
            p = c.p_at(v)
            if not c.primed:
                law = {1: p, -1: 1.0 - p}
            else:
                law: dict[int, float] = {}
                for k, q in validate_pmf(c.alpha).items():
                    law[k] = law.get(k, 0.0) + p * q
                for k, q in validate_pmf(c.beta).items():
                    law[-k] = law.get(-k, 0.0) + (1.0 - p) * q
            return {k: q for k, q in law.items() if q > 0}
        if v in self.site_pmfs:
            return validate_pmf(self.site_pmfs[v])
        if isinstance(self.default, Mapping):
            return validate_pmf(self.default)
        return {int(self.default): 1.0}

    def site_law_exact(self, v: int) -> dict[int, Fraction]:
        """Rational version of :meth:`site_law` (decimal inputs are read exactly)."""
        def frac(p):
            return Fraction(str(p)) if isinstance(p, (float, str)) else Fraction(p)

        if self.concrete is not None:
            c = self.concrete
            p = frac(c.p.get(v, 0)) if isinstance(c.p, Mapping) else frac(c.p)
            if not c.primed:
                law = {1: p, -1: 1 - p}
            else:
                law = {}
                for k, q in c.alpha.items():
                    law[int(k)] = law.get(int(k), 0) + p * frac(q)
                for k, q in c.beta.items():
                    law[-int(k)] = law.get(-int(k), 0) + (1 - p) * frac(q)
            return {k: q for k, q in law.items() if q > 0}
        src = self.site_pmfs.get(v, self.default)
        if isinstance(src, Mapping):
            return {int(k): frac(q) for k, q in src.items() if frac(q) > 0}
        return {int(src): Fraction(1)}


def _draw(pmf: Mapping[int, float], u: np.ndarray) -> np.ndarray:
    items = sorted(validate_pmf(pmf).items())
    support = np.array([k for k, _ in items], dtype=np.int64)
    cum = np.cumsum([p for _, p in items])
    idx = np.searchsorted(cum, u, side="right")
    return support[np.minimum(idx, len(support) - 1)]


def sample_initial_batch(spec: InitialSpec, graph: Graph, seeds) -> np.ndarray:
    """Draw ``xi_0`` for every seed; returns an ``(len(seeds), n)`` int array."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    out = np.zeros((len(seeds), graph.n), dtype=np.int64)
    keys = graph.keys
    c = spec.concrete
    for v in range(graph.n):
        if c is not None:
            u = rng.uniform_np(seeds, rng.INIT_U, keys[v])
            a_site = u <= c.p_at(v)
            if c.primed:
                alpha = _draw(c.alpha, rng.uniform_np(seeds, rng.INIT_ALPHA, keys[v]))
                beta = _draw(c.beta, rng.uniform_np(seeds, rng.INIT_BETA, keys[v]))
                out[:, v] = np.where(a_site, alpha, -beta)
            else:
                out[:, v] = np.where(a_site, 1, -1)
            continue
        law = spec.site_pmfs.get(v, spec.default)
        if isinstance(law, Mapping):
            out[:, v] = _draw(law, rng.uniform_np(seeds, rng.INIT, keys[v]))
        else:
            out[:, v] = int(law)
    return out


def sample_initial(spec: InitialSpec, graph: Graph, seed: int) -> InitialCondition:
    return InitialCondition.from_array(sample_initial_batch(spec, graph, [seed & rng.MASK])[0])


def path_occupation(instr: Instructions, x: int, j: int, life: float, target) -> float:
    """``int_0^life 1{S^{x,j}_s in target} ds`` along the path's own clock."""
    target = set(target)
    total = 0.0
    pos = x
    t = 0.0
    n = 0
    while t < life:
        t_next = t + instr.hold(x, j, n + 1)
        if pos in target:
            total += min(t_next, life) - t
        if t_next >= life:
            break
        n += 1
        pos = instr.jump(x, j, n, pos)
        t = t_next
    return total

