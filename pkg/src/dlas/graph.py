"""Arenas for DLAS runs: paths, lattice boxes, trees, finite balls.

Vertices are dense integer ids ``0..n-1``; ``labels`` carries the original
coordinates (ints for paths and trees, tuples for boxes).  Neighbor lists are
kept sorted by label so that a vertex has the same neighbor order in every
window that contains its whole neighborhood.  That keeps matched-seed walks
identical across windows.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import rng


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    neighbors: tuple[tuple[int, ...], ...]
    labels: tuple[Hashable, ...]
    root: int | None = None
    directed_to_root: bool = False
    # ids in the graph this one was cut from (see ``ball``)
    source_ids: tuple[int, ...] | None = None
    name: str = field(default="graph", compare=False)

    def __post_init__(self):
        n = len(self.neighbors)
        if len(self.labels) != n:
            raise GraphError("labels and neighbor lists differ in length")
        if len(set(self.labels)) != n:
            raise GraphError("duplicate vertex labels")
        if self.root is not None and not 0 <= self.root < n:
            raise GraphError(f"root {self.root} out of range")
        for v, nb in enumerate(self.neighbors):
            for u in nb:
                if not 0 <= u < n:
                    raise GraphError(f"neighbor id {u} of {v} out of range")
                if u == v:
                    raise GraphError(f"self-loop at {v}")
            if len(set(nb)) != len(nb):
                raise GraphError(f"repeated neighbor at {v}")
        if self.directed_to_root:
            if self.root is None:
                raise GraphError("directed_to_root requires a root")
            for v, nb in enumerate(self.neighbors):
                want = 0 if v == self.root else 1
                if len(nb) != want:
                    raise GraphError(f"vertex {v} must have {want} out-neighbor(s)")
        else:
            for v, nb in enumerate(self.neighbors):
                for u in nb:
                    if v not in self.neighbors[u]:
                        raise GraphError(f"asymmetric edge {v}->{u}")

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def __len__(self) -> int:
        return len(self.neighbors)

    @cached_property
    def keys(self) -> tuple[int, ...]:
        """64-bit keys derived from labels; the instruction streams use these."""
        return tuple(rng.label_key(lab) for lab in self.labels)

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def vertex(self, label) -> int:
        try:
            return self.index[label]
        except KeyError:
            raise GraphError(f"no vertex labelled {label!r}") from None

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def edges(self) -> list[tuple[int, int]]:
        if self.directed_to_root:
            return [(v, nb[0]) for v, nb in enumerate(self.neighbors) if nb]
        return [(v, u) for v, nb in enumerate(self.neighbors) for u in nb if v < u]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(offsets, flat neighbor ids, degrees) for vectorized stepping."""
        deg = np.array([len(nb) for nb in self.neighbors], dtype=np.int64)
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(deg, out=offsets[1:])
        flat = np.fromiter(itertools.chain.from_iterable(self.neighbors), dtype=np.int64,
                           count=int(deg.sum()))
        return offsets, flat, deg

    @cached_property
    def keys_array(self) -> np.ndarray:
        return np.array(self.keys, dtype=np.uint64)

    def distances(self, sources: Iterable[int]) -> list[int | None]:
        """Undirected BFS distances (directed trees are walked both ways)."""
        adj = self.undirected_neighbors
        dist: list[int | None] = [None] * self.n
        queue = deque()
        for s in sources:
            dist[s] = 0
            queue.append(s)
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if dist[u] is None:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    @cached_property
    def undirected_neighbors(self) -> tuple[tuple[int, ...], ...]:
        if not self.directed_to_root:
            return self.neighbors
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for v, u in self.edges():
            adj[v].add(u)
            adj[u].add(v)
        return tuple(tuple(sorted(a)) for a in adj)

    def is_connected(self) -> bool:
        return self.n > 0 and all(d is not None for d in self.distances([0]))

    def with_root(self, root: int) -> "Graph":
        return Graph(self.neighbors, self.labels, root, False, self.source_ids, self.name)

    def directed(self) -> "Graph":
        """Orient a rooted tree towards its root (one out-edge per non-root vertex)."""
        if self.root is None:
            raise GraphError("orienting requires a root")
        dist = self.distances([self.root])
        nbrs = []
        for v in range(self.n):
            if v == self.root:
                nbrs.append(())
                continue
            parents = [u for u in self.undirected_neighbors[v] if dist[u] == dist[v] - 1]
            if len(parents) != 1:
                raise GraphError("graph is not a tree")
            nbrs.append((parents[0],))
        return Graph(tuple(nbrs), self.labels, self.root, True, self.source_ids, self.name)

    def write_edge_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v"])
            for u, v in self.edges():
                w.writerow([self.labels[u], self.labels[v]])


def _from_adjacency(labels: Sequence[Hashable], adj: dict, *, root=None, name="graph") -> Graph:
    index = {lab: i for i, lab in enumerate(labels)}
    nbrs = []
    for lab in labels:
        nb = sorted(adj.get(lab, ()))
        nbrs.append(tuple(index[u] for u in nb))
    return Graph(tuple(nbrs), tuple(labels), root, False, None, name)


def build_interval(lo: int, hi: int) -> Graph:
    """Path on the integers ``lo..hi``; labels are the integer coordinates."""
    if lo >= hi:
        raise GraphError(f"invalid range [{lo}, {hi}]")
    labels = list(range(lo, hi + 1))
    adj = {x: [y for y in (x - 1, x + 1) if lo <= y <= hi] for x in labels}
    return _from_adjacency(labels, adj, name=f"interval({lo},{hi})")


def build_lattice_box(dims: Sequence[int]) -> Graph:
    """Box of Z^d with nearest-neighbor edges; 1-d boxes keep integer labels."""
    dims = list(dims)
    if not dims:
        raise GraphError("empty dims")
    if any(d < 1 for d in dims):
        raise GraphError(f"dims must be >= 1, got {dims}")
    if len(dims) == 1:
        if dims[0] == 1:
            return Graph(((),), (0,), name="box[1]")
        return build_interval(0, dims[0] - 1)
    labels = list(itertools.product(*(range(d) for d in dims)))
    adj = {}
    for p in labels:
        out = []
        for axis in range(len(dims)):
            for step in (-1, 1):
                q = list(p)
                q[axis] += step
                if 0 <= q[axis] < dims[axis]:
                    out.append(tuple(q))
        adj[p] = out
    return _from_adjacency(labels, adj, name=f"box{dims}")


def build_path(n: int, root: int | None = None) -> Graph:
    g = build_interval(0, n - 1)
    return g.with_root(root) if root is not None else g


def build_star(n: int) -> Graph:
    """Star on ``n`` vertices with the center (vertex 0) as root."""
    if n < 2:
        raise GraphError("star needs at least 2 vertices")
    adj = {0: list(range(1, n))}
    for leaf in range(1, n):
        adj[leaf] = [0]
    return _from_adjacency(list(range(n)), adj, root=0, name=f"star({n})")


def build_complete_tree(branching: int, depth: int, *, directed: bool = False) -> Graph:
    """Complete ``branching``-ary tree of the given depth, root 0, level order ids."""
    g = sample_galton_watson({branching: 1}, depth, seed=0, directed=directed)
    return dataclasses.replace(g, name=f"tree(b={branching},depth={depth})")


def build_graph(n: int, edges: Iterable[tuple[int, int]], root: int | None = None) -> Graph:
    adj: dict[int, set[int]] = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return _from_adjacency(list(range(n)), adj, root=root, name=f"graph({n})")


def random_connected_graph(n: int, seed: int, extra_edge_prob: float = 0.3) -> Graph:
    """Random spanning tree plus a few extra edges; used to build test families."""
    if n < 2:
        raise GraphError("need at least 2 vertices")
    edges = set()
    for v in range(1, n):
        parent = rng.index(rng.hash64(seed, rng.MISC, v, 0, 0), v)
        edges.add((parent, v))
    for u, v in itertools.combinations(range(n), 2):
        if (u, v) not in edges and rng.uniform(seed, rng.MISC, u, v, 1) < extra_edge_prob:
            edges.add((u, v))
    return build_graph(n, edges)


def validate_pmf(pmf: dict, *, tol: float = 1e-12) -> dict[int, float]:
    """Check a finite pmf on integers; returns it with int keys and float masses."""
    if not pmf:
        raise ValueError("empty pmf")
    out: dict[int, float] = {}
    total = Fraction(0)
    for k, p in pmf.items():
        try:
            kk = int(k)
        except (TypeError, ValueError):
            raise ValueError(f"pmf support must be integers, got {k!r}") from None
        if not isinstance(k, str) and kk != k:
            raise ValueError(f"pmf support must be integers, got {k!r}")
        pf = Fraction(str(p)) if isinstance(p, (str, float)) else Fraction(p)
        if pf < 0:
            raise ValueError(f"negative probability {p} at {k}")
        total += pf
        out[kk] = out.get(kk, 0.0) + float(pf)
    if abs(float(total) - 1.0) > tol:
        raise ValueError(f"pmf sums to {float(total):.12g}, not 1")
    return out


def draw_from_pmf(pmf: dict[int, float], u: float) -> int:
    acc = 0.0
    items = sorted(pmf.items())
    for k, p in items:
        acc += p
        if u < acc:
            return k
    return items[-1][0]


def sample_galton_watson(offspring_pmf: dict, max_depth: int, seed: int, *,
                         directed: bool = False) -> Graph:
    """Galton-Watson tree grown level by level and cut at ``max_depth``.

    Vertex ids are assigned in level order; the offspring count of vertex ``v``
    is drawn from the stream ``(seed, GW, v)``.
    """
    pmf = validate_pmf(offspring_pmf)
    if any(k < 0 for k in pmf):
        raise ValueError("offspring counts must be nonnegative")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    parent = [-1]
    depth = [0]
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            if depth[v] >= max_depth:
                continue
            kids = draw_from_pmf(pmf, rng.uniform(seed, rng.GW, v))
            for _ in range(kids):
                parent.append(v)
                depth.append(depth[v] + 1)
                nxt.append(len(parent) - 1)
        frontier = nxt
    n = len(parent)
    adj = {v: set() for v in range(n)}
    for v in range(1, n):
        adj[v].add(parent[v])
        adj[parent[v]].add(v)
    g = _from_adjacency(list(range(n)), adj, root=0, name=f"gw(depth={max_depth})")
    return g.directed() if directed else g


def vertex_set(g: Graph, ids: Iterable[int]) -> tuple[int, ...]:
    """Sorted, duplicate-free tuple of vertex ids of ``g``."""
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise GraphError("duplicate vertices in vertex set")
    for v in ids:
        if not 0 <= v < g.n:
            raise GraphError(f"vertex {v} not in graph")
    return tuple(sorted(ids))


def ball(g: Graph, centers: Iterable[int], radius: int) -> Graph:
    """Induced subgraph on everything within ``radius`` of ``centers``.

    Labels are preserved; ``source_ids`` maps new ids back to ids of ``g``.
    """
    centers = list(centers)
    if radius < 0:
        raise GraphError("radius must be >= 0")
    if not centers:
        raise GraphError("centers must be nonempty")
    for c in centers:
        if not 0 <= c < g.n:
            raise GraphError(f"center {c} not in graph")
    dist = g.distances(centers)
    keep = [v for v in range(g.n) if dist[v] is not None and dist[v] <= radius]
    new_id = {v: i for i, v in enumerate(keep)}
    nbrs = tuple(tuple(new_id[u] for u in g.neighbors[v] if u in new_id) for v in keep)
    root = new_id.get(g.root) if g.root is not None else None
    directed = g.directed_to_root and root is not None
    if g.directed_to_root and not directed:
        raise GraphError("ball of a directed tree must contain the root")
    return Graph(nbrs, tuple(g.labels[v] for v in keep), root, directed, tuple(keep),
                 f"ball({g.name},r={radius})")
