"""Vectorized discrete-time engine for many independent replicas.

Replica ``r`` uses master seed ``derive_seed(master, r)`` both for its
initial condition and for its instructions, and reproduces
:func:`dlas.engine.simulate` on that seed bit for bit.  Only nontracer
systems are supported; the coupling runs through the scalar engine.

B-particles never move, so their bravenesses cannot change any count and
only their number per site is stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import rng
from .graph import Graph
from .instructions import InitialCondition, InitialSpec, sample_initial_batch


@dataclass
class BatchResult:
    V: np.ndarray
    root_arrivals: np.ndarray
    final: np.ndarray
    seeds: np.ndarray
    initial: np.ndarray


def replica_seeds(master_seed: int, replicas: int, start: int = 0) -> np.ndarray:
    return rng.derive_seed_np(master_seed, np.arange(start, start + replicas, dtype=np.int64))


def _bravenesses(seeds, rep, x, j, keys) -> np.ndarray:
    brav = rng.uniform_np(seeds[rep], rng.BRAVE, keys[x], j, 0)
    if len(brav) < 2:
        return brav
    order = np.lexsort((brav, rep))
    dup = (rep[order][1:] == rep[order][:-1]) & (brav[order][1:] == brav[order][:-1])
    if not dup.any():
        return brav
    # replay the scalar engine's salted redraw for the affected replicas
    for r in np.unique(rep[order][1:][dup]):
        seen: set[float] = set()
        for i in np.nonzero(rep == r)[0]:
            salt = 0
            b = rng.uniform(int(seeds[r]), rng.BRAVE, int(keys[x[i]]), int(j[i]), salt)
            while b in seen:
                salt += 1
                b = rng.uniform(int(seeds[r]), rng.BRAVE, int(keys[x[i]]), int(j[i]), salt)
            seen.add(b)
            brav[i] = b
    return brav


def run_batch(graph: Graph, initial: np.ndarray, seeds: np.ndarray, T: float, *,
              H: Iterable[int] | None = None, max_rounds: int = 10_000_000) -> BatchResult:
    """Run one discrete-time DLAS per row of ``initial`` (shape ``(R, n)``).

    ``T = inf`` runs until no A-particle can move.  Returns the occupation
    time of ``H`` (all vertices when ``None``), root arrivals in
    directed-to-root mode and the final counts.
    """
    initial = np.asarray(initial, dtype=np.int64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    R, n = initial.shape
    if len(seeds) != R:
        raise ValueError("one seed per replica required")
    offsets, flat, deg = graph.csr
    keys = graph.keys_array
    root = graph.root if graph.directed_to_root else -1
    hmask = np.zeros(n, dtype=bool)
    hmask[list(range(n)) if H is None else list(H)] = True

    b_count = np.maximum(-initial, 0).ravel().copy()
    a = np.maximum(initial, 0)
    rep_i, site_i = np.nonzero(a)
    per = a[rep_i, site_i]
    rep = np.repeat(rep_i, per).astype(np.int64)
    x = np.repeat(site_i, per).astype(np.int64)
    starts = np.repeat(np.cumsum(per) - per, per)
    j = (np.arange(len(rep)) - starts + 1).astype(np.int64)
    brav = _bravenesses(seeds, rep, x, j, keys)
    loc = x.copy()
    nsteps = np.zeros(len(rep), dtype=np.int64)

    V = np.zeros(R, dtype=np.float64)
    arrivals = np.zeros(R, dtype=np.int64)
    if root >= 0:
        arrivals += np.bincount(rep[loc == root], minlength=R)

    horizon = T if not math.isinf(T) else max_rounds
    m = 0
    while m < horizon:
        rate = np.bincount(rep[hmask[loc]], minlength=R)
        moving = loc != root
        if not moving.any():
            if not math.isinf(T):
                V += rate * (T - m)
            break
        V += rate
        mv = np.nonzero(moving)[0]
        nsteps[mv] += 1
        here = loc[mv]
        h = rng.hash64_np(seeds[rep[mv]], rng.STEP, keys[x[mv]], j[mv], nsteps[mv])
        new = flat[offsets[here] + rng.index_np(h, deg[here]).astype(np.int64)]
        loc[mv] = new
        if root >= 0:
            arrivals += np.bincount(rep[mv][new == root], minlength=R)
        # annihilation: at each (replica, site) the bravest A's meet the B's
        cell = rep * n + loc
        b_here = b_count[cell]
        cand = np.nonzero(b_here > 0)[0]
        if len(cand):
            order = cand[np.lexsort((-brav[cand], cell[cand]))]
            cells = cell[order]
            first = np.ones(len(order), dtype=bool)
            first[1:] = cells[1:] != cells[:-1]
            group_start = np.maximum.accumulate(np.where(first, np.arange(len(order)), 0))
            rank = np.arange(len(order)) - group_start
            dies = rank < b_count[cells]
            killed_cells, killed = np.unique(cells[dies], return_counts=True)
            b_count[killed_cells] -= killed
            keep = np.ones(len(rep), dtype=bool)
            keep[order[dies]] = False
            rep, x, j, brav, loc, nsteps = (arr[keep] for arr in (rep, x, j, brav, loc, nsteps))
        m += 1
    else:
        if math.isinf(T) and (loc != root).any():
            raise RuntimeError(f"no extinction within {max_rounds} rounds")

    final = -b_count.reshape(R, n)
    np.add.at(final, (rep, loc), 1)
    return BatchResult(V, arrivals, final, seeds, initial)


def simulate_batch(graph: Graph, init, T: float, master_seed: int, replicas: int, *,
                   H: Iterable[int] | None = None, chunk: int = 20_000,
                   start: int = 0) -> BatchResult:
    """``replicas`` seeded runs of ``init`` (an :class:`InitialSpec` or fixed counts)."""
    parts = []
    for lo in range(start, start + replicas, chunk):
        size = min(chunk, start + replicas - lo)
        seeds = replica_seeds(master_seed, size, lo)
        if isinstance(init, InitialSpec):
            initial = sample_initial_batch(init, graph, seeds)
        else:
            row = InitialCondition(init).validate(graph).array(graph.n)
            initial = np.tile(row, (size, 1))
        parts.append(run_batch(graph, initial, seeds, T, H=H))
    if not parts:
        empty = np.zeros(0)
        return BatchResult(empty, empty.astype(np.int64), np.zeros((0, graph.n), np.int64),
                           empty.astype(np.uint64), np.zeros((0, graph.n), np.int64))
    return BatchResult(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in ("V", "root_arrivals", "final", "seeds", "initial")))
