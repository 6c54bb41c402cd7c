"""Event-driven DLAS engine.

One :class:`System` evolves nontracer A-particles (mobile), B-particles
(stationary) and, optionally, the two tracers of the coupling.  Occupation
times are integrated exactly from the piecewise-constant counts: discrete
runs produce exact integer-valued floats, continuous runs integrate between
event times.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .graph import Graph
from .instructions import InitialCondition, Instructions

INF = math.inf

# view coefficients (X in A, X in B, Y in A, Y in B); see tracer.py
BASE_VIEWS = {"xi": None}


class EngineError(RuntimeError):
    pass


class _Tracer:
    __slots__ = ("name", "x", "j", "brav", "prioritized", "state", "life", "since",
                 "n", "loc", "tau_next", "version")

    def __init__(self, name, x, j, brav, prioritized, instr: Instructions):
        self.name = name
        self.x = x
        self.j = j
        self.brav = brav
        self.prioritized = prioritized
        self.state = "A"
        self.life = 0.0
        self.since = 0.0
        self.n = 0
        self.loc = x
        self.tau_next = instr.hold(x, j, 1)
        self.version = 0

    def life_at(self, t: float) -> float:
        if self.state == "A":
            return self.life + (t - self.since)
        return self.life

    def set_state(self, state: str, t: float) -> None:
        if state == self.state:
            return
        self.life = self.life_at(t)
        self.since = t
        self.state = state
        self.version += 1


def resolve_site(a_bravenesses: Iterable[float], b_bravenesses: Iterable[float]):
    """Pair the bravest A with the bravest B until one side is exhausted.

    Returns ``(surviving_a, surviving_b, pairs)`` with survivors sorted
    descending and ``pairs`` in resolution order.
    """
    a = sorted(a_bravenesses, reverse=True)
    b = sorted(b_bravenesses, reverse=True)
    m = min(len(a), len(b))
    pairs = list(zip(a[:m], b[:m]))
    return a[m:], b[m:], pairs


@dataclass
class Trajectory:
    initial: list[int]
    events: list[tuple[float, int, int, str]]
    final: list[int]
    horizon: float
    accumulators: dict[str, float]
    checkpoints: list[tuple[float, float]] = field(default_factory=list)
    root_arrivals: int = 0

    @property
    def V(self) -> float:
        return self.accumulators["xi"]

    def replay(self) -> list[int]:
        counts = list(self.initial)
        for _, v, delta, species in self.events:
            counts[v] += delta if species == "A" else -delta
        return counts


class System:
    """A DLAS, optionally carrying an X- and a Y-tracer started at ``tracer_site``.

    ``views`` maps a name to the tracer coefficients ``(XA, XB, YA, YB)`` used to
    form the count field ``alpha - beta + sum_tracers coef * 1{tracer at z}``;
    the occupation of ``H`` is integrated for each view.
    """

    def __init__(self, graph: Graph, xi0: InitialCondition, instr: Instructions, *,
                 H: Iterable[int] = (), views: dict | None = None,
                 tracer_site: int | None = None, tracer_index: int | None = None,
                 prioritized: str = "Y", brav_x: float = -2.0, brav_y: float = -1.0,
                 record: bool = False, count_root: bool = False):
        self.graph = graph
        self.instr = instr
        self.discrete = instr.discrete
        self.H = frozenset(H)
        self.views = dict(views if views is not None else BASE_VIEWS)
        self.record = record
        self.events: list[tuple[float, int, int, str]] = []
        self.now = 0.0
        self.absorbing_root = graph.root if graph.directed_to_root else None
        self.count_root = count_root
        self.root_arrivals = 0

        n = graph.n
        self.a_at: list[list[int]] = [[] for _ in range(n)]
        self.b_at: list[list[float]] = [[] for _ in range(n)]
        self.p_x: list[int] = []
        self.p_j: list[int] = []
        self.p_n: list[int] = []
        self.p_loc: list[int] = []
        self.p_brav: list[float] = []
        self.p_alive: list[bool] = []
        self.p_next: list[float] = []
        self.n_alive = 0

        xi0 = InitialCondition(xi0).validate(graph)
        self.initial = [xi0[v] for v in range(n)]
        seen: set[float] = set()
        for x in sorted(xi0):
            c = xi0[x]
            if c > 0:
                for j in range(1, c + 1):
                    salt = 0
                    b = instr.braveness(x, j, salt)
                    while b in seen:
                        salt += 1
                        b = instr.braveness(x, j, salt)
                    seen.add(b)
                    self._add_particle(x, j, b)
            else:
                for j in range(1, -c + 1):
                    self.b_at[x].append(instr.braveness(x, -j))

        self.round = 0
        self.heap: list = []
        self._ready = False
        self.tracers: list[_Tracer] = []
        if tracer_site is not None:
            k = tracer_index if tracer_index is not None else max(xi0[tracer_site] + 1, 1)
            self.tracer_index = k
            self.tx = _Tracer("X", tracer_site, k, brav_x, prioritized == "X", instr)
            self.ty = _Tracer("Y", tracer_site, k + 1, brav_y, prioritized == "Y", instr)
            self.tracers = [self.tx, self.ty]
            self._resolve(tracer_site)

        if count_root and self.absorbing_root is not None:
            self.root_arrivals = len(self.a_at[self.absorbing_root])

        self.totals = {name: 0.0 for name in self.views}
        self.rates = {name: 0 for name in self.views}
        self.contrib = {name: {} for name in self.views}
        self.last = 0.0
        self._refresh(self.H)

        self._ready = True
        if not self.discrete:
            for pid in range(len(self.p_x)):
                self._schedule(pid)
            for idx, tr in enumerate(self.tracers):
                self._schedule_tracer(idx)

    # --- bookkeeping -------------------------------------------------------

    def _add_particle(self, x: int, j: int, brav: float) -> None:
        pid = len(self.p_x)
        self.p_x.append(x)
        self.p_j.append(j)
        self.p_n.append(0)
        self.p_loc.append(x)
        self.p_brav.append(brav)
        self.p_alive.append(True)
        self.p_next.append(INF)
        self.a_at[x].append(pid)
        self.n_alive += 1

    def _kill(self, pid: int, z: int) -> None:
        self.p_alive[pid] = False
        self.a_at[z].remove(pid)
        self.n_alive -= 1

    def _absorbed(self, pid: int) -> bool:
        return self.p_loc[pid] == self.absorbing_root

    def count(self, z: int) -> int:
        """Nontracer count ``alpha_t(z) - beta_t(z)``."""
        return len(self.a_at[z]) - len(self.b_at[z])

    def counts(self) -> list[int]:
        return [len(a) - len(b) for a, b in zip(self.a_at, self.b_at)]

    def view_at(self, name: str, z: int) -> int:
        v = len(self.a_at[z]) - len(self.b_at[z])
        coef = self.views[name]
        if coef is None:
            return v
        for i, tr in enumerate(self.tracers):
            if tr.loc == z:
                v += coef[2 * i] if tr.state == "A" else coef[2 * i + 1]
        return v

    def view(self, name: str) -> list[int]:
        return [self.view_at(name, z) for z in range(self.graph.n)]

    def _refresh(self, sites: Iterable[int]) -> None:
        H = self.H
        for z in sites:
            if z not in H:
                continue
            for name in self.views:
                c = self.view_at(name, z)
                c = c if c > 0 else 0
                old = self.contrib[name].get(z, 0)
                if c != old:
                    self.rates[name] += c - old
                    self.contrib[name][z] = c

    def _integrate(self, t: float) -> None:
        dt = t - self.last
        if dt > 0:
            for name, r in self.rates.items():
                if r:
                    self.totals[name] += r * dt
            self.last = t

    def movers(self) -> bool:
        if any(tr.state == "A" for tr in self.tracers):
            return True
        if self.absorbing_root is None:
            return self.n_alive > 0
        return any(self.p_alive[p] and not self._absorbed(p) for p in range(len(self.p_x)))

    # --- site resolution ---------------------------------------------------

    def _resolve(self, z: int) -> list:
        """Apply the pairing rules at ``z`` until no conflicting pair remains."""
        here = [tr for tr in self.tracers if tr.loc == z]
        a_ids = self.a_at[z]
        b_list = self.b_at[z]
        if not here:
            if not a_ids or not b_list:
                return []
            a_sorted = sorted(a_ids, key=self.p_brav.__getitem__, reverse=True)
            b_list.sort(reverse=True)
            m = min(len(a_sorted), len(b_list))
            pairs = []
            for i in range(m):
                pid = a_sorted[i]
                pairs.append((self.p_brav[pid], b_list[i]))
                self._kill(pid, z)
                if self.record:
                    self.events.append((self.now, z, -1, "A"))
                    self.events.append((self.now, z, -1, "B"))
            del b_list[:m]
            return pairs

        pairs = []
        while True:
            best_a = None
            best_a_brav = -INF
            for pid in a_ids:
                if self.p_brav[pid] > best_a_brav:
                    best_a, best_a_brav = pid, self.p_brav[pid]
            for tr in here:
                if tr.state == "A" and tr.brav > best_a_brav:
                    best_a, best_a_brav = tr, tr.brav
            best_b = None
            best_b_brav = -INF
            for b in b_list:
                if b > best_b_brav:
                    best_b, best_b_brav = b, b
            for tr in here:
                if tr.state == "B" and tr.brav > best_b_brav:
                    best_b, best_b_brav = tr, tr.brav
            if best_a is None or best_b is None:
                return pairs
            a_tr = isinstance(best_a, _Tracer)
            b_tr = isinstance(best_b, _Tracer)
            if not a_tr and not b_tr:
                self._kill(best_a, z)
                b_list.remove(best_b)
            elif a_tr and not b_tr:
                b_list.remove(best_b)
                best_a.set_state("B", self.now)
            elif b_tr and not a_tr:
                self._kill(best_a, z)
                best_b.set_state("A", self.now)
                if not self.discrete:
                    self._schedule_tracer(self.tracers.index(best_b))
            else:
                if best_a.prioritized:
                    return pairs
                best_a.set_state("B", self.now)
                best_b.set_state("A", self.now)
                if not self.discrete:
                    self._schedule_tracer(self.tracers.index(best_b))
            pairs.append((best_a_brav, best_b_brav))

    # --- continuous-time scheduling ------------------------------------------

    def _schedule(self, pid: int) -> None:
        if not self.p_alive[pid] or self._absorbed(pid):
            return
        x, j = self.p_x[pid], self.p_j[pid]
        prev = 0.0 if self.p_n[pid] == 0 else self.p_next[pid]
        t = prev + self.instr.hold(x, j, self.p_n[pid] + 1)
        self.p_next[pid] = t
        heapq.heappush(self.heap, (t, 0, x, j, pid, 0))

    def _schedule_tracer(self, idx: int) -> None:
        tr = self.tracers[idx]
        if tr.state != "A" or not self._ready:
            return
        t = self.now + (tr.tau_next - tr.life_at(self.now))
        heapq.heappush(self.heap, (t, 1, tr.x, tr.j, idx, tr.version))

    def _peek(self) -> float:
        heap = self.heap
        while heap:
            t, kind, _, _, ident, version = heap[0]
            if kind == 0:
                if self.p_alive[ident] and self.p_next[ident] == t:
                    return t
            else:
                tr = self.tracers[ident]
                if tr.state == "A" and tr.version == version:
                    return t
            heapq.heappop(heap)
        return INF

    # --- public stepping -----------------------------------------------------

    def next_time(self) -> float:
        if self.discrete:
            return float(self.round + 1) if self.movers() else INF
        return self._peek()

    def process_until(self, t: float, observer: Callable | None = None) -> None:
        """Process every event at time <= ``t`` and integrate up to ``t``."""
        while True:
            nxt = self.next_time()
            if nxt > t or nxt == INF:
                break
            self._integrate(nxt)
            self.now = nxt
            if self.discrete:
                self._discrete_round()
            else:
                self._continuous_event()
            if observer is not None:
                observer(self)
        if t < INF:
            self._integrate(t)
            self.now = max(self.now, t)

    def _discrete_round(self) -> None:
        self.round += 1
        t = self.now
        touched = set()
        instr = self.instr
        root = self.absorbing_root
        arrivals = 0
        for pid in range(len(self.p_x)):
            if not self.p_alive[pid]:
                continue
            old = self.p_loc[pid]
            if old == root:
                continue
            self.p_n[pid] += 1
            new = instr.jump(self.p_x[pid], self.p_j[pid], self.p_n[pid], old)
            self.a_at[old].remove(pid)
            self.a_at[new].append(pid)
            self.p_loc[pid] = new
            touched.add(old)
            touched.add(new)
            if new == root:
                arrivals += 1
            if self.record:
                self.events.append((t, old, -1, "A"))
                self.events.append((t, new, 1, "A"))
        for tr in self.tracers:
            if tr.state != "A":
                continue
            life = tr.life_at(t)
            if life != tr.tau_next:
                raise EngineError(f"tracer {tr.name} life {life} out of step with its path")
            tr.n += 1
            tr.life, tr.since = life, t
            tr.tau_next = float(tr.n + 1)
            touched.add(tr.loc)
            tr.loc = instr.jump(tr.x, tr.j, tr.n, tr.loc)
            touched.add(tr.loc)
        self.root_arrivals += arrivals
        for z in sorted(touched):
            self._resolve(z)
        self._refresh(touched)

    def _continuous_event(self) -> None:
        t, kind, _, _, ident, _ = heapq.heappop(self.heap)
        if kind == 0:
            pid = ident
            old = self.p_loc[pid]
            self.p_n[pid] += 1
            new = self.instr.jump(self.p_x[pid], self.p_j[pid], self.p_n[pid], old)
            self.a_at[old].remove(pid)
            self.a_at[new].append(pid)
            self.p_loc[pid] = new
            if new == self.absorbing_root:
                self.root_arrivals += 1
            if self.record:
                self.events.append((t, old, -1, "A"))
                self.events.append((t, new, 1, "A"))
            self._resolve(new)
            self._schedule(pid)
        else:
            tr = self.tracers[ident]
            old = tr.loc
            tr.life, tr.since = tr.tau_next, t
            tr.n += 1
            tr.loc = self.instr.jump(tr.x, tr.j, tr.n, old)
            tr.tau_next = tr.life + self.instr.hold(tr.x, tr.j, tr.n + 1)
            tr.version += 1
            new = tr.loc
            self._resolve(new)
            self._schedule_tracer(ident)
        self._refresh((old, new))

    def run(self, T: float, observer: Callable | None = None,
            checkpoints: Sequence[float] = ()) -> list[tuple[float, float]]:
        if T < 0:
            raise EngineError("horizon must be nonnegative")
        marks = []
        for c in sorted(checkpoints):
            if c > T:
                raise EngineError(f"checkpoint {c} beyond horizon {T}")
            self.process_until(c, observer)
            marks.append((c, self.totals[next(iter(self.views))]))
        self.process_until(T, observer)
        return marks


def simulate(graph: Graph, xi0: InitialCondition, instr: Instructions, T: float, *,
             H: Iterable[int] | None = None, observers: Sequence[Callable] = (),
             checkpoints: Sequence[float] = (), record: bool = True,
             count_root: bool = False) -> Trajectory:
    """Run the plain DLAS to horizon ``T`` (``inf`` runs until no A can move)."""
    H = range(graph.n) if H is None else H
    system = System(graph, xi0, instr, H=H, record=record, count_root=count_root)

    def observer(s):
        for ob in observers:
            ob(s)

    marks = system.run(T, observer if observers else None, checkpoints)
    horizon = T if T < INF else system.now
    return Trajectory(system.initial, system.events, system.counts(), horizon,
                      dict(system.totals), marks, system.root_arrivals)


def occupation_time(traj: Trajectory, H: Iterable[int], T: float) -> float:
    """``sum_{z in H} int_0^T xi_t(z)^+ dt`` replayed from the event log."""
    if T > traj.horizon:
        raise EngineError(f"T={T} beyond simulated horizon {traj.horizon}")
    H = set(H)
    counts = list(traj.initial)
    rate = sum(max(counts[z], 0) for z in H)
    total = 0.0
    last = 0.0
    for time, v, delta, species in traj.events:
        if time > T:
            break
        if time > last:
            total += rate * (time - last)
            last = time
        if v in H:
            rate -= max(counts[v], 0)
        counts[v] += delta if species == "A" else -delta
        if v in H:
            rate += max(counts[v], 0)
    if T > last:
        total += rate * (T - last)
    return total


def aggregate_motion_time(traj: Trajectory, T: float) -> float:
    return occupation_time(traj, range(len(traj.initial)), T)
