"""Tracer and flipped-tracer coupling of the systems with 0, 1 and 2 added A-particles.

Three engines share one :class:`~dlas.instructions.Instructions`:

* the base system ``xi``;
* the tracer system, X-tracer braveness -2, Y-tracer -1, Y prioritized;
* the flipped tracer system, X-tracer -1, Y-tracer -2, X prioritized.

They are advanced in lockstep over the merged event times so the pathwise
claims (count identities, life dominance, the occupation-time closed forms
and the first/second-order inequalities) can be asserted as the run unfolds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .engine import INF, System
from .graph import Graph
from .instructions import InitialCondition, Instructions, path_occupation

# coefficients (X in A, X in B, Y in A, Y in B) added to alpha - beta
TRACER_VIEWS = {
    "zeta": (0, -1, 0, -1),
    "zeta_X": (1, 0, 0, -1),
    "zeta_XY": (1, 0, 1, 0),
}
FLIPPED_VIEWS = {
    "zeta": (0, -1, 0, -1),
    "zeta_Y": (0, -1, 1, 0),
    "zeta_YX": (1, 0, 1, 0),
}

ASSERT_LEVELS = ("off", "invariants", "full")


class CouplingViolation(AssertionError):
    """A pathwise coupling property failed; ``dump`` replays the run."""

    def __init__(self, check: str, message: str, dump: dict):
        super().__init__(f"{check}: {message} | replay={dump}")
        self.check = check
        self.dump = dump


@dataclass
class ZetaView:
    zeta: list[int]
    zeta_X: list[int]
    zeta_XY: list[int]
    zeta_hat: list[int]
    zeta_hat_Y: list[int]
    zeta_hat_YX: list[int]


@dataclass
class CouplingOutcome:
    phi: float
    phi_x: float
    phi_y: float
    phi_xy: float
    phi_yx: float
    life_x: float
    life_y: float
    life_hat_x: float
    life_hat_y: float
    lives: list[tuple[float, float, float, float, float]] = field(repr=False, default_factory=list)
    strict: dict[str, bool] = field(default_factory=dict)
    checks: int = 0
    x: int = -1
    k: int = 0

    @property
    def second_difference(self) -> float:
        return self.phi_xy - self.phi_x - self.phi_y + self.phi

    def quadruple(self) -> tuple[float, float, float, float]:
        return (self.phi, self.phi_x, self.phi_y, self.phi_xy)

    def as_row(self) -> dict:
        d = asdict(self)
        d.pop("lives")
        d.pop("strict")
        return d


class CoupledRun:
    """Base, tracer and flipped systems advanced on one merged clock."""

    def __init__(self, graph: Graph, xi0: InitialCondition, x: int, instr: Instructions,
                 H: Iterable[int], *, assertions: str = "full", invert_priority: bool = False):
        if assertions not in ASSERT_LEVELS:
            raise ValueError(f"assertion level must be one of {ASSERT_LEVELS}")
        if not 0 <= x < graph.n:
            raise ValueError(f"tracer site {x} not in graph")
        self.graph = graph
        self.xi0 = InitialCondition(xi0)
        self.x = x
        self.instr = instr
        self.H = tuple(sorted(set(H)))
        self.assertions = assertions
        self.invert_priority = invert_priority
        self.k = max(self.xi0[x] + 1, 1)
        pri_tracer, pri_flipped = ("X", "Y") if invert_priority else ("Y", "X")
        self.base = System(graph, self.xi0, instr, H=self.H)
        self.tracer = System(graph, self.xi0, instr, H=self.H, views=TRACER_VIEWS,
                             tracer_site=x, prioritized=pri_tracer, brav_x=-2.0, brav_y=-1.0)
        self.flipped = System(graph, self.xi0, instr, H=self.H, views=FLIPPED_VIEWS,
                              tracer_site=x, prioritized=pri_flipped, brav_x=-1.0, brav_y=-2.0)
        self.systems = (self.base, self.tracer, self.flipped)
        self.now = 0.0
        self.lives: list[tuple[float, float, float, float, float]] = []
        self.life_strict = False
        self.checks = 0
        self._sample_lives(0.0)
        if assertions == "full":
            self.check_all()

    # --- reporting ---------------------------------------------------------

    def dump(self) -> dict:
        return {
            "seed": self.instr.master_seed,
            "time_model": self.instr.time_model,
            "graph": self.graph.name,
            "xi0": {self.graph.labels[v]: c for v, c in sorted(self.xi0.items())},
            "x": self.graph.labels[self.x],
            "H": [self.graph.labels[v] for v in self.H],
            "t": self.now,
            "invert_priority": self.invert_priority,
        }

    def fail(self, check: str, message: str):
        raise CouplingViolation(check, message, self.dump())

    # --- views -------------------------------------------------------------

    def zeta_view(self) -> ZetaView:
        tr, fl = self.tracer, self.flipped
        return ZetaView(tr.view("zeta"), tr.view("zeta_X"), tr.view("zeta_XY"),
                        fl.view("zeta"), fl.view("zeta_Y"), fl.view("zeta_YX"))

    def _sample_lives(self, t: float) -> None:
        tr, fl = self.tracer, self.flipped
        row = (t, tr.tx.life_at(t), tr.ty.life_at(t), fl.tx.life_at(t), fl.ty.life_at(t))
        self.lives.append(row)
        if row[2] > row[4]:
            self.life_strict = True

    # --- checks ------------------------------------------------------------

    def check_zeta_base(self) -> None:
        xi = self.base.counts()
        if self.tracer.view("zeta") != xi:
            self.fail("zeta_equals_xi", "tracer-system zeta differs from base counts")
        if self.flipped.view("zeta") != xi:
            self.fail("zeta_equals_xi", "flipped-system zeta differs from base counts")

    def check_difference_identities(self) -> None:
        for system, first, both, lead, other in (
                (self.tracer, "zeta_X", "zeta_XY", self.tracer.tx, self.tracer.ty),
                (self.flipped, "zeta_Y", "zeta_YX", self.flipped.ty, self.flipped.tx)):
            for z in range(self.graph.n):
                base = system.view_at("zeta", z)
                one = int(lead.loc == z)
                if system.view_at(first, z) - base != one:
                    self.fail("difference_identity", f"{first} - zeta at {z}")
                if system.view_at(both, z) - base != one + int(other.loc == z):
                    self.fail("difference_identity", f"{both} - zeta at {z}")

    def check_life_dominance(self) -> None:
        t = self.now
        ly = self.tracer.ty.life_at(t)
        ly_hat = self.flipped.ty.life_at(t)
        if ly < ly_hat - self._tol(ly_hat):
            self.fail("life_dominance", f"L^Y={ly} < hat L^Y={ly_hat}")

    def check_site_rules(self) -> None:
        for system in self.systems:
            for z in range(self.graph.n):
                if system.a_at[z] and system.b_at[z]:
                    self.fail("sign_consistency", f"A and B coexist at {z}")
            for trc in system.tracers:
                if trc.state == "A" and system.b_at[trc.loc]:
                    self.fail("sign_consistency", f"{trc.name}-tracer in A on a B site")
                if trc.state == "B" and system.a_at[trc.loc]:
                    self.fail("sign_consistency", f"{trc.name}-tracer in B on an A site")
            if system.tracers:
                tx, ty = system.tracers
                if tx.loc == ty.loc and tx.state != ty.state:
                    in_a = tx if tx.state == "A" else ty
                    if not in_a.prioritized:
                        self.fail("stable_coexistence",
                                  f"non-prioritized {in_a.name}-tracer in A beside the other in B")

    def check_all(self) -> None:
        self.checks += 1
        self.check_zeta_base()
        self.check_difference_identities()
        self.check_life_dominance()
        self.check_site_rules()

    def _tol(self, scale: float) -> float:
        return 0.0 if self.instr.discrete else 1e-9 * max(1.0, abs(scale))

    # --- stepping ----------------------------------------------------------

    def next_time(self) -> float:
        return min(s.next_time() for s in self.systems)

    def advance(self, T: float) -> None:
        """Advance all three systems to ``T`` checking at every merged event time."""
        while True:
            t = self.next_time()
            if t > T or t == INF:
                break
            for s in self.systems:
                s.process_until(t)
            self.now = t
            self._sample_lives(t)
            if self.assertions == "full":
                self.check_all()
        for s in self.systems:
            s.process_until(T)
        if T < INF:
            self.now = T
            self._sample_lives(T)

    def outcome(self) -> CouplingOutcome:
        T = self.now
        tr, fl = self.tracer, self.flipped
        out = CouplingOutcome(
            phi=self.base.totals["xi"],
            phi_x=tr.totals["zeta_X"],
            phi_y=fl.totals["zeta_Y"],
            phi_xy=tr.totals["zeta_XY"],
            phi_yx=fl.totals["zeta_YX"],
            life_x=tr.tx.life_at(T), life_y=tr.ty.life_at(T),
            life_hat_x=fl.tx.life_at(T), life_hat_y=fl.ty.life_at(T),
            lives=self.lives, checks=self.checks, x=self.x, k=self.k,
        )
        if self.assertions != "off":
            self.check_outcome(out)
        out.strict = {
            "d_x": out.phi_x > out.phi,
            "d_y": out.phi_y > out.phi,
            "e": out.second_difference > self._tol(out.phi_xy),
            "life": self.life_strict,
        }
        return out

    def check_outcome(self, out: CouplingOutcome) -> None:
        tol = self._tol(out.phi_xy)
        for name, zeta_total in (("tracer", self.tracer.totals["zeta"]),
                                 ("flipped", self.flipped.totals["zeta"])):
            if abs(zeta_total - out.phi) > tol:
                self.fail("zeta_equals_xi", f"{name} zeta occupation {zeta_total} != {out.phi}")
        if out.phi_x < out.phi - tol:
            self.fail("first_order", f"Phi^X={out.phi_x} < Phi={out.phi}")
        if out.phi_y < out.phi - tol:
            self.fail("first_order", f"Phi^Y={out.phi_y} < Phi={out.phi}")
        if out.second_difference < -tol:
            self.fail("second_order", f"second difference {out.second_difference} < 0")
        instr, x, k, H = self.instr, self.x, self.k, self.H
        occ_x = path_occupation(instr, x, k, out.life_x, H)
        occ_y = path_occupation(instr, x, k + 1, out.life_y, H)
        occ_y_hat = path_occupation(instr, x, k + 1, out.life_hat_y, H)
        for check, lhs, rhs in (("closed_form_X", out.phi_x - out.phi, occ_x),
                                ("closed_form_Y", out.phi_y - out.phi, occ_y_hat),
                                ("closed_form_XY", out.phi_xy - out.phi, occ_x + occ_y)):
            if not _close(lhs, rhs, self.instr.discrete):
                self.fail(check, f"{lhs} != {rhs}")
        if out.life_y < out.life_hat_y - self._tol(out.life_hat_y):
            self.fail("life_dominance", f"L_T^Y={out.life_y} < hat L_T^Y={out.life_hat_y}")


def _close(a: float, b: float, exact: bool) -> bool:
    if exact:
        return a == b
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def run_coupled(graph: Graph, xi0: InitialCondition, x: int, instr: Instructions, T: float,
                H: Iterable[int], *, assertions: str = "full",
                invert_priority: bool = False) -> CouplingOutcome:
    """Run the three coupled systems to ``T`` and return the statistic quadruple."""
    if T < 0 or math.isinf(T):
        raise ValueError("coupled runs need a finite nonnegative horizon")
    run = CoupledRun(graph, xi0, x, instr, H, assertions=assertions,
                     invert_priority=invert_priority)
    run.advance(T)
    return run.outcome()


def zeta_view(run: CoupledRun) -> ZetaView:
    return run.zeta_view()


def check_difference_identities(run: CoupledRun) -> None:
    run.check_difference_identities()


def check_life_dominance(run: CoupledRun) -> None:
    """Assert ``L^Y >= hat L^Y`` on every life sample recorded so far."""
    for t, _, ly, _, ly_hat in run.lives:
        if ly < ly_hat - run._tol(ly_hat):
            run.now = t
            run.fail("life_dominance", f"L^Y={ly} < hat L^Y={ly_hat} at t={t}")
