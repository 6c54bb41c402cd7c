"""Stochastic-order verdicts: icx via stop-loss transforms, sd via survival functions.

Exact laws are compared with rational arithmetic at every merged support
point, which decides the order for finitely supported laws.  Empirical
samples get simultaneous bands from a multiplier bootstrap with a fixed seed;
in that mode a dominance claim can only be falsified, never confirmed.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .oracle import ExactDistribution

HOLDS = "holds"
FAILS = "fails"
NOT_FALSIFIED = "not_falsified"
INCONCLUSIVE = "inconclusive"

MIN_SAMPLE = 100
BOOTSTRAP_SEED = 20240611


@dataclass(frozen=True)
class EmpiricalSample:
    """Sorted sample with its provenance."""

    values: np.ndarray
    seed: int | None = None
    label: str = ""

    @classmethod
    def of(cls, values, seed: int | None = None, label: str = "") -> "EmpiricalSample":
        arr = np.sort(np.asarray(values, dtype=np.float64))
        if arr.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample contains non-finite values")
        return cls(arr, seed, label)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def tallies(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unique(self.values, return_counts=True)


Distribution = Union[ExactDistribution, EmpiricalSample]


def _check_nonempty(*ds: Distribution) -> None:
    for d in ds:
        if isinstance(d, ExactDistribution):
            if d.tail:
                raise ValueError("exact law has unresolved tail mass")
            if not d.support:
                raise ValueError("empty distribution")
        elif not isinstance(d, EmpiricalSample) or d.n == 0:
            raise ValueError("empty or unsupported distribution")


def _to_fraction(a) -> Fraction:
    return a if isinstance(a, Fraction) else Fraction(str(a)) if isinstance(a, float) else Fraction(a)


def exact_stop_loss(d: ExactDistribution, a) -> Fraction:
    a = _to_fraction(a)
    return sum((p * (Fraction(v) - a) for v, p in zip(d.support, d.probabilities)
                if Fraction(v) > a), Fraction(0))


def exact_survival(d: ExactDistribution, a) -> Fraction:
    a = _to_fraction(a)
    return sum((p for v, p in zip(d.support, d.probabilities) if Fraction(v) >= a), Fraction(0))


# --- multiplier bootstrap ------------------------------------------------------

def _features(sample: EmpiricalSample, grid: np.ndarray, kind: str):
    """Per-unique-value feature matrix ``f(u, a)`` and tie counts."""
    u, c = sample.tallies()
    if kind == "stoploss":
        F = np.maximum(u[:, None] - grid[None, :], 0.0)
    else:
        F = (u[:, None] >= grid[None, :]).astype(np.float64)
    return F, c


def _functional(sample: EmpiricalSample, grid: np.ndarray, kind: str):
    F, c = _features(sample, grid, kind)
    n = sample.n
    mean = (c @ F) / n
    centered = F - mean[None, :]
    var = (c @ centered ** 2) / n
    return mean, centered, c, var


def _bootstrap_draws(centered: np.ndarray, counts: np.ndarray, n: int, B: int,
                     gen: np.random.Generator, chunk: int = 200) -> np.ndarray:
    """``B`` draws of ``n^{-1} sum_i g_i (f(x_i) - mean)``; ties share a summed multiplier."""
    scale = np.sqrt(counts)
    out = np.empty((B, centered.shape[1]))
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        g = gen.standard_normal((hi - lo, len(counts))) * scale[None, :]
        out[lo:hi] = g @ centered / n
    return out


@dataclass
class Band:
    thresholds: list[float]
    estimate: list[float]
    lower: list[float]
    upper: list[float]


def _gap_band(dX: EmpiricalSample, dY: EmpiricalSample, grid: np.ndarray, kind: str,
              level: float, B: int, seed: int) -> Band:
    """Simultaneous band for ``f_Y(a) - f_X(a)`` over the grid (sup-t statistic)."""
    mX, cX, nX, vX = _functional(dX, grid, kind)
    mY, cY, nY, vY = _functional(dY, grid, kind)
    gap = mY - mX
    se = np.sqrt(vX / dX.n + vY / dY.n)
    gen = np.random.default_rng(seed)
    draws = (_bootstrap_draws(cY, nY, dY.n, B, gen) - _bootstrap_draws(cX, nX, dX.n, B, gen))
    live = se > 0
    if live.any():
        t = np.max(np.abs(draws[:, live]) / se[None, live], axis=1)
        q = float(np.quantile(t, level))
    else:
        q = 0.0
    half = q * se
    return Band(grid.tolist(), gap.tolist(), (gap - half).tolist(), (gap + half).tolist())


def default_grid(dX: EmpiricalSample, dY: EmpiricalSample, points: int = 41) -> np.ndarray:
    """Merged sample quantiles plus both samples' endpoints."""
    pooled = np.concatenate([dX.values, dY.values])
    qs = np.quantile(pooled, np.linspace(0.0, 1.0, points))
    ends = [dX.values[0], dX.values[-1], dY.values[0], dY.values[-1]]
    # a point below every value makes the mean comparison part of the grid
    low = min(ends) - 1.0
    return np.unique(np.concatenate([[low], qs, ends]))


# --- verdicts ----------------------------------------------------------------

@dataclass
class OrderVerdict:
    relation: str
    verdict: str
    mode: str
    thresholds: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    witness: float | None = None
    witness_gap: float | None = None
    witness_band: tuple[float, float] | None = None
    level: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("thresholds", "gaps", "lower", "upper"):
            d[key] = [_jsonable(v) for v in d[key]]
        for key in ("witness", "witness_gap"):
            d[key] = _jsonable(d[key])
        if d["witness_band"] is not None:
            d["witness_band"] = [_jsonable(v) for v in d["witness_band"]]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def consistent(self) -> bool:
        return self.verdict in (HOLDS, NOT_FALSIFIED)


def _jsonable(v):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _exact_points(dX: ExactDistribution, dY: ExactDistribution) -> list[Fraction]:
    pts = sorted({Fraction(v) for v in dX.support} | {Fraction(v) for v in dY.support})
    return [pts[0] - 1] + pts


def _exact_verdict(dX, dY, relation: str, fn) -> OrderVerdict:
    pts = _exact_points(dX, dY)
    gaps = [fn(dY, a) - fn(dX, a) for a in pts]
    # among equally bad points prefer a real support point over the sentinel
    worst = min(range(len(pts)), key=lambda i: (gaps[i], -i))
    ok = gaps[worst] >= 0
    return OrderVerdict(
        relation, HOLDS if ok else FAILS, "exact", pts, gaps, gaps, gaps,
        witness=None if ok else pts[worst], witness_gap=None if ok else gaps[worst],
        witness_band=None if ok else (gaps[worst], gaps[worst]),
        detail="checked at every merged support point")


def _empirical_verdict(dX, dY, relation: str, kind: str, thresholds, level: float,
                       B: int, seed: int) -> OrderVerdict:
    if dX.n < MIN_SAMPLE or dY.n < MIN_SAMPLE:
        return OrderVerdict(relation, INCONCLUSIVE, "empirical", level=level,
                            detail=f"samples below {MIN_SAMPLE} values")
    grid = default_grid(dX, dY) if thresholds is None else np.asarray(sorted(set(
        float(a) for a in thresholds)), dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty threshold grid")
    band = _gap_band(dX, dY, grid, kind, level, B, seed)
    upper = np.asarray(band.upper)
    if (upper < 0).any():
        i = int(np.argmin(upper))
        return OrderVerdict(relation, FAILS, "empirical", band.thresholds, band.estimate,
                            band.lower, band.upper, witness=band.thresholds[i],
                            witness_gap=band.estimate[i],
                            witness_band=(band.lower[i], band.upper[i]), level=level,
                            detail="a simultaneous band lies entirely below 0")
    return OrderVerdict(relation, NOT_FALSIFIED, "empirical", band.thresholds, band.estimate,
                        band.lower, band.upper, level=level,
                        detail="every simultaneous band contains or exceeds 0")


def _dispatch(dX, dY, relation, kind, exact_fn, thresholds, level, B, seed):
    _check_nonempty(dX, dY)
    if isinstance(dX, ExactDistribution) and isinstance(dY, ExactDistribution):
        if thresholds not in (None, "exact"):
            raise ValueError("exact laws are compared at their merged support")
        return _exact_verdict(dX, dY, relation, exact_fn)
    if isinstance(dX, EmpiricalSample) and isinstance(dY, EmpiricalSample):
        if thresholds == "exact":
            raise ValueError("exact mode needs two exact laws")
        return _empirical_verdict(dX, dY, relation, kind, thresholds, level, B, seed)
    raise ValueError("compare two exact laws or two empirical samples")


def icx_dominates(dX: Distribution, dY: Distribution, thresholds=None, *, level: float = 0.99,
                  bootstrap: int = 2000, seed: int = BOOTSTRAP_SEED) -> OrderVerdict:
    """Is ``X <=_icx Y``?  Gaps are ``E(Y-a)^+ - E(X-a)^+``."""
    return _dispatch(dX, dY, "icx", "stoploss", exact_stop_loss, thresholds, level,
                     bootstrap, seed)


def sd_dominates(dX: Distribution, dY: Distribution, thresholds=None, *, level: float = 0.99,
                 bootstrap: int = 2000, seed: int = BOOTSTRAP_SEED) -> OrderVerdict:
    """Is ``X <=_st Y``?  Gaps are ``P(Y >= a) - P(X >= a)``."""
    return _dispatch(dX, dY, "sd", "survival", exact_survival, thresholds, level,
                     bootstrap, seed)


@dataclass
class StopLoss:
    value: float | Fraction
    lower: float | Fraction
    upper: float | Fraction


def stop_loss(d: Distribution, a, *, level: float = 0.99, bootstrap: int = 2000,
              seed: int = BOOTSTRAP_SEED) -> StopLoss:
    """``E(X - a)^+``, exact or with a bootstrap band."""
    _check_nonempty(d)
    if isinstance(d, ExactDistribution):
        v = exact_stop_loss(d, a)
        return StopLoss(v, v, v)
    grid = np.array([float(a)])
    mean, centered, counts, var = _functional(d, grid, "stoploss")
    draws = _bootstrap_draws(centered, counts, d.n, bootstrap, np.random.default_rng(seed))
    q = float(np.quantile(np.abs(draws[:, 0]), level))
    return StopLoss(float(mean[0]), float(mean[0] - q), float(mean[0] + q))


def stop_loss_curve(d: Distribution, grid: Sequence[float]) -> list[float]:
    if isinstance(d, ExactDistribution):
        return [float(exact_stop_loss(d, a)) for a in grid]
    g = np.asarray(grid, dtype=np.float64)
    F, c = _features(d, g, "stoploss")
    return ((c @ F) / d.n).tolist()


def write_stoploss_tsv(path, curves: dict[str, Distribution], grid: Sequence[float], *,
                       header: str | None = None) -> None:
    """Stop-loss curves ``a -> E(X-a)^+`` as TSV; ``header`` becomes a ``#`` comment line."""
    names = list(curves)
    cols = [stop_loss_curve(curves[k], grid) for k in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["a"] + names)
        for i, a in enumerate(grid):
            w.writerow([f"{float(a):.10g}"] + [f"{col[i]:.10g}" for col in cols])


# --- Example 1.1 consequences --------------------------------------------------

def _summary_exact(d: ExactDistribution) -> dict:
    mean = d.mean
    var = d.expect(lambda v: (Fraction(v) - mean) ** 2)
    return {"mean": mean, "var": var, "p0": d.prob(0)}


def _summary_boot(d: EmpiricalSample, B: int, gen: np.random.Generator):
    u, c = d.tallies()
    p = c / d.n
    zero = u == 0
    out = {"mean": [], "var": [], "p0": []}
    for lo in range(0, B, 200):
        k = min(200, B - lo)
        w = gen.multinomial(d.n, p, size=k) / d.n
        m = w @ u
        out["mean"].append(m)
        out["var"].append(w @ u ** 2 - m ** 2)
        out["p0"].append(w[:, zero].sum(axis=1))
    point = {"mean": float(p @ u), "var": float(p @ u ** 2 - (p @ u) ** 2),
             "p0": float(p[zero].sum())}
    return point, {k: np.concatenate(v) for k, v in out.items()}


def consequence_panel(dX: Distribution, dY: Distribution, *, level: float = 0.99,
                      bootstrap: int = 2000, seed: int = BOOTSTRAP_SEED) -> dict:
    """Necessary conditions of ``X <=_icx Y`` for nonnegative laws.

    * mean: ``E X <= E Y``;
    * variance: ``Var X <= Var Y`` when the means are equal;
    * atom at 0: ``P(X = 0) <= P(Y = 0)`` when the means are equal.  Then the
      two laws are in convex order and ``t**x`` is convex, so
      ``E t**X <= E t**Y`` and ``t -> 0`` gives the atom comparison.  With
      unequal means icx order says nothing about the atoms.

    Each item reports ``X``, ``Y`` and a status: ``consistent``, ``tie``,
    ``violated`` (the reverse inequality is significant in empirical mode) or
    ``n/a``.
    """
    _check_nonempty(dX, dY)
    if isinstance(dX, ExactDistribution) and isinstance(dY, ExactDistribution):
        sx, sy = _summary_exact(dX), _summary_exact(dY)

        def status(lo, hi):  # want lo <= hi
            return "tie" if lo == hi else ("consistent" if lo < hi else "violated")

        equal_means = sx["mean"] == sy["mean"]
        return {
            "mode": "exact",
            "mean": {"X": float(sx["mean"]), "Y": float(sy["mean"]),
                     "status": status(sx["mean"], sy["mean"])},
            "variance": {"X": float(sx["var"]), "Y": float(sy["var"]),
                         "applies": equal_means,
                         "status": status(sx["var"], sy["var"]) if equal_means else "n/a"},
            "p_zero": {"X": float(sx["p0"]), "Y": float(sy["p0"]), "applies": equal_means,
                       "status": status(sx["p0"], sy["p0"]) if equal_means else "n/a"},
        }
    if not (isinstance(dX, EmpiricalSample) and isinstance(dY, EmpiricalSample)):
        raise ValueError("compare two exact laws or two empirical samples")
    gen = np.random.default_rng(seed)
    px, bx = _summary_boot(dX, bootstrap, gen)
    py, by = _summary_boot(dY, bootstrap, gen)
    alpha = 1.0 - level
    report: dict = {"mode": "empirical", "level": level}
    for key in ("mean", "variance", "p_zero"):
        src = {"variance": "var", "p_zero": "p0"}.get(key, key)
        diff = by[src] - bx[src]  # >= 0 when consistent
        lo, hi = np.quantile(diff, [alpha / 2, 1 - alpha / 2])
        point = py[src] - px[src]
        if point == 0 and lo == hi == 0:
            st = "tie"
        elif hi < 0:
            st = "violated"
        elif lo > 0:
            st = "consistent"
        else:
            st = "tie"
        report[key] = {"X": px[src], "Y": py[src], "difference": float(point),
                       "band": [float(lo), float(hi)], "status": st}
    mean_lo, mean_hi = report["mean"]["band"]
    for key in ("variance", "p_zero"):
        report[key]["applies"] = bool(mean_lo <= 0 <= mean_hi)
        if not report[key]["applies"]:
            report[key]["status"] = "n/a"
    return report


# --- equality in law -----------------------------------------------------------

@dataclass
class TwoSampleResult:
    statistic: float | None
    pvalue: float | None
    decision: str
    alpha: float


def two_sample_equal(dX: EmpiricalSample, dY: EmpiricalSample, *,
                     alpha: float = 0.01) -> TwoSampleResult:
    """Two-sample Kolmogorov-Smirnov test of equal laws."""
    if not (isinstance(dX, EmpiricalSample) and isinstance(dY, EmpiricalSample)):
        raise ValueError("two_sample_equal needs two empirical samples")
    if dX.n < MIN_SAMPLE or dY.n < MIN_SAMPLE:
        return TwoSampleResult(None, None, INCONCLUSIVE, alpha)
    with warnings.catch_warnings():
        # ties make the exact small-sample p-value unavailable; scipy falls back to asymp
        warnings.simplefilter("ignore", RuntimeWarning)
        res = stats.ks_2samp(dX.values, dY.values)
    decision = "reject" if res.pvalue < alpha else "not_rejected"
    return TwoSampleResult(float(res.statistic), float(res.pvalue), decision, alpha)


def icx_on_pmfs(pmf_x: dict, pmf_y: dict) -> OrderVerdict:
    """Exact icx check between two per-site pmfs (used to validate preset inputs)."""
    def law(pmf):
        return ExactDistribution.from_weights(
            {int(k): _to_fraction(p) for k, p in pmf.items() if _to_fraction(p) > 0})

    return icx_dominates(law(pmf_x), law(pmf_y))
