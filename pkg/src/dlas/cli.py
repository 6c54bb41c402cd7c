"""Command-line entry point: ``dlas run | verify | enumerate | orders``.

Every subcommand reads one JSON config (``--config``) whose fields are
checked strictly; command-line flags override the matching config fields.
Exit codes: 0 success, 1 usage or config error, 2 assertion violation,
3 statistical falsification.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance, experiments as ex
from .graph import (GraphError, build_complete_tree, build_graph, build_interval, build_lattice_box,
                    build_path, build_star, sample_galton_watson, validate_pmf)
from .instructions import CONTINUOUS, DISCRETE, InitialCondition
from .oracle import STATISTICS, BudgetExceeded, EnumerationBudget, enumerate_exact
from .orders import EmpiricalSample, icx_dominates, sd_dominates, two_sample_equal
from .tracer import CouplingViolation

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_FALSIFIED = 0, 1, 2, 3
SCHEMA_VERSION = 1
ASSERT_LEVELS = ("off", "invariants", "full")
PRESETS = ("example-line", "minimal-config", "parking", "idla", "coupling-sweep", "h-curve",
           "window-convergence")
TOP_FIELDS = {"schema_version", "preset", "seed", "workers", "assert", "significance", "out",
              "params"}


class ConfigError(Exception):
    """A config problem; ``where`` is ``file: field.path``."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# --- config reading ----------------------------------------------------------------

@dataclass
class Fields:
    """A dict plus the config path of its fields, for error messages."""

    data: dict
    path: str
    source: str

    def where(self, key: str | None = None) -> str:
        dotted = self.path if key is None else (f"{self.path}.{key}" if self.path else key)
        return f"{self.source}: {dotted or '<root>'}"

    def fail(self, key, message):
        raise ConfigError(self.where(key), message)

    def only(self, allowed) -> None:
        for k in self.data:
            if k not in allowed:
                self.fail(k, f"unknown field (allowed: {', '.join(sorted(allowed))})")

    def get(self, key, default=None, kind=None, required=False):
        if key not in self.data:
            if required:
                self.fail(key, "missing required field")
            return default
        v = self.data[key]
        if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
            self.fail(key, f"expected an integer, got {v!r}")
        if kind is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
            self.fail(key, f"expected a number, got {v!r}")
        if kind is bool and not isinstance(v, bool):
            self.fail(key, f"expected true or false, got {v!r}")
        if kind is str and not isinstance(v, str):
            self.fail(key, f"expected a string, got {v!r}")
        if kind is list and not isinstance(v, list):
            self.fail(key, f"expected a list, got {v!r}")
        if kind is dict and not isinstance(v, dict):
            self.fail(key, f"expected an object, got {v!r}")
        return v

    def sub(self, key, required=False) -> "Fields":
        v = self.get(key, {}, dict, required)
        return Fields(v, f"{self.path}.{key}" if self.path else key, self.source)

    def positive(self, key, default, minimum=1):
        v = self.get(key, default, int)
        if v < minimum:
            self.fail(key, f"must be >= {minimum}, got {v}")
        return v

    def horizon(self, key, default):
        v = self.get(key, default)
        if v == "inf":
            return math.inf
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            self.fail(key, f"expected a nonnegative number or \"inf\", got {v!r}")
        return v

    def choice(self, key, default, options):
        v = self.get(key, default, str)
        if v not in options:
            self.fail(key, f"must be one of {', '.join(options)}, got {v!r}")
        return v

    def pmf(self, key, default=None, *, nonnegative=False, required=False):
        """A pmf given as ``{"k": p}``; masses may be numbers or ``"a/b"`` strings."""
        raw = self.get(key, default, dict, required)
        if raw is None:
            return None
        out = {}
        for k, p in raw.items():
            try:
                kk = int(k)
            except (TypeError, ValueError):
                self.fail(key, f"pmf support must be integers, got {k!r}")
            if isinstance(p, str):
                try:
                    p = Fraction(p)
                except ValueError:
                    self.fail(key, f"bad probability {p!r} at {k}")
            elif isinstance(p, bool) or not isinstance(p, (int, float)):
                self.fail(key, f"bad probability {p!r} at {k}")
            elif isinstance(p, int):
                p = Fraction(p)
            out[kk] = p
        try:
            validate_pmf(out)
        except ValueError as err:
            self.fail(key, str(err))
        if nonnegative and min(out) < 0:
            self.fail(key, "pmf must live on the nonnegative integers")
        return out

    def count_or_pmf(self, key, default=None):
        v = self.get(key, default, required=default is None)
        if isinstance(v, dict):
            return self.pmf(key, v, nonnegative=True)
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            self.fail(key, f"expected a nonnegative integer or a pmf, got {v!r}")
        return v


def _label(v):
    return tuple(v) if isinstance(v, list) else v


def build_graph_spec(f: Fields):
    """Graph from ``{"kind": ..., ...}``; kinds: path, interval, star, lattice,
    tree, galton-watson, edges."""
    kind = f.choice("kind", None, ("path", "interval", "star", "lattice", "tree",
                                   "galton-watson", "edges"))
    allowed = {"kind", "root", "directed"}
    try:
        if kind == "path":
            allowed |= {"n"}
            f.only(allowed)
            g = build_path(f.get("n", kind=int, required=True))
        elif kind == "interval":
            allowed |= {"lo", "hi"}
            f.only(allowed)
            g = build_interval(f.get("lo", kind=int, required=True),
                               f.get("hi", kind=int, required=True))
        elif kind == "star":
            allowed |= {"n"}
            f.only(allowed)
            g = build_star(f.get("n", kind=int, required=True))
        elif kind == "lattice":
            allowed |= {"dims"}
            f.only(allowed)
            dims = f.get("dims", kind=list, required=True)
            if not all(isinstance(d, int) and not isinstance(d, bool) for d in dims):
                f.fail("dims", "dims must be integers")
            g = build_lattice_box(dims)
        elif kind == "tree":
            allowed |= {"branching", "depth"}
            f.only(allowed)
            g = build_complete_tree(f.positive("branching", 2), f.positive("depth", 3, 0))
        elif kind == "galton-watson":
            allowed |= {"offspring", "max_depth", "seed"}
            f.only(allowed)
            g = sample_galton_watson(f.pmf("offspring", required=True, nonnegative=True),
                                     f.positive("max_depth", 4, 0), f.get("seed", 0, int))
        else:
            allowed |= {"n", "edges"}
            f.only(allowed)
            n = f.get("n", kind=int, required=True)
            edges = f.get("edges", kind=list, required=True)
            for e in edges:
                if (not isinstance(e, list) or len(e) != 2
                        or not all(isinstance(u, int) and 0 <= u < n for u in e)):
                    f.fail("edges", f"bad edge {e!r} (need [u, v] with 0 <= u, v < {n})")
            g = build_graph(n, [tuple(e) for e in edges])
        if "root" in f.data:
            g = g.with_root(_vertex(g, f, "root"))
        if f.get("directed", False, bool):
            if g.root is None:
                f.fail("directed", "a directed arena needs a root")
            g = g.directed()
    except GraphError as err:
        raise ConfigError(f.where(), str(err)) from None
    return g


def _vertex(g, f: Fields, key, value=None):
    lab = _label(f.data[key] if value is None else value)
    try:
        return g.vertex(lab)
    except GraphError:
        f.fail(key, f"vertex {lab!r} not in the arena")


def _vertices(g, f: Fields, key, default=None):
    labels = f.get(key, default, list)
    if labels is None:
        return None
    return sorted({_vertex(g, f, key, lab) for lab in labels})


def _counts(g, f: Fields, key) -> InitialCondition:
    raw = f.get(key, {}, dict)
    out = {}
    for lab, c in raw.items():
        label = _label(json.loads(lab)) if lab.startswith("[") else _int_label(lab)
        if isinstance(c, bool) or not isinstance(c, int):
            f.fail(key, f"count at {lab} must be an integer")
        out[_vertex(g, f, key, label)] = c
    return InitialCondition(out).pruned()


def _int_label(lab: str):
    try:
        return int(lab)
    except ValueError:
        return lab


# --- per-preset parameter resolution -----------------------------------------------

def _resolve_params(preset: str, f: Fields) -> dict:
    """Validated, default-filled parameters (JSON-ready) for a preset."""
    if preset == "example-line":
        f.only({"T", "window", "replicas", "time_model", "exact"})
        T = f.get("T", 20, int)
        window = f.get("window", list(ex.example_window(T)), list)
        if len(window) != 2 or not all(isinstance(w, int) for w in window):
            f.fail("window", "window must be [lo, hi] integers")
        tm = f.choice("time_model", DISCRETE, (DISCRETE, CONTINUOUS))
        try:
            ex._line_graph(T, window, tm)
        except ex.ExperimentError as err:
            f.fail("window", str(err))
        return {"T": T, "window": window, "replicas": f.positive("replicas", 100_000),
                "time_model": tm, "exact": f.get("exact", True, bool)}
    if preset == "minimal-config":
        f.only({"graph", "p", "alpha", "beta", "T", "H", "replicas", "time_model", "exact"})
        g = build_graph_spec(f.sub("graph", required=True))
        p = f.get("p", 0.5)
        if isinstance(p, (int, float)) and not isinstance(p, bool):
            if not 0 <= p <= 1:
                f.fail("p", "p must lie in [0, 1]")
        else:
            f.fail("p", "p must be a number in [0, 1]")
        half = {"0": "1/2", "2": "1/2"}
        alpha = f.pmf("alpha", half, nonnegative=True)
        beta = f.pmf("beta", half, nonnegative=True)
        for key, pmf in (("alpha", alpha), ("beta", beta)):
            if sum(k * q for k, q in pmf.items()) != 1:
                f.fail(key, "pmf must have mean exactly 1")
        H = _vertices(g, f, "H", [g.labels[0]])
        return {"graph": f.data["graph"], "p": p, "alpha": _pmf_json(alpha),
                "beta": _pmf_json(beta), "T": f.horizon("T", 6),
                "H": [g.labels[v] for v in H], "replicas": f.positive("replicas", 100_000),
                "time_model": f.choice("time_model", DISCRETE, (DISCRETE, CONTINUOUS)),
                "exact": f.get("exact", True, bool)}
    if preset == "parking":
        f.only({"tree", "eta", "replicas"})
        t = f.sub("tree")
        tree = t.data or {"kind": "tree", "branching": 2, "depth": 3, "directed": True}
        g = build_graph_spec(Fields(tree, t.path, t.source))
        if not g.directed_to_root:
            t.fail("directed", "parking needs a tree directed to its root")
        eta = f.pmf("eta", {"0": "1/2", "2": "1/2"}, nonnegative=True)
        return {"tree": tree, "eta": _pmf_json(eta), "replicas": f.positive("replicas", 100_000)}
    if preset == "idla":
        f.only({"graph", "root", "eta", "eta_prime", "replicas", "exact_n", "cutoff"})
        g = build_graph_spec(f.sub("graph", required=True))
        root = _vertex(g, f, "root", f.get("root", g.labels[g.root if g.root is not None else 0]))
        out = {"graph": f.data["graph"], "root": g.labels[root]}
        for key, default in (("eta", 1), ("eta_prime", {"0": "1/2", "2": "1/2"})):
            v = f.count_or_pmf(key, default)
            top = v if isinstance(v, int) else max(v)
            if top > g.n - 1:
                f.fail(key, f"n={top} exceeds the {g.n - 1} non-root sites; "
                            "the run would not terminate")
            out[key] = v if isinstance(v, int) else _pmf_json(v)
        exact_n = f.get("exact_n", [], list)
        if not all(isinstance(n, int) and 0 <= n <= g.n - 1 for n in exact_n):
            f.fail("exact_n", f"entries must be integers in 0..{g.n - 1}")
        out.update(replicas=f.positive("replicas", 100_000), exact_n=exact_n,
                   cutoff=f.positive("cutoff", 40))
        return out
    if preset == "coupling-sweep":
        f.only({"runs", "invert_priority", "family"})
        fam = f.sub("family")
        defaults = ex.SweepFamily()
        fam.only(set(defaults.__dataclass_fields__))
        family = {}
        for name in defaults.__dataclass_fields__:
            d = getattr(defaults, name)
            v = fam.get(name, list(d) if isinstance(d, tuple) else d)
            family[name] = v
        if family["min_vertices"] < 2 or family["max_vertices"] < family["min_vertices"]:
            fam.fail("max_vertices", "need 2 <= min_vertices <= max_vertices")
        for tm in family["time_models"]:
            if tm not in (DISCRETE, CONTINUOUS):
                fam.fail("time_models", f"unknown time model {tm!r}")
        return {"runs": f.positive("runs", 10_000), "family": family,
                "invert_priority": f.get("invert_priority", False, bool)}
    if preset == "h-curve":
        f.only(set())
        return {}
    if preset == "window-convergence":
        f.only({"variant", "T", "radii", "replicas", "time_model", "threshold"})
        variant = f.get("variant", "xi2", str)
        if variant not in ex.VARIANT_ALIASES:
            f.fail("variant", f"unknown variant {variant!r}")
        T = f.horizon("T", 20)
        radii = f.get("radii", [int(2 * T), int(4 * T), int(8 * T)], list)
        if radii != sorted(set(radii)) or not all(isinstance(r, int) and r >= 2 for r in radii):
            f.fail("radii", "radii must be strictly increasing integers >= 2")
        return {"variant": ex.VARIANT_ALIASES[variant], "T": T, "radii": radii,
                "replicas": f.positive("replicas", 10_000),
                "time_model": f.choice("time_model", CONTINUOUS, (DISCRETE, CONTINUOUS)),
                "threshold": f.get("threshold", 0.999, float)}
    raise AssertionError(preset)


def _pmf_json(pmf: dict) -> dict:
    return {str(k): (str(p) if isinstance(p, Fraction) else p) for k, p in sorted(pmf.items())}


def _pmf_value(pmf: dict) -> dict:
    return {int(k): (Fraction(p) if isinstance(p, str) else p) for k, p in pmf.items()}


def _graph(spec: dict, where: str):
    return build_graph_spec(Fields(spec, where, "<resolved>"))


def execute(preset: str, params: dict, seed: int, workers: int, assertions: str,
            level: float) -> ex.ExperimentResult:
    if preset == "example-line":
        return ex.run_example_line(params["T"], tuple(params["window"]), params["replicas"], seed,
                                   time_model=params["time_model"], workers=workers,
                                   exact=params["exact"], level=level)
    if preset == "minimal-config":
        g = _graph(params["graph"], "params.graph")
        budget = EnumerationBudget(horizon=int(params["T"]) if not math.isinf(params["T"]) else 6,
                                   max_a=12, cap=400_000) if params["exact"] else None
        return ex.run_minimal_config(g, params["p"], _pmf_value(params["alpha"]),
                                     _pmf_value(params["beta"]), params["T"],
                                     [g.vertex(_label(h)) for h in params["H"]],
                                     params["replicas"], seed, time_model=params["time_model"],
                                     workers=workers, level=level, exact_budget=budget)
    if preset == "parking":
        return ex.run_parking(_graph(params["tree"], "params.tree"), _pmf_value(params["eta"]),
                              params["replicas"], seed, level=level)
    if preset == "idla":
        g = _graph(params["graph"], "params.graph")

        def arg(v):
            return v if isinstance(v, int) else _pmf_value(v)

        return ex.run_idla(g, g.vertex(_label(params["root"])), arg(params["eta"]),
                           arg(params["eta_prime"]), params["replicas"], seed,
                           exact_n=params["exact_n"], cutoff=params["cutoff"], level=level)
    if preset == "coupling-sweep":
        fam = {k: tuple(v) if isinstance(v, list) else v for k, v in params["family"].items()}
        return ex.run_coupling_sweep(ex.SweepFamily(**fam), params["runs"], seed,
                                     assertions=assertions,
                                     invert_priority=params["invert_priority"], workers=workers)
    if preset == "h-curve":
        return ex.run_h_curve()
    if preset == "window-convergence":
        return ex.run_window_convergence(params["variant"], params["T"], params["radii"],
                                         params["replicas"], seed,
                                         time_model=params["time_model"], workers=workers,
                                         threshold=params["threshold"])
    raise AssertionError(preset)


# --- common config handling ------------------------------------------------------------

def load_config(path: str | None) -> Fields:
    if path is None:
        return Fields({}, "", "<defaults>")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(path, f"cannot read config ({err.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(path, f"invalid JSON at line {err.lineno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(path, "top level must be an object")
    return Fields(data, "", path)


def resolve_common(f: Fields, args, *, preset_required: bool = True) -> dict:
    f.only(TOP_FIELDS)
    version = f.get("schema_version", SCHEMA_VERSION, int)
    if version != SCHEMA_VERSION:
        f.fail("schema_version", f"unsupported schema version {version} (expected {SCHEMA_VERSION})")
    out = {"schema_version": SCHEMA_VERSION}
    if preset_required:
        f.get("preset", required=True)
        out["preset"] = f.choice("preset", None, PRESETS)
    seed = args.seed if args.seed is not None else f.get("seed", 0, int)
    if not 0 <= seed < 2 ** 64:
        f.fail("seed", "seed must lie in [0, 2^64)")
    workers = args.workers if args.workers is not None else f.positive("workers", 1)
    if workers < 1:
        raise ConfigError("--workers", "must be >= 1")
    level = args.assert_level or f.choice("assert", "full", ASSERT_LEVELS)
    sig = f.get("significance", 0.01, float)
    if not 0 < sig <= 0.1:
        f.fail("significance", f"must lie in (0, 0.1], got {sig}")
    out.update(seed=seed, assert_level=level, significance=sig)
    out["workers"] = workers
    out["out"] = args.out or f.get("out", "dlas-out", str)
    return out


def spec_hash(resolved: dict) -> str:
    """sha256 of the canonical resolved config (workers and output dir excluded)."""
    core = {k: v for k, v in resolved.items() if k not in ("workers", "out")}
    text = json.dumps(core, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("artifact", "scipy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, resolved: dict, files: list[str]) -> None:
    manifest = {"spec_hash": spec_hash(resolved), "seed": resolved["seed"],
                "versions": versions(),
                "config": {k: v for k, v in resolved.items() if k != "out"},
                "files": {name: _sha256(out / name) for name in sorted(files)}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                  ensure_ascii=False) + "\n", encoding="utf-8")


def _writable(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise ConfigError("--out", f"output directory {path} not writable ({err.strerror})") \
            from None
    return out


# --- subcommands --------------------------------------------------------------------

def cmd_run(args) -> int:
    f = load_config(args.config)
    resolved = resolve_common(f, args)
    resolved["params"] = _resolve_params(resolved["preset"], f.sub("params"))
    out = _writable(resolved["out"])
    try:
        result = execute(resolved["preset"], resolved["params"], resolved["seed"],
                         resolved["workers"], resolved["assert_level"],
                         1 - resolved["significance"])
    except CouplingViolation as err:
        print(f"assertion violation: {err}", file=sys.stderr)
        return EXIT_VIOLATION
    stamp = {"spec_hash": spec_hash(resolved), "master_seed": resolved["seed"]}
    files = ex.write_outputs(result, out, stamp)
    write_manifest(out, resolved, files)
    print(f"{resolved['preset']}: wrote {', '.join(files)} and manifest.json to {out}")
    if result.violations:
        print(f"{len(result.violations)} assertion violations; see summary.json", file=sys.stderr)
        return EXIT_VIOLATION
    if result.falsified:
        print(f"falsified: {', '.join(result.falsified)}", file=sys.stderr)
        return EXIT_FALSIFIED
    return EXIT_OK


def cmd_verify(args) -> int:
    f = load_config(args.config)
    f.only(TOP_FIELDS - {"preset"})
    resolved = resolve_common(f, args, preset_required=False)
    p = f.sub("params")
    p.only({"scale", "criteria", "debug"})
    scale = p.choice("scale", "full", tuple(acceptance.SCALES))
    criteria = p.get("criteria", sorted(acceptance.CRITERIA), list)
    if not criteria or not all(c in acceptance.CRITERIA for c in criteria):
        p.fail("criteria", f"entries must be in {sorted(acceptance.CRITERIA)}")
    debug = p.sub("debug")
    debug.only({"invert_priority"})
    invert = debug.get("invert_priority", False, bool) or args.invert_priority
    resolved["params"] = {"scale": scale, "criteria": sorted(set(criteria)),
                          "debug": {"invert_priority": invert}}
    cfg = acceptance.SuiteConfig(seed=resolved["seed"], scale=scale, workers=resolved["workers"],
                                 invert_priority=invert, assertions=resolved["assert_level"])
    results = acceptance.run_suite(cfg, resolved["params"]["criteria"],
                                   report=lambda r: print(r.line(), flush=True))
    code = acceptance.exit_code(results)
    report = {"spec_hash": spec_hash(resolved), "seed": resolved["seed"],
              "results": [{"id": r.ident, "title": r.title, "passed": r.passed,
                           "detail": r.detail, "violation": r.violation} for r in results],
              "exit_code": code}
    canon = json.dumps(report, sort_keys=True, separators=(",", ":"))
    report["report_hash"] = hashlib.sha256(canon.encode("utf-8")).hexdigest()
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed; report hash {report['report_hash']}; "
          f"exit {code}")
    if args.out or "out" in f.data:
        out = _writable(resolved["out"])
        (out / "verify.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
        write_manifest(out, resolved, ["verify.json"])
    return code


def cmd_enumerate(args) -> int:
    f = load_config(args.config)
    f.only({"schema_version", "out", "params"})
    if f.get("schema_version", SCHEMA_VERSION, int) != SCHEMA_VERSION:
        f.fail("schema_version", f"expected {SCHEMA_VERSION}")
    p = f.sub("params", required=True)
    p.only({"graph", "xi0", "T", "statistic", "H", "x", "method", "cutoff", "budget"})
    g = build_graph_spec(p.sub("graph", required=True))
    xi0 = _counts(g, p, "xi0")
    T = p.horizon("T", 4)
    statistic = p.choice("statistic", "occupation", STATISTICS)
    H = _vertices(g, p, "H")
    x = _vertex(g, p, "x") if "x" in p.data else None
    method = p.choice("method", "dp", ("dp", "worlds"))
    cutoff = p.get("cutoff", None, int)
    b = p.sub("budget")
    b.only({"horizon", "max_a", "max_branching", "cap"})
    budget = EnumerationBudget(**{k: b.positive(k, getattr(EnumerationBudget(), k))
                                  for k in ("horizon", "max_a", "max_branching", "cap")})
    try:
        law = enumerate_exact(g, xi0, T, statistic, H=H, x=x, budget=budget, method=method,
                              cutoff=cutoff)
    except BudgetExceeded as err:
        raise ConfigError(p.where("budget"), str(err)) from None
    except ValueError as err:
        raise ConfigError(p.where(), str(err)) from None
    w = csv.writer(sys.stdout)
    w.writerow(["value", "probability"])
    for v, q in zip(law.support, law.probabilities):
        w.writerow([v, str(q)])
    if law.tail:
        w.writerow([f">={law.cutoff}", str(law.tail)])
    if args.out or "out" in f.data:
        out = _writable(args.out or f.get("out", str))
        law.to_csv(out / "law.csv")
    return EXIT_OK


def _read_column(path: str, column: str | None) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as err:
        raise ConfigError(path, f"cannot read samples ({err.strerror})") from None
    if not rows:
        raise ConfigError(path, "no data rows")
    names = list(rows[0])
    col = column or names[-1]
    if col not in names:
        raise ConfigError(f"{path}: column", f"no column {col!r} (have {', '.join(names)})")
    try:
        return np.array([float(r[col]) for r in rows if r[col] != ""])
    except ValueError as err:
        raise ConfigError(f"{path}: {col}", str(err)) from None


def cmd_orders(args) -> int:
    x = EmpiricalSample.of(_read_column(args.x, args.column), label=args.x)
    y = EmpiricalSample.of(_read_column(args.y, args.column), label=args.y)
    if not 0 < args.significance <= 0.1:
        raise ConfigError("--significance", "must lie in (0, 0.1]")
    level = 1 - args.significance
    if args.relation == "two-sample":
        res = two_sample_equal(x, y, alpha=args.significance)
        print(json.dumps({"statistic": res.statistic, "pvalue": res.pvalue,
                          "decision": res.decision, "alpha": res.alpha}, sort_keys=True))
        return EXIT_FALSIFIED if res.decision == "reject" else EXIT_OK
    fn = icx_dominates if args.relation == "icx" else sd_dominates
    verdict = fn(x, y, level=level, seed=args.seed if args.seed is not None else 20240611)
    print(verdict.to_json())
    return EXIT_FALSIFIED if verdict.verdict == "fails" else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dlas", description="Diffusion-limited annihilating systems: "
                                              "simulation, exact oracles and order checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
        p.add_argument("--assert", dest="assert_level", choices=ASSERT_LEVELS,
                       help="assertion level for coupled runs")
        p.add_argument("--out", help="output directory")

    common(sub.add_parser("run", help="run a preset experiment"), True)
    v = sub.add_parser("verify", help="run the acceptance suite")
    common(v, False)
    v.add_argument("--invert-priority", action="store_true",
                   help="debug: invert the tracer priority rule (mutation test)")
    e = sub.add_parser("enumerate", help="exact law of a statistic on a small instance")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    o = sub.add_parser("orders", help="order verdicts on two CSV samples")
    o.add_argument("--x", required=True, help="CSV with the X sample")
    o.add_argument("--y", required=True, help="CSV with the Y sample")
    o.add_argument("--column", help="column to read (default: last)")
    o.add_argument("--relation", choices=("icx", "sd", "two-sample"), default="icx")
    o.add_argument("--significance", type=float, default=0.01)
    o.add_argument("--seed", type=int, help="bootstrap seed")
    return parser


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "enumerate": cmd_enumerate,
            "orders": cmd_orders}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ex.ExperimentError, GraphError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CouplingViolation as err:
        print(f"assertion violation: {err}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
