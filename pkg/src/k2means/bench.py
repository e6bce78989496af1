"""Benchmark harness: operations needed to reach a reference energy, and the
initializer comparison.

A method reaches level ``p`` at the first trace sample whose energy is at
most ``(1 + p) * E_ref``, where ``E_ref`` is the best converged Lloyd++
energy over the seeds. Counted operations include the initializer.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import OpCounter, Trace, TraceSample, ValidationError, as_points
from .engines import ENGINES, EngineConfig, run_elkan, run_lloyd
from .init import INITS, init_kmeanspp
from .io import atomic_write

LEVELS = (0.0, 0.005, 0.01, 0.02)
KN_GRID = (3, 5, 10, 20, 30, 50, 100, 200)

# Named pipelines: (engine, initializer)
METHODS = {
    "lloyd": ("lloyd", "random"),
    "lloyd++": ("lloyd", "kmeanspp"),
    "elkan": ("elkan", "random"),
    "elkan++": ("elkan", "kmeanspp"),
    "minibatch": ("minibatch", "random"),
    "minibatch++": ("minibatch", "kmeanspp"),
    "k2means": ("k2means", "gdi"),
}
BASELINE = "lloyd++"


def resolve_method(name: str):
    """Map a method name (or ``engine:init``) to ``(engine, init)``."""
    if name in METHODS:
        return METHODS[name]
    if ":" in name:
        engine, init = name.split(":", 1)
        if engine in ENGINES and init in INITS:
            return engine, init
    valid = sorted(METHODS) + [f"{e}:{i}" for e in ENGINES for i in INITS]
    raise ValidationError(f"unknown method {name!r}; valid: {', '.join(valid)}")


@dataclass
class BenchSpec:
    dataset: str
    ks: list
    methods: list
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    levels: list = field(default_factory=lambda: list(LEVELS))
    kn_grid: list = field(default_factory=lambda: list(KN_GRID))
    max_iters: int = 100
    batch_size: int = 100
    minibatch_iters: Optional[int] = None
    data: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known - {"k"}
        if extra:
            raise ValidationError(f"unknown bench spec fields: {sorted(extra)}")
        raw = dict(raw)
        if "k" in raw:
            raw["ks"] = raw.pop("k")
        if isinstance(raw.get("ks"), int):
            raw["ks"] = [raw["ks"]]
        spec = cls(**raw)
        spec.validate()
        return spec

    def validate(self) -> None:
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValidationError("k list must hold positive integers")
        for m in self.methods:
            resolve_method(m)
        bad = [lv for lv in self.levels if lv < 0]
        if bad:
            raise ValidationError(f"reference levels must be >= 0: {bad}")
        if any(kn < 1 for kn in self.kn_grid):
            raise ValidationError("k_n grid entries must be >= 1")
        if not self.seeds:
            raise ValidationError("at least one seed is required")

    def cells(self):
        """Every (k, method, param, seed) to run; the baseline is always included."""
        methods = list(self.methods)
        if BASELINE not in methods:
            methods.insert(0, BASELINE)
        out = []
        for k in self.ks:
            for m in methods:
                engine, _ = resolve_method(m)
                params = [kn for kn in self.kn_grid if kn <= k] if engine == "k2means" else [None]
                for p in params:
                    for s in self.seeds:
                        out.append((k, m, p, s))
        return out


def run_pipeline(data, k: int, method: str, seed: int, param=None, max_iters: int = 100,
                 batch_size: int = 100, minibatch_iters=None):
    """Initializer plus engine on one shared counter; returns (state, trace, counter)."""
    engine, init = resolve_method(method)
    X = as_points(data)
    counter = OpCounter()
    state0 = INITS[init](X, k, seed, counter)
    cfg = EngineConfig(max_iters=max_iters, rng_seed=seed, batch_size=batch_size,
                       minibatch_iters=minibatch_iters)
    if engine == "k2means":
        cfg.k_n = param if param is not None else min(10, k)
    state, trace = ENGINES[engine](X, state0, cfg, counter)
    return state, trace, counter


def ops_to_reference(trace: Trace, target: float):
    for s in trace:
        if s.energy <= target:
            return s.cumulative_ops
    return None


def reference_energy(data, k: int, seeds) -> float:
    """Best converged Lloyd++ energy over ``seeds``."""
    X = as_points(data)
    best = np.inf
    for s in seeds:
        state0 = init_kmeanspp(X, k, s)
        _, trace = run_lloyd(X, state0)
        best = min(best, trace.samples[-1].energy)
    return float(best)


_WORKER_X = None


def _init_worker(X):
    global _WORKER_X
    _WORKER_X = X


def _run_cell(args):
    k, method, param, seed, max_iters, batch_size, mb_iters = args
    _, trace, _ = run_pipeline(_WORKER_X, k, method, seed, param, max_iters, batch_size, mb_iters)
    return [tuple(s) for s in trace.samples]


def run_bench(data, spec: BenchSpec, parallelism: int = 1):
    """Run every cell of ``spec``; returns ``(rows, traces)``.

    ``traces`` maps ``(k, method, param, seed)`` to its ``Trace``.
    """
    X = as_points(data)
    cells = spec.cells()
    jobs = [(k, m, p, s, spec.max_iters, spec.batch_size, spec.minibatch_iters)
            for (k, m, p, s) in cells]
    if parallelism > 1:
        with ProcessPoolExecutor(parallelism, initializer=_init_worker, initargs=(X,)) as ex:
            results = list(ex.map(_run_cell, jobs))
    else:
        _init_worker(X)
        results = [_run_cell(j) for j in jobs]
    traces = {c: Trace([TraceSample(*t) for t in r]) for c, r in zip(cells, results)}
    return build_rows(spec, traces), traces


def build_rows(spec: BenchSpec, traces: dict) -> list:
    """Report rows from a completed trace set; a pure function of its inputs."""
    rows = []
    for k in spec.ks:
        e_ref = min(t.samples[-1].energy for (kk, m, _, _), t in traces.items()
                    if kk == k and m == BASELINE)
        for (kk, m, p, s), trace in traces.items():
            if kk != k:
                continue
            engine, init = resolve_method(m)
            for lv in spec.levels:
                ops = ops_to_reference(trace, (1.0 + lv) * e_ref)
                rows.append({
                    "dataset": spec.dataset, "k": k, "method": m, "init": init,
                    "param": p, "seed": s, "level": lv, "ops": ops,
                    "reached": ops is not None, "energy_ref": e_ref,
                })
    rows.sort(key=lambda r: (r["k"], r["level"], r["method"],
                             -1 if r["param"] is None else r["param"], r["seed"]))
    return rows


def speedup_at_reference(rows: list) -> dict:
    """Speedup over Lloyd++ for one (dataset, k, level) group of rows.

    Ops are averaged over seeds per (method, param); a parameter counts as
    reaching the level only if every seed did. Each method gets its best
    parameter. Returns ``{method: {"speedup", "param", "ops"}}`` with
    ``speedup`` None for methods that did not reach the level.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["param"]), []).append(r)
    base = [g for (m, _), g in groups.items() if m == BASELINE]
    if not base:
        raise ValidationError("speedup needs Lloyd++ rows")
    base = base[0]
    if not all(r["reached"] for r in base):
        raise ValidationError("Lloyd++ did not reach this reference level")
    base_ops = float(np.mean([r["ops"] for r in base]))
    out = {}
    for (m, p), g in sorted(groups.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1])):
        cur = out.setdefault(m, {"speedup": None, "param": None, "ops": None})
        if not all(r["reached"] for r in g):
            continue
        ops = float(np.mean([r["ops"] for r in g]))
        if cur["ops"] is None or ops < cur["ops"]:
            cur.update(ops=ops, param=p, speedup=base_ops / ops)
    return out


def summarize(rows: list) -> dict:
    """Speedups for every (k, level) in a report; unreachable baselines map to None."""
    keys = sorted({(r["k"], r["level"]) for r in rows})
    out = {}
    for k, lv in keys:
        group = [r for r in rows if r["k"] == k and r["level"] == lv]
        try:
            out[(k, lv)] = speedup_at_reference(group)
        except ValidationError:
            out[(k, lv)] = None
    return out


def compare_inits(data, k: int, trials: int, seed0: int = 0, max_iters: int = 100) -> list:
    """Random, k-means++ and GDI, each followed by Lloyd to convergence.

    Converged energies come from Elkan, which returns exactly Lloyd's result
    at a fraction of the cost. Random init is charged no operations; its
    nearest-center pass belongs to the clustering run. Values are reported
    absolute and relative to k-means++.
    """
    X = as_points(data)
    stats = {}
    for name in ("random", "kmeanspp", "gdi"):
        energies, ops = [], []
        for t in range(trials):
            counter = OpCounter()
            if name == "random":
                state0 = INITS[name](X, k, seed0 + t)
            else:
                state0 = INITS[name](X, k, seed0 + t, counter)
            ops.append(counter.total())
            _, trace = run_elkan(X, state0, EngineConfig(max_iters=max_iters))
            energies.append(trace.samples[-1].energy)
        stats[name] = (float(np.mean(energies)), float(np.min(energies)), float(np.mean(ops)))
    ref = stats["kmeanspp"]
    rows = []
    for name, (avg, mn, ops) in stats.items():
        rows.append({
            "init": name, "k": k, "trials": trials,
            "avg_energy": avg, "min_energy": mn, "init_ops": ops,
            "rel_avg_energy": avg / ref[0], "rel_min_energy": mn / ref[1],
            "rel_init_ops": ops / ref[2],
        })
    return rows


def trace_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "cumulative_ops", "energy"])
    for s in trace:
        w.writerow([s.iteration, repr(float(s.cumulative_ops)), repr(float(s.energy))])
    return buf.getvalue()


def emit_trace_csv(trace: Trace, path) -> None:
    atomic_write(path, trace_csv_text(trace).encode())


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != ["iteration", "cumulative_ops", "energy"]:
            raise ValidationError(f"unexpected trace header {header}")
        return Trace([TraceSample(int(a), float(b), float(c)) for a, b, c in rd])


def write_json(obj, path) -> None:
    atomic_write(path, (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode())


def parallelism_from_env(default: int) -> int:
    raw = os.environ.get("K2_PARALLELISM")
    if raw is None or raw == "":
        return default
    try:
        val = int(raw)
    except ValueError:
        raise ValidationError(f"K2_PARALLELISM must be an integer, got {raw!r}") from None
    if val < 1:
        raise ValidationError("K2_PARALLELISM must be >= 1")
    return val
