"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .core import FormatError, OpCounter, ValidationError, energy
from .engines import ENGINES, EngineConfig
from .init import INITS
from .io import atomic_write, gen_gmm, load_matrix, save_matrix


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="k2means", description="k2-means clustering and benchmarks")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a Gaussian-mixture fixture")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--k-true", type=int, required=True)
    g.add_argument("--separation", type=float, default=4.0)
    g.add_argument("--mean-dim", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help=".k2mx or .csv path")
    g.add_argument("--labels", help="optional JSON file for ground-truth labels")

    c = sub.add_parser("cluster", help="run one init + engine pipeline")
    c.add_argument("--data", required=True)
    c.add_argument("--method", default="lloyd")
    c.add_argument("--init", default="kmeanspp")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--kn", type=int, default=None)
    c.add_argument("--max-iters", type=int, default=100)
    c.add_argument("--batch-size", type=int, default=100)
    c.add_argument("--minibatch-iters", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trace", help="trace CSV output path")
    c.add_argument("--state", help="final state JSON output path")

    b = sub.add_parser("bench", help="run a benchmark grid")
    b.add_argument("--spec", required=True, help="bench spec JSON")
    b.add_argument("--report", required=True, help="report JSON output path")
    b.add_argument("--summary", help="speedup summary JSON output path")
    b.add_argument("--data", help="override the dataset path in the spec")
    b.add_argument("--parallel", type=int, default=1)

    ci = sub.add_parser("compare-inits", help="compare random, k-means++ and GDI")
    ci.add_argument("--data", required=True)
    ci.add_argument("--k", type=int, nargs="+", required=True)
    ci.add_argument("--trials", type=int, default=10)
    ci.add_argument("--seed", type=int, default=0)
    ci.add_argument("--out", help="comparison JSON output path")
    return p


def _validate_cluster(args) -> None:
    if args.method not in ENGINES:
        raise ValidationError(f"unknown method {args.method!r}; valid: {', '.join(sorted(ENGINES))}")
    if args.init not in INITS:
        raise ValidationError(f"unknown init {args.init!r}; valid: {', '.join(sorted(INITS))}")
    if args.k < 1:
        raise ValidationError("k must be >= 1")
    if args.kn is not None:
        if args.method != "k2means":
            raise ValidationError("--kn requires --method k2means")
        if args.kn < 1:
            raise ValidationError("k_n must be >= 1")
        if args.kn > args.k:
            raise ValidationError("k_n must be ≤ k")
    if args.max_iters < 1:
        raise ValidationError("max_iters must be >= 1")


def _cmd_gen(args) -> int:
    ds, labels = gen_gmm(args.n, args.d, args.k_true, args.separation, args.seed, args.mean_dim)
    save_matrix(args.out, ds.points)
    if args.labels:
        atomic_write(args.labels, (json.dumps(labels.tolist()) + "\n").encode())
    print(f"seed: {args.seed}")
    print(f"wrote {ds.n}x{ds.d} matrix to {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    _validate_cluster(args)
    print(f"seed: {args.seed}")
    X = load_matrix(args.data).points
    if args.k > X.shape[0]:
        raise ValidationError(f"k={args.k} exceeds n={X.shape[0]}")
    counter = OpCounter()
    state0 = INITS[args.init](X, args.k, args.seed, counter)
    init_ops = counter.total()
    cfg = EngineConfig(max_iters=args.max_iters, rng_seed=args.seed, batch_size=args.batch_size,
                       minibatch_iters=args.minibatch_iters)
    if args.method == "k2means":
        cfg.k_n = args.kn if args.kn is not None else min(10, args.k)
    state, trace = ENGINES[args.method](X, state0, cfg, counter)
    final = energy(X, state)
    print(f"method: {args.method}  init: {args.init}  k: {args.k}"
          + (f"  k_n: {cfg.k_n}" if args.method == "k2means" else ""))
    print(f"iterations: {trace.samples[-1].iteration}")
    print(f"energy: {final!r}")
    print(f"init ops: {init_ops!r}")
    print(f"total ops: {counter.total()!r}")
    if args.trace:
        bench.emit_trace_csv(trace, args.trace)
    if args.state:
        bench.write_json({
            "method": args.method, "init": args.init, "k": args.k,
            "k_n": cfg.k_n if args.method == "k2means" else None,
            "seed": args.seed, "n": int(X.shape[0]), "d": int(X.shape[1]),
            "energy": final, "iterations": trace.samples[-1].iteration,
            "ops": counter.as_dict(),
            "centers": state.centers.tolist(),
            "assignments": state.assignments.tolist(),
            "sizes": state.sizes.tolist(),
        }, args.state)
    return 0


def _load_bench_data(spec: bench.BenchSpec, override):
    src = dict(spec.data)
    if override:
        src = {"path": override}
    if "path" in src:
        return load_matrix(src["path"]).points
    if "gen" in src:
        gp = dict(src["gen"])
        missing = {"n", "d", "k_true"} - set(gp)
        if missing:
            raise ValidationError(f"data.gen is missing {sorted(missing)}")
        ds, _ = gen_gmm(gp["n"], gp["d"], gp["k_true"], gp.get("separation", 4.0),
                        gp.get("seed", 0), gp.get("mean_dim"))
        return ds.points
    raise ValidationError("bench spec needs data.path or data.gen (or --data)")


def _cmd_bench(args) -> int:
    with open(args.spec) as fh:
        raw = json.load(fh)
    try:
        spec = bench.BenchSpec.from_dict(raw)
    except TypeError as exc:
        raise ValidationError(f"malformed bench spec: {exc}") from None
    if args.parallel < 1:
        raise ValidationError("--parallel must be >= 1")
    workers = bench.parallelism_from_env(args.parallel)
    print(f"seeds: {spec.seeds}")
    X = _load_bench_data(spec, args.data)
    if max(spec.ks) > X.shape[0]:
        raise ValidationError(f"k={max(spec.ks)} exceeds n={X.shape[0]}")
    rows, _ = bench.run_bench(X, spec, workers)
    bench.write_json(rows, args.report)
    summary = bench.summarize(rows)
    out = []
    for (k, lv), table in summary.items():
        print(f"k={k} level={lv:g}:")
        if table is None:
            print("  lloyd++ baseline did not reach this level")
            continue
        for m, v in table.items():
            sp = "did not reach" if v["speedup"] is None else f"{v['speedup']:.2f}x"
            extra = f" (k_n={v['param']})" if v["param"] is not None else ""
            print(f"  {m:<12} {sp}{extra}")
        out.append({"k": k, "level": lv, "speedups": table})
    if args.summary:
        bench.write_json(out, args.summary)
    return 0


def _cmd_compare_inits(args) -> int:
    if args.trials < 1:
        raise ValidationError("--trials must be >= 1")
    print(f"seed: {args.seed}")
    X = load_matrix(args.data).points
    rows = []
    for k in args.k:
        if k < 1 or k > X.shape[0]:
            raise ValidationError(f"k={k} must be in [1, n={X.shape[0]}]")
        rows.extend(bench.compare_inits(X, k, args.trials, args.seed))
    print(f"{'init':<10}{'k':>6}{'avg E':>10}{'min E':>10}{'init ops':>10}")
    for r in rows:
        print(f"{r['init']:<10}{r['k']:>6}{r['rel_avg_energy']:>10.3f}"
              f"{r['rel_min_energy']:>10.3f}{r['rel_init_ops']:>10.3f}")
    if args.out:
        bench.write_json(rows, args.out)
    return 0


COMMANDS = {
    "gen": _cmd_gen,
    "cluster": _cmd_cluster,
    "bench": _cmd_bench,
    "compare-inits": _cmd_compare_inits,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
