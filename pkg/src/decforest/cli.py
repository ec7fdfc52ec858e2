"""Command-line front end: trace replay, fuzzing, benchmarks, table builds,
and the optimal-structure search.

Exit codes: 0 clean, 1 answer mismatch / divergence found, 2 usage or input
error.  All randomness flows from explicit --seed arguments, so any finding
is reproducible from its printed seed.
"""

from __future__ import annotations

import argparse
import sys
import time

from .clustering import binarize
from .connectivity import CHILD_SIDE
from .core import (
    InstrumentedGroup,
    IntGroup,
    OperationTrace,
    build_forest,
    parse_trace,
    replay,
)
from .errors import DecforestError, TraceParseError
from .oracle import SHAPES, NaiveForest, gen_random_tree, gen_random_trace
from .optimal_small import SearchCaps, UniversalTreeSum, fingerprint, save_opt_results, search_optimal
from .subtree_sum import SubtreeSize01, WeightedSubtreeSum, build_q_table
from .tree_size_linear import TreeSize01, build_global_table, save_table
from .tree_sum_iterated import IteratedTreeSum
from .tree_sum_simple import SimpleTreeSum
from .workloads import build_parity, build_spine


class BuggySimpleTreeSum(SimpleTreeSum):
    """Fuzz-harness fixture: an off-by-one bug in the cut re-summation.

    When the smaller side of a cut has at least three vertices, its last
    visited vertex is skipped, so both component sums drift.  Kept here so
    the fuzzer's detection path is itself testable end to end.
    """

    def cut_report(self, v):
        r = self.conn.root(v)
        total = self.S[r]
        side, vertices = self.conn.cut(v)
        w = self.w
        add = self.group.add
        stop = len(vertices) - 1 if len(vertices) >= 3 else len(vertices)
        acc = w[vertices[0]]
        for i in range(1, stop):
            acc = add(acc, w[vertices[i]])
        other = self.group.sub(total, acc)
        if side == CHILD_SIDE:
            self.S[v] = acc
            self.S[r] = other
            return acc, other
        self.S[r] = acc
        self.S[v] = other
        return other, acc


# trace op kinds each structure family supports, and its weight domain
_FAMILY = {
    "oracle": ("any", ("cut", "upd", "tsum", "ssum")),
    "simple": ("any", ("cut", "upd", "tsum")),
    "buggy-simple": ("any", ("cut", "upd", "tsum")),
    "iterated": ("any", ("cut", "upd", "tsum")),
    "universal": ("any", ("cut", "upd", "tsum")),
    "linear01": ("01", ("cut", "upd", "tsum")),
    "subtree": ("01", ("cut", "ssum")),
}


def structure_names():
    return ["simple", "iterated:t", "linear01", "subtree", "universal", "oracle", "buggy-simple"]


def _family(name):
    return name.split(":", 1)[0]


def make_structure(name, trace: OperationTrace):
    forest = trace.forest()
    weights = list(trace.weights)
    base = _family(name)
    if base == "oracle":
        return NaiveForest(forest, weights)
    if base == "simple":
        return SimpleTreeSum(forest, weights, IntGroup())
    if base == "buggy-simple":
        return BuggySimpleTreeSum(forest, weights, IntGroup())
    if base == "iterated":
        t = int(name.split(":", 1)[1]) if ":" in name else 2
        bf, bw, _ = binarize(forest, weights)
        return IteratedTreeSum(bf, bw, IntGroup(), t)
    if base == "linear01":
        return TreeSize01(forest, weights)
    if base == "subtree":
        return SubtreeSize01(forest, weights)
    if base == "universal":
        return UniversalTreeSum(forest, weights, IntGroup())
    raise ValueError(f"unknown structure {name!r}; choices: {structure_names()}")


def cmd_run(args):
    try:
        with open(args.trace) as fh:
            trace = parse_trace(fh.read())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TraceParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    try:
        structure = make_structure(args.structure, trace)
        report = replay(trace, structure)
    except DecforestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for i, got, expected in report.mismatches:
        print(f"mismatch at op {i}: got {got} expected {expected}")
    print(
        f"{args.structure}: {len(trace.ops)} ops, {len(report.answers)} answers, "
        f"{len(report.mismatches)} mismatches"
    )
    return 1 if report.mismatches else 0


def _mix_for(structures):
    """Op mix legal for every listed structure (their op-set intersection)."""
    kinds = None
    for name in structures:
        _, ops = _FAMILY[_family(name)]
        kinds = set(ops) if kinds is None else kinds & set(ops)
    return {k: (1.0 if k == "cut" else 2.0) for k in kinds}


def _instrumented_structure(name, trace):
    """(structure, instrumented group or None) for counter reporting."""
    base = _family(name)
    group = InstrumentedGroup(IntGroup())
    if base in ("simple", "buggy-simple"):
        cls = SimpleTreeSum if base == "simple" else BuggySimpleTreeSum
        return cls(trace.forest(), trace.weights, group), group
    if base == "iterated":
        t = int(name.split(":", 1)[1]) if ":" in name else 2
        bf, bw, _ = binarize(trace.forest(), trace.weights)
        return IteratedTreeSum(bf, bw, group, t), group
    if base == "universal":
        return UniversalTreeSum(trace.forest(), trace.weights, group), group
    return make_structure(name, trace), None


def cmd_fuzz(args):
    structures = [s.strip() for s in args.structures.split(",") if s.strip()]
    for name in structures:
        if _family(name) not in _FAMILY:
            print(f"error: unknown structure {name!r}", file=sys.stderr)
            return 2
    binary = any(_FAMILY[_family(s)][0] == "01" for s in structures)
    import random

    findings = []
    t0 = time.time()
    for seed in range(args.seed, args.seed + args.seeds):
        rng = random.Random(seed)
        n = rng.randint(1, args.n)
        shape = SHAPES[seed % len(SHAPES)]
        forest = gen_random_tree(n, seed, shape)
        mix = _mix_for(structures + ["oracle"])
        trace = gen_random_trace(
            forest, rng.randint(0, args.m), mix=mix, seed=seed, binary_weights=binary
        )
        for name in structures:
            structure = make_structure(name, trace)
            report = replay(trace, structure)
            if report.mismatches:
                i, got, expected = report.mismatches[0]
                findings.append((seed, name, i, got, expected))
                print(
                    f"divergence: structure={name} seed={seed} shape={shape} n={n} "
                    f"op={i} got={got} expected={expected}"
                )
                break
        if findings and args.stop_on_finding:
            break
    dt = time.time() - t0
    print(
        f"fuzz: {args.seeds} seeds, {len(findings)} divergences, {dt:.1f}s "
        f"(structures: {', '.join(structures)})"
    )
    return 1 if findings else 0


def _bench_row(out, structure, suite, n, m, seed, shape, dt, counters):
    out.write(
        f"{structure},{suite},{n},{m},{seed},{shape},{dt:.6f},"
        f"{counters.get('adds', 0)},{counters.get('subs', 0)},{counters.get('probes', 0)}\n"
    )


BENCH_HEADER = "structure,suite,n,m,seed,shape,wall_time_s,group_adds,group_subs,probes\n"


def cmd_bench(args):
    out = open(args.out, "w") if args.out else sys.stdout
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    structures = [s.strip() for s in args.structures.split(",") if s.strip()]
    import random

    out.write(BENCH_HEADER)
    try:
        if args.suite in ("teardown", "mixed"):
            from .core import cut_op, ssum_op, tsum_op

            for n in sizes:
                for name in structures:
                    binary = _FAMILY[_family(name)][0] == "01"
                    forest = gen_random_tree(n, args.seed, args.shape)
                    rng = random.Random(args.seed)
                    if args.suite == "teardown":
                        weights = [1] * n if binary else [rng.randint(-8, 8) for _ in range(n)]
                        trace = OperationTrace(list(forest.parent), [False] * n, weights)
                        order = [v for v in range(n) if forest.parent[v] != -1]
                        rng.shuffle(order)
                        qop = ssum_op if "ssum" in _FAMILY[_family(name)][1] else tsum_op
                        trace.ops = [cut_op(v) for v in order]
                        trace.ops += [qop(rng.randrange(n)) for _ in range(n)]
                    else:
                        trace = gen_random_trace(
                            forest, 2 * n, mix=_mix_for([name]), seed=args.seed,
                            binary_weights=binary,
                        )
                    structure, group = _instrumented_structure(name, trace)
                    t0 = time.time()
                    report = replay(trace, structure)
                    dt = time.time() - t0
                    counters = dict(report.counters)
                    if group is not None:
                        counters.update(group.snapshot())
                    _bench_row(
                        out, name, args.suite, n, len(trace.ops), args.seed,
                        args.shape, dt, counters,
                    )
        elif args.suite == "spine":
            for nb in sizes:
                rng = random.Random(args.seed)
                inst = build_spine(nb, [rng.randrange(nb) for _ in range(nb)], seed=args.seed)
                trace = inst.trace()
                structure = WeightedSubtreeSum(trace.forest(), trace.weights)
                t0 = time.time()
                for epoch in range(1, nb + 1):
                    for i in range(1, nb + 1):
                        for rec in inst.translate_update(epoch, i, rng.randrange(nb)):
                            structure.cut(rec.v)
                        for k in range(1, nb + 1):
                            inst.prefix_from_sums(
                                k,
                                structure.subtree_sum(inst.vplus(k)),
                                structure.subtree_sum(inst.vminus(k)),
                            )
                dt = time.time() - t0
                _bench_row(
                    out, "subtree-weighted", "spine", inst.n, 3 * nb * nb, args.seed,
                    "spine", dt, structure.counters(),
                )
        elif args.suite == "parity":
            for nb in sizes:
                rng = random.Random(args.seed)
                inst = build_parity(nb, [rng.randint(0, 1) for _ in range(nb)])
                trace = inst.trace()
                structure = SubtreeSize01(trace.forest(), trace.weights)
                t0 = time.time()
                order = list(range(1, nb + 1))
                rng.shuffle(order)
                for i in order:
                    structure.cut(inst.flip(i).v)
                    for k in range(1, nb + 1):
                        structure.subtree_sum(k - 1)
                dt = time.time() - t0
                _bench_row(
                    out, "subtree", "parity", inst.n, nb * (nb + 1), args.seed,
                    "parity", dt, structure.counters(),
                )
        else:
            print(f"error: unknown suite {args.suite!r}", file=sys.stderr)
            return 2
    finally:
        if args.out:
            out.close()
    return 0


def cmd_build_tables(args):
    kind, _, param = args.which.partition(":")
    try:
        value = int(param)
    except ValueError:
        print(f"error: --which needs size:<ell> or q:<k>, got {args.which!r}", file=sys.stderr)
        return 2
    try:
        if kind == "size":
            table = build_global_table(value)
            save_table(table, args.out)
            print(f"size table ell={value}: {len(table.valid)} slots -> {args.out}")
        elif kind == "q":
            table = build_q_table(value)
            print(f"q table k={value}: {table.entries} entries (in-process cache)")
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(f"q {value} {table.entries}\n")
        else:
            print(f"error: unknown table kind {kind!r}", file=sys.stderr)
            return 2
    except DecforestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _canonical_shape(parents, children, v):
    return "(" + "".join(sorted(_canonical_shape(parents, children, c) for c in children[v])) + ")"


def _all_forests(n):
    """Canonical parent arrays of all unlabeled rooted forests on n vertices."""
    seen = {}
    stack = [[]]
    while stack:
        partial = stack.pop()
        if len(partial) == n:
            children = [[] for _ in range(n)]
            for v, p in enumerate(partial):
                if p != -1:
                    children[p].append(v)
            key = "".join(
                sorted(
                    _canonical_shape(partial, children, v)
                    for v in range(n)
                    if partial[v] == -1
                )
            )
            if key not in seen:
                seen[key] = list(partial)
            continue
        v = len(partial)
        for p in [-1] + list(range(v)):
            stack.append(partial + [p])
    return list(seen.values())


def cmd_search_opt(args):
    caps = SearchCaps(n=args.n, m=args.m, d=args.d)
    results = []
    try:
        for parents in _all_forests(args.n):
            forest = build_forest(parents)
            res = search_optimal(forest, args.m, d=args.d, caps=caps)
            if res is None:
                print(f"opt {fingerprint(forest)} {args.m} infeasible(d={args.d})")
            else:
                results.append(res)
                print(f"opt {res.fingerprint} {res.m} {res.mid}")
    except DecforestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        save_opt_results(results, args.out)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="decforest", description="Decremental dynamic forest toolbox"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a trace file against a structure")
    p.add_argument("trace")
    p.add_argument("--structure", default="simple", help=f"one of {structure_names()}")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fuzz", help="differential fuzzing against the oracle")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=100, help="number of seeds to run")
    p.add_argument("--structures", default="simple")
    p.add_argument("--stop-on-finding", action="store_true")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("bench", help="benchmark suites with CSV output")
    p.add_argument("--suite", default="teardown", choices=["teardown", "mixed", "spine", "parity"])
    p.add_argument("--sizes", default="1024,2048,4096")
    p.add_argument("--structures", default="simple")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", default="uniform-attachment", choices=list(SHAPES))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("build-tables", help="precompute and persist lookup tables")
    p.add_argument("--which", required=True, help="size:<ell> or q:<k>")
    p.add_argument("--out", default="table.bin")
    p.set_defaults(func=cmd_build_tables)

    p = sub.add_parser("search-opt", help="search optimal structures for tiny forests")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_search_opt)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DecforestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
