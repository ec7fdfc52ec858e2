import itertools
import math
import random

import pytest

from decforest.core import build_forest, replay
from decforest.errors import CapExceeded, NegativeWeight, NonBinaryWeight, NoParent
from decforest.oracle import NaiveForest, gen_random_tree, gen_random_trace
from decforest.subtree_sum import (
    DescendantBitsets,
    PackedCounters,
    QTable,
    RecursiveSubtreeSum,
    SmallSubtreeSum,
    SubtreeSize01,
    WeightedSubtreeSum,
    build_q_table,
)

from conftest import log_uniform


def test_packed_counters_roundtrip():
    rng = random.Random(1)
    for k in (1, 2, 4, 8, 24):
        pc = PackedCounters(k)
        vals = [0] * k
        for _ in range(200):
            i = rng.randrange(k)
            if vals[i] < pc.vmax:
                pc.incr(i)
                vals[i] += 1
            assert pc.unpack() == vals
        pc.clear()
        assert pc.unpack() == [0] * k


def test_descendant_bitsets():
    d = DescendantBitsets(4)
    d.set(0, 0b1011)
    d.set(3, 0b1000)
    assert d.get(0) == 0b1011 and d.get(3) == 0b1000
    d.set(0, 0b0001)
    assert d.get(0) == 0b0001


def test_q_table_examples():
    q = build_q_table(2)
    w = q.width
    assert q.lookup(1, 0b01) == 1  # B' = (1, 0), U = {first}
    assert q.lookup((1 << w) | 2, 0b11) == 3  # B' = (2, 1), U = both
    assert q.entries == (2 + 1) ** 2 * 4 == 36


def test_q_table_k4_exhaustive():
    q = build_q_table(4)
    assert q.entries == 5**4 * 16 == 10_000
    w = q.width
    for digits in itertools.product(range(5), repeat=4):
        word = 0
        for i, d in enumerate(digits):
            word |= d << (i * w)
        for u in range(16):
            expect = sum(d for i, d in enumerate(digits) if u >> i & 1)
            assert q.lookup(word, u) == expect


def test_q_table_validates_k():
    with pytest.raises(ValueError):
        QTable(3)
    with pytest.raises(CapExceeded):
        QTable(8)
    lazy = QTable(8, allow_large=True)
    w = lazy.width
    word = sum((i % 9) << (i * w) for i in range(8))
    assert lazy.lookup(word, 0b11111111) == sum(i % 9 for i in range(8))


def _small(parents, weights, q_k=4):
    return SmallSubtreeSum(build_forest(parents), weights, build_q_table(q_k))


def test_small_star_example():
    s = _small([-1, 0, 0, 0], [1, 1, 1, 1])
    assert s.subtree_sum(0) == 4
    s.decrement_weight(2)
    assert s.subtree_sum(0) == 3
    assert s.subtree_sum(2) == 0


def test_small_flush_every_k_decrements():
    s = _small([-1, 0, 0, 0], [4, 4, 4, 4])
    assert s.flush_count == 0
    for i in range(4):
        s.decrement_weight(i)
    assert s.flush_count == 1
    assert s.B.bits == 0 and s.pending == 0


def test_small_path_cut():
    s = _small([-1, 0, 1, 2], [1, 1, 1, 1])
    s.cut(2)
    assert s.subtree_sum(0) == 2 and s.subtree_sum(2) == 2


def test_small_errors():
    s = _small([-1, 0], [1, 0])
    with pytest.raises(NoParent):
        s.cut(0)
    with pytest.raises(NegativeWeight):
        s.decrement_weight(1)
    with pytest.raises(NegativeWeight):
        SmallSubtreeSum(build_forest([-1]), [-1], build_q_table(2))


def test_small_identity_after_every_op():
    # subtree_sum(v) == A[v] - Q[B, C[v]] is the query itself; validate the
    # state identity against an independent recount after each operation
    rng = random.Random(5)
    for trial in range(100):
        n = rng.randint(1, 12)
        f = gen_random_tree(n, trial, "uniform-attachment")
        w = [rng.randint(0, 3) for _ in range(n)]
        s = SmallSubtreeSum(f, list(w), build_q_table(4))
        mirror = NaiveForest(f, list(w))
        for _ in range(30):
            choices = ["query"]
            if any(mirror.w[v] > 0 for v in range(n)):
                choices.append("dec")
            if any(mirror.live_parent[v] != -1 for v in range(n)):
                choices.append("cut")
            op = rng.choice(choices)
            if op == "dec":
                v = rng.choice([v for v in range(n) if mirror.w[v] > 0])
                s.decrement_weight(v)
                mirror.w[v] -= 1
            elif op == "cut":
                v = rng.choice([v for v in range(n) if mirror.live_parent[v] != -1])
                s.cut(v)
                mirror.cut(v)
            for v in range(n):
                assert s.subtree_sum(v) == mirror.subtree_sum(v)


def _all_mutation_sequences(n, weights, live, max_ops):
    """Every legal cut/decrement sequence of length <= max_ops."""
    seqs = [[]]
    frontier = [([], weights, live)]
    while frontier:
        nxt = []
        for seq, w, lv in frontier:
            if len(seq) == max_ops:
                continue
            for v in range(n):
                if w[v] > 0:
                    w2 = list(w)
                    w2[v] -= 1
                    item = (seq + [("dec", v)], w2, lv)
                    seqs.append(item[0])
                    nxt.append(item)
                if lv[v] != -1:
                    lv2 = list(lv)
                    lv2[v] = -1
                    item = (seq + [("cut", v)], w, lv2)
                    seqs.append(item[0])
                    nxt.append(item)
        frontier = nxt
    return seqs


def _all_trees(max_n):
    out = []
    for n in range(1, max_n + 1):
        for parents in itertools.product(*[[-1] + list(range(v)) for v in range(n)]):
            out.append(list(parents))
    return out


def test_small_exhaustive_tiny():
    # every tree with <= 5 vertices, all 0-1 weights, every mutation
    # sequence of length <= 4, queries checked after each prefix (queries
    # are pure, so checking all of them after every mutation covers every
    # interleaved op sequence of length <= 4), k = 8 counters
    q = build_q_table(8, allow_large=True)
    total = 0
    for parents in _all_trees(5):
        n = len(parents)
        f = build_forest(parents)
        for bits in itertools.product((0, 1), repeat=n):
            for seq in _all_mutation_sequences(n, list(bits), list(parents), 4):
                s = SmallSubtreeSum(f, list(bits), q)
                mirror = NaiveForest(f, list(bits))
                for kind, v in seq:
                    if kind == "dec":
                        s.decrement_weight(v)
                        mirror.w[v] -= 1
                    else:
                        s.cut(v)
                        mirror.cut(v)
                for v in range(n):
                    assert s.subtree_sum(v) == mirror.subtree_sum(v)
                total += 1
    assert total > 10_000


def test_small_root_sum():
    s = _small([-1, 0, 1, 2], [1, 1, 1, 1])
    assert s.root_sum() == 4
    s.cut(2)
    assert s.root_sum() == 2


def test_recursive_t1_equals_small():
    rng = random.Random(3)
    f = gen_random_tree(4, 0, "path")
    w = [1, 0, 1, 1]
    r = RecursiveSubtreeSum(f, list(w), ell=4, t=1)
    s = SmallSubtreeSum(f, list(w), build_q_table(4))
    for v in range(4):
        assert r.subtree_sum(v) == s.subtree_sum(v)
    r.cut(2)
    s.cut(2)
    for v in range(4):
        assert r.subtree_sum(v) == s.subtree_sum(v)


def test_recursive_ancestor_of_lower_boundary_case():
    # 8-path, ell=2: vertices above the lower boundary must combine the
    # inner answer with the contracted forest's answer
    f = build_forest([-1, 0, 1, 2, 3, 4, 5, 6])
    r = RecursiveSubtreeSum(f, [1] * 8, ell=2, t=3)
    nf = NaiveForest(f, [1] * 8)
    for v in range(8):
        assert r.subtree_sum(v) == nf.subtree_sum(v) == 8 - v
    r.cut(5)
    nf.cut(5)
    for v in range(8):
        assert r.subtree_sum(v) == nf.subtree_sum(v)


@pytest.mark.parametrize("ell", [2, 4])
def test_recursive_random_teardowns(ell):
    rng = random.Random(ell)
    for trial in range(60):
        n = log_uniform(rng, 1, 1024)
        f = gen_random_tree(n, trial * 2 + ell, "uniform-attachment")
        from decforest.clustering import binarize

        bf, bw, _ = binarize(f, [rng.randint(0, 1) for _ in range(n)])
        t = max(1, math.ceil(math.log(max(2, bf.n), ell)))
        r = RecursiveSubtreeSum(bf, bw, ell=ell, t=t)
        nf = NaiveForest(bf, bw)
        order = [v for v in range(bf.n) if bf.parent[v] != -1 and not bf.aux[v]]
        rng.shuffle(order)
        for v in order:
            r.cut(v)
            nf.cut(v)
            q = rng.randrange(n)
            assert r.subtree_sum(q) == nf.subtree_sum(q)


def test_top_level_path_1000():
    f = gen_random_tree(1000, 0, "path")
    s = SubtreeSize01(f, [1] * 1000)
    s.cut(500)
    assert s.subtree_sum(0) == 500 and s.subtree_sum(500) == 500


def test_top_level_single_vertex():
    s = SubtreeSize01(build_forest([-1]), [1])
    assert s.subtree_sum(0) == 1


def test_top_level_rejects_non_binary_weight():
    with pytest.raises(NonBinaryWeight):
        SubtreeSize01(build_forest([-1]), [2])


def test_top_level_5000_ops_on_4096():
    rng = random.Random(23)
    n = 4096
    f = gen_random_tree(n, 23, "uniform-attachment")
    w = [rng.randint(0, 1) for _ in range(n)]
    trace = gen_random_trace(f, 5000, mix={"cut": 1.0, "ssum": 1.0}, seed=23, weights=w)
    s = SubtreeSize01(trace.forest(), trace.weights)
    report = replay(trace, s)
    assert report.ok


def test_top_level_differential():
    for seed in range(400):
        rng = random.Random(seed)
        n = log_uniform(rng, 1, 192)
        shape = ["uniform-attachment", "path", "star", "balanced", "caterpillar"][seed % 5]
        f = gen_random_tree(n, seed, shape)
        trace = gen_random_trace(
            f, log_uniform(rng, 1, 2 * n), mix={"cut": 1.0, "ssum": 2.0},
            seed=seed, binary_weights=True,
        )
        s = SubtreeSize01(trace.forest(), trace.weights)
        report = replay(trace, s)
        assert report.ok, (seed, report.mismatches[:3])


def test_weighted_variant_against_oracle():
    for seed in range(100):
        rng = random.Random(seed)
        n = log_uniform(rng, 1, 128)
        f = gen_random_tree(n, seed, "uniform-attachment")
        w = [rng.randint(0, 9) for _ in range(n)]
        trace = gen_random_trace(
            f, log_uniform(rng, 1, n + 8), mix={"cut": 1.0, "ssum": 2.0},
            seed=seed, weights=w,
        )
        s = WeightedSubtreeSum(trace.forest(), trace.weights)
        report = replay(trace, s)
        assert report.ok, (seed, report.mismatches[:3])
    with pytest.raises(NegativeWeight):
        WeightedSubtreeSum(build_forest([-1]), [-3])


def test_flush_invariant_counters():
    # between flushes: fewer than k decrements and no cuts
    rng = random.Random(8)
    f = gen_random_tree(10, 8, "uniform-attachment")
    w = [3] * 10
    q = build_q_table(4)
    s = SmallSubtreeSum(f, w, q)
    decs_since_flush = 0
    for _ in range(60):
        v = rng.randrange(10)
        if rng.random() < 0.8:
            if s.weight_of(v) > 0:
                before = s.flush_count
                s.decrement_weight(v)
                decs_since_flush = 0 if s.flush_count > before else decs_since_flush + 1
                assert decs_since_flush < q.k
        else:
            if s.live_parent[v] != -1:
                s.cut(v)
                decs_since_flush = 0
        assert s.pending < q.k
