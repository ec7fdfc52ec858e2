import math
import random

import pytest

from decforest.core import build_forest, replay
from decforest.errors import IllegalOperation, NonBinaryWeight, WordOverflow
from decforest.oracle import NaiveForest, gen_random_tree, gen_random_trace
from decforest.tree_size_linear import (
    GlobalSizeTable,
    TreeSize01,
    build_global_table,
    code_layout,
    decode_forest,
    encode_forest,
    load_table,
    micro_ell_for,
    save_table,
)

from conftest import log_uniform


def test_code_layout_ell2():
    # parent field 2 bits, weight 1 bit, two vertices: c = 6
    assert code_layout(2) == (2, 6)


def test_pinned_encoding_path_of_two():
    assert encode_forest([-1, 0], [1, 1], 2) == 44


def test_encode_decode_roundtrip():
    rng = random.Random(4)
    for ell in (1, 2, 3, 4):
        for _ in range(100):
            n = rng.randint(0, ell)
            parents = [-1 if v == 0 else rng.randrange(-1, v) for v in range(n)]
            bits = [rng.randint(0, 1) for _ in range(n)]
            code = encode_forest(parents, bits, ell)
            p2, b2 = decode_forest(code, ell)
            assert p2[:n] == parents and b2[:n] == bits
            assert all(p == -1 for p in p2[n:]) and all(b == 0 for b in b2[n:])


def test_table_ell1_has_4_codes():
    t = build_global_table(1)
    assert len(t.valid) == 4
    code = encode_forest([-1], [1], 1)
    assert t.tree_sum(code, 0) == 1


def test_table_ell2_has_64_slots():
    assert len(build_global_table(2).valid) == 64


def test_table_path2_sums():
    t = build_global_table(2)
    code = encode_forest([-1, 0], [1, 1], 2)
    assert (t.tree_sum(code, 0), t.tree_sum(code, 1)) == (2, 2)


def test_micro_op_examples():
    t = build_global_table(2)
    code = encode_forest([-1, 0], [1, 1], 2)
    assert t.tree_sum(code, 1) == 2
    code2 = t.update_weight(code, 0, 0)
    assert t.tree_sum(code2, 1) == 1
    code3 = t.cut(code, 1)
    assert t.tree_sum(code3, 0) == 1 and t.tree_sum(code3, 1) == 1


def test_invalid_code_rejected():
    t = build_global_table(2)
    two_cycle = 0b001010  # v0's parent field says v1, v1's says v0
    with pytest.raises(IllegalOperation):
        t.tree_sum(two_cycle, 0)


def test_word_overflow_cap():
    with pytest.raises(WordOverflow):
        GlobalSizeTable(7)


def _brute_force_sums(parents, bits, live):
    n = len(parents)

    def root(v):
        while live[v] != -1:
            v = live[v]
        return v

    return [sum(bits[u] for u in range(n) if root(u) == root(v)) for v in range(n)]


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_exhaustive_reachable_codes_vs_brute_force(ell):
    # every valid code x every legal op agrees with brute force, exactly
    t = build_global_table(ell)
    checked = 0
    for code in range(len(t.valid)):
        if not t.valid[code]:
            continue
        parents, bits = decode_forest(code, ell)
        sums = _brute_force_sums(parents, bits, list(parents))
        for v in range(ell):
            assert t.tree_sum(code, v) == sums[v]
            for bit in (0, 1):
                succ = t.update_weight(code, v, bit)
                b2 = list(bits)
                b2[v] = bit
                assert t.valid[succ]
                assert decode_forest(succ, ell) == (parents, b2)
            succ = t.cut(code, v)
            p2 = list(parents)
            p2[v] = -1
            assert t.valid[succ]
            assert decode_forest(succ, ell) == (p2, bits)
        checked += 1
    assert checked == int(t.valid.sum())


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_build_ops_within_loose_bound(ell):
    t = build_global_table(ell)
    assert t.build_ops <= 4 * (5 * ell) ** ell


def test_table_serialization_roundtrip(tmp_path):
    t = build_global_table(2)
    path = tmp_path / "size2.bin"
    save_table(t, path)
    loaded = load_table(path)
    assert (loaded.valid == t.valid).all()
    assert (loaded.S == t.S).all()
    assert (loaded.U0 == t.U0).all() and (loaded.U1 == t.U1).all()
    assert (loaded.C == t.C).all()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a table")
    with pytest.raises(IllegalOperation):
        load_table(path)


def test_micro_ell_clamp():
    assert micro_ell_for(1) == 1
    assert micro_ell_for(2**14) == 3
    assert micro_ell_for(2**40) == 5


def test_linear_path_100_middle_cut():
    f = gen_random_tree(100, 0, "path")
    s = TreeSize01(f, [1] * 100)
    s.cut(50)
    assert s.tree_sum(0) == 50 and s.tree_sum(99) == 50


def test_linear_all_zero_weights():
    rng = random.Random(9)
    f = gen_random_tree(50, 1, "uniform-attachment")
    s = TreeSize01(f, [0] * 50)
    order = [v for v in range(50) if f.parent[v] != -1]
    rng.shuffle(order)
    for v in order[:25]:
        s.cut(v)
        assert s.tree_sum(rng.randrange(50)) == 0


def test_linear_rejects_non_binary_weights():
    f = build_forest([-1, 0])
    with pytest.raises(NonBinaryWeight):
        TreeSize01(f, [1, 2])
    s = TreeSize01(f, [1, 1])
    with pytest.raises(NonBinaryWeight):
        s.update_weight(0, 5)


def test_linear_differential_random_forests():
    for seed in range(600):
        rng = random.Random(seed)
        n = log_uniform(rng, 1, 4096 if seed % 97 == 0 else 256)
        shape = ["uniform-attachment", "path", "star", "balanced", "caterpillar"][seed % 5]
        f = gen_random_tree(n, seed, shape)
        trace = gen_random_trace(
            f, log_uniform(rng, 1, 2 * n), seed=seed, binary_weights=True
        )
        s = TreeSize01(trace.forest(), trace.weights)
        report = replay(trace, s)
        assert report.ok, (seed, report.mismatches[:3])


def test_linear_full_teardown_matches_oracle():
    rng = random.Random(17)
    n = 4096
    f = gen_random_tree(n, 17, "uniform-attachment")
    w = [rng.randint(0, 1) for _ in range(n)]
    s = TreeSize01(f, w)
    nf = NaiveForest(f, w)
    order = list(range(1, n))
    rng.shuffle(order)
    for i, v in enumerate(order):
        s.cut(v)
        nf.cut(v)
        if i % 64 == 0:
            q = rng.randrange(n)
            assert s.tree_sum(q) == nf.tree_sum(q)


def test_probe_counter_monotone_and_positive():
    f = gen_random_tree(64, 0, "balanced")
    s = TreeSize01(f, [1] * 64)
    p0 = s.probe_count()
    s.tree_sum(5)
    assert s.probe_count() > p0
