import math
import random

import pytest

from decforest.core import (
    InstrumentedGroup,
    IntGroup,
    ModGroup,
    build_forest,
    replay,
)
from decforest.errors import AuxiliaryVertex, NoParent
from decforest.oracle import gen_random_tree, gen_random_trace
from decforest.tree_sum_simple import SimpleTreeSum

from conftest import log_uniform


def make(parents, weights, group=None):
    return SimpleTreeSum(build_forest(parents), weights, group or IntGroup())


def test_tree_sum_examples():
    s = make([-1, 0, 1], [5, 3, 2])
    assert s.tree_sum(2) == 10
    s.cut_report(1)
    assert s.tree_sum(0) == 5 and s.tree_sum(2) == 5
    z = make([-1, 0, 1], [0, 0, 0])
    assert z.tree_sum(1) == 0


def test_update_weight_examples():
    s = make([-1, 0, 1], [5, 3, 2])
    s.update_weight(1, 7)
    assert s.tree_sum(0) == 14
    s.update_weight(1, 7)  # same value: sums unchanged
    assert s.tree_sum(0) == 14


def test_update_weight_exactly_one_add_one_sub():
    g = InstrumentedGroup(IntGroup())
    s = make([-1, 0, 1], [5, 3, 2], g)
    a0, s0 = g.add_count, g.sub_count
    s.update_weight(1, 7)
    assert (g.add_count - a0, g.sub_count - s0) == (1, 1)


def test_tree_sum_zero_group_ops():
    g = InstrumentedGroup(IntGroup())
    s = make([-1, 0, 1], [5, 3, 2], g)
    before = g.total
    s.tree_sum(2)
    assert g.total == before


def test_cut_report_examples():
    s = make([-1, 0, 1], [5, 3, 2])
    assert s.cut_report(1) == (5, 5)
    star = make([-1, 0, 0, 0], [1, 1, 1, 1])
    assert star.cut_report(3) == (1, 3)


def test_cut_report_group_op_bound_per_op():
    from decforest.oracle import NaiveForest

    g = InstrumentedGroup(IntGroup())
    n = 256
    f = gen_random_tree(n, 0, "uniform-attachment")
    s = SimpleTreeSum(f, [1] * n, g)
    mirror = NaiveForest(f, [1] * n)
    order = [v for v in range(n) if f.parent[v] != -1]
    random.Random(0).shuffle(order)
    for v in order:
        comp = len(mirror._component(v))
        child_side = len(mirror._descendants(v))
        smaller = min(child_side, comp - child_side)
        mirror.cut(v)
        before = g.total
        s.cut_report(v)
        assert g.total - before <= smaller + 1


def test_balanced_teardown_total_bound():
    # full teardown of a balanced binary tree, n=1024: <= 2 n log2 n group ops
    n = 1024
    f = gen_random_tree(n, 0, "balanced")
    g = InstrumentedGroup(IntGroup())
    s = SimpleTreeSum(f, [1] * n, g)
    base = g.total
    order = list(range(1, n))
    random.Random(1).shuffle(order)
    for v in order:
        s.cut_report(v)
    assert g.total - base <= 2 * n * math.log2(n)


def test_errors():
    s = make([-1, 0], [1, 1])
    with pytest.raises(NoParent):
        s.cut_report(0)
    aux = SimpleTreeSum(build_forest([-1, 0], aux=[False, True]), [1, 0], IntGroup())
    for fn in (aux.tree_sum, lambda v: aux.update_weight(v, 1), aux.cut_report):
        with pytest.raises(AuxiliaryVertex):
            fn(1)


@pytest.mark.parametrize("group_name", ["int", "mod97"])
def test_oracle_equivalence_10k_traces(group_name):
    # answers match brute-force traversal sums on 10,000 random traces
    for seed in range(10_000):
        rng = random.Random(seed * 2 + (group_name == "mod97"))
        n = log_uniform(rng, 1, 128)
        f = gen_random_tree(n, seed, "uniform-attachment")
        trace = gen_random_trace(f, log_uniform(rng, 1, 64), seed=seed)
        if group_name == "mod97":
            p = 97
            trace.weights = [w % p for w in trace.weights]
            ops = []
            for op in trace.ops:
                if op.kind == "upd":
                    ops.append(op._replace(value=op.value % p))
                elif op.expected is not None:
                    ops.append(op._replace(expected=op.expected % p))
                else:
                    ops.append(op)
            trace.ops = ops
            group = ModGroup(p)
        else:
            group = IntGroup()
        s = SimpleTreeSum(trace.forest(), trace.weights, group)
        report = replay(trace, s)
        assert report.ok, (seed, report.mismatches[:3])
