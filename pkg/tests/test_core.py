import random

import pytest

from decforest.core import (
    InstrumentedGroup,
    IntGroup,
    ModGroup,
    OperationTrace,
    VectorGroup,
    build_forest,
    cut_op,
    format_trace,
    is_ancestor_static,
    log_star,
    parse_trace,
    replay,
    tsum_op,
    upd_op,
)
from decforest.errors import (
    CycleDetected,
    IllegalOperation,
    IndexOutOfRange,
    TraceParseError,
)
from decforest.oracle import NaiveForest, gen_random_tree

from conftest import log_uniform


def test_single_vertex_forest():
    f = build_forest([None])
    assert f.pre == [0] and f.post == [0]
    assert f.roots == [0]


def test_path_dfs_numbering():
    # hand-run DFS on the path 0<-1<-2: enter 0,1,2; exit 2,1,0
    f = build_forest([None, 0, 1])
    assert f.pre == [0, 1, 2]
    assert f.post == [2, 1, 0]


def test_two_cycle_rejected():
    with pytest.raises(CycleDetected):
        build_forest([1, 0])


def test_self_parent_rejected():
    with pytest.raises(CycleDetected):
        build_forest([-1, 1])


def test_parent_out_of_range():
    with pytest.raises(IndexOutOfRange):
        build_forest([-1, 7])


def test_ancestor_examples():
    f = build_forest([None, 0, 1])
    assert is_ancestor_static(f, 0, 2)
    assert not is_ancestor_static(f, 2, 0)
    assert is_ancestor_static(f, 1, 1)  # reflexive
    with pytest.raises(IndexOutOfRange):
        is_ancestor_static(f, 0, 5)


def test_ancestor_matches_transitive_closure():
    rng = random.Random(7)
    for trial in range(40):
        n = rng.randint(1, 64)
        f = gen_random_tree(n, trial, "uniform-attachment")
        # oracle: climb parents explicitly
        for _ in range(50):
            u, v = rng.randrange(n), rng.randrange(n)
            x, expect = v, False
            while True:
                if x == u:
                    expect = True
                    break
                if f.parent[x] == -1:
                    break
                x = f.parent[x]
            assert is_ancestor_static(f, u, v) == expect


GROUPS = [IntGroup(), ModGroup(97), ModGroup(2), VectorGroup(3)]


@pytest.mark.parametrize("group", GROUPS, ids=["int", "mod97", "mod2", "vec3"])
def test_group_axioms(group):
    rng = random.Random(13)

    def rand_value():
        if isinstance(group, VectorGroup):
            return tuple(rng.randint(-50, 50) for _ in range(group.dim))
        if isinstance(group, ModGroup):
            return rng.randrange(group.p)
        return rng.randint(-10**6, 10**6)

    zero = group.zero()
    for _ in range(1000):
        x, y, z = rand_value(), rand_value(), rand_value()
        assert group.add(x, y) == group.add(y, x)
        assert group.add(group.add(x, y), z) == group.add(x, group.add(y, z))
        assert group.add(x, zero) == x
        assert group.sub(x, x) == zero


class CallLoggingGroup:
    """Stub group whose values are opaque; records every call."""

    def __init__(self):
        self.calls = []

    def zero(self):
        return ("zero",)

    def add(self, x, y):
        self.calls.append("add")
        return ("add", x, y)

    def sub(self, x, y):
        self.calls.append("sub")
        return ("sub", x, y)


def test_instrumented_counts_match_stub_log():
    stub = CallLoggingGroup()
    g = InstrumentedGroup(stub)
    rng = random.Random(5)
    vals = [g.zero() for _ in range(4)]
    for _ in range(500):
        a, b = rng.choice(vals), rng.choice(vals)
        vals.append(g.add(a, b) if rng.random() < 0.6 else g.sub(a, b))
    assert g.add_count == stub.calls.count("add")
    assert g.sub_count == stub.calls.count("sub")
    assert g.total == len(stub.calls)


def test_instrumented_forwards_bit_exactly():
    g = InstrumentedGroup(IntGroup())
    assert g.add(3, 4) == 7 and g.sub(3, 4) == -1 and g.zero() == 0


def test_replay_empty_trace():
    trace = OperationTrace([-1, 0, 1], [False] * 3, [5, 3, 2])
    report = replay(trace, NaiveForest(trace.forest(), trace.weights))
    assert report.answers == [] and report.ok


def test_replay_expected_answer():
    trace = OperationTrace([-1, 0, 1], [False] * 3, [5, 3, 2], [tsum_op(0, 10)])
    report = replay(trace, NaiveForest(trace.forest(), trace.weights))
    assert report.answers == [(0, 10)] and report.ok


def test_replay_rejects_root_cut():
    trace = OperationTrace([-1, 0, 1], [False] * 3, [5, 3, 2], [cut_op(0)])
    with pytest.raises(IllegalOperation):
        replay(trace, NaiveForest(trace.forest(), trace.weights))


def test_replay_rejects_aux_target():
    trace = OperationTrace([-1, 0], [False, True], [5, 0], [tsum_op(1)])
    with pytest.raises(IllegalOperation):
        replay(trace, NaiveForest(trace.forest(), trace.weights))


def test_replay_flags_mismatch_not_fatal():
    trace = OperationTrace(
        [-1, 0], [False] * 2, [5, 3], [tsum_op(0, 99), tsum_op(1, 8)]
    )
    report = replay(trace, NaiveForest(trace.forest(), trace.weights))
    assert report.mismatches == [(0, 8, 99)]
    assert report.answers == [(0, 8), (1, 8)]


def test_replay_annotate_fills_expectations():
    trace = OperationTrace([-1, 0], [False] * 2, [5, 3], [tsum_op(0), cut_op(1), tsum_op(1)])
    replay(trace, NaiveForest(trace.forest(), trace.weights), annotate=True)
    assert trace.ops[0].expected == 8
    assert trace.ops[2].expected == 3


TRACE_TEXT = """\
# toy trace
init 3
parent 1 0
parent 2 1
aux 2
weight 0 5
weight 1 3
tsum 0 8
upd 1 -2
tsum 1 3
cut 1
tsum 0 5
"""


def test_trace_text_roundtrip():
    trace = parse_trace(TRACE_TEXT)
    assert trace.n == 3 and trace.aux == [False, False, True]
    assert trace.weights == [5, 3, 0]
    report = replay(trace, NaiveForest(trace.forest(), trace.weights))
    assert report.ok
    again = parse_trace(format_trace(trace))
    assert again.parents == trace.parents
    assert again.ops == trace.ops


@pytest.mark.parametrize(
    "text",
    ["parent 0 1", "init 2\nparent 0 5", "init 2\nbogus 0", "init 2\ncut x"],
)
def test_trace_parse_errors(text):
    with pytest.raises(TraceParseError):
        parse_trace(text)


def test_log_star_values():
    assert log_star(1) == 0
    assert log_star(2) == 1
    assert log_star(4) == 2
    assert log_star(16) == 3
    assert log_star(65536) == 4


def test_log_uniform_helper_hits_caps():
    rng = random.Random(1)
    sizes = [log_uniform(rng, 1, 128) for _ in range(5000)]
    assert min(sizes) == 1 and max(sizes) == 128
