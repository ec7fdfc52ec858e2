"""Shared foundation: rooted forests, commutative-group plumbing, operation
traces, and the replay harness used by every structure in the package.

Vertices are dense integers ``0..n-1`` and all per-vertex state lives in flat
lists indexed by id.  A :class:`RootedForest` is immutable once built; dynamic
structures keep their own live parent/child mirrors and never touch it.

Weights are opaque elements of a commutative group.  Structures may only
combine them through a :class:`Group` instance (``zero``/``add``/``sub``);
they never compare them.  Equality on group values exists for tests only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .errors import (
    AuxiliaryVertex,
    CycleDetected,
    IndexOutOfRange,
    IllegalOperation,
    NoParent,
    TraceParseError,
)


class RootedForest:
    """A static rooted forest with pre/post DFS numbering.

    ``parent[v]`` is -1 for roots.  ``aux[v]`` marks auxiliary vertices
    (introduced by binarization); no operation may ever target them.
    """

    __slots__ = ("n", "parent", "children", "aux", "pre", "post", "roots")

    def __init__(self, n, parent, children, aux, pre, post, roots):
        self.n = n
        self.parent = parent
        self.children = children
        self.aux = aux
        self.pre = pre
        self.post = post
        self.roots = roots

    def check_vertex(self, v):
        if not 0 <= v < self.n:
            raise IndexOutOfRange(f"vertex {v} outside 0..{self.n - 1}")

    def __repr__(self):
        return f"RootedForest(n={self.n}, roots={self.roots})"


def build_forest(parents, aux=None) -> RootedForest:
    """Build a :class:`RootedForest` from a parent array.

    ``parents[v]`` may be an int id, -1, or None (the latter two mean root).
    Children keep input order (ascending id), which fixes the DFS numbering.
    Raises :class:`CycleDetected` if the parent relation has a cycle.
    """
    n = len(parents)
    parent = [-1] * n
    for v, p in enumerate(parents):
        if p is None or p == -1:
            continue
        if not isinstance(p, int) or not 0 <= p < n:
            raise IndexOutOfRange(f"parent of {v} is {p}, outside 0..{n - 1}")
        if p == v:
            raise CycleDetected(f"vertex {v} is its own parent")
        parent[v] = p
    children = [[] for _ in range(n)]
    roots = []
    for v in range(n):
        if parent[v] == -1:
            roots.append(v)
        else:
            children[parent[v]].append(v)

    pre = [0] * n
    post = [0] * n
    pre_ctr = 0
    post_ctr = 0
    seen = 0
    for r in roots:
        stack = [(r, 0)]
        while stack:
            v, ci = stack[-1]
            if ci == 0:
                pre[v] = pre_ctr
                pre_ctr += 1
                seen += 1
            if ci < len(children[v]):
                stack[-1] = (v, ci + 1)
                stack.append((children[v][ci], 0))
            else:
                post[v] = post_ctr
                post_ctr += 1
                stack.pop()
    if seen < n:
        raise CycleDetected("parent relation contains a cycle")

    aux_flags = [False] * n if aux is None else [bool(a) for a in aux]
    if len(aux_flags) != n:
        raise IndexOutOfRange("aux flag list length differs from parents")
    return RootedForest(n, parent, children, aux_flags, pre, post, roots)


def is_ancestor_static(f: RootedForest, u: int, v: int) -> bool:
    """True iff u is a (reflexive) ancestor of v in the original forest.

    Constant time via the pre/post numbering: u is an ancestor of v exactly
    when pre(u) <= pre(v) and post(u) >= post(v).
    """
    f.check_vertex(u)
    f.check_vertex(v)
    return f.pre[u] <= f.pre[v] and f.post[u] >= f.post[v]


# ---------------------------------------------------------------------------
# Commutative groups
# ---------------------------------------------------------------------------


class Group:
    """Interface for a commutative group over opaque weight values.

    Structures may call ``zero``, ``add`` and ``sub`` only.  ``equals`` is a
    test-only capability: production structures must never observe equality
    (or any other predicate) of group values.
    """

    def zero(self):
        raise NotImplementedError

    def add(self, x, y):
        raise NotImplementedError

    def sub(self, x, y):
        raise NotImplementedError

    def equals(self, x, y):  # test-only
        return x == y


class IntGroup(Group):
    """The integers under addition."""

    def zero(self):
        return 0

    def add(self, x, y):
        return x + y

    def sub(self, x, y):
        return x - y


class ModGroup(Group):
    """Integers modulo p."""

    def __init__(self, p):
        self.p = p

    def zero(self):
        return 0

    def add(self, x, y):
        return (x + y) % self.p

    def sub(self, x, y):
        return (x - y) % self.p


class VectorGroup(Group):
    """Fixed-dimension integer vectors under componentwise addition."""

    def __init__(self, dim):
        self.dim = dim

    def zero(self):
        return (0,) * self.dim

    def add(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def sub(self, x, y):
        return tuple(a - b for a, b in zip(x, y))


class InstrumentedGroup(Group):
    """Wraps a group and counts every add/sub forwarded through it.

    Forwarding preserves results exactly; the counters are what a run's
    group-model cost is measured by.
    """

    def __init__(self, inner: Group):
        self.inner = inner
        self.add_count = 0
        self.sub_count = 0

    def zero(self):
        return self.inner.zero()

    def add(self, x, y):
        self.add_count += 1
        return self.inner.add(x, y)

    def sub(self, x, y):
        self.sub_count += 1
        return self.inner.sub(x, y)

    def equals(self, x, y):  # test-only
        return self.inner.equals(x, y)

    @property
    def total(self):
        return self.add_count + self.sub_count

    def snapshot(self):
        return {"adds": self.add_count, "subs": self.sub_count}


# ---------------------------------------------------------------------------
# Operation traces
# ---------------------------------------------------------------------------

CUT = "cut"
UPD = "upd"
TSUM = "tsum"
SSUM = "ssum"


class TraceOp(NamedTuple):
    kind: str
    v: int
    value: Any = None  # new weight for upd
    expected: Any = None  # expected answer for tsum/ssum


def cut_op(v):
    return TraceOp(CUT, v)


def upd_op(v, value):
    return TraceOp(UPD, v, value)


def tsum_op(v, expected=None):
    return TraceOp(TSUM, v, None, expected)


def ssum_op(v, expected=None):
    return TraceOp(SSUM, v, None, expected)


@dataclass
class OperationTrace:
    """A replayable instance: initial forest, weights, and an op sequence.

    Legality (checked by :func:`replay`): no cut on a current root or on an
    auxiliary vertex, no repeated cut of the same edge, and no operation of
    any kind on an auxiliary vertex.
    """

    parents: list
    aux: list
    weights: list
    ops: list = field(default_factory=list)
    exhausted: bool = False

    @property
    def n(self):
        return len(self.parents)

    def forest(self) -> RootedForest:
        return build_forest(self.parents, self.aux)


@dataclass
class ReplayReport:
    answers: list = field(default_factory=list)  # (op index, value)
    mismatches: list = field(default_factory=list)  # (op index, got, expected)
    counters: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.mismatches


def replay(trace: OperationTrace, structure, annotate=False) -> ReplayReport:
    """Feed every trace record to ``structure`` and collect the answers.

    Legality is validated here against the trace's own forest, so a broken
    structure cannot mask an illegal trace.  Expected-answer mismatches are
    flagged in the report, not fatal.  With ``annotate=True`` the trace's
    expected fields are filled in from the structure's answers instead of
    being checked.
    """
    n = trace.n
    aux = trace.aux
    live = list(trace.parents)
    for v, p in enumerate(live):
        if p is None:
            live[v] = -1
    report = ReplayReport()
    answers = report.answers
    mismatches = report.mismatches
    ops = trace.ops
    for i in range(len(ops)):
        op = ops[i]
        kind = op.kind
        v = op.v
        if not 0 <= v < n:
            raise IndexOutOfRange(f"op {i}: vertex {v} outside 0..{n - 1}")
        if aux[v]:
            raise IllegalOperation(f"op {i}: {kind} targets auxiliary vertex {v}")
        if kind == CUT:
            if live[v] == -1:
                raise IllegalOperation(f"op {i}: cut({v}) but {v} is a root")
            live[v] = -1
            if hasattr(structure, "cut_report"):
                structure.cut_report(v)
            else:
                structure.cut(v)
        elif kind == UPD:
            structure.update_weight(v, op.value)
        elif kind == TSUM:
            got = structure.tree_sum(v)
            answers.append((i, got))
            if annotate:
                ops[i] = TraceOp(TSUM, v, None, got)
            elif op.expected is not None and got != op.expected:
                mismatches.append((i, got, op.expected))
        elif kind == SSUM:
            got = structure.subtree_sum(v)
            answers.append((i, got))
            if annotate:
                ops[i] = TraceOp(SSUM, v, None, got)
            elif op.expected is not None and got != op.expected:
                mismatches.append((i, got, op.expected))
        else:
            raise IllegalOperation(f"op {i}: unknown kind {kind!r}")
    counters = getattr(structure, "counters", None)
    if callable(counters):
        report.counters = counters()
    return report


# ---------------------------------------------------------------------------
# Trace text format
# ---------------------------------------------------------------------------
#
# One record per line, ASCII, integer weights:
#
#   init <n>
#   parent <v> <p|-1>
#   aux <v>
#   weight <v> <int>
#   cut <v>
#   upd <v> <int>
#   tsum <v> [<expected>]
#   ssum <v> [<expected>]
#
# Comments start with '#'.  Unlisted parents default to -1, weights to 0.


def parse_trace(text: str) -> OperationTrace:
    parents = None
    aux = None
    weights = None
    ops = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "init":
                if parents is not None:
                    raise TraceParseError("duplicate init", line_no)
                n = int(parts[1])
                if n < 0:
                    raise TraceParseError("negative n", line_no)
                parents = [-1] * n
                aux = [False] * n
                weights = [0] * n
                continue
            if parents is None:
                raise TraceParseError("record before init", line_no)
            if tag == "parent":
                v, p = int(parts[1]), int(parts[2])
                _check_range(v, len(parents), line_no)
                if p != -1:
                    _check_range(p, len(parents), line_no)
                parents[v] = p
            elif tag == "aux":
                v = int(parts[1])
                _check_range(v, len(parents), line_no)
                aux[v] = True
            elif tag == "weight":
                v, w = int(parts[1]), int(parts[2])
                _check_range(v, len(parents), line_no)
                weights[v] = w
            elif tag == "cut":
                ops.append(cut_op(_op_vertex(parts, len(parents), line_no)))
            elif tag == "upd":
                v = _op_vertex(parts, len(parents), line_no)
                ops.append(upd_op(v, int(parts[2])))
            elif tag == "tsum":
                v = _op_vertex(parts, len(parents), line_no)
                exp = int(parts[2]) if len(parts) > 2 else None
                ops.append(tsum_op(v, exp))
            elif tag == "ssum":
                v = _op_vertex(parts, len(parents), line_no)
                exp = int(parts[2]) if len(parts) > 2 else None
                ops.append(ssum_op(v, exp))
            else:
                raise TraceParseError(f"unknown tag {tag!r}", line_no)
        except (ValueError, IndexError):
            raise TraceParseError(f"malformed record {line!r}", line_no) from None
    if parents is None:
        raise TraceParseError("missing init record")
    return OperationTrace(parents, aux, weights, ops)


def _check_range(v, n, line_no):
    if not 0 <= v < n:
        raise TraceParseError(f"vertex {v} outside 0..{n - 1}", line_no)


def _op_vertex(parts, n, line_no):
    v = int(parts[1])
    _check_range(v, n, line_no)
    return v


def format_trace(trace: OperationTrace) -> str:
    lines = [f"init {trace.n}"]
    for v, p in enumerate(trace.parents):
        if p is not None and p != -1:
            lines.append(f"parent {v} {p}")
    for v, a in enumerate(trace.aux):
        if a:
            lines.append(f"aux {v}")
    for v, w in enumerate(trace.weights):
        if w:
            lines.append(f"weight {v} {w}")
    for op in trace.ops:
        if op.kind == CUT:
            lines.append(f"cut {op.v}")
        elif op.kind == UPD:
            lines.append(f"upd {op.v} {op.value}")
        else:
            if op.expected is None:
                lines.append(f"{op.kind} {op.v}")
            else:
                lines.append(f"{op.kind} {op.v} {op.expected}")
    return "\n".join(lines) + "\n"


def log_star(n: int) -> int:
    """Iterated logarithm: smallest k with log2 applied k times taking n <= 1."""
    import math

    k = 0
    x = float(n)
    while x > 1.0:
        x = math.log2(x)
        k += 1
    return k


def guard_not_aux(forest: RootedForest, v: int):
    forest.check_vertex(v)
    if forest.aux[v]:
        raise AuxiliaryVertex(f"operation on auxiliary vertex {v}")


def guard_has_parent(live_parent, v):
    if live_parent[v] == -1:
        raise NoParent(f"cut({v}): vertex has no live parent edge")
