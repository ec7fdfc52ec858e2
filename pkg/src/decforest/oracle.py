"""Brute-force reference structure and seeded instance/trace generators.

:class:`NaiveForest` recomputes every answer by full traversal, so it is the
ground truth every other structure is differentially tested against.  The
generators are deterministic per seed (Mersenne Twister via
``random.Random``), so any failure is replayable from the seed alone.
"""

from __future__ import annotations

import random

from .core import (
    CUT,
    IntGroup,
    OperationTrace,
    RootedForest,
    TraceOp,
    build_forest,
    cut_op,
    ssum_op,
    tsum_op,
    upd_op,
)
from .errors import AuxiliaryVertex, NoParent

SHAPES = ("uniform-attachment", "path", "star", "caterpillar", "balanced")


class NaiveForest:
    """Reference structure: every query is a full traversal, every time."""

    def __init__(self, forest: RootedForest, weights, group=None):
        self.forest = forest
        self.group = group if group is not None else IntGroup()
        self.live_parent = list(forest.parent)
        self.live_children = [list(cs) for cs in forest.children]
        self.w = list(weights)

    def _guard(self, v):
        self.forest.check_vertex(v)
        if self.forest.aux[v]:
            raise AuxiliaryVertex(f"operation on auxiliary vertex {v}")

    def _component(self, v):
        # climb to the live root, then walk the whole component
        r = v
        while self.live_parent[r] != -1:
            r = self.live_parent[r]
        return self._descendants(r)

    def _descendants(self, v):
        out = []
        stack = [v]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(self.live_children[x])
        return out

    def _sum(self, vertices):
        g = self.group
        acc = g.zero()
        for x in vertices:
            acc = g.add(acc, self.w[x])
        return acc

    def tree_sum(self, v):
        self._guard(v)
        return self._sum(self._component(v))

    def subtree_sum(self, v):
        self._guard(v)
        return self._sum(self._descendants(v))

    def update_weight(self, v, x):
        self._guard(v)
        self.w[v] = x

    def cut(self, v):
        self._guard(v)
        u = self.live_parent[v]
        if u == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        self.live_parent[v] = -1
        self.live_children[u].remove(v)

    def cut_report(self, v):
        self.cut(v)
        u = self.forest.parent[v]
        return self.tree_sum(v), self._sum(self._component(u))


def gen_random_tree(n, seed, shape="uniform-attachment") -> RootedForest:
    """A deterministic random tree on n vertices of the requested shape."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    rng = random.Random(seed)
    parents = [-1] * n
    if shape == "path":
        for v in range(1, n):
            parents[v] = v - 1
    elif shape == "star":
        for v in range(1, n):
            parents[v] = 0
    elif shape == "balanced":
        for v in range(1, n):
            parents[v] = (v - 1) // 2
    elif shape == "caterpillar":
        # spine of ~n/2 vertices, remaining vertices attached to random spine vertices
        spine = max(1, n // 2)
        for v in range(1, spine):
            parents[v] = v - 1
        for v in range(spine, n):
            parents[v] = rng.randrange(spine)
    else:  # uniform-attachment
        for v in range(1, n):
            parents[v] = rng.randrange(v)
    return build_forest(parents)


DEFAULT_MIX = {CUT: 1.0, "upd": 1.0, "tsum": 1.0}


def gen_random_trace(
    forest: RootedForest,
    m,
    mix=None,
    seed=0,
    weights=None,
    weight_range=(-8, 8),
    binary_weights=False,
) -> OperationTrace:
    """A legal random trace of (up to) m ops with oracle-filled expectations.

    ``mix`` maps op kinds (cut/upd/tsum/ssum) to selection weights.  Kinds
    with no legal candidate left are skipped; if nothing is legal the trace
    is truncated and flagged ``exhausted``.  Update values are drawn from
    ``weight_range`` or {0, 1} when ``binary_weights`` is set.
    """
    rng = random.Random(seed)
    mix = dict(DEFAULT_MIX if mix is None else mix)
    n = forest.n
    non_aux = [v for v in range(n) if not forest.aux[v]]
    if weights is None:
        if binary_weights:
            weights = [0 if forest.aux[v] else rng.randint(0, 1) for v in range(n)]
        else:
            weights = [
                0 if forest.aux[v] else rng.randint(*weight_range) for v in range(n)
            ]
    sim = NaiveForest(forest, weights)
    cuttable = [v for v in non_aux if forest.parent[v] != -1]
    ops = []
    exhausted = False
    for _ in range(m):
        kinds = []
        kw = []
        for kind, wt in mix.items():
            if wt <= 0:
                continue
            if kind == CUT and not cuttable:
                continue
            if kind != CUT and not non_aux:
                continue
            kinds.append(kind)
            kw.append(wt)
        if not kinds:
            exhausted = True
            break
        kind = rng.choices(kinds, weights=kw)[0]
        if kind == CUT:
            i = rng.randrange(len(cuttable))
            v = cuttable[i]
            cuttable[i] = cuttable[-1]
            cuttable.pop()
            sim.cut(v)
            ops.append(cut_op(v))
        elif kind == "upd":
            v = rng.choice(non_aux)
            x = rng.randint(0, 1) if binary_weights else rng.randint(*weight_range)
            sim.update_weight(v, x)
            ops.append(upd_op(v, x))
        elif kind == "tsum":
            v = rng.choice(non_aux)
            ops.append(tsum_op(v, sim.tree_sum(v)))
        elif kind == "ssum":
            v = rng.choice(non_aux)
            ops.append(ssum_op(v, sim.subtree_sum(v)))
        else:
            raise ValueError(f"unknown op kind {kind!r} in mix")
    return OperationTrace(
        list(forest.parent), list(forest.aux), list(weights), ops, exhausted
    )
