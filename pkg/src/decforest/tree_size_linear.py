"""Table-driven tree sums for 0-1 weights.

Small forests (up to ``ell`` vertices) are represented by a single packed
integer code: per vertex, a parent field of ceil(log2(ell+1)) bits (0 means
root, i means vertex i-1) followed by one weight bit.  A global table indexed
by code stores, for every vertex, the tree-sum answer and the successor codes
under weight updates and cuts, so each operation on a small forest is one
table probe.  The table depends only on ``ell`` and is shared by every
instance.

:class:`TreeSize01` stacks the cluster reduction twice on top of these
micro-forests: clusters of size ~log n at the top level, ~log log n at the
second, with the packed codes at the bottom.  All arithmetic is on machine
integers; no abstract group value ever enters this structure.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .clustering import binarize
from .core import RootedForest, build_forest
from .errors import (
    IllegalOperation,
    NonBinaryWeight,
    NoParent,
    WordOverflow,
)
from .tree_sum_iterated import ClusterReduction, ComponentDispatch, check_binary

MAX_TABLE_ENTRIES = 1 << 24


def code_layout(ell):
    """(parent bits p, total bits c) of the packed code for a given ell."""
    p = max(1, math.ceil(math.log2(ell + 1)))
    return p, ell * (p + 1)


def encode_forest(parents, weight_bits, ell):
    """Pack a forest of at most ell vertices into its integer code.

    Vertices beyond ``len(parents)`` pad out as isolated weight-0 vertices.
    """
    n = len(parents)
    if n > ell:
        raise WordOverflow(f"{n} vertices do not fit a code for ell={ell}")
    p, _ = code_layout(ell)
    code = 0
    for v in range(n):
        par = parents[v]
        field = 0 if par is None or par == -1 else par + 1
        bit = weight_bits[v]
        if bit not in (0, 1):
            raise NonBinaryWeight(f"weight of vertex {v} is {bit!r}")
        code |= (field | (bit << p)) << (v * (p + 1))
    return code


def decode_forest(code, ell):
    """Inverse of :func:`encode_forest` (always returns ell vertices)."""
    p, c = code_layout(ell)
    if code < 0 or code >> c:
        raise IllegalOperation(f"code {code} does not fit {c} bits")
    parents = []
    bits = []
    pmask = (1 << p) - 1
    for v in range(ell):
        chunk = code >> (v * (p + 1))
        field = chunk & pmask
        parents.append(field - 1 if field else -1)
        bits.append((chunk >> p) & 1)
    return parents, bits


class GlobalSizeTable:
    """All answers and successor codes for every valid forest code.

    ``valid[code]`` marks codes whose parent fields are in range and whose
    parent relation is acyclic; the S/U0/U1/C rows of other codes are
    meaningless.  Entirely determined by ell.
    """

    def __init__(self, ell):
        if ell < 1:
            raise ValueError("ell must be >= 1")
        p, c = code_layout(ell)
        if (1 << c) > MAX_TABLE_ENTRIES:
            raise WordOverflow(
                f"2^{c} entries exceed the {MAX_TABLE_ENTRIES} entry cap"
            )
        self.ell = ell
        self.parent_bits = p
        self.code_bits = c
        size = 1 << c
        codes = np.arange(size, dtype=np.int64)
        stride = p + 1
        pmask = (1 << p) - 1
        # parent fields and weight bits, one column per vertex
        P = np.empty((size, ell), dtype=np.int64)
        W = np.empty((size, ell), dtype=np.int8)
        for v in range(ell):
            chunk = codes >> (v * stride)
            P[:, v] = chunk & pmask
            W[:, v] = (chunk >> p) & 1
        valid = (P <= ell).all(axis=1)
        # chase parents: after ell steps every chain of an acyclic code is 0
        # (indices clipped so out-of-range fields of invalid codes don't trap)
        cur = P.copy()
        for _ in range(ell):
            idx = np.clip(cur - 1, 0, ell - 1)
            cur = np.where(cur == 0, 0, np.take_along_axis(P, idx, axis=1))
        valid &= (cur == 0).all(axis=1)
        self.valid = valid
        # roots: iterate "move to parent unless root" to a fixed point
        R = np.tile(np.arange(ell, dtype=np.int64), (size, 1))
        for _ in range(ell):
            pr = np.take_along_axis(P, R, axis=1)
            R = np.where(pr == 0, R, np.clip(pr - 1, 0, ell - 1))
        S = np.zeros((size, ell), dtype=np.int8)
        for u in range(ell):
            S += np.where(R == R[:, [u]], W[:, [u]], 0).astype(np.int8)
        self.S = S
        U0 = np.empty((size, ell), dtype=np.int64)
        U1 = np.empty((size, ell), dtype=np.int64)
        C = np.empty((size, ell), dtype=np.int64)
        for v in range(ell):
            wbit = 1 << (v * stride + p)
            U0[:, v] = codes & ~wbit
            U1[:, v] = codes | wbit
            C[:, v] = codes & ~(pmask << (v * stride))
        self.U0 = U0
        self.U1 = U1
        self.C = C
        # one entry of work per (code, vertex) pair
        self.build_ops = size * ell

    def _check(self, code, v):
        if not 0 <= code < len(self.valid) or not self.valid[code]:
            raise IllegalOperation(f"invalid forest code {code}")
        if not 0 <= v < self.ell:
            raise IllegalOperation(f"vertex {v} outside 0..{self.ell - 1}")

    def tree_sum(self, code, v):
        self._check(code, v)
        return int(self.S[code, v])

    def update_weight(self, code, v, bit):
        self._check(code, v)
        if bit not in (0, 1):
            raise NonBinaryWeight(f"weight bit {bit!r}")
        return int((self.U1 if bit else self.U0)[code, v])

    def cut(self, code, v):
        self._check(code, v)
        return int(self.C[code, v])


_TABLE_CACHE = {}


def build_global_table(ell) -> GlobalSizeTable:
    """The shared table for a given ell (cached per process)."""
    t = _TABLE_CACHE.get(ell)
    if t is None:
        t = GlobalSizeTable(ell)
        _TABLE_CACHE[ell] = t
    return t


_MAGIC = b"DFSZ1\n"


def save_table(table: GlobalSizeTable, path):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", table.ell))
        fh.write(np.packbits(table.valid).tobytes())
        fh.write(table.S.tobytes())
        for arr in (table.U0, table.U1, table.C):
            fh.write(arr.astype(np.int64).tobytes())


def load_table(path) -> GlobalSizeTable:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise IllegalOperation(f"{path} is not a size-table file")
        (ell,) = struct.unpack("<I", fh.read(4))
        table = GlobalSizeTable.__new__(GlobalSizeTable)
        p, c = code_layout(ell)
        size = 1 << c
        table.ell = ell
        table.parent_bits = p
        table.code_bits = c
        nbytes = (size + 7) // 8
        table.valid = np.unpackbits(
            np.frombuffer(fh.read(nbytes), dtype=np.uint8), count=size
        ).astype(bool)
        table.S = np.frombuffer(fh.read(size * ell), dtype=np.int8).reshape(size, ell)
        out = []
        for _ in range(3):
            out.append(
                np.frombuffer(fh.read(size * ell * 8), dtype=np.int64).reshape(
                    size, ell
                )
            )
        table.U0, table.U1, table.C = out
        table.build_ops = size * ell
        return table


class MicroTreeSum:
    """A forest of at most ell vertices maintained as one table code."""

    def __init__(self, table: GlobalSizeTable, forest: RootedForest, weights, probes):
        self.table = table
        self.n = forest.n
        self.code = encode_forest(forest.parent, weights, table.ell)
        self.live_parent = list(forest.parent)
        self.probes = probes  # shared mutable [count]

    def tree_sum(self, v):
        self.probes[0] += 1
        return int(self.table.S[self.code, v])

    def update_weight(self, v, x):
        if x not in (0, 1):
            raise NonBinaryWeight(f"weight {x!r} for 0-1 structure")
        self.probes[0] += 1
        self.code = int((self.table.U1 if x else self.table.U0)[self.code, v])

    def cut_report(self, v):
        u = self.live_parent[v]
        if u == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        self.live_parent[v] = -1
        t = self.table
        self.probes[0] += 3
        self.code = code = int(t.C[self.code, v])
        return int(t.S[code, v]), int(t.S[code, u])

    def cut(self, v):
        self.cut_report(v)


class _CountingIntGroup:
    """Integer arithmetic for the contracted-forest levels, probe-counted."""

    def __init__(self, probes):
        self.probes = probes

    def zero(self):
        return 0

    def add(self, x, y):
        self.probes[0] += 1
        return x + y

    def sub(self, x, y):
        self.probes[0] += 1
        return x - y


def micro_ell_for(n):
    """ell = floor(log2 log2 n), clamped to [1, 5]."""
    if n < 4:
        return 1
    return min(5, max(1, int(math.floor(math.log2(math.log2(n))))))


class TreeSize01:
    """Tree sums over a 0-1-weighted forest in linear total time.

    Takes no group: weights are 0/1 machine integers throughout, answers are
    ints.  ``probe_count()`` totals the table probes, the integer operations
    of the contracted-forest levels, and the connectivity relabeling work.
    """

    def __init__(self, forest: RootedForest, weights, ell=None):
        for v, x in enumerate(weights):
            if x not in (0, 1):
                raise NonBinaryWeight(f"weight of vertex {v} is {x!r}")
        self.n = forest.n
        bf, bw, _ = binarize(forest, weights)
        check_binary(bf)
        self.ell = micro_ell_for(bf.n) if ell is None else ell
        self.table = build_global_table(self.ell)
        self._probes = [0]
        self._group = _CountingIntGroup(self._probes)
        self._impl = ComponentDispatch(bf, bw, self._build_tree)

    def _build_tree(self, tree, weights):
        k1 = max(1, math.ceil(math.log2(tree.n))) if tree.n > 1 else 1
        return ClusterReduction(tree, weights, self._group, k1, self._build_mid)

    def _build_mid(self, tree, weights):
        k2 = max(1, math.ceil(math.log2(tree.n))) if tree.n > 1 else 1
        k2 = min(k2, self.ell)
        return ClusterReduction(tree, weights, self._group, k2, self._build_micro)

    def _build_micro(self, tree, weights):
        return MicroTreeSum(self.table, tree, weights, self._probes)

    def tree_sum(self, v):
        self._probes[0] += 1
        return self._impl.tree_sum(v)

    def update_weight(self, v, x):
        if x not in (0, 1):
            raise NonBinaryWeight(f"weight {x!r} for 0-1 structure")
        self._probes[0] += 1
        self._impl.update_weight(v, x)

    def cut_report(self, v):
        self._probes[0] += 1
        return self._impl.cut_report(v)

    def cut(self, v):
        self.cut_report(v)

    def probe_count(self):
        return self._probes[0] + _collect_touches(self._impl)

    def counters(self):
        return {"probes": self.probe_count()}


def _collect_touches(impl):
    total = 0
    if isinstance(impl, ComponentDispatch):
        for s in impl.structures:
            total += _collect_touches(s)
    elif isinstance(impl, ClusterReduction):
        total += impl.conn.touches + impl.D.conn.touches
        for s in impl.inner:
            total += _collect_touches(s)
    return total
