"""Hard-instance workload generators for subtree-sum structures.

The *spine* instance encodes a prefix-sum array into a weighted two-tree
forest: tree P carries, per array slot i, a pool of leaves with weights
1..8b (b the array length) hanging off the i-th spine vertex, and tree N a
pool of unit leaves.  Changing slot i by delta is simulated with three cuts:
two P-leaves whose weights sum to 7b - delta and one unit N-leaf, after
which prefix sums of the array are recoverable from one subtree sum per
tree plus a static correction table.  The leaf pair always exists while
each slot is updated at most once per epoch, and is found by rejection
sampling with O(1) expected tries.

The *parity* instance does the same for 0/1 arrays on an unweighted tree:
slot i contributes one or two extra leaves so the parity of the subtree
size at the i-th spine vertex tracks the prefix parity, and a one-time flip
of slot i is a single leaf cut.

``BlockPartialSum`` is the helper used around such instances: partial sums
of a static array whose p-th update modifies exactly position p, with O(1)
queries.
"""

from __future__ import annotations

import random

from .core import OperationTrace, cut_op
from .errors import (
    DoubleFlip,
    IllegalOperation,
    InvariantBroken,
    OutOfOrderUpdate,
    ValueOutOfRange,
)


class SpineInstance:
    """The weighted two-tree prefix-sum workload.

    Vertex layout (b = the base array length):
      0 .. b-1                        spine of tree P (slot i -> vertex i-1)
      b .. b + 8b^2 - 1               P-leaves; u(i, j) has weight j
      base .. base + b - 1            spine of tree N, base = b(8b+1)
      base + b .. n-1                 N-leaves, unit weight
    Both spines are rooted at their last vertex, so the subtree at the k-th
    spine vertex covers slots 1..k.
    """

    def __init__(self, n_base, initial, seed=0):
        b = n_base
        if b < 1:
            raise ValueOutOfRange("base size must be >= 1")
        if len(initial) != b:
            raise ValueOutOfRange(f"array length {len(initial)} != {b}")
        for i, a in enumerate(initial):
            if not 0 <= a <= b - 1:
                raise ValueOutOfRange(f"A[{i + 1}] = {a} outside 0..{b - 1}")
        self.n_base = b
        self.a = list(initial)
        self.rng = random.Random(seed)

        n_plus = b * (8 * b + 1)
        n_minus = b * (b + 1)
        self.n = n_plus + n_minus
        parents = [-1] * self.n
        weights = [0] * self.n
        # tree P: spine 0..b-1 (slot i at vertex i-1, rooted at slot b)
        for i in range(1, b):
            parents[i - 1] = i
        for i in range(1, b + 1):
            for j in range(1, 8 * b + 1):
                u = self.u_id(i, j)
                parents[u] = i - 1
                weights[u] = j
        # tree N: spine base..base+b-1, one pool of unit leaves per slot
        base = n_plus
        self.base_minus = base
        for i in range(1, b):
            parents[base + i - 1] = base + i
        for i in range(1, b + 1):
            for p in range(1, b + 1):
                w = self.w_id(i, p)
                parents[w] = base + i - 1
                weights[w] = 1
        self.parents = parents
        self.weights = weights

        # correction table from the closed-form initial subtree sums
        self.correction = [0] * (b + 1)
        pref = 0
        for k in range(1, b + 1):
            pref += initial[k - 1]
            self.correction[k] = pref - 4 * k * b * (8 * b + 1) + 7 * b * (k * b)

        self.attached = [set(range(1, 8 * b + 1)) for _ in range(b + 1)]  # per slot
        self.update_count = [0] * (b + 1)
        self.sample_events = 0
        self.sample_tries = 0

    def vplus(self, k):
        return k - 1

    def vminus(self, k):
        return self.base_minus + k - 1

    def u_id(self, i, j):
        return self.n_base + (i - 1) * 8 * self.n_base + (j - 1)

    def w_id(self, i, p):
        return self.base_minus + self.n_base + (i - 1) * self.n_base + (p - 1)

    def trace(self) -> OperationTrace:
        return OperationTrace(list(self.parents), [False] * self.n, list(self.weights))

    def translate_update(self, epoch, i, value):
        """Three cut records simulating "set A[i] <- value" in epoch ``epoch``.

        Epochs are sequential per slot: the p-th update of slot i must carry
        epoch p, and there are at most b epochs in total.
        """
        b = self.n_base
        if not 1 <= i <= b:
            raise ValueOutOfRange(f"slot {i} outside 1..{b}")
        if not 0 <= value <= b - 1:
            raise ValueOutOfRange(f"value {value} outside 0..{b - 1}")
        if epoch != self.update_count[i] + 1 or epoch > b:
            raise IllegalOperation(
                f"slot {i} expects epoch {self.update_count[i] + 1}, got {epoch}"
            )
        delta = value - self.a[i - 1]
        s = 7 * b - delta
        attached = self.attached[i]
        self.sample_events += 1
        for attempt in range(10_000):
            self.sample_tries += 1
            j1 = self.rng.randint(1, 3 * b)
            j2 = s - j1
            if j1 in attached and j2 in attached:
                break
        else:
            raise InvariantBroken("no attached leaf pair found; bookkeeping is wrong")
        attached.discard(j1)
        attached.discard(j2)
        self.a[i - 1] = value
        self.update_count[i] += 1
        p = self.update_count[i]
        return [cut_op(self.u_id(i, j1)), cut_op(self.u_id(i, j2)), cut_op(self.w_id(i, p))]

    def prefix_from_sums(self, k, sum_plus, sum_minus):
        """Recover sum(A[1..k]) from the two subtree sums at slot k."""
        return sum_plus - 7 * self.n_base * sum_minus + self.correction[k]

    def check_invariant(self, subtree_sum):
        """True iff the prefix identity holds for every k, given a query fn."""
        pref = 0
        for k in range(1, self.n_base + 1):
            pref += self.a[k - 1]
            got = self.prefix_from_sums(
                k, subtree_sum(self.vplus(k)), subtree_sum(self.vminus(k))
            )
            if got != pref:
                return False
        return True


def build_spine(n_base, initial, seed=0) -> SpineInstance:
    return SpineInstance(n_base, initial, seed)


class ParityInstance:
    """Unweighted prefix-parity workload: flip = one leaf cut.

    Spine vertex i-1 carries slot i; slot i has 1 + A[i] extra leaves, so
    the subtree size at slot k is 2k + sum(A[1..k]) and its parity is the
    prefix parity.  Each slot may be flipped at most once.
    """

    def __init__(self, n_base, bits):
        b = n_base
        if len(bits) != b:
            raise ValueOutOfRange(f"bit array length {len(bits)} != {b}")
        self.n_base = b
        self.bits = [int(bool(x)) for x in bits]
        parents = [-1] * b
        for i in range(1, b):
            parents[i - 1] = i
        self.first_leaf = [None] * (b + 1)
        for i in range(1, b + 1):
            self.first_leaf[i] = len(parents)
            parents.append(i - 1)
            if self.bits[i - 1]:
                parents.append(i - 1)
        self.parents = parents
        self.n = len(parents)
        self.flipped = [False] * (b + 1)

    def trace(self) -> OperationTrace:
        return OperationTrace(list(self.parents), [False] * self.n, [1] * self.n)

    def flip(self, i):
        """The cut record that flips slot i (legal once per slot)."""
        if not 1 <= i <= self.n_base:
            raise ValueOutOfRange(f"slot {i} outside 1..{self.n_base}")
        if self.flipped[i]:
            raise DoubleFlip(f"slot {i} was already flipped")
        self.flipped[i] = True
        self.bits[i - 1] ^= 1
        return cut_op(self.first_leaf[i])

    def prefix_parity(self, k):
        return sum(self.bits[:k]) & 1

    def check_invariant(self, subtree_sum):
        for k in range(1, self.n_base + 1):
            if subtree_sum(k - 1) & 1 != self.prefix_parity(k):
                return False
        return True


def build_parity(n_base, bits) -> ParityInstance:
    return ParityInstance(n_base, bits)


class BlockPartialSum:
    """Partial sums of an array whose p-th update rewrites position p.

    Positions are 1-based.  Initialization is O(s); every query is O(1):
    positions up to the update frontier are answered from the incrementally
    maintained updated prefix sums, the rest from the static prefix sums of
    the initial array.
    """

    def __init__(self, values):
        self.s = len(values)
        self.pref0 = [0] * (self.s + 1)
        for i, x in enumerate(values, start=1):
            self.pref0[i] = self.pref0[i - 1] + x
        self.updated = [0] * (self.s + 1)
        self.frontier = 0

    def update(self, p, x):
        if p != self.frontier + 1:
            raise OutOfOrderUpdate(f"expected update at {self.frontier + 1}, got {p}")
        self.updated[p] = self.updated[p - 1] + x
        self.frontier = p

    def query(self, i):
        if not 1 <= i <= self.s:
            raise ValueOutOfRange(f"index {i} outside 1..{self.s}")
        p = self.frontier
        if i <= p:
            return self.updated[i]
        return self.updated[p] + self.pref0[i] - self.pref0[p]
