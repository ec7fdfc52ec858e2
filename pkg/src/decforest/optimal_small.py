"""Provably optimal tree-sum structures for very small forests.

A *computation tree* pins down every behavior a tree-sum structure can show
on a fixed initial forest within a fixed number of operations: edges are
labeled with operations, nodes carry straight-line add/sub instruction lists
over registers and weight cells, and tree-sum child nodes designate a return
cell.  Its cost is the maximum instruction depth (MID) over root-to-node
paths, which equals the worst-case number of group operations of the
corresponding structure.

Correctness is decidable: run the tree over the group of integer vectors,
giving every initial weight and every update value its own basis vector.  A
tree-sum answer is then correct iff the returned vector is exactly the 0/1
indicator of the queried component's current weights, and correctness over
this one group implies correctness over every commutative group (instruction
effects are linear by construction).

``search_optimal`` finds a minimum-MID correct tree by searching over
*semantic states* (sets of reachable register vectors, with update basis
coordinates renamed to a canonical order) instead of raw syntax, with
memoization and a MID budget.  ``adaptive_wrapper`` turns a table of such
optima into an online structure that does not know the operation count in
advance, by tripling a time budget and replaying its log whenever the
current optimum is outgrown.  ``UniversalTreeSum`` stacks the cluster
reduction three times over those wrapped optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .clustering import binarize
from .core import Group, RootedForest, build_forest
from .errors import (
    CapExceeded,
    IllegalSequence,
    InvariantBroken,
    NondeterministicStructure,
)
from .tree_sum_simple import SimpleTreeSum

# operands: ("R", j) register, ("W", v) current weight of vertex v
R = "R"
W = "W"

CUT = "cut"
UPD = "upd"
TSUM = "tsum"


class Instruction:
    """target <- a (+|-) b, operands being registers or weight cells."""

    __slots__ = ("target", "op", "a", "b")

    def __init__(self, target, op, a, b):
        self.target = target
        self.op = op
        self.a = a
        self.b = b

    def __repr__(self):
        return f"R{self.target} <- {_fmt(self.a)} {self.op} {_fmt(self.b)}"

    def __eq__(self, other):
        return (
            isinstance(other, Instruction)
            and (self.target, self.op, self.a, self.b)
            == (other.target, other.op, other.a, other.b)
        )


def _fmt(operand):
    kind, i = operand
    return f"{kind}{i}"


class CTNode:
    __slots__ = ("instructions", "children", "ret")

    def __init__(self):
        self.instructions = []
        self.children = {}  # (kind, v) -> CTNode
        self.ret = None  # operand, only on tree-sum children


@dataclass
class ComputationTree:
    forest: RootedForest
    height: int
    root: CTNode = field(default_factory=CTNode)

    def mid(self):
        best = 0
        stack = [(self.root, len(self.root.instructions))]
        while stack:
            node, depth = stack.pop()
            best = max(best, depth)
            for child in node.children.values():
                stack.append((child, depth + len(child.instructions)))
        return best

    def nodes(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(node.children.values())
        return out


def legal_labels(forest: RootedForest, cut_so_far):
    """All operation labels legal at a node, given the cuts on its path."""
    out = []
    for v in range(forest.n):
        if forest.aux[v]:
            continue
        if forest.parent[v] != -1 and v not in cut_so_far:
            out.append((CUT, v))
        out.append((TSUM, v))
        out.append((UPD, v))
    return out


def validate(tree: ComputationTree, forest: RootedForest = None, succinct=False):
    """Check the structural validity conditions; returns a violation list."""
    forest = forest or tree.forest
    problems = []

    def walk(node, depth, cuts, idepth):
        if succinct:
            d = idepth
            for ins in node.instructions:
                d += 1
                for opnd in (ins.a, ins.b):
                    if opnd[0] == R and opnd[1] > d:
                        problems.append(
                            f"register {opnd[1]} used at instruction depth {d}"
                        )
                if ins.target > d:
                    problems.append(f"register {ins.target} written at depth {d}")
        else:
            d = idepth + len(node.instructions)
        for label in node.children:
            kind, v = label
            if not 0 <= v < forest.n or forest.aux[v]:
                problems.append(f"label {kind}({v}) targets an illegal vertex")
            elif kind == CUT and (forest.parent[v] == -1 or v in cuts):
                problems.append(f"cut({v}) on a root or repeated on its path")
        legal = legal_labels(forest, cuts)
        if depth < tree.height:
            for label in legal:
                if label not in node.children:
                    problems.append(f"missing child {label[0]}({label[1]}) at depth {depth}")
        elif node.children:
            problems.append(f"node below height {tree.height} has children")
        for label, child in node.children.items():
            if label[0] == TSUM and child.ret is None:
                problems.append(f"tree-sum child at depth {depth + 1} lacks a return value")
            walk(
                child,
                depth + 1,
                cuts | {label[1]} if label[0] == CUT else cuts,
                d,
            )

    walk(tree.root, 0, frozenset(), 0)
    return problems


def _resolve(operand, regs, weights, zero):
    kind, i = operand
    if kind == W:
        return weights[i]
    return regs.get(i, zero)


def evaluate(tree: ComputationTree, group: Group, weights, ops):
    """Run an operation sequence through the tree; returns tree-sum outputs.

    ``ops`` is a list of (kind, v) or (UPD, v, value) records.
    """
    if len(ops) > tree.height:
        raise IllegalSequence(f"{len(ops)} ops exceed height {tree.height}")
    zero = group.zero()
    regs = {}
    wcells = list(weights)
    node = tree.root
    _exec(node.instructions, regs, wcells, group, zero)
    out = []
    for record in ops:
        kind, v = record[0], record[1]
        child = node.children.get((kind, v))
        if child is None:
            raise IllegalSequence(f"no edge {kind}({v}) at this node")
        if kind == UPD:
            wcells[v] = record[2]
        _exec(child.instructions, regs, wcells, group, zero)
        if kind == TSUM:
            out.append(_resolve(child.ret, regs, wcells, zero))
        node = child
    return out


def _exec(instructions, regs, wcells, group, zero):
    for ins in instructions:
        a = _resolve(ins.a, regs, wcells, zero)
        b = _resolve(ins.b, regs, wcells, zero)
        regs[ins.target] = group.add(a, b) if ins.op == "+" else group.sub(a, b)


# ---------------------------------------------------------------------------
# Symbolic correctness checking over integer vectors
# ---------------------------------------------------------------------------


def _vadd(x, y):
    return tuple(a + b for a, b in zip(x, y))


def _vsub(x, y):
    return tuple(a - b for a, b in zip(x, y))


def _basis(i, dim):
    return tuple(1 if j == i else 0 for j in range(dim))


def _component(live_parent, v):
    n = len(live_parent)

    def climb(x):
        while live_parent[x] != -1:
            x = live_parent[x]
        return x

    r = climb(v)
    return [x for x in range(n) if climb(x) == r]


def check_correct(tree: ComputationTree, forest: RootedForest = None, m=None) -> bool:
    """True iff every legal operation sequence yields correct tree sums.

    Initial weights of non-auxiliary vertices are distinct basis vectors and
    the i-th update writes a fresh one, so a returned vector is correct only
    if it is exactly the sum of the queried component's current weights.
    """
    forest = forest or tree.forest
    m = tree.height if m is None else m
    n = forest.n
    nprime = sum(1 for v in range(n) if not forest.aux[v])
    dim = nprime + m
    zero = (0,) * dim
    vix = {}
    for v in range(n):
        if not forest.aux[v]:
            vix[v] = len(vix)

    def sym_exec(instructions, regs, wvec):
        for ins in instructions:
            a = _resolve(ins.a, regs, wvec, zero)
            b = _resolve(ins.b, regs, wvec, zero)
            regs[ins.target] = _vadd(a, b) if ins.op == "+" else _vsub(a, b)

    wvec0 = [zero if forest.aux[v] else _basis(vix[v], dim) for v in range(n)]
    regs0 = {}
    sym_exec(tree.root.instructions, regs0, wvec0)

    def walk(node, regs, wvec, live, upds):
        for (kind, v), child in node.children.items():
            regs2 = dict(regs)
            wvec2 = list(wvec)
            live2 = live
            upds2 = upds
            if kind == CUT:
                live2 = list(live)
                live2[v] = -1
            elif kind == UPD:
                wvec2[v] = _basis(nprime + upds, dim)
                upds2 = upds + 1
            sym_exec(child.instructions, regs2, wvec2)
            if kind == TSUM:
                target = zero
                for x in _component(live2, v):
                    target = _vadd(target, wvec2[x])
                if _resolve(child.ret, regs2, wvec2, zero) != target:
                    return False
            if not walk(child, regs2, wvec2, live2, upds2):
                return False
        return True

    return walk(tree.root, regs0, wvec0, list(forest.parent), 0)


# ---------------------------------------------------------------------------
# Semantic search for minimum-MID correct trees
# ---------------------------------------------------------------------------

_INF = float("inf")


@dataclass
class SearchCaps:
    n: int = 3
    m: int = 2
    d: int = 4


@dataclass
class OptResult:
    fingerprint: str
    m: int
    mid: int
    tree: ComputationTree


def fingerprint(forest: RootedForest) -> str:
    parents = ",".join(str(p) for p in forest.parent)
    aux = "".join("1" if a else "0" for a in forest.aux)
    return f"{parents}/{aux}"


class _Searcher:
    """Minimum worst-case instruction depth over canonical semantic states.

    A state is (weight vectors, reachable register vectors, live parents);
    update basis coordinates are renamed by first appearance so that states
    differing only in update bookkeeping merge in the memo.
    """

    def __init__(self, forest, m, budget):
        self.forest = forest
        self.m = m
        self.budget = budget
        n = forest.n
        self.vix = {}
        for v in range(n):
            if not forest.aux[v]:
                self.vix[v] = len(self.vix)
        self.nprime = len(self.vix)
        self.dim = self.nprime + m
        self.zero = (0,) * self.dim
        self.memo_node = {}
        self.memo_branch = {}

    def initial_state(self):
        wvec = tuple(
            self.zero if self.forest.aux[v] else _basis(self.vix[v], self.dim)
            for v in range(self.forest.n)
        )
        live = tuple(self.forest.parent)
        return self.canon(wvec, frozenset(), live)

    def canon(self, wvec, regs, live):
        perm = {}
        for vec in list(wvec) + sorted(regs):
            for j in range(self.nprime, self.dim):
                if vec[j] and j not in perm:
                    perm[j] = self.nprime + len(perm)

        def relabel(vec):
            out = list(vec[: self.nprime]) + [0] * (self.dim - self.nprime)
            for j, nj in perm.items():
                out[nj] = vec[j]
            return tuple(out)

        return (
            tuple(relabel(v) for v in wvec),
            frozenset(relabel(r) for r in regs),
            live,
        )

    def fresh_coord(self, wvec, regs):
        used = set()
        for vec in list(wvec) + list(regs):
            for j in range(self.nprime, self.dim):
                if vec[j]:
                    used.add(j)
        return self.nprime + len(used)

    def legal_ops(self, live):
        forest = self.forest
        out = []
        for v in range(forest.n):
            if forest.aux[v]:
                continue
            if live[v] != -1:
                out.append((CUT, v))
            out.append((TSUM, v))
            out.append((UPD, v))
        return out

    def target_of(self, state, v):
        wvec, _, live = state
        t = self.zero
        for x in _component(list(live), v):
            t = _vadd(t, wvec[x])
        return t

    def apply_op(self, state, op):
        """Post-op state (canonical) and the required output, if a tree-sum."""
        wvec, regs, live = state
        kind, v = op
        if kind == CUT:
            live2 = list(live)
            live2[v] = -1
            state2 = self.canon(wvec, regs, tuple(live2))
            return state2, None
        if kind == UPD:
            j = self.fresh_coord(wvec, regs)
            if j >= self.dim:
                raise InvariantBroken("update coordinates exhausted")
            wvec2 = list(wvec)
            wvec2[v] = _basis(j, self.dim)
            state2 = self.canon(tuple(wvec2), regs, live)
            return state2, None
        return state, self.target_of(state, v)

    def available(self, state, target):
        wvec, regs, _ = state
        return target in regs or target in wvec

    def operand_pool(self, state):
        wvec, regs, _ = state
        pool = {self.zero}
        pool.update(regs)
        for v, vec in enumerate(wvec):
            if not self.forest.aux[v]:
                pool.add(vec)
        return sorted(pool)

    def node_best(self, state, target, r, budget):
        """Min extra MID at a node that must produce ``target`` (or None)."""
        key = (state, target, r, budget)
        hit = self.memo_node.get(key)
        if hit is not None:
            return hit
        best = _INF
        if target is None or self.available(state, target):
            best = self.branch_best(state, r, budget)
        if budget >= 1:
            wvec, regs, live = state
            pool = self.operand_pool(state)
            results = set()
            for i, x in enumerate(pool):
                for y in pool[i:]:
                    results.add(_vadd(x, y))
                for y in pool:
                    results.add(_vsub(x, y))
            results.discard(self.zero)
            results -= regs
            for nv in sorted(results):
                st2 = self.canon(wvec, regs | {nv}, live)
                c = self.node_best(st2, target, r, budget - 1)
                if 1 + c < best:
                    best = 1 + c
        self.memo_node[key] = best
        return best

    def branch_best(self, state, r, budget):
        """Min worst-case MID below a node once its instructions are done."""
        if r == 0:
            return 0
        key = (state, r, budget)
        hit = self.memo_branch.get(key)
        if hit is not None:
            return hit
        worst = 0
        for op in self.legal_ops(state[2]):
            st2, target = self.apply_op(state, op)
            c = self.node_best(st2, target, r - 1, budget)
            if c > worst:
                worst = c
                if worst == _INF:
                    break
        self.memo_branch[key] = worst
        return worst

    # -- witness reconstruction over the filled memo --------------------

    def build(self):
        state = self.initial_state()
        total = self.node_best(state, None, self.m, self.budget)
        if total == _INF:
            return None
        tree = ComputationTree(self.forest, self.m)
        self._fill_node(tree.root, state, None, self.m, self.budget, total, [], 0)
        return tree

    def _operand_for(self, vec, reg_of, wvec, own_target):
        if vec in reg_of:
            return (R, reg_of[vec])
        for v, wv in enumerate(wvec):
            if not self.forest.aux[v] and wv == vec:
                return (W, v)
        if vec == self.zero:
            # an unwritten register reads as zero; the instruction's own
            # target is guaranteed unwritten on this path
            return (R, own_target)
        raise InvariantBroken("operand vector not addressable")

    def _fill_node(self, node, state, target, r, budget, value, path_vecs, idepth):
        """Emit instructions matching the memoized optimum, then children.

        ``path_vecs`` maps register vectors chosen on this path to indices;
        it is keyed by insertion so register numbering equals instruction
        depth, which keeps the tree succinct.
        """
        reg_of = dict(path_vecs)
        wvec, regs, live = state
        while True:
            if (target is None or self.available((wvec, regs, live), target)) and (
                self.branch_best((wvec, regs, live), r, budget) == value
            ):
                break
            assert budget >= 1 and value >= 1
            pool = self.operand_pool((wvec, regs, live))
            found = None
            for i, x in enumerate(pool):
                for sign, ys in (("+", pool[i:]), ("-", pool)):
                    for y in ys:
                        nv = _vadd(x, y) if sign == "+" else _vsub(x, y)
                        if nv == self.zero or nv in regs:
                            continue
                        st2 = self.canon(wvec, regs | {nv}, live)
                        if 1 + self.node_best(st2, target, r, budget - 1) == value:
                            found = (x, sign, y, nv)
                            break
                    if found:
                        break
                if found:
                    break
            if found is None:
                raise InvariantBroken("witness reconstruction diverged from memo")
            x, sign, y, nv = found
            idepth += 1
            a = self._operand_for(x, reg_of, wvec, idepth)
            b = self._operand_for(y, reg_of, wvec, idepth)
            node.instructions.append(Instruction(idepth, sign, a, b))
            reg_of[nv] = idepth
            regs = regs | {nv}
            budget -= 1
            value -= 1

        if target is not None:
            node.ret = self._operand_for(target, reg_of, wvec, None)
        if r == 0:
            return
        state_now = (wvec, regs, live)
        for op in self.legal_ops(live):
            child = CTNode()
            node.children[op] = child
            st2, child_target = self.apply_op(state_now, op)
            child_value = self.node_best(st2, child_target, r - 1, budget)
            # the canonical relabeling inside apply_op never renames initial
            # coordinates, so path register vectors stay valid keys unless an
            # update stole their coordinate; rebuild the mapping vector-wise
            self._fill_child(
                child, op, state_now, reg_of, st2, child_target, r, budget,
                child_value, idepth,
            )

    def _fill_child(
        self, child, op, state, reg_of, st2, target, r, budget, value, idepth
    ):
        # Track how the canonical relabeling moved the register vectors so
        # the path register map follows the child's coordinate system.
        wvec, regs, live = state
        kind, v = op
        if kind == CUT:
            live_t = list(live)
            live_t[v] = -1
            raw = (wvec, regs, tuple(live_t))
        elif kind == UPD:
            j = self.fresh_coord(wvec, regs)
            wvec_t = list(wvec)
            wvec_t[v] = _basis(j, self.dim)
            raw = (tuple(wvec_t), regs, live)
        else:
            raw = (wvec, regs, live)
        mapping = self._relabel_map(raw)
        new_reg_of = {}
        for vec, idx in reg_of.items():
            new_reg_of[mapping(vec)] = idx
        self._fill_node(child, st2, target, r - 1, budget, value, new_reg_of, idepth)

    def _relabel_map(self, raw_state):
        wvec, regs, _ = raw_state
        perm = {}
        for vec in list(wvec) + sorted(regs):
            for j in range(self.nprime, self.dim):
                if vec[j] and j not in perm:
                    perm[j] = self.nprime + len(perm)

        def relabel(vec):
            out = list(vec[: self.nprime]) + [0] * (self.dim - self.nprime)
            for j, nj in perm.items():
                out[nj] = vec[j]
            return tuple(out)

        return relabel


def search_optimal(forest: RootedForest, m, d=None, caps: SearchCaps = None):
    """Minimum-MID correct computation tree for (forest, m), or None.

    Searches MID budgets 0..d and returns an :class:`OptResult` for the
    first achievable one; returns None when no correct tree with MID <= d
    exists.  Raises CapExceeded when forest size, m, or d exceed the caps.
    """
    caps = caps or SearchCaps()
    d = caps.d if d is None else d
    if forest.n > caps.n or m > caps.m or d > caps.d:
        raise CapExceeded(
            f"search over n={forest.n}, m={m}, d={d} exceeds caps "
            f"(n<={caps.n}, m<={caps.m}, d<={caps.d})"
        )
    for budget in range(d + 1):
        searcher = _Searcher(forest, m, budget)
        state = searcher.initial_state()
        if searcher.node_best(state, None, m, budget) <= budget:
            tree = searcher.build()
            return OptResult(fingerprint(forest), m, tree.mid(), tree)
    return None


# ---------------------------------------------------------------------------
# Computation trees <-> data structures
# ---------------------------------------------------------------------------


class ComputationTreeStructure:
    """A tree-sum structure that walks a correct computation tree.

    Valid for at most ``tree.height`` operations; the adaptive wrapper
    rebuilds with a taller tree before that limit is hit.
    """

    def __init__(self, tree: ComputationTree, weights, group: Group):
        self.tree = tree
        self.group = group
        self.regs = {}
        self.wcells = list(weights)
        self.node = tree.root
        self.ops_done = 0
        _exec(self.node.instructions, self.regs, self.wcells, group, group.zero())

    def _step(self, label):
        child = self.node.children.get(label)
        if child is None:
            raise IllegalSequence(f"no edge {label[0]}({label[1]}) at this node")
        _exec(child.instructions, self.regs, self.wcells, self.group, self.group.zero())
        self.node = child
        self.ops_done += 1
        return child

    def tree_sum(self, v):
        child = self._step((TSUM, v))
        return _resolve(child.ret, self.regs, self.wcells, self.group.zero())

    def update_weight(self, v, x):
        self.wcells[v] = x
        self._step((UPD, v))

    def cut(self, v):
        self._step((CUT, v))


def tree_to_structure(tree: ComputationTree, weights, group: Group):
    return ComputationTreeStructure(tree, weights, group)


class _Sym:
    """Opaque token handed to structures instead of real group values.

    Besides its provenance, each token carries the linear combination of
    base symbols (initial weights, update parameters) it represents, which
    lets the extractor re-express a value over currently addressable cells
    when a structure consulted a weight that has since been overwritten.
    """

    __slots__ = ("origin", "vec")

    def __init__(self, origin, vec):
        self.origin = origin  # ("w0", v) | ("upd", i) | ("zero",) | ("res", j)
        self.vec = vec

    def __repr__(self):
        return f"Sym{self.origin}"


class LoggingGroup(Group):
    """Group of opaque tokens recording every add/sub with its operands."""

    def __init__(self, dim):
        self.dim = dim
        self.log = []  # (op "+"|"-", a, b, result) as _Sym entries

    def zero(self):
        return _Sym(("zero",), (0,) * self.dim)

    def add(self, x, y):
        r = _Sym(("res", len(self.log)), _vadd(x.vec, y.vec))
        self.log.append(("+", x, y, r))
        return r

    def sub(self, x, y):
        r = _Sym(("res", len(self.log)), _vsub(x.vec, y.vec))
        self.log.append(("-", x, y, r))
        return r


def structure_to_tree(factory, forest: RootedForest, m) -> ComputationTree:
    """Extract the computation tree of a deterministic tree-sum structure.

    ``factory(forest, weights, group)`` builds the structure.  Every
    root-to-node path of the unique valid skeleton is replayed on a fresh
    instance over a :class:`LoggingGroup`, and the recorded add/sub traces
    become the node's instructions.  If a shared prefix ever records a
    different trace across replays, the structure is not deterministic and
    :class:`NondeterministicStructure` is raised.

    A recorded operand must be a register (an earlier recorded result) or a
    vertex's *current* weight cell.  Structures may instead consult a weight
    value they copied before an update overwrote it; such an instruction is
    replaced by a shortest add/sub chain producing the same value from
    addressable cells, and instructions made dead by the rewrite are pruned,
    so the extracted tree computes identical answers.
    """
    n = forest.n
    dim = n + m  # base symbols: one per initial weight, one per update
    tree = ComputationTree(forest, m)

    def replay(path):
        g = LoggingGroup(dim)
        weights = [
            g.zero() if forest.aux[v] else _Sym(("w0", v), _basis(v, dim))
            for v in range(forest.n)
        ]
        structure = factory(forest, weights, g)
        marks = [len(g.log)]  # end of the construction-time segment
        answers = []
        for i, (kind, v) in enumerate(path):
            if kind == CUT:
                structure.cut(v)
            elif kind == UPD:
                structure.update_weight(v, _Sym(("upd", i), _basis(n + i, dim)))
            else:
                answers.append(structure.tree_sum(v))
            marks.append(len(g.log))
        segments = [g.log[: marks[0]]]
        segments += [g.log[marks[i] : marks[i + 1]] for i in range(len(marks) - 1)]
        return segments, answers

    zero_vec = (0,) * dim

    def translate(path, segments, answers):
        """Instruction lists (one per segment) plus the final return operand.

        Register indices equal instruction depth along the path, and a zero
        token concretizes to the instruction's own (yet unwritten) register.
        """
        weight_origin = {
            v: ("zero",) if forest.aux[v] else ("w0", v) for v in range(forest.n)
        }
        weight_vec = {
            v: zero_vec if forest.aux[v] else _basis(v, dim) for v in range(forest.n)
        }
        reg_index = {}  # log position of a result token -> register index
        reg_vecs = []  # (vector, register index) in emission order
        depth = 0

        def cells():
            out = list(reg_vecs)
            for v in range(forest.n):
                if not forest.aux[v]:
                    out.append((weight_vec[v], (W, v)))
            return out

        def operand_of(sym, own_reg):
            """Map a token to an operand, or None if it is not addressable."""
            o = sym.origin
            if o[0] == "res":
                idx = reg_index.get(o[1])
                return None if idx is None else (R, idx)
            if o[0] == "zero":
                return (R, own_reg)
            v = o[1] if o[0] == "w0" else None
            if v is None:
                for u, orig in weight_origin.items():
                    if orig == o:
                        return (W, u)
                return None
            return (W, v) if weight_origin[v] == o else None

        def synthesize(target_vec, where):
            """Shortest add/sub program producing target_vec from cells."""
            result = _shortest_program(target_vec, cells(), zero_vec, depth)
            if result is None:
                raise InvariantBroken(
                    f"cannot re-express a stale value from addressable cells in {where}"
                )
            return result

        out = []
        for j, seg in enumerate(segments):
            if j > 0 and path[j - 1][0] == UPD:
                v = path[j - 1][1]
                weight_origin[v] = ("upd", j - 1)
                weight_vec[v] = _basis(n + (j - 1), dim)
            ins = []
            for op, a, b, r in seg:
                oa = operand_of(a, depth + 1)
                ob = operand_of(b, depth + 1)
                if oa is not None and ob is not None:
                    depth += 1
                    emitted = [Instruction(depth, op, oa, ob)]
                else:
                    emitted, depth = synthesize(r.vec, f"op {j} of {path}")
                ins.extend(emitted)
                reg_index[r.origin[1]] = depth
                reg_vecs.append((r.vec, (R, depth)))
            out.append(ins)
        ret = None
        if path and path[-1][0] == TSUM:
            sym = answers[-1]
            ret = operand_of(sym, None)
            if ret is None or ret == (R, None):
                emitted, depth = synthesize(sym.vec, f"answer of {path}")
                out[-1].extend(emitted)
                ret = (R, depth)
        return out, ret

    # ancestors are always translated before their descendants, so each
    # node's replay can be checked against the already-recorded prefix
    stack = [(tree.root, [], frozenset())]
    while stack:
        node, path, cuts = stack.pop()
        segments, answers = replay(path)
        translated, ret = translate(path, segments, answers)
        walk = tree.root
        recorded = [walk]
        for label in path:
            walk = walk.children[label]
            recorded.append(walk)
        for got, holder in zip(translated[:-1], recorded[:-1]):
            if got != holder.instructions:
                raise NondeterministicStructure(
                    "replay produced a different trace on a shared prefix"
                )
        node.instructions = translated[-1]
        node.ret = ret
        if len(path) < m:
            for label in legal_labels(forest, cuts):
                child = CTNode()
                node.children[label] = child
                stack.append(
                    (
                        child,
                        path + [label],
                        cuts | {label[1]} if label[0] == CUT else cuts,
                    )
                )
    _prune_dead(tree.root)
    _renumber(tree.root, {}, 0)
    return tree


def _shortest_program(target, avail, zero_vec, depth, cap=3):
    """Shortest add/sub chain over the available cells reaching ``target``.

    Returns (instructions, final register index) or None.  Programs may use
    their own intermediates; the search dedups on reachable-value sets and
    is only ever run on forests of a handful of vertices.
    """
    for vec, opnd in avail:
        if vec == target:
            d = depth + 1
            return [Instruction(d, "+", opnd, (R, d))], d

    base_vals = [vec for vec, _ in avail] + [zero_vec]

    def render(prog):
        ins = []
        d = depth
        reg_for = {}  # intermediate index -> register
        for step, (op, i, j) in enumerate(prog):
            d += 1

            def opnd(idx):
                if idx < len(avail):
                    return avail[idx][1]
                if idx == len(avail):
                    return (R, d)  # zero: this instruction's own register
                return (R, reg_for[idx])

            ins.append(Instruction(d, op, opnd(i), opnd(j)))
            reg_for[len(base_vals) + step] = d
        return ins, d

    frontier = [((), tuple(base_vals))]
    for _ in range(cap):
        new_frontier = []
        seen = set()
        for prog, values in frontier:
            for i, a in enumerate(values):
                for j, b in enumerate(values):
                    for op in ("+", "-"):
                        if op == "+" and j < i:
                            continue
                        v = _vadd(a, b) if op == "+" else _vsub(a, b)
                        if v == target:
                            return render(list(prog) + [(op, i, j)])
                        if v in values or v == zero_vec:
                            continue
                        key = frozenset(values) | {v}
                        if key in seen:
                            continue
                        seen.add(key)
                        new_frontier.append(
                            (prog + ((op, i, j),), values + (v,))
                        )
        frontier = new_frontier
    return None


def _prune_dead(root):
    """Drop instructions whose result register no path below ever reads."""

    def walk(node):
        used = set()
        for child in node.children.values():
            used |= walk(child)
        if node.ret is not None and node.ret[0] == R:
            used.add(node.ret[1])
        kept = []
        for ins in reversed(node.instructions):
            if ins.target in used:
                kept.append(ins)
                used.discard(ins.target)
                for opnd in (ins.a, ins.b):
                    if opnd[0] == R and opnd[1] != ins.target:
                        used.add(opnd[1])
        node.instructions = kept[::-1]
        return used

    walk(root)


def _renumber(node, index_map, depth):
    """Reassign register indices to instruction depths after pruning."""
    local = dict(index_map)
    new_ins = []
    for ins in node.instructions:
        depth += 1

        def remap(opnd, own):
            if opnd[0] == W:
                return opnd
            return (R, own) if opnd[1] == ins.target else (R, local[opnd[1]])

        new_ins.append(Instruction(depth, ins.op, remap(ins.a, depth), remap(ins.b, depth)))
        local[ins.target] = depth
    node.instructions = new_ins
    if node.ret is not None and node.ret[0] == R:
        node.ret = (R, local[node.ret[1]])
    for child in node.children.values():
        _renumber(child, local, depth)


# ---------------------------------------------------------------------------
# The adaptive wrapper and the universal assembly
# ---------------------------------------------------------------------------


class AdaptiveTreeSum:
    """Online optimal structure for one small forest, m unknown upfront.

    Keeps a table of optimal computation trees for 1..m_cap operations and
    runs the best one whose cost budget t(m) = MID + n + m fits the current
    allowance t*.  When the operation count outgrows the current tree, the
    allowance triples, a larger tree is picked, and the logged operations
    are replayed on it.  Past the table, it falls back to
    :class:`SimpleTreeSum` (one final replay), which any longer run
    amortizes.  Within the table range the total group-operation count is
    at most 4 * (OPT(F, m) + n + m).
    """

    def __init__(self, forest: RootedForest, weights, group: Group, opt_table):
        self.forest = forest
        self.group = group
        self.weights0 = list(weights)
        self.opt_table = opt_table  # m -> OptResult, contiguous from 1
        self.m_cap = max(opt_table) if opt_table else 0
        self.log = []
        self.live_parent = list(forest.parent)
        self.live_children = [list(cs) for cs in forest.children]
        self.rebuilds = 0
        n = forest.n
        self.t_star = 3 * max(1, n)
        self.m_star = self._best_m()
        if self.m_star == 0:
            self.impl = SimpleTreeSum(forest, self.weights0, group)
            self.fallback = True
        else:
            self.impl = ComputationTreeStructure(
                self.opt_table[self.m_star].tree, self.weights0, group
            )
            self.fallback = False

    def t_of(self, m):
        return self.opt_table[m].mid + self.forest.n + m

    def _best_m(self):
        best = 0
        for m in range(1, self.m_cap + 1):
            if self.t_of(m) <= self.t_star:
                best = m
        return best

    def _ensure_capacity(self):
        if self.fallback:
            return
        while len(self.log) + 1 > self.m_star:
            if self.m_star >= self.m_cap:
                self.impl = SimpleTreeSum(self.forest, self.weights0, self.group)
                self.fallback = True
                self.rebuilds += 1
                self._replay()
                return
            self.t_star *= 3
            new_m = self._best_m()
            if new_m > self.m_star:
                self.m_star = new_m
                self.impl = ComputationTreeStructure(
                    self.opt_table[new_m].tree, self.weights0, self.group
                )
                self.rebuilds += 1
                self._replay()

    def _replay(self):
        for kind, v, x in self.log:
            if kind == CUT:
                self.impl.cut(v)
            elif kind == UPD:
                self.impl.update_weight(v, x)
            else:
                self.impl.tree_sum(v)

    def tree_sum(self, v):
        self._ensure_capacity()
        self.log.append((TSUM, v, None))
        return self.impl.tree_sum(v)

    def update_weight(self, v, x):
        self._ensure_capacity()
        self.log.append((UPD, v, x))
        self.impl.update_weight(v, x)

    def cut(self, v):
        self._ensure_capacity()
        self.log.append((CUT, v, None))
        self.impl.cut(v)
        u = self.live_parent[v]
        self.live_parent[v] = -1
        self.live_children[u].remove(v)

    def _representative(self, v):
        """A non-auxiliary vertex of v's current component, or None.

        Auxiliary vertices cannot be queried, but their weights are always
        zero, so a component without one simply sums to zero.
        """
        r = v
        while self.live_parent[r] != -1:
            r = self.live_parent[r]
        stack = [r]
        while stack:
            x = stack.pop()
            if not self.forest.aux[x]:
                return x
            stack.extend(self.live_children[x])
        return None

    def cut_report(self, v):
        # a reporting cut is one cut plus two tree-sum operations; a side
        # whose component is all-auxiliary is answered with zero directly
        u = self.live_parent[v]
        self.cut(v)
        sv = self.tree_sum(v)
        rep = self._representative(u)
        su = self.group.zero() if rep is None else self.tree_sum(rep)
        return sv, su


def adaptive_wrapper(forest, weights, group, opt_table) -> AdaptiveTreeSum:
    return AdaptiveTreeSum(forest, weights, group, opt_table)


_UNIVERSAL_TABLES = {}


def _opt_table_for(forest: RootedForest, m_cap) -> dict:
    """Optimal trees for 1..m_cap ops on a tiny forest, cached by shape."""
    fp = (fingerprint(forest), m_cap)
    table = _UNIVERSAL_TABLES.get(fp)
    if table is None:
        caps = SearchCaps(n=forest.n, m=m_cap, d=2 * forest.n + m_cap)
        table = {}
        for m in range(1, m_cap + 1):
            result = search_optimal(forest, m, caps=caps)
            if result is None:
                raise InvariantBroken(f"no correct tree found for m={m}")
            table[m] = result
        _UNIVERSAL_TABLES[fp] = table
    return table


class UniversalTreeSum:
    """Tree sums via three cluster reductions over precomputed optima.

    The bottom-level clusters have at most two vertices, so only the optimal
    structures for one- and two-vertex forests (with all auxiliary-flag
    combinations) are ever needed; they are searched once per process and
    shared.
    """

    BOTTOM_CAP = 2

    def __init__(self, forest: RootedForest, weights, group: Group, m_cap=3):
        from .tree_sum_iterated import ClusterReduction, ComponentDispatch, check_binary

        self.group = group
        self.m_cap = m_cap
        self.bottom_sizes = []
        bf, bw, _ = binarize(forest, weights, zero=group.zero())
        check_binary(bf)

        def bottom(tree, w):
            self.bottom_sizes.append(tree.n)
            return AdaptiveTreeSum(tree, w, group, _opt_table_for(tree, m_cap))

        def mid(tree, w):
            k = min(self.BOTTOM_CAP, tree.n) if tree.n > 1 else 1
            return ClusterReduction(tree, w, group, k, bottom)

        def top2(tree, w):
            k = max(1, math.ceil(math.log2(tree.n))) if tree.n > 1 else 1
            return ClusterReduction(tree, w, group, k, mid)

        def top(tree, w):
            k = max(1, math.ceil(math.log2(tree.n))) if tree.n > 1 else 1
            return ClusterReduction(tree, w, group, k, top2)

        self._impl = ComponentDispatch(bf, bw, top)

    def tree_sum(self, v):
        return self._impl.tree_sum(v)

    def update_weight(self, v, x):
        self._impl.update_weight(v, x)

    def cut_report(self, v):
        return self._impl.cut_report(v)

    def cut(self, v):
        self._impl.cut_report(v)


# ---------------------------------------------------------------------------
# Optimal-result table files
# ---------------------------------------------------------------------------
#
# Text format, one block per result:
#
#   opt <fingerprint> <m> <mid>
#   node <id> <parent id|-1> <label|root> [ret <operand>]
#   instr <node id> <target> <+|-> <operand> <operand>
#   end
#
# Node ids are assigned in depth-first order; labels look like cut:1,
# operands like R2 or W0.


def _operand_str(operand):
    return f"{operand[0]}{operand[1]}"


def _parse_operand(text):
    kind = text[0]
    if kind not in (R, W):
        raise ValueError(f"bad operand {text!r}")
    return (kind, int(text[1:]))


def save_opt_results(results, path):
    lines = []
    for res in results:
        lines.append(f"opt {res.fingerprint} {res.m} {res.mid}")
        ids = {}

        def visit(node, parent_id, label):
            nid = len(ids)
            ids[id(node)] = nid
            head = f"node {nid} {parent_id} {label}"
            if node.ret is not None:
                head += f" ret {_operand_str(node.ret)}"
            lines.append(head)
            for ins in node.instructions:
                lines.append(
                    f"instr {nid} {ins.target} {ins.op} "
                    f"{_operand_str(ins.a)} {_operand_str(ins.b)}"
                )
            for (kind, v), child in sorted(node.children.items()):
                visit(child, nid, f"{kind}:{v}")

        visit(res.tree.root, -1, "root")
        lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_opt_results(path, forest_by_fingerprint):
    """Read results back; ``forest_by_fingerprint`` supplies the forests."""
    results = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "opt":
            raise ValueError(f"expected opt line, got {lines[i]!r}")
        fp, m, mid = head[1], int(head[2]), int(head[3])
        forest = forest_by_fingerprint[fp]
        tree = ComputationTree(forest, m)
        nodes = {}
        i += 1
        while i < len(lines) and lines[i] != "end":
            parts = lines[i].split()
            if parts[0] == "node":
                nid, pid, label = int(parts[1]), int(parts[2]), parts[3]
                node = tree.root if pid == -1 else CTNode()
                nodes[nid] = node
                if pid != -1:
                    kind, v = label.split(":")
                    nodes[pid].children[(kind, int(v))] = node
                if len(parts) > 4 and parts[4] == "ret":
                    node.ret = _parse_operand(parts[5])
            elif parts[0] == "instr":
                nid = int(parts[1])
                nodes[nid].instructions.append(
                    Instruction(
                        int(parts[2]),
                        parts[3],
                        _parse_operand(parts[4]),
                        _parse_operand(parts[5]),
                    )
                )
            else:
                raise ValueError(f"unexpected line {lines[i]!r}")
            i += 1
        i += 1  # skip end
        results.append(OptResult(fp, m, mid, tree))
    return results
