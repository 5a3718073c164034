"""Feedback generation: ordered-tree edit scripts between expression trees,
and templated findings attached to an equivalence verdict.

Edit distance is Zhang-Shasha with unit costs.  The optimal node mapping is
recovered by backtracing the forest-distance tables; the edit script is then
synthesized from the mapping so that sequential application transforms the
source tree into the target tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .equivalence import (DEFAULT_OPTIONS, EquivOptions, Verdict,
                          Counterexample, _match_alph_marker, _match_and,
                          equiv)
from .errors import BudgetExceeded
from .parser import render, render_pred
from .syntax import (Alphabet, Atom, Concat, ExistsNum, ExistsStr, Expr, Has,
                     Not, Or, Rep, Reverse, StrVar, TOP_CORE, children, walk)

MAX_EXACT_NODES = 3_000_000  # product of tree sizes handled by the exact DP


# ---------------------------------------------------------------------------
# Generic labeled ordered trees
# ---------------------------------------------------------------------------


@dataclass
class TNode:
    label: tuple[str, str]
    children: list["TNode"] = field(default_factory=list)
    expr: Optional[Expr] = field(default=None, compare=False, repr=False)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def clone(self) -> "TNode":
        return TNode(self.label, [c.clone() for c in self.children], self.expr)

    def at(self, path: tuple[int, ...]) -> "TNode":
        node = self
        for i in path:
            node = node.children[i]
        return node


def node_label(e: Expr) -> tuple[str, str]:
    if isinstance(e, Atom):
        return ("Atom", e.word if e.word else "eps")
    if isinstance(e, (Rep, Has)):
        return (type(e).__name__, render_pred(e.pred))
    if isinstance(e, (ExistsNum, ExistsStr)):
        return (type(e).__name__, e.var)
    if isinstance(e, StrVar):
        return ("StrVar", e.name)
    return (type(e).__name__, "")


def to_tree(e: Expr) -> TNode:
    return TNode(node_label(e), [to_tree(c) for c in children(e)], e)


# ---------------------------------------------------------------------------
# Edit script
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Relabel:
    path: tuple[int, ...]
    old: tuple[str, str]
    new: tuple[str, str]


@dataclass(frozen=True)
class DeleteNode:
    path: tuple[int, ...]


@dataclass(frozen=True)
class InsertNode:
    path: tuple[int, ...]
    label: tuple[str, str]
    span: int  # how many existing children the new node absorbs


@dataclass(frozen=True)
class EditScript:
    ops: tuple
    cost: int


def apply_script(script: EditScript, tree: TNode) -> TNode:
    """Apply the operations in order; returns the transformed tree."""
    root = TNode(("ROOT", ""), [tree.clone()])
    for op in script.ops:
        path = (0,) + op.path
        if isinstance(op, Relabel):
            node = root.at(path)
            if node.label != op.old:
                raise ValueError(f"relabel mismatch at {op.path}: {node.label}")
            node.label = op.new
        elif isinstance(op, DeleteNode):
            parent = root.at(path[:-1])
            idx = path[-1]
            victim = parent.children[idx]
            parent.children[idx:idx + 1] = victim.children
        elif isinstance(op, InsertNode):
            parent = root.at(path[:-1])
            idx = path[-1]
            absorbed = parent.children[idx:idx + op.span]
            parent.children[idx:idx + op.span] = [TNode(op.label, absorbed)]
        else:
            raise TypeError(f"unknown op: {op!r}")
    if len(root.children) != 1:
        raise ValueError("script did not produce a single tree")
    return root.children[0]


# ---------------------------------------------------------------------------
# Zhang-Shasha distance + mapping
# ---------------------------------------------------------------------------


class _Annotated:
    def __init__(self, root: TNode):
        self.nodes: list[TNode] = []  # postorder, 0-based storage

        def po(n: TNode):
            for c in n.children:
                po(c)
            self.nodes.append(n)

        po(root)
        self.n = len(self.nodes)
        index = {id(n): i + 1 for i, n in enumerate(self.nodes)}
        self.lml = [0] * (self.n + 1)  # leftmost leaf, 1-based
        for i, node in enumerate(self.nodes, 1):
            self.lml[i] = (i if not node.children
                           else self.lml[index[id(node.children[0])]])
        seen = set()
        keyroots = []
        for i in range(self.n, 0, -1):
            if self.lml[i] not in seen:
                seen.add(self.lml[i])
                keyroots.append(i)
        self.keyroots = sorted(keyroots)

    def label(self, i: int) -> tuple[str, str]:
        return self.nodes[i - 1].label


def _zss(a: _Annotated, b: _Annotated) -> tuple[int, set[tuple[int, int]]]:
    """Unit-cost tree edit distance and one optimal mapping (1-based
    postorder index pairs)."""
    if a.n * b.n > MAX_EXACT_NODES:
        raise BudgetExceeded("tree edit distance table", MAX_EXACT_NODES)
    td = [[0] * (b.n + 1) for _ in range(a.n + 1)]

    def fdist(i: int, j: int, fill_td: bool) -> list[list[int]]:
        li, lj = a.lml[i], b.lml[j]
        rows, cols = i - li + 2, j - lj + 2
        fd = [[0] * cols for _ in range(rows)]
        for r in range(1, rows):
            fd[r][0] = fd[r - 1][0] + 1
        for c in range(1, cols):
            fd[0][c] = fd[0][c - 1] + 1
        for r in range(1, rows):
            di = li + r - 1
            for c in range(1, cols):
                dj = lj + c - 1
                if a.lml[di] == li and b.lml[dj] == lj:
                    rl = 0 if a.label(di) == b.label(dj) else 1
                    fd[r][c] = min(fd[r - 1][c] + 1, fd[r][c - 1] + 1,
                                   fd[r - 1][c - 1] + rl)
                    if fill_td:
                        td[di][dj] = fd[r][c]
                else:
                    pr = a.lml[di] - li
                    pc = b.lml[dj] - lj
                    fd[r][c] = min(fd[r - 1][c] + 1, fd[r][c - 1] + 1,
                                   fd[pr][pc] + td[di][dj])
        return fd

    for i in a.keyroots:
        for j in b.keyroots:
            fdist(i, j, True)

    mapping: set[tuple[int, int]] = set()

    def backtrace(i: int, j: int):
        li, lj = a.lml[i], b.lml[j]
        fd = fdist(i, j, False)
        r, c = i - li + 1, j - lj + 1
        while r > 0 or c > 0:
            di, dj = li + r - 1, lj + c - 1
            whole = (r > 0 and c > 0
                     and a.lml[di] == li and b.lml[dj] == lj)
            if whole:
                rl = 0 if a.label(di) == b.label(dj) else 1
                diag_ok = fd[r][c] == fd[r - 1][c - 1] + rl
                same_kind = a.label(di)[0] == b.label(dj)[0]
            else:
                diag_ok = same_kind = False
            # Prefer matching equally-labeled / same-kind nodes; ties are
            # cost-neutral but make the script read naturally.
            if diag_ok and same_kind:
                mapping.add((di, dj))
                r -= 1
                c -= 1
                continue
            if r > 0 and fd[r][c] == fd[r - 1][c] + 1:
                r -= 1  # node di deleted
                continue
            if c > 0 and fd[r][c] == fd[r][c - 1] + 1:
                c -= 1  # node dj inserted
                continue
            if whole:
                if diag_ok:
                    mapping.add((di, dj))
                    r -= 1
                    c -= 1
                    continue
                raise AssertionError("no consistent backtrace step")
            backtrace(di, dj)
            r = a.lml[di] - li
            c = b.lml[dj] - lj

    backtrace(a.n, b.n)
    return td[a.n][b.n], mapping


# ---------------------------------------------------------------------------
# Script synthesis from a mapping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpInfo:
    """Where an operation's node lives in the untouched source/target tree."""

    side: str  # "source" for deletes/relabels, "target" for inserts
    path: tuple[int, ...]
    node: TNode


def _paths(root: TNode) -> dict[int, tuple[int, ...]]:
    out = {id(root): ()}

    def go(n: TNode, p: tuple[int, ...]):
        for i, c in enumerate(n.children):
            out[id(c)] = p + (i,)
            go(c, p + (i,))

    go(root, ())
    return out


def _live_path(root: TNode, target: TNode) -> tuple[int, ...]:
    def go(n: TNode, p):
        if n is target:
            return p
        for i, c in enumerate(n.children):
            got = go(c, p + (i,))
            if got is not None:
                return got
        return None

    got = go(root, ())
    if got is None:
        raise ValueError("node vanished from working tree")
    return got


def _diff_trees(src: TNode, dst: TNode) -> tuple[EditScript, list[OpInfo],
                                                 set[tuple[int, int]]]:
    # Shared super-roots guarantee the optimal mapping pairs the two roots,
    # so deletes and inserts always happen strictly below a surviving node.
    sroot = TNode(("ROOT", ""), [src])
    droot = TNode(("ROOT", ""), [dst])
    a, b = _Annotated(sroot), _Annotated(droot)
    cost, mapping = _zss(a, b)
    amap = {id(a.nodes[i - 1]): b.nodes[j - 1] for i, j in mapping}
    bmapped = {id(b.nodes[j - 1]) for _, j in mapping}

    src_paths = _paths(sroot)
    dst_paths = _paths(droot)

    # Working copy of the source, with copy nodes tied back to originals.
    copy_of: dict[int, TNode] = {}

    def clone(n: TNode) -> TNode:
        c = TNode(n.label, [clone(ch) for ch in n.children], n.expr)
        copy_of[id(n)] = c
        return c

    work = clone(sroot)
    ops: list = []
    infos: list[OpInfo] = []

    def strip(p: tuple[int, ...]) -> tuple[int, ...]:
        return p[1:]  # drop the super-root step

    for anode in a.nodes:
        partner = amap.get(id(anode))
        if partner is not None and anode.label != partner.label:
            w = copy_of[id(anode)]
            ops.append(Relabel(strip(_live_path(work, w)), anode.label,
                               partner.label))
            infos.append(OpInfo("source", strip(src_paths[id(anode)]), anode))
            w.label = partner.label

    for anode in a.nodes:  # postorder: children handled before parents
        if id(anode) in amap or anode is sroot:
            continue
        w = copy_of[id(anode)]
        path = _live_path(work, w)
        ops.append(DeleteNode(strip(path)))
        infos.append(OpInfo("source", strip(src_paths[id(anode)]), anode))
        parent = work.at(path[:-1])
        idx = path[-1]
        parent.children[idx:idx + 1] = w.children

    # Inserts: record the deletes that would reduce the target to its mapped
    # core, then replay them backwards onto the working tree.
    dwork = droot.clone()
    dcopy: dict[int, TNode] = {}

    def link(orig: TNode, cp: TNode):
        dcopy[id(orig)] = cp
        for o, c in zip(orig.children, cp.children):
            link(o, c)

    link(droot, dwork)
    pending: list[tuple[tuple[int, ...], tuple[str, str], int, TNode]] = []
    for bnode in b.nodes:
        if id(bnode) in bmapped or bnode is droot:
            continue
        w = dcopy[id(bnode)]
        path = _live_path(dwork, w)  # includes the super-root step
        pending.append((path, w.label, len(w.children), bnode))
        parent = dwork.at(path[:-1])
        idx = path[-1]
        parent.children[idx:idx + 1] = w.children

    for path, label, span, bnode in reversed(pending):
        ops.append(InsertNode(strip(path), label, span))
        infos.append(OpInfo("target", strip(dst_paths[id(bnode)]), bnode))
        parent = work.at(path[:-1])
        idx = path[-1]
        absorbed = parent.children[idx:idx + span]
        parent.children[idx:idx + span] = [TNode(label, absorbed)]

    script = EditScript(tuple(ops), len(ops))
    assert script.cost == cost, (script.cost, cost)
    node_mapping = {(id(a.nodes[i - 1]), id(b.nodes[j - 1])) for i, j in mapping}
    return script, infos, node_mapping


def tree_diff(e1: Expr, e2: Expr) -> EditScript:
    """Minimal unit-cost edit script transforming e1's tree into e2's."""
    script, _, _ = _diff_trees(to_tree(e1), to_tree(e2))
    return script


def tree_distance(e1: Expr, e2: Expr) -> int:
    return tree_diff(e1, e2).cost


# ---------------------------------------------------------------------------
# Findings
# ---------------------------------------------------------------------------

REP_WRAPPER_MISSING = "REP_WRAPPER_MISSING"
PREDICATE_MISMATCH = "PREDICATE_MISMATCH"
ANCHOR_CONFUSION = "ANCHOR_CONFUSION"
QUANTIFIER_MISSING = "QUANTIFIER_MISSING"
ALPHABET_MISMATCH = "ALPHABET_MISMATCH"
GENERIC_STRUCTURE = "GENERIC_STRUCTURE"


@dataclass(frozen=True)
class Finding:
    code: str
    path: tuple[int, ...]
    message: str


@dataclass(frozen=True)
class ExplainReport:
    verdict: Verdict
    findings: tuple[Finding, ...]
    counterexample: Optional[Counterexample]


def _anchor_shapes(e: Expr):
    """Collect (pred, body) pairs of BEGIN/END expansions in a core tree."""
    out = []
    for node in walk(e):
        if not isinstance(node, Concat):
            continue
        left, right = node.left, node.right
        # BEGIN(P, phi) = REP(P, phi) . (eps | !(phi . TOP))
        if (isinstance(left, Rep) and isinstance(right, Or)
                and right.left == Atom("") and isinstance(right.right, Not)
                and isinstance(right.right.arg, Concat)
                and right.right.arg.left == left.arg
                and right.right.arg.right == TOP_CORE):
            out.append(("begin", left.pred, left.arg))
        # END(P, phi) = (eps | !(TOP . phi)) . REP(P, phi)
        if (isinstance(right, Rep) and isinstance(left, Or)
                and left.left == Atom("") and isinstance(left.right, Not)
                and isinstance(left.right.arg, Concat)
                and left.right.arg.right == right.arg
                and left.right.arg.left == TOP_CORE):
            out.append(("end", right.pred, right.arg))
    return out


def _rep_chains(e: Expr):
    """Concatenation chains consisting of >= 2 REP factors."""
    out = []
    for node in walk(e):
        if isinstance(node, Concat):
            factors = []
            stack = [node]
            while stack:
                n = stack.pop()
                if isinstance(n, Concat):
                    stack.append(n.right)
                    stack.append(n.left)
                else:
                    factors.append(n)
            reps = [f for f in factors if isinstance(f, Rep)]
            if len(reps) == len(factors) and len(reps) >= 2:
                out.append(reps)
    return out


def _count_cmp_shape(e: Expr):
    """Recognize the core shape of a count comparison, modulo negations.

    Returns (polarity, left operand, right operand) or None.
    """
    polarity = True
    node = e
    while isinstance(node, Not):
        polarity = not polarity
        node = node.arg
    if not isinstance(node, ExistsNum):
        return None
    body = node.arg
    m = _match_and(body)
    if m is None:
        return None
    if isinstance(m[0], Has) and isinstance(m[1], Has):
        return (polarity, m[0], m[1])
    return None


def _alph_sets(e: Expr):
    out = []
    for node in walk(e):
        m = _match_and(node)
        if m is not None:
            for side in m:
                syms = _match_alph_marker(side)
                if syms is not None:
                    out.append(frozenset(syms))
    return out


def _collect_findings(script: EditScript, infos: list[OpInfo],
                      source: Expr, target: Expr) -> list[Finding]:
    findings: list[Finding] = []
    consumed = 0
    for op, info in zip(script.ops, infos):
        if isinstance(op, InsertNode) and op.label[0] == "Rep" and op.span >= 1:
            node = info.node
            inner = render(node.expr.arg) if node.expr is not None else "the subexpression"
            whole = render(node.expr) if node.expr is not None else "a repetition"
            findings.append(Finding(
                REP_WRAPPER_MISSING, info.path,
                f"Consecutiveness is not taken into account: the reference "
                f"requires {inner} to occur as consecutive repetitions "
                f"({whole}), not as separate occurrences."))
            consumed += 1
        elif isinstance(op, InsertNode) and op.label[0] in ("ExistsNum", "ExistsStr"):
            findings.append(Finding(
                QUANTIFIER_MISSING, info.path,
                f"A quantifier binding {op.label[1]} appears in the reference "
                f"but has no counterpart in the compared expression."))
            consumed += 1
        elif (isinstance(op, Relabel) and op.old[0] == op.new[0]
              and op.old[0] in ("Rep", "Has") and op.old[1] != op.new[1]):
            findings.append(Finding(
                PREDICATE_MISMATCH, info.path,
                f"The count condition differs: {op.old[1]} in the compared "
                f"expression versus {op.new[1]} in the reference."))
            consumed += 1

    cc1, cc2 = _count_cmp_shape(source), _count_cmp_shape(target)
    if cc1 is not None and cc2 is not None and cc1[0] != cc2[0] and script.ops:
        findings.append(Finding(
            PREDICATE_MISMATCH, (),
            "The count comparison relation differs between the two "
            "expressions (for example strict versus non-strict)."))

    anchors1, anchors2 = _anchor_shapes(source), _anchor_shapes(target)
    chains1, chains2 = _rep_chains(source), _rep_chains(target)

    def anchor_vs_chain(anchors, chains) -> bool:
        for _, pred, arg in anchors:
            for chain in chains:
                if any(r.pred == pred and r.arg == arg for r in chain):
                    return True
        return False

    if ((anchors1 and not anchors2 and anchor_vs_chain(anchors1, chains2))
            or (anchors2 and not anchors1 and anchor_vs_chain(anchors2, chains1))):
        findings.append(Finding(
            ANCHOR_CONFUSION, (),
            "Anchoring differs: one expression constrains a prefix or suffix "
            "(BEGIN/END) while the other requires the whole word to be a "
            "chain of consecutive blocks."))

    s1, s2 = set(_alph_sets(source)), set(_alph_sets(target))
    if s1 != s2 and (s1 or s2):
        def fmt(ss):
            return ", ".join("{" + ",".join(sorted(s)) + "}" for s in sorted(ss, key=sorted)) or "none"
        findings.append(Finding(
            ALPHABET_MISMATCH, (),
            f"The alphabet restrictions differ: {fmt(s1)} in the compared "
            f"expression versus {fmt(s2)} in the reference."))

    if not findings and script.ops:
        findings.append(Finding(
            GENERIC_STRUCTURE, (),
            f"The expressions differ structurally: {script.cost} edit "
            f"operation(s) separate their syntax trees."))
    elif consumed < len(script.ops) and findings and script.ops:
        remaining = len(script.ops) - consumed
        findings.append(Finding(
            GENERIC_STRUCTURE, (),
            f"{remaining} further structural difference(s) were not "
            f"classified."))

    order = {REP_WRAPPER_MISSING: 0, ANCHOR_CONFUSION: 1, QUANTIFIER_MISSING: 2,
             PREDICATE_MISMATCH: 3, ALPHABET_MISMATCH: 4, GENERIC_STRUCTURE: 5}
    findings.sort(key=lambda f: order[f.code])
    return findings


def explain(reference: Expr, candidate: Expr, alphabet: Alphabet,
            opts: EquivOptions = DEFAULT_OPTIONS) -> ExplainReport:
    """Compare a candidate against a reference and derive findings.

    The edit script is oriented candidate -> reference, so insert operations
    flag reference structure the candidate is missing.
    """
    verdict = equiv(reference, candidate, alphabet, opts)
    if verdict.status == "equivalent":
        return ExplainReport(verdict, (), None)
    script, infos, _ = _diff_trees(to_tree(candidate), to_tree(reference))
    findings = _collect_findings(script, infos, candidate, reference)
    cx = verdict.counterexample
    if cx is not None:
        # Orient membership flags as (reference, candidate).
        cx = Counterexample(cx.word, cx.in_left, cx.in_right)
    return ExplainReport(verdict, tuple(findings), cx)
