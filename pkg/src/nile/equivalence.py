"""Equivalence dispatcher.

Three routes, tried in order of exactness:

* regular x regular: compile both sides, exact symmetric-difference check;
* block x block (existentially quantified chains of fixed-word repetitions):
  exponent-set equality decided in linear integer arithmetic, with any
  claimed difference confirmed on a concrete word before it is reported;
* everything else: exhaustive membership testing up to a length bound,
  reported honestly as bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iter_product
from typing import Optional

from . import presburger as pb
from .automata import (DEFAULT_MAX_STATES, compile_regular, determinize,
                       minimize, shortest_in_sym_diff)
from .errors import BudgetExceeded
from .evaluator import DEFAULT_BUDGET, EvalBudget, Evaluator
from .syntax import (Alphabet, Atom, Concat, ExistsNum, ExistsStr, Expr,
                     LinTerm, Not, NumPredicate, Or, PGeq, Rep, StrVar, walk)

REGULAR = "Regular"
BLOCK = "Block"
GENERAL = "General"


@dataclass(frozen=True)
class BlockForm:
    """Existential prefix over disjuncts of (word, count term) chains."""

    vars: tuple[str, ...]
    disjuncts: tuple[tuple[tuple[str, LinTerm], ...], ...]


@dataclass(frozen=True)
class Counterexample:
    word: str
    in_left: bool
    in_right: bool


@dataclass(frozen=True)
class Verdict:
    status: str  # equivalent | different | bounded_equivalent
    method: str  # automata | block_presburger | bounded
    counterexample: Optional[Counterexample] = None
    bound: Optional[int] = None
    note: Optional[str] = None


@dataclass(frozen=True)
class EquivOptions:
    bound_l: Optional[int] = None
    max_states: int = DEFAULT_MAX_STATES
    eval_budget: EvalBudget = DEFAULT_BUDGET
    presburger_atoms: int = pb.DEFAULT_MAX_ATOMS
    tuple_search_sum: int = 8  # exponent-tuple enumeration cap (sum per tuple)


DEFAULT_OPTIONS = EquivOptions()


def default_bound(alphabet: Alphabet) -> int:
    return {1: 14, 2: 12, 3: 9}.get(len(alphabet.symbols), 7)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def classify(e: Expr) -> str:
    if not any(isinstance(n, (ExistsNum, ExistsStr, StrVar)) for n in walk(e)):
        return REGULAR
    if normalize_block(e) is not None:
        return BLOCK
    return GENERAL


def _match_and(e: Expr):
    """Recognize the core encoding of conjunction: !(!a | !b)."""
    if (isinstance(e, Not) and isinstance(e.arg, Or)
            and isinstance(e.arg.left, Not) and isinstance(e.arg.right, Not)):
        return e.arg.left.arg, e.arg.right.arg
    return None


def _match_alph_marker(e: Expr):
    """Recognize REP(>=0, s1 | ... | sk) over single-symbol atoms."""
    if not (isinstance(e, Rep) and isinstance(e.pred, PGeq)
            and e.pred.term.is_const() and e.pred.term.const <= 0):
        return None
    syms = []
    stack = [e.arg]
    while stack:
        n = stack.pop()
        if isinstance(n, Or):
            stack.extend((n.right, n.left))
        elif isinstance(n, Atom) and len(n.word) == 1:
            syms.append(n.word)
        else:
            return None
    return set(syms)


def _match_eq_pred(p: NumPredicate) -> Optional[LinTerm]:
    """Recognize the (=t) encoding (>= t) & !(>= t+1)."""
    from .syntax import PAnd, PNot

    if (isinstance(p, PAnd) and isinstance(p.left, PGeq)
            and isinstance(p.right, PNot) and isinstance(p.right.arg, PGeq)
            and p.right.arg.term == p.left.term.shift(1)):
        return p.left.term
    return None


def _flatten(e: Expr, kind) -> list[Expr]:
    out = []
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, kind):
            stack.append(n.right)
            stack.append(n.left)
        else:
            out.append(n)
    return out


def normalize_block(e: Expr) -> Optional[BlockForm]:
    """Recognize the block shape; None when the expression does not match.

    Accepted: existential prefixes and redundant alphabet restrictions at
    the top, then a disjunction of concatenation chains whose factors are
    constant words or REP(=term, word) with nonempty words.  Alphabet
    restrictions must cover every chain symbol (otherwise they constrain
    the language and the shape is not a plain chain union).
    """
    all_vars: list[str] = []
    used_names: set[str] = set()
    alph_sets: list[set] = []

    def fresh(name: str) -> str:
        new, k = name, 1
        while new in used_names:
            k += 1
            new = f"{name}_{k}"
        used_names.add(new)
        return new

    def strip(node: Expr, rename: dict[str, str]) -> tuple[Expr, dict[str, str]]:
        while True:
            if isinstance(node, ExistsNum):
                new = fresh(node.var)
                rename = {**rename, node.var: new}
                all_vars.append(new)
                node = node.arg
                continue
            m = _match_and(node)
            if m is not None:
                syms0 = _match_alph_marker(m[0])
                if syms0 is not None:
                    alph_sets.append(syms0)
                    node = m[1]
                    continue
                syms1 = _match_alph_marker(m[1])
                if syms1 is not None:
                    alph_sets.append(syms1)
                    node = m[0]
                    continue
            return node, rename

    def rename_term(t: LinTerm, rename: dict[str, str]) -> Optional[LinTerm]:
        coeffs = {}
        for v, c in t.coeffs:
            if v not in rename:
                return None  # unbound within the block prefix
            coeffs[rename[v]] = c
        return LinTerm.make(coeffs, t.const)

    body, rename = strip(e, {})
    disjuncts = []
    for raw in _flatten(body, Or):
        part, part_rename = strip(raw, rename)
        chain: list[tuple[str, LinTerm]] = []
        for factor in _flatten(part, Concat):
            if isinstance(factor, Atom):
                if factor.word:
                    chain.append((factor.word, LinTerm.of_const(1)))
                continue
            if isinstance(factor, Rep) and isinstance(factor.arg, Atom) and factor.arg.word:
                t = _match_eq_pred(factor.pred)
                if t is None:
                    return None
                t2 = rename_term(t, part_rename)
                if t2 is None:
                    return None
                chain.append((factor.arg.word, t2))
                continue
            return None
        disjuncts.append(tuple(chain))
    for syms in alph_sets:
        for chain in disjuncts:
            for w, _ in chain:
                if not set(w) <= syms:
                    return None
    return BlockForm(tuple(all_vars), tuple(disjuncts))


# ---------------------------------------------------------------------------
# Block-form alignment and the Presburger route
# ---------------------------------------------------------------------------


def primitive_root(w: str) -> str:
    i = (w + w).find(w, 1)
    if 0 < i < len(w) and len(w) % i == 0:
        return w[:i]
    return w


def _aligned_chain(chain) -> tuple[tuple[str, LinTerm], ...]:
    """Root-normalize and merge adjacent equal roots."""
    out: list[tuple[str, LinTerm]] = []
    for word, term in chain:
        root = primitive_root(word)
        term = term.scale(len(word) // len(root))
        if out and out[-1][0] == root:
            prev_root, prev_term = out.pop()
            out.append((prev_root, prev_term + term))
        else:
            out.append((root, term))
    return tuple(out)


def _align(bf1: BlockForm, bf2: BlockForm) -> Optional[tuple[tuple[str, ...],
                                                             BlockForm, BlockForm]]:
    """Common root sequence of every disjunct on both sides, or None."""
    forms = []
    roots: Optional[tuple[str, ...]] = None
    for bf in (bf1, bf2):
        fixed = []
        for chain in bf.disjuncts:
            aligned = _aligned_chain(chain)
            seq = tuple(r for r, _ in aligned)
            if roots is None:
                roots = seq
            elif seq != roots:
                return None
            fixed.append(aligned)
        forms.append(BlockForm(bf.vars, tuple(fixed)))
    assert roots is not None
    return roots, forms[0], forms[1]


def _membership_formula(bf: BlockForm, exps: list[LinTerm]) -> pb.Formula:
    """exps[k] equals the k-th block exponent for some disjunct/assignment."""
    parts = []
    for chain in bf.disjuncts:
        eqs = [pb.eq0(exps[k] - term) for k, (_, term) in enumerate(chain)]
        f: pb.Formula = pb.f_and(*eqs)
        for v in reversed(bf.vars):
            if v in pb.free_vars(f):
                f = pb.FExists(v, f)
        parts.append(f)
    return pb.f_or(*parts)


def _tuple_member(bf: BlockForm, tup: tuple[int, ...], max_atoms: int) -> bool:
    consts = [LinTerm.of_const(v) for v in tup]
    return pb.decide(_membership_formula(bf, consts), max_atoms)


def block_equiv(e1: Expr, e2: Expr, alphabet: Alphabet,
                opts: EquivOptions = DEFAULT_OPTIONS) -> Optional[Verdict]:
    """Exact comparison via exponent sets; None when not applicable or when
    no claimed difference could be confirmed on a word (ambiguous skeleton)."""
    bf1, bf2 = normalize_block(e1), normalize_block(e2)
    if bf1 is None or bf2 is None:
        return None
    aligned = _align(bf1, bf2)
    if aligned is None:
        return None
    roots, a1, a2 = aligned
    m = len(roots)
    exp_vars = [f"e{k}" for k in range(m)]
    exps = [LinTerm.of_var(v) for v in exp_vars]
    try:
        phi1 = _membership_formula(a1, exps)
        phi2 = _membership_formula(a2, exps)

        def contained(l, r):
            f = pb.f_or(pb.f_not(l), r)
            for v in reversed(exp_vars):
                f = pb.FForall(v, f)
            return pb.decide(f, opts.presburger_atoms)

        if contained(phi1, phi2) and contained(phi2, phi1):
            return Verdict("equivalent", "block_presburger")
        # Exponent sets differ; confirm on an actual word (the same word can
        # have several exponent tuples, so a tuple difference alone is not
        # yet a language difference).
        ev1 = Evaluator(alphabet, opts.eval_budget)
        ev2 = Evaluator(alphabet, opts.eval_budget)
        for total in range(0, opts.tuple_search_sum + 1):
            for tup in _tuples_with_sum(m, total):
                m1 = _tuple_member(a1, tup, opts.presburger_atoms)
                m2 = _tuple_member(a2, tup, opts.presburger_atoms)
                if m1 == m2:
                    continue
                word = "".join(r * v for r, v in zip(roots, tup))
                in1 = ev1.sat(e1, word, 0, len(word), {}, {})
                in2 = ev2.sat(e2, word, 0, len(word), {}, {})
                if in1 != in2:
                    return Verdict("different", "block_presburger",
                                   Counterexample(word, in1, in2))
    except BudgetExceeded:
        return None
    return None  # ambiguous skeleton: exponents differ but words agree


def _tuples_with_sum(m: int, total: int):
    if m == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _tuples_with_sum(m - 1, total - first):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Bounded testing and the dispatcher
# ---------------------------------------------------------------------------


def words_up_to(alphabet: Alphabet, max_len: int):
    yield ""
    for n in range(1, max_len + 1):
        for tup in iter_product(alphabet.symbols, repeat=n):
            yield "".join(tup)


def bounded_equiv(e1: Expr, e2: Expr, alphabet: Alphabet,
                  opts: EquivOptions = DEFAULT_OPTIONS,
                  note: Optional[str] = None) -> Verdict:
    bound = opts.bound_l if opts.bound_l is not None else default_bound(alphabet)
    for word in words_up_to(alphabet, bound):
        ev = Evaluator(alphabet, opts.eval_budget)
        in1 = ev.sat(e1, word, 0, len(word), {}, {})
        in2 = ev.sat(e2, word, 0, len(word), {}, {})
        if in1 != in2:
            return Verdict("different", "bounded",
                           Counterexample(word, in1, in2), note=note)
    return Verdict("bounded_equivalent", "bounded", bound=bound, note=note)


def automata_equiv(e1: Expr, e2: Expr, alphabet: Alphabet,
                   opts: EquivOptions = DEFAULT_OPTIONS) -> Verdict:
    d1 = minimize(determinize(compile_regular(e1, alphabet, opts.max_states),
                              opts.max_states))
    d2 = minimize(determinize(compile_regular(e2, alphabet, opts.max_states),
                              opts.max_states))
    word = shortest_in_sym_diff(d1, d2)
    if word is None:
        return Verdict("equivalent", "automata")
    ev = Evaluator(alphabet, opts.eval_budget)
    in1 = ev.sat(e1, word, 0, len(word), {}, {})
    in2 = ev.sat(e2, word, 0, len(word), {}, {})
    return Verdict("different", "automata", Counterexample(word, in1, in2))


def equiv(e1: Expr, e2: Expr, alphabet: Alphabet,
          opts: EquivOptions = DEFAULT_OPTIONS) -> Verdict:
    """Decide equivalence as exactly as the fragment allows."""
    c1, c2 = classify(e1), classify(e2)
    if e1 == e2:
        # Structurally identical expressions are equivalent in any fragment.
        method = {REGULAR: "automata", BLOCK: "block_presburger"}.get(c1, "bounded")
        return Verdict("equivalent", method)
    if c1 == REGULAR and c2 == REGULAR:
        return automata_equiv(e1, e2, alphabet, opts)
    if c1 == BLOCK and c2 == BLOCK:
        verdict = block_equiv(e1, e2, alphabet, opts)
        if verdict is not None:
            return verdict
        return bounded_equiv(e1, e2, alphabet, opts, note="ambiguous_skeleton")
    return bounded_equiv(e1, e2, alphabet, opts)
