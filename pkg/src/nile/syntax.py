"""Expression trees for the NILE language.

Two layers share one node hierarchy: the surface layer (everything a user can
write, including sugar forms) and the core layer (the minimal constructor set
the evaluator and compilers understand).  ``expand_sugar`` lowers surface
trees to core trees; ``is_core`` tests the invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import UnboundVariable, UnknownSugarForm

EPSILON = ""


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of single-character symbols."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet has duplicate symbols")
        for s in self.symbols:
            if len(s) != 1 or not s.isascii() or not s.isalpha():
                raise ValueError(f"bad alphabet symbol: {s!r}")

    @staticmethod
    def of(text: str) -> "Alphabet":
        """Build from a compact spec like ``"ab"`` or ``"a,b,c"``."""
        parts = [p for p in text.replace(",", "") if not p.isspace()]
        return Alphabet(tuple(parts))

    def __contains__(self, sym: str) -> bool:
        return sym in self.symbols

    def __iter__(self):
        return iter(self.symbols)

    def __len__(self):
        return len(self.symbols)


# ---------------------------------------------------------------------------
# Linear terms  (sum of coefficient*variable plus a signed constant)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinTerm:
    coeffs: tuple[tuple[str, int], ...]  # sorted by name, no zero entries
    const: int

    @staticmethod
    def make(coeffs: dict[str, int], const: int) -> "LinTerm":
        items = tuple(sorted((v, c) for v, c in coeffs.items() if c != 0))
        return LinTerm(items, const)

    @staticmethod
    def of_const(k: int) -> "LinTerm":
        return LinTerm((), k)

    @staticmethod
    def of_var(name: str, coef: int = 1) -> "LinTerm":
        return LinTerm.make({name: coef}, 0)

    def __add__(self, other: "LinTerm") -> "LinTerm":
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinTerm.make(d, self.const + other.const)

    def __sub__(self, other: "LinTerm") -> "LinTerm":
        return self + other.scale(-1)

    def scale(self, k: int) -> "LinTerm":
        return LinTerm.make({v: c * k for v, c in self.coeffs}, self.const * k)

    def shift(self, k: int) -> "LinTerm":
        return LinTerm(self.coeffs, self.const + k)

    def vars(self) -> set[str]:
        return {v for v, _ in self.coeffs}

    def is_const(self) -> bool:
        return not self.coeffs

    def coeff(self, name: str) -> int:
        for v, c in self.coeffs:
            if v == name:
                return c
        return 0

    def drop(self, name: str) -> "LinTerm":
        return LinTerm(tuple((v, c) for v, c in self.coeffs if v != name), self.const)

    def evaluate(self, beta: dict[str, int]) -> int:
        total = self.const
        for v, c in self.coeffs:
            if v not in beta:
                raise UnboundVariable(v)
            total += c * beta[v]
        return total

    def weight(self) -> int:
        """Sum of absolute constant and coefficients (witness-bound input)."""
        return abs(self.const) + sum(abs(c) for _, c in self.coeffs)


# ---------------------------------------------------------------------------
# Unary number predicates
# ---------------------------------------------------------------------------


class NumPredicate:
    __slots__ = ()


@dataclass(frozen=True)
class PGeq(NumPredicate):
    term: LinTerm


@dataclass(frozen=True)
class PCong(NumPredicate):
    term: LinTerm
    mod: int


@dataclass(frozen=True)
class PNot(NumPredicate):
    arg: NumPredicate


@dataclass(frozen=True)
class PAnd(NumPredicate):
    left: NumPredicate
    right: NumPredicate


@dataclass(frozen=True)
class POr(NumPredicate):
    left: NumPredicate
    right: NumPredicate


# Sugar constructors: comparison and parity predicates resolve to the two
# atom kinds at construction time.

def p_eq(t: LinTerm) -> NumPredicate:
    return PAnd(PGeq(t), PNot(PGeq(t.shift(1))))


def p_gt(t: LinTerm) -> NumPredicate:
    return PGeq(t.shift(1))


def p_le(t: LinTerm) -> NumPredicate:
    return PNot(PGeq(t.shift(1)))


def p_lt(t: LinTerm) -> NumPredicate:
    return PNot(PGeq(t))


def p_even() -> NumPredicate:
    return PCong(LinTerm.of_const(0), 2)


def p_odd() -> NumPredicate:
    return PCong(LinTerm.of_const(1), 2)


def pred_eval(p: NumPredicate, n: int, beta: dict[str, int]) -> bool:
    if isinstance(p, PGeq):
        return n >= p.term.evaluate(beta)
    if isinstance(p, PCong):
        return n % p.mod == p.term.evaluate(beta) % p.mod
    if isinstance(p, PNot):
        return not pred_eval(p.arg, n, beta)
    if isinstance(p, PAnd):
        return pred_eval(p.left, n, beta) and pred_eval(p.right, n, beta)
    if isinstance(p, POr):
        return pred_eval(p.left, n, beta) or pred_eval(p.right, n, beta)
    raise TypeError(f"not a predicate: {p!r}")


def pred_atoms(p: NumPredicate) -> Iterator[NumPredicate]:
    if isinstance(p, (PGeq, PCong)):
        yield p
    elif isinstance(p, PNot):
        yield from pred_atoms(p.arg)
    elif isinstance(p, (PAnd, POr)):
        yield from pred_atoms(p.left)
        yield from pred_atoms(p.right)


def pred_terms(p: NumPredicate) -> Iterator[LinTerm]:
    for a in pred_atoms(p):
        yield a.term


def pred_vars(p: NumPredicate) -> set[str]:
    out: set[str] = set()
    for t in pred_terms(p):
        out |= t.vars()
    return out


def pred_modulus(p: NumPredicate) -> int:
    """lcm of all congruence moduli (1 when there are none)."""
    m = 1
    for a in pred_atoms(p):
        if isinstance(a, PCong):
            m = math.lcm(m, a.mod)
    return m


def pred_threshold(p: NumPredicate, beta: dict[str, int]) -> int:
    """Smallest T >= 0 above which every threshold atom has constant truth."""
    t = 0
    for a in pred_atoms(p):
        if isinstance(a, PGeq):
            t = max(t, a.term.evaluate(beta))
    return t


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Expr):
    word: str


@dataclass(frozen=True)
class Top(Expr):
    pass


@dataclass(frozen=True)
class Bot(Expr):
    pass


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Iff(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Concat(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Rep(Expr):
    pred: Optional[NumPredicate]  # None = single-argument sugar (>= 0)
    arg: Expr


@dataclass(frozen=True)
class Has(Expr):
    pred: Optional[NumPredicate]  # None = single-argument sugar (>= 1)
    arg: Expr


@dataclass(frozen=True)
class Begin(Expr):
    pred: Optional[NumPredicate]
    arg: Expr


@dataclass(frozen=True)
class End(Expr):
    pred: Optional[NumPredicate]
    arg: Expr


@dataclass(frozen=True)
class Len(Expr):
    pred: NumPredicate


@dataclass(frozen=True)
class Alph(Expr):
    symbols: tuple[str, ...]
    arg: Expr


@dataclass(frozen=True)
class Alternate(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Cons(Expr):
    items: tuple[tuple[NumPredicate, Expr], ...]


@dataclass(frozen=True)
class Range(Expr):
    lo: LinTerm
    hi: LinTerm
    arg: Expr


@dataclass(frozen=True)
class At(Expr):
    pos: LinTerm
    arg: Expr


@dataclass(frozen=True)
class CountCmp(Expr):
    left_coef: int
    left: Expr
    rel: str  # one of < <= = >= >
    right_coef: int
    right: Expr


@dataclass(frozen=True)
class ExistsNum(Expr):
    var: str
    arg: Expr


@dataclass(frozen=True)
class ForallNum(Expr):
    var: str
    arg: Expr


@dataclass(frozen=True)
class ExistsStr(Expr):
    var: str
    arg: Expr


@dataclass(frozen=True)
class StrVar(Expr):
    name: str


@dataclass(frozen=True)
class Reverse(Expr):
    arg: Expr


@dataclass(frozen=True)
class Palindrome(Expr):
    pass


@dataclass(frozen=True)
class Interpretation:
    """Bindings for free number and string variables."""

    num_vars: tuple[tuple[str, int], ...] = ()
    str_vars: tuple[tuple[str, str], ...] = ()

    @staticmethod
    def make(nums: dict[str, int] | None = None, strs: dict[str, str] | None = None):
        return Interpretation(
            tuple(sorted((nums or {}).items())), tuple(sorted((strs or {}).items()))
        )

    def nums(self) -> dict[str, int]:
        return dict(self.num_vars)

    def strs(self) -> dict[str, str]:
        return dict(self.str_vars)


CORE_KINDS = (Atom, Not, Or, Concat, Rep, Has, ExistsNum, ExistsStr, StrVar, Reverse)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (Atom, Top, Bot, Len, StrVar, Palindrome)):
        return ()
    if isinstance(e, (Not, Rep, Has, Begin, End, Alph, Range, At, Reverse,
                      ExistsNum, ForallNum, ExistsStr)):
        return (e.arg,)
    if isinstance(e, (Or, And, Implies, Iff, Concat, Alternate)):
        return (e.left, e.right)
    if isinstance(e, CountCmp):
        return (e.left, e.right)
    if isinstance(e, Cons):
        return tuple(x for _, x in e.items)
    raise TypeError(f"not an expression: {e!r}")


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from walk(c)


def is_core(e: Expr) -> bool:
    if not isinstance(e, CORE_KINDS):
        return False
    if isinstance(e, (Rep, Has)) and e.pred is None:
        return False
    return all(is_core(c) for c in children(e))


def expr_preds(e: Expr) -> Iterator[NumPredicate]:
    for node in walk(e):
        if isinstance(node, (Rep, Has, Begin, End)) and node.pred is not None:
            yield node.pred
        elif isinstance(node, Len):
            yield node.pred
        elif isinstance(node, Cons):
            for p, _ in node.items:
                yield p


def expr_terms(e: Expr) -> Iterator[LinTerm]:
    for p in expr_preds(e):
        yield from pred_terms(p)
    for node in walk(e):
        if isinstance(node, Range):
            yield node.lo
            yield node.hi
        elif isinstance(node, At):
            yield node.pos


def free_vars(e: Expr) -> tuple[set[str], set[str]]:
    """Free (number vars, string vars) of an expression."""

    def go(node: Expr, nums: frozenset[str], strs: frozenset[str],
           out_n: set[str], out_s: set[str]):
        if isinstance(node, (ExistsNum, ForallNum)):
            go(node.arg, nums | {node.var}, strs, out_n, out_s)
            return
        if isinstance(node, ExistsStr):
            go(node.arg, nums, strs | {node.var}, out_n, out_s)
            return
        if isinstance(node, StrVar):
            if node.name not in strs:
                out_s.add(node.name)
        if isinstance(node, (Rep, Has, Begin, End)) and node.pred is not None:
            out_n |= pred_vars(node.pred) - nums
        elif isinstance(node, Len):
            out_n |= pred_vars(node.pred) - nums
        elif isinstance(node, Cons):
            for p, _ in node.items:
                out_n |= pred_vars(p) - nums
        elif isinstance(node, Range):
            out_n |= (node.lo.vars() | node.hi.vars()) - nums
        elif isinstance(node, At):
            out_n |= node.pos.vars() - nums
        for c in children(node):
            go(c, nums, strs, out_n, out_s)

    out_n: set[str] = set()
    out_s: set[str] = set()
    go(e, frozenset(), frozenset(), out_n, out_s)
    return out_n, out_s


def bound_vars(e: Expr) -> set[str]:
    out = set()
    for node in walk(e):
        if isinstance(node, (ExistsNum, ForallNum, ExistsStr)):
            out.add(node.var)
    return out


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

EPS_ATOM = Atom(EPSILON)
# Word-independent truths built from the epsilon atom: every word satisfies
# either "is empty" or "is not empty".
TOP_CORE = Or(EPS_ATOM, Not(EPS_ATOM))
BOT_CORE = Not(TOP_CORE)


def _sigma_or(alphabet: Alphabet) -> Expr:
    e: Expr = Atom(alphabet.symbols[0])
    for s in alphabet.symbols[1:]:
        e = Or(e, Atom(s))
    return e


def _sym_or(symbols: tuple[str, ...]) -> Expr:
    e: Expr = Atom(symbols[0])
    for s in symbols[1:]:
        e = Or(e, Atom(s))
    return e


def _and(a: Expr, b: Expr) -> Expr:
    return Not(Or(Not(a), Not(b)))


class _Fresh:
    """Fresh variable names avoiding everything used in the original tree."""

    def __init__(self, e: Expr):
        used = bound_vars(e)
        fn, fs = free_vars(e)
        self.used = used | fn | fs

    def take(self, base: str) -> str:
        name = base
        k = 1
        while name in self.used:
            k += 1
            name = f"{base}{k}"
        self.used.add(name)
        return name


def _arith_geq0(t: LinTerm) -> Expr:
    """Word-independent assertion t >= 0, as a core expression.

    HAS(P, bottom) counts zero occurrences, so it reduces to P(0); the atom
    (>= s) at n=0 holds iff s <= 0.  With s = -t this asserts t >= 0.
    """
    return Has(PGeq(t.scale(-1)), BOT_CORE)


def _count_gt(c: int, left: Expr, d: int, right: Expr, fresh: _Fresh) -> Expr:
    """Core encoding of c*count(left) > d*count(right)."""
    g = math.gcd(c, d)
    c, d = c // g, d // g
    if c == 1 and d == 1:
        x = fresh.take("x")
        xt = LinTerm.of_var(x)
        return ExistsNum(x, _and(Has(p_gt(xt), left), Has(p_le(xt), right)))
    if c == 1:
        x = fresh.take("x")
        xt = LinTerm.of_var(x)
        return ExistsNum(x, _and(Has(p_gt(xt.scale(d)), left), Has(p_le(xt), right)))
    if d == 1:
        x = fresh.take("x")
        xt = LinTerm.of_var(x)
        return ExistsNum(
            x, _and(Has(PGeq(xt), left), Has(p_le(xt.scale(c).shift(-1)), right))
        )
    # Coprime coefficients both >= 2: pin both counts and compare arithmetically.
    x = fresh.take("x")
    y = fresh.take("y")
    xt, yt = LinTerm.of_var(x), LinTerm.of_var(y)
    cond = _arith_geq0(xt.scale(c) - yt.scale(d) - LinTerm.of_const(1))
    return ExistsNum(
        x, ExistsNum(y, _and(_and(Has(p_eq(xt), left), Has(p_eq(yt), right)), cond))
    )


def expand_sugar(e: Expr, alphabet: Alphabet) -> Expr:
    """Lower a surface expression to the core constructor set.

    The alphabet is needed because LEN (and forms built on it) expands to a
    repetition over the disjunction of all symbols.
    """
    fresh = _Fresh(e)

    def core(node: Expr) -> Expr:
        if isinstance(node, Atom):
            return node
        if isinstance(node, Top):
            return TOP_CORE
        if isinstance(node, Bot):
            return BOT_CORE
        if isinstance(node, Not):
            return _mk(Not, node, core(node.arg))
        if isinstance(node, Or):
            return _mk2(Or, node, core(node.left), core(node.right))
        if isinstance(node, And):
            return core(_and(node.left, node.right))
        if isinstance(node, Implies):
            return core(Or(Not(node.left), node.right))
        if isinstance(node, Iff):
            return core(_and(Or(Not(node.left), node.right),
                             Or(Not(node.right), node.left)))
        if isinstance(node, Concat):
            return _mk2(Concat, node, core(node.left), core(node.right))
        if isinstance(node, Rep):
            pred = node.pred if node.pred is not None else PGeq(LinTerm.of_const(0))
            arg = core(node.arg)
            if node.pred is not None and arg is node.arg:
                return node
            return Rep(pred, arg)
        if isinstance(node, Has):
            pred = node.pred if node.pred is not None else PGeq(LinTerm.of_const(1))
            arg = core(node.arg)
            if node.pred is not None and arg is node.arg:
                return node
            return Has(pred, arg)
        if isinstance(node, Begin):
            pred = node.pred if node.pred is not None else PGeq(LinTerm.of_const(1))
            phi = node.arg
            return core(Concat(Rep(pred, phi), Or(EPS_ATOM, Not(Concat(phi, Top())))))
        if isinstance(node, End):
            pred = node.pred if node.pred is not None else PGeq(LinTerm.of_const(1))
            phi = node.arg
            return core(Concat(Or(EPS_ATOM, Not(Concat(Top(), phi))), Rep(pred, phi)))
        if isinstance(node, Len):
            return core(Rep(node.pred, _sigma_or(alphabet)))
        if isinstance(node, Alph):
            return core(And(Rep(None, _sym_or(node.symbols)), node.arg))
        if isinstance(node, Alternate):
            phi, chi = node.left, node.right
            return core(Concat(Concat(Or(phi, EPS_ATOM), Rep(None, Concat(chi, phi))),
                               Or(chi, EPS_ATOM)))
        if isinstance(node, Cons):
            body: Expr = Rep(None, _sym_or_exprs([x for _, x in node.items]))
            for p, phi in node.items:
                body = And(body, Has(p, phi))
            return core(body)
        if isinstance(node, Range):
            width = node.hi - node.lo + LinTerm.of_const(1)
            return core(Concat(Concat(Len(p_eq(node.lo.shift(-1))),
                                      And(node.arg, Len(p_eq(width)))),
                               Top()))
        if isinstance(node, At):
            return core(Range(node.pos, node.pos, node.arg))
        if isinstance(node, CountCmp):
            c, d = node.left_coef, node.right_coef
            if node.rel == ">":
                return core(_count_gt(c, node.left, d, node.right, fresh))
            if node.rel == "<":
                return core(_count_gt(d, node.right, c, node.left, fresh))
            if node.rel == ">=":
                return core(Not(_count_gt(d, node.right, c, node.left, fresh)))
            if node.rel == "<=":
                return core(Not(_count_gt(c, node.left, d, node.right, fresh)))
            if node.rel == "=":
                return core(_and(
                    Not(_count_gt(c, node.left, d, node.right, fresh)),
                    Not(_count_gt(d, node.right, c, node.left, fresh))))
            raise UnknownSugarForm(node)
        if isinstance(node, ExistsNum):
            return _mk_q(ExistsNum, node, core(node.arg))
        if isinstance(node, ForallNum):
            return core(Not(ExistsNum(node.var, Not(node.arg))))
        if isinstance(node, ExistsStr):
            return _mk_q(ExistsStr, node, core(node.arg))
        if isinstance(node, StrVar):
            return node
        if isinstance(node, Reverse):
            return _mk(Reverse, node, core(node.arg))
        if isinstance(node, Palindrome):
            u = fresh.take("u")
            return core(ExistsStr(u, Concat(Concat(StrVar(u), Len(p_le(LinTerm.of_const(1)))),
                                            Reverse(StrVar(u)))))
        raise UnknownSugarForm(node)

    def _mk(ctor, old, arg):
        return old if arg is old.arg else ctor(arg)

    def _mk2(ctor, old, left, right):
        return old if (left is old.left and right is old.right) else ctor(left, right)

    def _mk_q(ctor, old, arg):
        return old if arg is old.arg else ctor(old.var, arg)

    def _sym_or_exprs(exprs):
        out = exprs[0]
        for x in exprs[1:]:
            out = Or(out, x)
        return out

    out = core(e)
    missing_n, missing_s = free_vars(out)
    if missing_n or missing_s:
        raise UnboundVariable(sorted(missing_n | missing_s)[0])
    return out


# ---------------------------------------------------------------------------
# Static validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    path: tuple[int, ...]
    message: str


def validate(e: Expr, alphabet: Alphabet) -> list[Diagnostic]:
    """Static checks; returns an empty list when the expression is ok."""
    out: list[Diagnostic] = []

    def bad(path, msg):
        out.append(Diagnostic(tuple(path), msg))

    def check_term(t: LinTerm, nums: set[str], path):
        for v in sorted(t.vars()):
            if v not in nums:
                bad(path, f"unbound number variable {v}")

    def check_pred(p: NumPredicate, nums: set[str], path):
        for a in pred_atoms(p):
            check_term(a.term, nums, path)
            if isinstance(a, PCong) and a.mod < 1:
                bad(path, f"modulus must be >= 1, got {a.mod}")

    def go(node: Expr, nums: set[str], strs: set[str], path: list[int]):
        if isinstance(node, Atom):
            for ch in node.word:
                if ch not in alphabet:
                    bad(path, f"symbol not in alphabet: {ch}")
        elif isinstance(node, Alph):
            for s in node.symbols:
                if s not in alphabet:
                    bad(path, f"symbol not in alphabet: {s}")
        elif isinstance(node, (Rep, Has, Begin, End)):
            if node.pred is not None:
                check_pred(node.pred, nums, path)
        elif isinstance(node, Len):
            check_pred(node.pred, nums, path)
        elif isinstance(node, Cons):
            for p, _ in node.items:
                check_pred(p, nums, path)
        elif isinstance(node, Range):
            check_term(node.lo, nums, path)
            check_term(node.hi, nums, path)
            if node.lo.is_const() and node.hi.is_const() and node.lo.const > node.hi.const:
                bad(path, f"range indices must satisfy {node.lo.const} <= {node.hi.const}")
        elif isinstance(node, At):
            check_term(node.pos, nums, path)
        elif isinstance(node, CountCmp):
            if node.left_coef < 1 or node.right_coef < 1:
                bad(path, "count coefficients must be >= 1")
        elif isinstance(node, StrVar):
            if node.name not in strs:
                bad(path, f"unbound string variable {node.name}")
        elif isinstance(node, (ExistsNum, ForallNum)):
            if node.var in nums or node.var in strs:
                bad(path, f"variable {node.var} already bound")
            nums = nums | {node.var}
        elif isinstance(node, ExistsStr):
            if node.var in nums or node.var in strs:
                bad(path, f"variable {node.var} already bound")
            strs = strs | {node.var}
        for i, c in enumerate(children(node)):
            go(c, nums, strs, path + [i])

    go(e, set(), set(), [])
    return out
