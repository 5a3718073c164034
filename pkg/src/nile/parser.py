"""Concrete ASCII syntax: text -> surface tree, and rendering back.

Grammar precedence, lowest binding first:

    ALPH(syms): e            colon scope extends maximally right
    e -> e   e <-> e         right associative
    e | e                    left associative
    e & e                    left associative
    e . e                    concatenation, left associative
    !e
    primaries                atoms, eps/TOP/BOT, $name, function forms,
                             EXISTS/FORALL/EXISTSSTR v [ e ], count comparisons

Unicode operator aliases from mathematical notation are accepted on input and
never emitted by the renderer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (Alph, Alphabet, Alternate, And, At, Atom, Begin, Bot,
                     Concat, Cons, CountCmp, End, ExistsNum, ExistsStr, Expr,
                     ForallNum, Has, Iff, Implies, Len, LinTerm, Not,
                     NumPredicate, Or, Palindrome, PAnd, PCong, PGeq, PNot,
                     POr, Range, Rep, Reverse, StrVar, Top, p_even, p_odd)


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected: list[str]):
        super().__init__(f"{message} at {span.start}..{span.end}"
                         f" (expected {', '.join(expected)})")
        self.span = span
        self.message = message
        self.expected = expected


KEYWORDS = {
    "REP", "HAS", "BEGIN", "END", "LEN", "ALPH", "ALTERNATE", "CONS",
    "RANGE", "AT", "COUNT", "REVERSE", "PALINDROME", "TOP", "BOT",
    "EXISTS", "FORALL", "EXISTSSTR", "EVEN", "ODD", "eps", "mod",
}

# Multi-character operators first so the tokenizer matches greedily.
_OPS = ["<->", "->", "==", ">=", "<=", "(", ")", "[", "]", ",", ";", ":",
        ".", "|", "&", "!", "=", ">", "<", "*", "+", "-", "$"]

_UNICODE_OPS = {
    "∘": ".", "·": ".", "∨": "|", "∧": "&", "¬": "!", "→": "->", "↔": "<->",
    "≥": ">=", "≤": "<=", "≡": "==", "⊤": "TOP", "⊥": "BOT",
    "∃": "EXISTS", "∀": "FORALL", "ε": "eps",
}


@dataclass(frozen=True)
class Token:
    kind: str  # operator text, "WORD", "INT", or "EOF"
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[Token]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _UNICODE_OPS:
            alias = _UNICODE_OPS[ch]
            kind = "WORD" if alias.isalpha() else alias
            toks.append(Token(kind, alias, i, i + 1))
            i += 1
            continue
        matched = False
        for op in _OPS:
            if text.startswith(op, i):
                toks.append(Token(op, op, i, i + len(op)))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch.isalpha():
            j = i
            while j < n and text[j].isalpha():
                j += 1
            toks.append(Token("WORD", text[i:j], i, j))
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], i, j))
            i = j
            continue
        raise ParseError(SourceSpan(i, i + 1), f"unexpected character {ch!r}",
                         ["expression"])
    toks.append(Token("EOF", "", n, n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def take(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        if not self.at(kind):
            self.fail([what or kind])
        return self.take()

    def fail(self, expected: list[str], message: str | None = None):
        t = self.peek()
        shown = t.text or "end of input"
        raise ParseError(SourceSpan(t.start, t.end),
                         message or f"unexpected {shown!r}", expected)

    def word(self, value: str) -> bool:
        return self.at("WORD") and self.peek().text == value

    def take_name(self, what: str) -> str:
        if not self.at("WORD") or self.peek().text in KEYWORDS:
            self.fail([what])
        return self.take().text

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        if self.word("ALPH"):
            self.take()
            self.expect("(")
            syms = [self.take_name("symbol")]
            while self.at(","):
                self.take()
                syms.append(self.take_name("symbol"))
            self.expect(")")
            self.expect(":")
            return Alph(tuple(syms), self.expr())
        return self.implication()

    def implication(self) -> Expr:
        left = self.disjunction()
        if self.at("->"):
            self.take()
            return Implies(left, self.implication())
        if self.at("<->"):
            self.take()
            return Iff(left, self.implication())
        return left

    def disjunction(self) -> Expr:
        e = self.conjunction()
        while self.at("|"):
            self.take()
            e = Or(e, self.conjunction())
        return e

    def conjunction(self) -> Expr:
        e = self.concatenation()
        while self.at("&"):
            self.take()
            e = And(e, self.concatenation())
        return e

    def concatenation(self) -> Expr:
        e = self.unary()
        while self.at("."):
            self.take()
            e = Concat(e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("!"):
            self.take()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "$":
            self.take()
            return StrVar(self.take_name("string variable name"))
        if t.kind == "INT" or self.word("COUNT"):
            return self.count_cmp()
        if t.kind == "WORD":
            kw = t.text
            if kw == "eps":
                self.take()
                return Atom("")
            if kw == "TOP":
                self.take()
                return Top()
            if kw == "BOT":
                self.take()
                return Bot()
            if kw == "PALINDROME":
                self.take()
                return Palindrome()
            if kw in ("REP", "HAS", "BEGIN", "END"):
                self.take()
                return self.pred_form(kw)
            if kw == "LEN":
                self.take()
                return Len(self.pred())
            if kw == "ALTERNATE":
                self.take()
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return Alternate(a, b)
            if kw == "CONS":
                self.take()
                self.expect("(")
                items = [self.cons_item()]
                while self.at(";"):
                    self.take()
                    items.append(self.cons_item())
                self.expect(")")
                return Cons(tuple(items))
            if kw == "RANGE":
                self.take()
                self.expect("(")
                lo = self.term()
                self.expect(",")
                hi = self.term()
                self.expect(",")
                e = self.expr()
                self.expect(")")
                return Range(lo, hi, e)
            if kw == "AT":
                self.take()
                self.expect("(")
                pos = self.term()
                self.expect(",")
                e = self.expr()
                self.expect(")")
                return At(pos, e)
            if kw == "REVERSE":
                self.take()
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return Reverse(e)
            if kw in ("EXISTS", "FORALL", "EXISTSSTR"):
                self.take()
                var = self.take_name("variable name")
                self.expect("[")
                body = self.expr()
                self.expect("]")
                ctor = {"EXISTS": ExistsNum, "FORALL": ForallNum,
                        "EXISTSSTR": ExistsStr}[kw]
                return ctor(var, body)
            if kw in KEYWORDS:
                self.fail(["expression"], f"keyword {kw} not valid here")
            self.take()
            return Atom(kw)
        self.fail(["expression"])

    def pred_form(self, kw: str) -> Expr:
        """REP/HAS/BEGIN/END with optional leading predicate argument."""
        ctor = {"REP": Rep, "HAS": Has, "BEGIN": Begin, "END": End}[kw]
        self.expect("(")
        pred = None
        if self.starts_pred():
            pred = self.pred()
            self.expect(",")
        e = self.expr()
        self.expect(")")
        return ctor(pred, e)

    def starts_pred(self) -> bool:
        t = self.peek()
        if t.kind in ("=", ">=", ">", "<=", "<", "==", "!"):
            return True
        if t.kind == "WORD" and t.text in ("EVEN", "ODD"):
            return True
        if t.kind == "(":
            # Lookahead: a parenthesized predicate also starts with a
            # predicate token right after the open paren(s).
            k = self.pos
            while self.toks[k].kind == "(":
                k += 1
            t2 = self.toks[k]
            return (t2.kind in ("=", ">=", ">", "<=", "<", "==", "!")
                    or (t2.kind == "WORD" and t2.text in ("EVEN", "ODD")))
        return False

    def cons_item(self) -> tuple[NumPredicate, Expr]:
        p = self.pred()
        self.expect(",")
        return (p, self.expr())

    def count_cmp(self) -> Expr:
        c1 = self.count_side()
        t = self.peek()
        if t.kind not in ("<", "<=", "=", ">=", ">"):
            self.fail(["comparison operator"])
        rel = self.take().kind
        c2 = self.count_side()
        return CountCmp(c1[0], c1[1], rel, c2[0], c2[1])

    def count_side(self) -> tuple[int, Expr]:
        coef = 1
        if self.at("INT"):
            coef = int(self.take().text)
            self.expect("*")
        if not self.word("COUNT"):
            self.fail(["COUNT"])
        self.take()
        self.expect("(")
        e = self.expr()
        self.expect(")")
        return coef, e

    # -- predicates ----------------------------------------------------------

    def pred(self) -> NumPredicate:
        p = self.pred_and()
        while self.at("|"):
            self.take()
            p = POr(p, self.pred_and())
        return p

    def pred_and(self) -> NumPredicate:
        p = self.pred_unary()
        while self.at("&"):
            self.take()
            p = PAnd(p, self.pred_unary())
        return p

    def pred_unary(self) -> NumPredicate:
        if self.at("!"):
            self.take()
            return PNot(self.pred_unary())
        return self.pred_atom()

    def pred_atom(self) -> NumPredicate:
        t = self.peek()
        if t.kind == "(":
            self.take()
            p = self.pred()
            self.expect(")")
            return p
        if self.word("EVEN"):
            self.take()
            return p_even()
        if self.word("ODD"):
            self.take()
            return p_odd()
        if t.kind == "==":
            self.take()
            term = self.term()
            if not self.word("mod"):
                self.fail(["mod"])
            self.take()
            mod_tok = self.expect("INT", "modulus")
            return PCong(term, int(mod_tok.text))
        if t.kind in ("=", ">=", ">", "<=", "<"):
            rel = self.take().kind
            term = self.term()
            if rel == "=":
                return PAnd(PGeq(term), PNot(PGeq(term.shift(1))))
            if rel == ">=":
                return PGeq(term)
            if rel == ">":
                return PGeq(term.shift(1))
            if rel == "<=":
                return PNot(PGeq(term.shift(1)))
            return PNot(PGeq(term))
        self.fail(["predicate"])

    # -- linear terms ---------------------------------------------------------

    def term(self) -> LinTerm:
        sign = 1
        if self.at("-"):
            self.take()
            sign = -1
        t = self.term_factor().scale(sign)
        while self.at("+") or self.at("-"):
            op = self.take().kind
            nxt = self.term_factor()
            t = t + (nxt if op == "+" else nxt.scale(-1))
        return t

    def term_factor(self) -> LinTerm:
        if self.at("INT"):
            k = int(self.take().text)
            if self.at("*"):
                self.take()
                return LinTerm.of_var(self.take_name("variable name"), k)
            return LinTerm.of_const(k)
        if self.at("WORD") and self.peek().text not in KEYWORDS:
            return LinTerm.of_var(self.take().text)
        self.fail(["term"])


def parse(text: str, alphabet: Alphabet | None = None) -> Expr:
    """Parse concrete syntax into a surface tree.

    Raises ParseError on malformed input.  Alphabet membership of atom
    symbols is a ``validate`` concern, not a parse error.
    """
    p = _Parser(text)
    e = p.expr()
    if not p.at("EOF"):
        p.fail(["end of input"])
    return e


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PREC_ALPH = 0
_PREC_IMPL = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_CAT = 4
_PREC_NOT = 5
_PREC_PRIMARY = 6


def render_term(t: LinTerm) -> str:
    if not t.coeffs:
        return str(t.const)
    out = ""
    for i, (v, c) in enumerate(t.coeffs):
        mono = v if abs(c) == 1 else f"{abs(c)}*{v}"
        if i == 0:
            out = mono if c > 0 else f"-{mono}"
        else:
            out += f" + {mono}" if c > 0 else f" - {mono}"
    if t.const:
        out += f" + {t.const}" if t.const > 0 else f" - {-t.const}"
    return out


def _is_eq_shape(p: NumPredicate):
    if (isinstance(p, PAnd) and isinstance(p.left, PGeq)
            and isinstance(p.right, PNot) and isinstance(p.right.arg, PGeq)
            and p.right.arg.term == p.left.term.shift(1)):
        return p.left.term
    return None


def render_pred(p: NumPredicate, prec: int = 0) -> str:
    eq = _is_eq_shape(p)
    if eq is not None:
        return f"={render_term(eq)}"
    if isinstance(p, PGeq):
        return f">={render_term(p.term)}"
    if isinstance(p, PCong):
        if p.mod == 2 and p.term.is_const() and p.term.const in (0, 1):
            return "EVEN" if p.term.const == 0 else "ODD"
        return f"=={render_term(p.term)} mod {p.mod}"
    if isinstance(p, PNot):
        if isinstance(p.arg, PGeq):
            return f"<{render_term(p.arg.term)}"
        return f"!{render_pred(p.arg, 3)}"
    if isinstance(p, PAnd):
        s = f"{render_pred(p.left, 2)} & {render_pred(p.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(p, POr):
        s = f"{render_pred(p.left, 1)} | {render_pred(p.right, 2)}"
        return f"({s})" if prec > 1 else s
    raise TypeError(f"not a predicate: {p!r}")


def render(e: Expr, prec: int = 0) -> str:
    """Render to concrete syntax; output reparses to a structurally equal tree."""

    def wrap(s: str, own: int) -> str:
        return f"({s})" if own < prec else s

    if isinstance(e, Atom):
        return e.word if e.word else "eps"
    if isinstance(e, Top):
        return "TOP"
    if isinstance(e, Bot):
        return "BOT"
    if isinstance(e, StrVar):
        return f"${e.name}"
    if isinstance(e, Palindrome):
        return "PALINDROME"
    if isinstance(e, Not):
        return wrap(f"!{render(e.arg, _PREC_NOT)}", _PREC_NOT)
    if isinstance(e, Or):
        return wrap(f"{render(e.left, _PREC_OR)} | {render(e.right, _PREC_OR + 1)}",
                    _PREC_OR)
    if isinstance(e, And):
        return wrap(f"{render(e.left, _PREC_AND)} & {render(e.right, _PREC_AND + 1)}",
                    _PREC_AND)
    if isinstance(e, Implies):
        return wrap(f"{render(e.left, _PREC_IMPL + 1)} -> {render(e.right, _PREC_IMPL)}",
                    _PREC_IMPL)
    if isinstance(e, Iff):
        return wrap(f"{render(e.left, _PREC_IMPL + 1)} <-> {render(e.right, _PREC_IMPL)}",
                    _PREC_IMPL)
    if isinstance(e, Concat):
        return wrap(f"{render(e.left, _PREC_CAT)} . {render(e.right, _PREC_CAT + 1)}",
                    _PREC_CAT)
    if isinstance(e, (Rep, Has, Begin, End)):
        kw = type(e).__name__.upper()
        if e.pred is None:
            return f"{kw}({render(e.arg)})"
        return f"{kw}({render_pred(e.pred)}, {render(e.arg)})"
    if isinstance(e, Len):
        return f"LEN {render_pred(e.pred)}"
    if isinstance(e, Alph):
        return wrap(f"ALPH({','.join(e.symbols)}): {render(e.arg, _PREC_ALPH)}",
                    _PREC_ALPH)
    if isinstance(e, Alternate):
        return f"ALTERNATE({render(e.left)}, {render(e.right)})"
    if isinstance(e, Cons):
        inner = "; ".join(f"{render_pred(p)}, {render(x)}" for p, x in e.items)
        return f"CONS({inner})"
    if isinstance(e, Range):
        return f"RANGE({render_term(e.lo)}, {render_term(e.hi)}, {render(e.arg)})"
    if isinstance(e, At):
        return f"AT({render_term(e.pos)}, {render(e.arg)})"
    if isinstance(e, CountCmp):
        lc = "" if e.left_coef == 1 else f"{e.left_coef}*"
        rc = "" if e.right_coef == 1 else f"{e.right_coef}*"
        return (f"{lc}COUNT({render(e.left)}) {e.rel} {rc}COUNT({render(e.right)})")
    if isinstance(e, (ExistsNum, ForallNum, ExistsStr)):
        kw = {"ExistsNum": "EXISTS", "ForallNum": "FORALL",
              "ExistsStr": "EXISTSSTR"}[type(e).__name__]
        return f"{kw} {e.var} [ {render(e.arg, _PREC_ALPH)} ]"
    if isinstance(e, Reverse):
        return f"REVERSE({render(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")
