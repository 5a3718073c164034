"""Finite automata: compilation of regular core expressions, the Boolean/
product algebra, and a small regex frontend.

Compilation is compositional.  Negation goes through determinization and
complement.  REP(P, phi) runs a null-free version of phi in a loop against a
finite counter abstraction of P (threshold + modulus).  HAS(P, phi) counts
occurrence starts by the double-reversal construction: suffix membership in
L(phi . TOP) becomes prefix membership of the reversed word in the reversed
language, which a DFA can count on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BudgetExceeded
from .parser import ParseError, SourceSpan
from .syntax import (Alphabet, Atom, Concat, Expr, Has, Not, NumPredicate,
                     Or, Rep, Reverse, pred_eval, pred_modulus,
                     pred_threshold)

DEFAULT_MAX_STATES = 200_000

EPS = None  # epsilon transition label


class Nfa:
    """Nondeterministic automaton with optional epsilon moves.

    Treated as immutable after construction.
    """

    def __init__(self, alphabet: Alphabet, n_states: int, initial, accepting,
                 transitions):
        self.alphabet = alphabet
        self.n_states = n_states
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        # (state, symbol-or-None) -> frozenset of states
        self.transitions = {k: frozenset(v) for k, v in transitions.items()}

    def eps_closure(self, states) -> frozenset:
        seen = set(states)
        stack = list(states)
        while stack:
            q = stack.pop()
            for nxt in self.transitions.get((q, EPS), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return frozenset(seen)

    def accepts(self, word: str) -> bool:
        cur = self.eps_closure(self.initial)
        for ch in word:
            nxt = set()
            for q in cur:
                nxt |= self.transitions.get((q, ch), frozenset())
            cur = self.eps_closure(nxt)
            if not cur:
                return False
        return bool(cur & self.accepting)


class Dfa:
    """Complete deterministic automaton; transition rows follow the
    alphabet's symbol order."""

    def __init__(self, alphabet: Alphabet, n_states: int, initial: int,
                 accepting, rows: list[list[int]]):
        self.alphabet = alphabet
        self.n_states = n_states
        self.initial = initial
        self.accepting = frozenset(accepting)
        self.rows = rows
        self._sym_index = {s: i for i, s in enumerate(alphabet.symbols)}

    def step(self, state: int, sym: str) -> int:
        return self.rows[state][self._sym_index[sym]]

    def accepts(self, word: str) -> bool:
        q = self.initial
        for ch in word:
            q = self.rows[q][self._sym_index[ch]]
        return q in self.accepting


def _check_budget(n: int, max_states: int, what: str):
    if n > max_states:
        raise BudgetExceeded(what, max_states)


# ---------------------------------------------------------------------------
# Primitive constructions
# ---------------------------------------------------------------------------


def nfa_word(word: str, alphabet: Alphabet) -> Nfa:
    trans = {}
    for i, ch in enumerate(word):
        trans[(i, ch)] = {i + 1}
    return Nfa(alphabet, len(word) + 1, {0}, {len(word)}, trans)


def nfa_empty(alphabet: Alphabet) -> Nfa:
    return Nfa(alphabet, 1, {0}, set(), {})


def nfa_union(a: Nfa, b: Nfa) -> Nfa:
    off = a.n_states
    trans = dict(a.transitions)
    for (q, s), ts in b.transitions.items():
        trans[(q + off, s)] = {t + off for t in ts}
    start = a.n_states + b.n_states
    trans[(start, EPS)] = set(a.initial) | {q + off for q in b.initial}
    accepting = set(a.accepting) | {q + off for q in b.accepting}
    return Nfa(a.alphabet, start + 1, {start}, accepting, trans)


def nfa_concat(a: Nfa, b: Nfa) -> Nfa:
    off = a.n_states
    trans = dict(a.transitions)
    for (q, s), ts in b.transitions.items():
        trans[(q + off, s)] = {t + off for t in ts}
    for q in a.accepting:
        cur = set(trans.get((q, EPS), ()))
        cur |= {t + off for t in b.initial}
        trans[(q, EPS)] = cur
    accepting = {q + off for q in b.accepting}
    return Nfa(a.alphabet, a.n_states + b.n_states, a.initial, accepting, trans)


def nfa_star(a: Nfa) -> Nfa:
    start = a.n_states
    trans = dict(a.transitions)
    trans[(start, EPS)] = set(a.initial)
    for q in a.accepting:
        cur = set(trans.get((q, EPS), ()))
        cur.add(start)
        trans[(q, EPS)] = cur
    return Nfa(a.alphabet, a.n_states + 1, {start}, set(a.accepting) | {start}, trans)


def reverse(n: Nfa) -> Nfa:
    """Automaton for the reversed language."""
    trans: dict = {}
    for (q, s), ts in n.transitions.items():
        for t in ts:
            trans.setdefault((t, s), set()).add(q)
    return Nfa(n.alphabet, n.n_states, n.accepting, n.initial, trans)


def dfa_to_nfa(d: Dfa) -> Nfa:
    trans = {}
    for q in range(d.n_states):
        for i, s in enumerate(d.alphabet.symbols):
            trans.setdefault((q, s), set()).add(d.rows[q][i])
    return Nfa(d.alphabet, d.n_states, {d.initial}, d.accepting, trans)


# ---------------------------------------------------------------------------
# Subset construction, boolean algebra, minimization
# ---------------------------------------------------------------------------


def determinize(n: Nfa, max_states: int = DEFAULT_MAX_STATES) -> Dfa:
    syms = n.alphabet.symbols
    start = n.eps_closure(n.initial)
    index = {start: 0}
    rows: list[list[int]] = []
    order = [start]
    pos = 0
    while pos < len(order):
        cur = order[pos]
        pos += 1
        row = []
        for s in syms:
            nxt = set()
            for q in cur:
                nxt |= n.transitions.get((q, s), frozenset())
            closed = n.eps_closure(nxt)
            if closed not in index:
                index[closed] = len(order)
                order.append(closed)
                _check_budget(len(order), max_states, "determinization states")
            row.append(index[closed])
        rows.append(row)
    accepting = {i for st, i in index.items() if st & n.accepting}
    return Dfa(n.alphabet, len(order), 0, accepting, rows)


def complement(d: Dfa) -> Dfa:
    accepting = set(range(d.n_states)) - d.accepting
    return Dfa(d.alphabet, d.n_states, d.initial, accepting, d.rows)


def product(d1: Dfa, d2: Dfa, mode: str,
            max_states: int = DEFAULT_MAX_STATES) -> Dfa:
    if d1.alphabet.symbols != d2.alphabet.symbols:
        raise ValueError("product requires identical alphabets")
    combine = {"and": lambda a, b: a and b,
               "or": lambda a, b: a or b,
               "xor": lambda a, b: a != b}[mode]
    syms = d1.alphabet.symbols
    start = (d1.initial, d2.initial)
    index = {start: 0}
    order = [start]
    rows: list[list[int]] = []
    pos = 0
    while pos < len(order):
        q1, q2 = order[pos]
        pos += 1
        row = []
        for i, _ in enumerate(syms):
            nxt = (d1.rows[q1][i], d2.rows[q2][i])
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                _check_budget(len(order), max_states, "product states")
            row.append(index[nxt])
        rows.append(row)
    accepting = {i for (q1, q2), i in index.items()
                 if combine(q1 in d1.accepting, q2 in d2.accepting)}
    return Dfa(d1.alphabet, len(order), 0, accepting, rows)


def minimize(d: Dfa) -> Dfa:
    """Canonical minimal DFA by partition refinement over reachable states."""
    n_syms = len(d.alphabet.symbols)
    reachable = [d.initial]
    seen = {d.initial}
    for q in reachable:
        for i in range(n_syms):
            t = d.rows[q][i]
            if t not in seen:
                seen.add(t)
                reachable.append(t)
    # block id per reachable state, seeded by acceptance
    block = {q: (1 if q in d.accepting else 0) for q in reachable}
    while True:
        signature = {q: (block[q], tuple(block[d.rows[q][i]] for i in range(n_syms)))
                     for q in reachable}
        ids: dict = {}
        new_block = {}
        for q in reachable:  # deterministic renumbering in reachability order
            sig = signature[q]
            if sig not in ids:
                ids[sig] = len(ids)
            new_block[q] = ids[sig]
        if new_block == block:
            break
        block = new_block
    n_blocks = len(set(block.values()))
    rows = [[0] * n_syms for _ in range(n_blocks)]
    for q in reachable:
        b = block[q]
        for i in range(n_syms):
            rows[b][i] = block[d.rows[q][i]]
    accepting = {block[q] for q in reachable if q in d.accepting}
    return Dfa(d.alphabet, n_blocks, block[d.initial], accepting, rows)


def shortest_in_sym_diff(d1: Dfa, d2: Dfa) -> str | None:
    """Length-minimal, then lexicographically least (in declared symbol
    order) word accepted by exactly one automaton; None when equivalent."""
    x = product(d1, d2, "xor")
    if x.initial in x.accepting:
        return ""
    syms = x.alphabet.symbols
    parent: dict[int, tuple[int, str]] = {}
    queue = [x.initial]
    seen = {x.initial}
    pos = 0
    while pos < len(queue):
        q = queue[pos]
        pos += 1
        for i, s in enumerate(syms):
            t = x.rows[q][i]
            if t in seen:
                continue
            seen.add(t)
            parent[t] = (q, s)
            if t in x.accepting:
                out = []
                cur = t
                while cur != x.initial:
                    prev, sym = parent[cur]
                    out.append(sym)
                    cur = prev
                return "".join(reversed(out))
            queue.append(t)
    return None


# ---------------------------------------------------------------------------
# Counter abstraction of a closed number predicate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterSpec:
    """Finite view of a closed predicate: counts saturate at `threshold` and
    wrap modulo `modulus`; `accept` is total over (min(n, threshold), n mod
    modulus) pairs."""

    threshold: int
    modulus: int
    accept: tuple[tuple[tuple[int, int], bool], ...]

    @staticmethod
    def from_pred(p: NumPredicate) -> "CounterSpec":
        t = max(0, pred_threshold(p, {}))
        m = pred_modulus(p)
        table = {}
        for c in range(t + 1):
            for r in range(m):
                if c < t:
                    table[(c, r)] = pred_eval(p, c, {})
                else:
                    # least n >= t with n mod m == r
                    n = t + ((r - t) % m)
                    table[(c, r)] = pred_eval(p, n, {})
        return CounterSpec(t, m, tuple(sorted(table.items())))

    def table(self) -> dict:
        return dict(self.accept)

    def start(self) -> tuple[int, int]:
        return (0, 0)

    def inc(self, state: tuple[int, int]) -> tuple[int, int]:
        c, r = state
        return (min(c + 1, self.threshold), (r + 1) % self.modulus)

    def state_for(self, n: int) -> tuple[int, int]:
        return (min(n, self.threshold), n % self.modulus)

    def accepts_count(self, n: int) -> bool:
        return self.table()[self.state_for(n)]

    def states(self):
        return [(c, r) for c in range(self.threshold + 1)
                for r in range(self.modulus)]

    def always_true(self) -> bool:
        return all(v for _, v in self.accept)


def _upward_closure(p: NumPredicate) -> NumPredicate | str:
    """P'(k) = exists n >= k with P(n).  Returns "all", "none", or a
    threshold predicate (k <= max accepted n)."""
    from .syntax import LinTerm, PGeq, PNot

    t = max(0, pred_threshold(p, {}))
    m = pred_modulus(p)
    if any(pred_eval(p, n, {}) for n in range(t, t + m)):
        return "all"
    hits = [n for n in range(t) if pred_eval(p, n, {})]
    if not hits:
        return "none"
    return PNot(PGeq(LinTerm.of_const(max(hits) + 1)))


# ---------------------------------------------------------------------------
# Compilation of regular core expressions
# ---------------------------------------------------------------------------


def _sigma_plus_dfa(alphabet: Alphabet) -> Dfa:
    k = len(alphabet.symbols)
    return Dfa(alphabet, 2, 0, {1}, [[1] * k, [1] * k])


def _nonempty_part(n: Nfa, max_states: int) -> Nfa:
    """Automaton for L(n) minus the empty word."""
    d = determinize(n, max_states)
    return dfa_to_nfa(product(d, _sigma_plus_dfa(n.alphabet), "and", max_states))


def _nullable(n: Nfa) -> bool:
    return bool(n.eps_closure(n.initial) & n.accepting)


def _rep_counter_product(a: Nfa, spec: CounterSpec, max_states: int) -> Nfa:
    """Loop a null-free automaton, counting completed passes.

    States: ("between passes", counter) and ("inside", a-state, counter).
    Null-freeness of `a` guarantees every counted pass consumes input.
    """
    table = spec.table()
    counters = spec.states()
    ids = {}

    def between(c):
        return ids.setdefault(("B", c), len(ids))

    def inside(q, c):
        return ids.setdefault(("I", q, c), len(ids))

    trans: dict = {}

    def add(src, label, dst):
        trans.setdefault((src, label), set()).add(dst)

    for c in counters:
        b = between(c)
        for q0 in a.initial:
            add(b, EPS, inside(q0, c))
        for (q, s), ts in a.transitions.items():
            for t in ts:
                add(inside(q, c), s, inside(t, c))
        for q in a.accepting:
            add(inside(q, c), EPS, between(spec.inc(c)))
        _check_budget(len(ids), max_states, "repetition construction states")
    accepting = {between(c) for c in counters if table[c]}
    return Nfa(a.alphabet, len(ids), {between(spec.start())}, accepting, trans)


def _compile_rep(pred: NumPredicate, inner: Nfa, max_states: int) -> Nfa:
    if _nullable(inner):
        body = _nonempty_part(inner, max_states)
        closure = _upward_closure(pred)
        if closure == "all":
            return nfa_star(body)
        if closure == "none":
            return nfa_empty(inner.alphabet)
        spec = CounterSpec.from_pred(closure)
    else:
        body = inner
        spec = CounterSpec.from_pred(pred)
        if spec.always_true():
            return nfa_star(body)
    return _rep_counter_product(body, spec, max_states)


def _sigma_star_nfa(alphabet: Alphabet) -> Nfa:
    any_sym = nfa_word(alphabet.symbols[0], alphabet)
    for s in alphabet.symbols[1:]:
        any_sym = nfa_union(any_sym, nfa_word(s, alphabet))
    return nfa_star(any_sym)


def _compile_has(pred: NumPredicate, inner: Nfa, max_states: int) -> Nfa:
    alphabet = inner.alphabet
    sigma_star = _sigma_star_nfa(alphabet)
    suffix_lang = nfa_concat(inner, sigma_star)  # L(phi . TOP)
    rev = determinize(reverse(suffix_lang), max_states)
    spec = CounterSpec.from_pred(pred)
    table = spec.table()

    # Deterministic counting automaton over the reversed word: track the
    # reverse-DFA state and how many of its prefixes were accepting.
    start_c = spec.start()
    if rev.initial in rev.accepting:
        start_c = spec.inc(start_c)
    ids = {}
    order = []

    def sid(q, c):
        key = (q, c)
        if key not in ids:
            ids[key] = len(order)
            order.append(key)
            _check_budget(len(order), max_states, "occurrence counting states")
        return ids[key]

    sid(rev.initial, start_c)
    trans: dict = {}
    pos = 0
    syms = alphabet.symbols
    while pos < len(order):
        q, c = order[pos]
        src = pos
        pos += 1
        for i, s in enumerate(syms):
            q2 = rev.rows[q][i]
            c2 = spec.inc(c) if q2 in rev.accepting else c
            trans.setdefault((src, s), set()).add(sid(q2, c2))
    accepting = {i for i, (q, c) in enumerate(order) if table[c]}
    counting = Nfa(alphabet, len(order), {0}, accepting, trans)
    # The counting automaton reads w reversed; flip it back.
    return reverse(counting)


def compile_regular(e: Expr, alphabet: Alphabet,
                    max_states: int = DEFAULT_MAX_STATES) -> Nfa:
    """Compile a closed, quantifier-free core expression to an NFA with
    L(nfa) = {w : w satisfies e}."""

    def go(node: Expr) -> Nfa:
        if isinstance(node, Atom):
            return nfa_word(node.word, alphabet)
        if isinstance(node, Not):
            d = determinize(go(node.arg), max_states)
            return dfa_to_nfa(complement(d))
        if isinstance(node, Or):
            return nfa_union(go(node.left), go(node.right))
        if isinstance(node, Concat):
            return nfa_concat(go(node.left), go(node.right))
        if isinstance(node, Rep):
            return _compile_rep(node.pred, go(node.arg), max_states)
        if isinstance(node, Has):
            return _compile_has(node.pred, go(node.arg), max_states)
        if isinstance(node, Reverse):
            return reverse(go(node.arg))
        raise ValueError(f"not compilable to an automaton: {type(node).__name__}")

    return go(e)


def compile_to_dfa(e: Expr, alphabet: Alphabet,
                   max_states: int = DEFAULT_MAX_STATES) -> Dfa:
    return minimize(determinize(compile_regular(e, alphabet, max_states), max_states))


# ---------------------------------------------------------------------------
# Regex frontend (literals, +, concatenation, *, parentheses, eps)
# ---------------------------------------------------------------------------


def parse_regex(text: str, alphabet: Alphabet,
                max_states: int = DEFAULT_MAX_STATES) -> Nfa:
    pos = 0

    def peek():
        return text[pos] if pos < len(text) else ""

    def error(msg, expected):
        raise ParseError(SourceSpan(pos, min(pos + 1, len(text))), msg, expected)

    def alt() -> Nfa:
        nonlocal pos
        parts = [cat()]
        while peek() == "+":
            pos += 1
            parts.append(cat())
        out = parts[0]
        for p in parts[1:]:
            out = nfa_union(out, p)
        return out

    def cat() -> Nfa:
        out = None
        while True:
            ch = peek()
            if ch and (ch == "(" or ch.isalpha()):
                piece = starred()
                out = piece if out is None else nfa_concat(out, piece)
            else:
                break
        if out is None:
            error("empty regex factor", ["literal", "(", "eps"])
        return out

    def starred() -> Nfa:
        nonlocal pos
        b = base()
        while peek() == "*":
            pos += 1
            b = nfa_star(b)
        return b

    def base() -> Nfa:
        nonlocal pos
        ch = peek()
        if ch == "(":
            pos += 1
            inner = alt()
            if peek() != ")":
                error("unbalanced parenthesis", [")"])
            pos += 1
            return inner
        if text.startswith("eps", pos):
            pos += 3
            return nfa_word("", alphabet)
        if ch == "ε":
            pos += 1
            return nfa_word("", alphabet)
        if ch.isalpha():
            if ch not in alphabet:
                error(f"symbol not in alphabet: {ch}", ["alphabet symbol"])
            pos += 1
            return nfa_word(ch, alphabet)
        error(f"unexpected character {ch!r}" if ch else "unexpected end",
              ["literal", "(", "eps"])

    # strip whitespace up-front; the regex dialect itself has no spaces
    text = "".join(text.split())
    out = alt()
    if pos != len(text):
        error("trailing input", ["end of regex"])
    return out


# ---------------------------------------------------------------------------
# Debug export
# ---------------------------------------------------------------------------


def to_dot(m) -> str:
    """GraphViz rendering of an Nfa or Dfa."""
    lines = ["digraph automaton {", "  rankdir=LR;", '  node [shape=circle];']
    if isinstance(m, Dfa):
        initial = {m.initial}
        edges = []
        for q in range(m.n_states):
            for i, s in enumerate(m.alphabet.symbols):
                edges.append((q, s, m.rows[q][i]))
        accepting = m.accepting
        n = m.n_states
    else:
        initial = m.initial
        edges = [(q, s if s is not None else "ε", t)
                 for (q, s), ts in sorted(m.transitions.items(),
                                          key=lambda kv: (kv[0][0], str(kv[0][1])))
                 for t in sorted(ts)]
        accepting = m.accepting
        n = m.n_states
    for q in range(n):
        shape = "doublecircle" if q in accepting else "circle"
        lines.append(f'  q{q} [shape={shape}];')
    for i, q in enumerate(sorted(initial)):
        lines.append(f'  start{i} [shape=point]; start{i} -> q{q};')
    for q, s, t in edges:
        lines.append(f'  q{q} -> q{t} [label="{s}"];')
    lines.append("}")
    return "\n".join(lines)
