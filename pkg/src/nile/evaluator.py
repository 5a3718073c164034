"""Membership evaluation for core expressions.

Implements the defining semantics directly: memoized structural recursion
over (node, segment) pairs, with exact repetition-count sets, occurrence
counting, and bounded search for number/string quantifiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import BudgetExceeded
from .syntax import (Alphabet, Atom, Concat, ExistsNum, ExistsStr, Expr, Has,
                     Interpretation, Not, NumPredicate, Or, Rep, Reverse,
                     StrVar, expr_preds, expr_terms, free_vars, pred_atoms,
                     pred_eval, pred_modulus, pred_threshold, PCong)


@dataclass(frozen=True)
class EvalBudget:
    max_steps: int = 10_000_000
    max_witness: int = 100_000

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_witness <= 0:
            raise ValueError("budget limits must be positive")


DEFAULT_BUDGET = EvalBudget()


@dataclass(frozen=True)
class CountSet:
    """Achievable repetition counts: a finite part plus an optional upward-
    closed tail {n : n >= tail_from}.  Canonical: finite entries lie below
    the tail."""

    finite: frozenset[int]
    tail_from: Optional[int]

    @staticmethod
    def make(finite, tail_from=None) -> "CountSet":
        if tail_from is not None:
            finite = frozenset(n for n in finite if n < tail_from)
        return CountSet(frozenset(finite), tail_from)

    def __contains__(self, n: int) -> bool:
        if n in self.finite:
            return True
        return self.tail_from is not None and n >= self.tail_from

    def is_empty(self) -> bool:
        return not self.finite and self.tail_from is None


def witness_bound(e: Expr, word_len: int) -> int:
    """Search bound for number quantification over a body e.

    B = (|w| + 1 + C) * M + C with C the summed absolute weight of all term
    constants and coefficients in e, and M the lcm of all moduli in e.
    Conservative: predicate truth in the bound variable is eventually
    periodic with period dividing M, and thresholds shift by at most C.
    """
    c = sum(t.weight() for t in expr_terms(e))
    m = 1
    for p in expr_preds(e):
        m = math.lcm(m, pred_modulus(p))
    return (word_len + 1 + c) * m + c


class Evaluator:
    """Evaluation context for one alphabet; safe to reuse across words."""

    def __init__(self, alphabet: Alphabet, budget: EvalBudget = DEFAULT_BUDGET):
        self.alphabet = alphabet
        self.budget = budget
        self.steps = 0
        self._memo = {}
        self._occ_memo = {}
        self._counts_memo = {}
        self._fv_cache = {}
        self._bound_cache = {}

    # -- helpers -------------------------------------------------------------

    def _tick(self):
        self.steps += 1
        if self.steps > self.budget.max_steps:
            raise BudgetExceeded("evaluation steps", self.budget.max_steps)

    def _free(self, e: Expr):
        got = self._fv_cache.get(id(e))
        if got is None:
            nums, strs = free_vars(e)
            got = (tuple(sorted(nums)), tuple(sorted(strs)))
            self._fv_cache[id(e)] = (got, e)  # keep node alive while cached
            return got
        return got[0]

    def _env_key(self, e: Expr, beta: dict, gamma: dict):
        nums, strs = self._free(e)
        return (tuple(beta[v] for v in nums), tuple(gamma[v] for v in strs))

    def _quant_bound(self, body: Expr, seg_len: int) -> int:
        cached = self._bound_cache.get(id(body))
        if cached is None:
            c = sum(t.weight() for t in expr_terms(body))
            m = 1
            for p in expr_preds(body):
                m = math.lcm(m, pred_modulus(p))
            cached = (c, m, body)
            self._bound_cache[id(body)] = cached
        c, m, _ = cached
        return (seg_len + 1 + c) * m + c

    # -- core recursion --------------------------------------------------------

    def sat(self, e: Expr, w: str, lo: int, hi: int, beta: dict, gamma: dict) -> bool:
        key = (id(e), w, lo, hi, self._env_key(e, beta, gamma))
        got = self._memo.get(key)
        if got is not None:
            return got[0]
        self._tick()
        res = self._sat(e, w, lo, hi, beta, gamma)
        self._memo[key] = (res, e)
        return res

    def _sat(self, e, w, lo, hi, beta, gamma):
        if isinstance(e, Atom):
            return hi - lo == len(e.word) and w.startswith(e.word, lo, hi)
        if isinstance(e, Not):
            return not self.sat(e.arg, w, lo, hi, beta, gamma)
        if isinstance(e, Or):
            return (self.sat(e.left, w, lo, hi, beta, gamma)
                    or self.sat(e.right, w, lo, hi, beta, gamma))
        if isinstance(e, Concat):
            for i in range(lo, hi + 1):
                if (self.sat(e.left, w, lo, i, beta, gamma)
                        and self.sat(e.right, w, i, hi, beta, gamma)):
                    return True
            return False
        if isinstance(e, Rep):
            cs = self.counts(e.arg, w, lo, hi, beta, gamma)
            return self._pred_on_counts(e.pred, cs, beta)
        if isinstance(e, Has):
            occ = self.occurrences(e.arg, w, lo, hi, beta, gamma)
            return pred_eval(e.pred, len(occ), beta)
        if isinstance(e, ExistsNum):
            bound = self._quant_bound(e.arg, hi - lo)
            if bound > self.budget.max_witness:
                raise BudgetExceeded("witness search range", self.budget.max_witness)
            inner = dict(beta)
            for n in range(bound + 1):
                inner[e.var] = n
                if self.sat(e.arg, w, lo, hi, inner, gamma):
                    return True
            return False
        if isinstance(e, ExistsStr):
            # Candidate assignments: the empty word, factors of the segment,
            # and their reversals.  Sound whenever every occurrence of the
            # variable is consumed as a factor (possibly under REVERSE).
            cands = {""}
            for i in range(lo, hi + 1):
                for j in range(i + 1, hi + 1):
                    f = w[i:j]
                    cands.add(f)
                    cands.add(f[::-1])
            inner = dict(gamma)
            for cand in sorted(cands, key=lambda s: (len(s), s)):
                inner[e.var] = cand
                if self.sat(e.arg, w, lo, hi, beta, inner):
                    return True
            return False
        if isinstance(e, StrVar):
            val = gamma[e.name]
            return hi - lo == len(val) and w.startswith(val, lo, hi)
        if isinstance(e, Reverse):
            rw = w[lo:hi][::-1]
            return self.sat(e.arg, rw, 0, len(rw), beta, gamma)
        raise TypeError(f"not a core expression: {e!r}")

    # -- repetition counts ---------------------------------------------------

    def counts(self, phi: Expr, w: str, lo: int, hi: int, beta, gamma) -> CountSet:
        key = (id(phi), w, lo, hi, self._env_key(phi, beta, gamma))
        got = self._counts_memo.get(key)
        if got is not None:
            return got[0]
        nullable = self.sat(phi, w, lo, lo, beta, gamma)
        if lo == hi:
            cs = CountSet.make((), 0) if nullable else CountSet.make((0,))
        else:
            # Reachable part counts using non-empty matches only; an empty
            # match never advances, so padding is handled by upward closure.
            reach: dict[int, set[int]] = {lo: {0}}
            for pos in range(lo, hi):
                counts_here = reach.get(pos)
                if not counts_here:
                    continue
                for end in range(pos + 1, hi + 1):
                    if self.sat(phi, w, pos, end, beta, gamma):
                        bucket = reach.setdefault(end, set())
                        bucket.update(c + 1 for c in counts_here)
            final = reach.get(hi, set())
            if nullable:
                cs = (CountSet.make((), min(final)) if final
                      else CountSet.make(()))
            else:
                cs = CountSet.make(final)
        self._counts_memo[key] = (cs, phi)
        return cs

    def _pred_on_counts(self, p: NumPredicate, cs: CountSet, beta) -> bool:
        for n in sorted(cs.finite):
            if pred_eval(p, n, beta):
                return True
        if cs.tail_from is not None:
            start = cs.tail_from
            stop = max(start, pred_threshold(p, beta)) + pred_modulus(p)
            for n in range(start, stop + 1):
                if pred_eval(p, n, beta):
                    return True
        return False

    # -- occurrence positions --------------------------------------------------

    def occurrences(self, phi: Expr, w: str, lo: int, hi: int, beta, gamma):
        """0-based start positions p in [lo, hi] whose suffix has a prefix
        matching phi (the set I of counted occurrences)."""
        key = (id(phi), w, lo, hi, self._env_key(phi, beta, gamma))
        got = self._occ_memo.get(key)
        if got is not None:
            return got[0]
        out = set()
        for p in range(lo, hi + 1):
            for m in range(p, hi + 1):
                if self.sat(phi, w, p, m, beta, gamma):
                    out.add(p)
                    break
        res = frozenset(out)
        self._occ_memo[key] = (res, phi)
        return res


# ---------------------------------------------------------------------------
# Module-level entry points
# ---------------------------------------------------------------------------


def evaluate(e: Expr, word: str, interp: Interpretation | None = None,
             alphabet: Alphabet | None = None,
             budget: EvalBudget = DEFAULT_BUDGET,
             evaluator: Evaluator | None = None) -> bool:
    """Decide word membership for a core expression.

    interp must bind every free variable of e.  An explicit evaluator can be
    passed to share memo tables across calls on the same word set.
    """
    interp = interp or Interpretation.make()
    ev = evaluator or Evaluator(alphabet or Alphabet.of("ab"), budget)
    return ev.sat(e, word, 0, len(word), interp.nums(), interp.strs())


def achievable_counts(phi: Expr, segment: str,
                      interp: Interpretation | None = None,
                      alphabet: Alphabet | None = None,
                      budget: EvalBudget = DEFAULT_BUDGET) -> CountSet:
    interp = interp or Interpretation.make()
    ev = Evaluator(alphabet or Alphabet.of("ab"), budget)
    return ev.counts(phi, segment, 0, len(segment), interp.nums(), interp.strs())


def occurrence_positions(phi: Expr, word: str,
                         interp: Interpretation | None = None,
                         alphabet: Alphabet | None = None,
                         budget: EvalBudget = DEFAULT_BUDGET) -> set[int]:
    """The occurrence set I as 1-based positions in [1, |word|+1]."""
    interp = interp or Interpretation.make()
    ev = Evaluator(alphabet or Alphabet.of("ab"), budget)
    raw = ev.occurrences(phi, word, 0, len(word), interp.nums(), interp.strs())
    return {p + 1 for p in raw}
