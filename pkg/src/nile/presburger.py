"""Linear integer arithmetic over the naturals, decided by Cooper-style
quantifier elimination.

Formulas are built from atoms ``t >= 0`` and ``t ≡ r (mod m)`` over signed
linear terms, Boolean connectives, and quantifiers ranging over the
non-negative integers.  Elimination itself runs over the integers; the
natural-number semantics is obtained by conjoining an ``x >= 0`` guard to
every quantified body before eliminating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BudgetExceeded
from .syntax import (LinTerm, NumPredicate, PAnd, PCong, PGeq, PNot, POr,
                     pred_eval, pred_modulus, pred_threshold)

DEFAULT_MAX_ATOMS = 2_000_000


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Ge(Formula):
    """term >= 0"""

    term: LinTerm


@dataclass(frozen=True)
class Cong(Formula):
    """term ≡ residue (mod mod)"""

    term: LinTerm
    residue: int
    mod: int

    def __post_init__(self):
        if self.mod < 1:
            raise ValueError("modulus must be >= 1")


@dataclass(frozen=True)
class FNot(Formula):
    arg: Formula


@dataclass(frozen=True)
class FAnd(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class FOr(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class FExists(Formula):
    var: str
    arg: Formula


@dataclass(frozen=True)
class FForall(Formula):
    var: str
    arg: Formula


TRUE = FAnd(())
FALSE = FOr(())


def f_and(*fs: Formula) -> Formula:
    flat: list[Formula] = []
    for f in fs:
        if f == FALSE:
            return FALSE
        if isinstance(f, FAnd):
            flat.extend(f.args)
        else:
            flat.append(f)
    out = tuple(dict.fromkeys(flat))  # dedupe, order-preserving
    if len(out) == 1:
        return out[0]
    return FAnd(out)


def f_or(*fs: Formula) -> Formula:
    flat: list[Formula] = []
    for f in fs:
        if f == TRUE:
            return TRUE
        if isinstance(f, FOr):
            flat.extend(f.args)
        else:
            flat.append(f)
    out = tuple(dict.fromkeys(flat))
    if len(out) == 1:
        return out[0]
    return FOr(out)


def f_not(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, FNot):
        return f.arg
    return FNot(f)


def eq0(t: LinTerm) -> Formula:
    """t = 0 as a pair of inequalities."""
    return f_and(Ge(t), Ge(t.scale(-1)))


def free_vars(f: Formula) -> set[str]:
    if isinstance(f, Ge):
        return f.term.vars()
    if isinstance(f, Cong):
        return f.term.vars()
    if isinstance(f, FNot):
        return free_vars(f.arg)
    if isinstance(f, (FAnd, FOr)):
        out: set[str] = set()
        for g in f.args:
            out |= free_vars(g)
        return out
    if isinstance(f, (FExists, FForall)):
        return free_vars(f.arg) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (Ge, Cong)):
        return True
    if isinstance(f, FNot):
        return is_quantifier_free(f.arg)
    if isinstance(f, (FAnd, FOr)):
        return all(is_quantifier_free(g) for g in f.args)
    return False


def evaluate_formula(f: Formula, env: dict[str, int]) -> bool:
    """Direct evaluation; quantifiers are not allowed here."""
    if isinstance(f, Ge):
        return f.term.evaluate(env) >= 0
    if isinstance(f, Cong):
        return f.term.evaluate(env) % f.mod == f.residue % f.mod
    if isinstance(f, FNot):
        return not evaluate_formula(f.arg, env)
    if isinstance(f, FAnd):
        return all(evaluate_formula(g, env) for g in f.args)
    if isinstance(f, FOr):
        return any(evaluate_formula(g, env) for g in f.args)
    raise TypeError(f"cannot evaluate quantified formula: {f!r}")


# ---------------------------------------------------------------------------
# Cooper elimination
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, max_atoms: int):
        self.max_atoms = max_atoms
        self.atoms = 0

    def spend(self, k: int = 1):
        self.atoms += k
        if self.atoms > self.max_atoms:
            raise BudgetExceeded("quantifier elimination atoms", self.max_atoms)


def _nnf(f: Formula, neg: bool) -> Formula:
    """Negation normal form; negated inequalities rewrite exactly, negated
    congruences stay as atomic FNot(Cong)."""
    if isinstance(f, Ge):
        # not(t >= 0)  <=>  -t - 1 >= 0
        return Ge(f.term.scale(-1).shift(-1)) if neg else f
    if isinstance(f, Cong):
        return FNot(f) if neg else f
    if isinstance(f, FNot):
        return _nnf(f.arg, not neg)
    if isinstance(f, FAnd):
        parts = tuple(_nnf(g, neg) for g in f.args)
        return f_or(*parts) if neg else f_and(*parts)
    if isinstance(f, FOr):
        parts = tuple(_nnf(g, neg) for g in f.args)
        return f_and(*parts) if neg else f_or(*parts)
    raise TypeError(f"unexpected node in QF formula: {f!r}")


def _simplify(f: Formula) -> Formula:
    if isinstance(f, Ge):
        if f.term.is_const():
            return TRUE if f.term.const >= 0 else FALSE
        return f
    if isinstance(f, Cong):
        if f.term.is_const():
            ok = f.term.const % f.mod == f.residue % f.mod
            return TRUE if ok else FALSE
        if f.mod == 1:
            return TRUE
        return f
    if isinstance(f, FNot):
        return f_not(_simplify(f.arg))
    if isinstance(f, FAnd):
        return f_and(*(_simplify(g) for g in f.args))
    if isinstance(f, FOr):
        return f_or(*(_simplify(g) for g in f.args))
    return f


def _subst(f: Formula, var: str, value: LinTerm, budget: _Budget) -> Formula:
    """Substitute var := value into a QF formula in NNF (coef of var is +-1
    in every atom that mentions it)."""
    if isinstance(f, Ge):
        c = f.term.coeff(var)
        if c == 0:
            return f
        budget.spend()
        return Ge(f.term.drop(var) + value.scale(c))
    if isinstance(f, Cong):
        c = f.term.coeff(var)
        if c == 0:
            return f
        budget.spend()
        return Cong(f.term.drop(var) + value.scale(c), f.residue, f.mod)
    if isinstance(f, FNot):
        return f_not(_subst(f.arg, var, value, budget))
    if isinstance(f, FAnd):
        return f_and(*(_subst(g, var, value, budget) for g in f.args))
    if isinstance(f, FOr):
        return f_or(*(_subst(g, var, value, budget) for g in f.args))
    raise TypeError(f"unexpected node: {f!r}")


def _limit_version(f: Formula, var: str, sign: int) -> Formula:
    """The var -> sign*infinity version: bound atoms collapse to constants,
    congruences survive (substituted separately)."""
    if isinstance(f, Ge):
        c = f.term.coeff(var)
        if c == 0:
            return f
        return TRUE if c * sign > 0 else FALSE
    if isinstance(f, (Cong, FNot)):
        return f
    if isinstance(f, FAnd):
        return f_and(*(_limit_version(g, var, sign) for g in f.args))
    if isinstance(f, FOr):
        return f_or(*(_limit_version(g, var, sign) for g in f.args))
    raise TypeError(f"unexpected node: {f!r}")


def _scale_var(f: Formula, var: str, delta: int, budget: _Budget) -> Formula:
    """Normalize every atom mentioning var so its coefficient is +-delta for
    inequalities and +delta for congruences, then rename delta*var to var
    (sound together with the added var ≡ 0 (mod delta) constraint)."""
    if isinstance(f, Ge):
        a = f.term.coeff(var)
        if a == 0:
            return f
        budget.spend()
        k = delta // abs(a)
        t = f.term.scale(k)  # coefficient of var is now +-delta
        unit = 1 if t.coeff(var) > 0 else -1
        return Ge(LinTerm.make({**dict(t.coeffs), var: unit}, t.const))
    if isinstance(f, Cong):
        a = f.term.coeff(var)
        if a == 0:
            return f
        budget.spend()
        t, r, m = f.term, f.residue, f.mod
        if a < 0:
            t, r = t.scale(-1), -r
            a = -a
        k = delta // a
        t, r, m = t.scale(k), r * k, m * k
        return Cong(LinTerm.make({**dict(t.coeffs), var: 1}, t.const), r, m)
    if isinstance(f, FNot):
        return FNot(_scale_var(f.arg, var, delta, budget))
    if isinstance(f, FAnd):
        return f_and(*(_scale_var(g, var, delta, budget) for g in f.args))
    if isinstance(f, FOr):
        return f_or(*(_scale_var(g, var, delta, budget) for g in f.args))
    raise TypeError(f"unexpected node: {f!r}")


def _atoms(f: Formula):
    if isinstance(f, (Ge, Cong)):
        yield f
    elif isinstance(f, FNot):
        yield from _atoms(f.arg)
    elif isinstance(f, (FAnd, FOr)):
        for g in f.args:
            yield from _atoms(g)


def _exists_nat(var: str, body: Formula, budget: _Budget) -> Formula:
    """Eliminate an existential ranging over the naturals."""
    f = _simplify(_nnf(body, False))
    if isinstance(f, FOr):
        # The existential distributes over disjunction; eliminating per
        # disjunct keeps the bound sets small.
        return f_or(*(_exists_nat(var, g, budget) for g in f.args))
    guarded = f_and(f, Ge(LinTerm.of_var(var)))
    return _simplify(_cooper_exists(var, guarded, budget))


def _cooper_exists(var: str, body: Formula, budget: _Budget) -> Formula:
    """Eliminate one integer existential from a QF body."""
    f = _simplify(_nnf(body, False))
    if isinstance(f, FAnd):
        # Conjuncts without the variable factor out of the elimination.
        inside = [g for g in f.args if var in free_vars(g)]
        outside = [g for g in f.args if var not in free_vars(g)]
        if outside:
            inner = _cooper_exists(var, f_and(*inside) if inside else TRUE, budget)
            return f_and(f_and(*outside), inner)
    coefs = [abs(a.term.coeff(var)) for a in _atoms(f) if a.term.coeff(var) != 0]
    if not coefs:
        return f
    delta = math.lcm(*coefs)
    f = _scale_var(f, var, delta, budget)
    if delta > 1:
        f = f_and(f, Cong(LinTerm.of_var(var), 0, delta))
    big_m = math.lcm(*[a.mod for a in _atoms(f)
                       if isinstance(a, Cong) and a.term.coeff(var) != 0] or [1])
    lower_bounds = []
    upper_bounds = []
    for a in _atoms(f):
        if isinstance(a, Ge):
            c = a.term.coeff(var)
            if c == 1:
                # var + t >= 0  <=>  var > -t - 1
                lower_bounds.append(a.term.drop(var).scale(-1).shift(-1))
            elif c == -1:
                # -var + t >= 0  <=>  var < t + 1
                upper_bounds.append(a.term.drop(var).shift(1))
    lower_bounds = list(dict.fromkeys(lower_bounds))
    upper_bounds = list(dict.fromkeys(upper_bounds))
    # Symmetric variant: work from whichever side has fewer bound terms.
    if len(upper_bounds) < len(lower_bounds):
        bounds, sign = upper_bounds, -1
    else:
        bounds, sign = lower_bounds, 1
    limit = _simplify(_limit_version(f, var, -sign))
    parts = []
    if limit != FALSE:
        for j in range(1, big_m + 1):
            parts.append(_simplify(_subst(limit, var, LinTerm.of_const(j), budget)))
    for b in bounds:
        for j in range(1, big_m + 1):
            parts.append(_simplify(_subst(f, var, b.shift(sign * j), budget)))
    return f_or(*parts)


def eliminate(f: Formula, max_atoms: int = DEFAULT_MAX_ATOMS) -> Formula:
    """Equivalent quantifier-free formula over the naturals."""
    budget = _Budget(max_atoms)

    def go(g: Formula) -> Formula:
        if isinstance(g, (Ge, Cong)):
            return g
        if isinstance(g, FNot):
            return f_not(go(g.arg))
        if isinstance(g, FAnd):
            return f_and(*(go(x) for x in g.args))
        if isinstance(g, FOr):
            return f_or(*(go(x) for x in g.args))
        if isinstance(g, FExists):
            return _exists_nat(g.var, go(g.arg), budget)
        if isinstance(g, FForall):
            return f_not(_exists_nat(g.var, f_not(go(g.arg)), budget))
        raise TypeError(f"not a formula: {g!r}")

    return _simplify(go(f))


def decide(sentence: Formula, max_atoms: int = DEFAULT_MAX_ATOMS) -> bool:
    """Truth of a closed formula over the naturals."""
    if free_vars(sentence):
        raise ValueError(f"sentence has free variables: {free_vars(sentence)}")
    return evaluate_formula(eliminate(sentence, max_atoms), {})


# ---------------------------------------------------------------------------
# Number-predicate equality
# ---------------------------------------------------------------------------


def _close_pred(p: NumPredicate, beta: dict[str, int]) -> NumPredicate:
    if isinstance(p, PGeq):
        return PGeq(LinTerm.of_const(p.term.evaluate(beta)))
    if isinstance(p, PCong):
        return PCong(LinTerm.of_const(p.term.evaluate(beta)), p.mod)
    if isinstance(p, PNot):
        return PNot(_close_pred(p.arg, beta))
    if isinstance(p, PAnd):
        return PAnd(_close_pred(p.left, beta), _close_pred(p.right, beta))
    if isinstance(p, POr):
        return POr(_close_pred(p.left, beta), _close_pred(p.right, beta))
    raise TypeError(f"not a predicate: {p!r}")


def pred_equal(p1: NumPredicate, p2: NumPredicate,
               beta: dict[str, int] | None = None) -> tuple[bool, int | None]:
    """Set equality of the denoted subsets of the naturals.

    Returns (True, None) or (False, least differing n).  Both predicate
    truth functions are eventually periodic: above the largest threshold
    they repeat with period lcm(moduli), so a finite scan is exact.
    """
    beta = beta or {}
    q1, q2 = _close_pred(p1, beta), _close_pred(p2, beta)
    top = max(pred_threshold(q1, {}), pred_threshold(q2, {}))
    period = math.lcm(pred_modulus(q1), pred_modulus(q2))
    for n in range(0, max(0, top) + period + 1):
        if pred_eval(q1, n, {}) != pred_eval(q2, n, {}):
            return False, n
    return True, None


def pred_to_formula(p: NumPredicate, var: str) -> Formula:
    """The NILE predicate as a formula over one free variable."""
    x = LinTerm.of_var(var)
    if isinstance(p, PGeq):
        return Ge(x - p.term)
    if isinstance(p, PCong):
        return Cong(x - p.term, 0, p.mod)
    if isinstance(p, PNot):
        return f_not(pred_to_formula(p.arg, var))
    if isinstance(p, PAnd):
        return f_and(pred_to_formula(p.left, var), pred_to_formula(p.right, var))
    if isinstance(p, POr):
        return f_or(pred_to_formula(p.left, var), pred_to_formula(p.right, var))
    raise TypeError(f"not a predicate: {p!r}")
