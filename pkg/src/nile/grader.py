"""Stateless grading facade: one request in, one JSON-ready response out.

All failures are reported in-band as a response with status "error" and a
diagnostics list; the function itself only raises on programmer error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Optional

from .equivalence import EquivOptions, equiv
from .errors import BudgetExceeded
from .evaluator import EvalBudget
from .explain import explain
from .parser import ParseError, parse
from .syntax import Alphabet, expand_sugar, validate


@dataclass(frozen=True)
class GradeOptions:
    bound_l: Optional[int] = None
    explain: bool = False
    max_states: Optional[int] = None
    max_eval_steps: Optional[int] = None
    max_witness: Optional[int] = None
    max_formula_atoms: Optional[int] = None


@dataclass(frozen=True)
class GradeRequest:
    alphabet: list[str]
    reference: str
    candidate: str
    options: GradeOptions = field(default_factory=GradeOptions)

    @staticmethod
    def from_dict(data: dict) -> "GradeRequest":
        opts = data.get("options") or {}
        budgets = opts.get("budgets") or {}
        return GradeRequest(
            alphabet=list(data.get("alphabet") or []),
            reference=data.get("reference") or "",
            candidate=data.get("candidate") or "",
            options=GradeOptions(
                bound_l=opts.get("boundL"),
                explain=bool(opts.get("explain", False)),
                max_states=budgets.get("maxStates"),
                max_eval_steps=budgets.get("maxEvalSteps"),
                max_witness=budgets.get("maxWitness"),
                max_formula_atoms=budgets.get("maxFormulaAtoms"),
            ),
        )


def _error(diagnostics: list[dict], timings: dict) -> dict:
    return {
        "status": "error",
        "method": None,
        "counterexample": None,
        "findings": [],
        "diagnostics": diagnostics,
        "timings": timings,
    }


def _diag(which: str, message: str, span=None, path=None) -> dict:
    out: dict[str, Any] = {"where": which, "message": message}
    if span is not None:
        out["span"] = {"start": span.start, "end": span.end}
    if path is not None:
        out["path"] = list(path)
    return out


def _equiv_options(o: GradeOptions) -> EquivOptions:
    kwargs: dict[str, Any] = {}
    if o.bound_l is not None:
        kwargs["bound_l"] = o.bound_l
    if o.max_states is not None:
        kwargs["max_states"] = o.max_states
    if o.max_formula_atoms is not None:
        kwargs["presburger_atoms"] = o.max_formula_atoms
    if o.max_eval_steps is not None or o.max_witness is not None:
        kwargs["eval_budget"] = EvalBudget(
            max_steps=o.max_eval_steps or EvalBudget().max_steps,
            max_witness=o.max_witness or EvalBudget().max_witness,
        )
    return EquivOptions(**kwargs)


def grade(req: GradeRequest) -> dict:
    """Run parse -> validate -> desugar -> equivalence (-> explain)."""
    t_start = time.perf_counter()
    timings = {"parseMs": 0.0, "validateMs": 0.0, "equivMs": 0.0,
               "explainMs": 0.0, "totalMs": 0.0}

    def done_ms(t0):
        return round((time.perf_counter() - t0) * 1000, 3)

    diagnostics: list[dict] = []
    if not req.alphabet:
        diagnostics.append(_diag("alphabet", "alphabet must be nonempty"))
    if not req.reference.strip():
        diagnostics.append(_diag("reference", "reference text is empty"))
    if not req.candidate.strip():
        diagnostics.append(_diag("candidate", "candidate text is empty"))
    if diagnostics:
        timings["totalMs"] = done_ms(t_start)
        return _error(diagnostics, timings)
    try:
        alphabet = Alphabet(tuple(req.alphabet))
    except ValueError as exc:
        timings["totalMs"] = done_ms(t_start)
        return _error([_diag("alphabet", str(exc))], timings)

    t0 = time.perf_counter()
    trees = {}
    for which, text in (("reference", req.reference), ("candidate", req.candidate)):
        try:
            trees[which] = parse(text, alphabet)
        except ParseError as exc:
            diagnostics.append(_diag(which, exc.message, span=exc.span))
    timings["parseMs"] = done_ms(t0)
    if diagnostics:
        timings["totalMs"] = done_ms(t_start)
        return _error(diagnostics, timings)

    t0 = time.perf_counter()
    for which, tree in trees.items():
        for d in validate(tree, alphabet):
            diagnostics.append(_diag(which, d.message, path=d.path))
    timings["validateMs"] = done_ms(t0)
    if diagnostics:
        timings["totalMs"] = done_ms(t_start)
        return _error(diagnostics, timings)

    reference = expand_sugar(trees["reference"], alphabet)
    candidate = expand_sugar(trees["candidate"], alphabet)
    opts = _equiv_options(req.options)

    try:
        if req.options.explain:
            t0 = time.perf_counter()
            report = explain(reference, candidate, alphabet, opts)
            timings["explainMs"] = done_ms(t0)
            verdict = report.verdict
            findings = [{"code": f.code, "path": list(f.path), "message": f.message}
                        for f in report.findings]
            cx = report.counterexample
        else:
            t0 = time.perf_counter()
            verdict = equiv(reference, candidate, alphabet, opts)
            timings["equivMs"] = done_ms(t0)
            findings = []
            cx = verdict.counterexample
    except BudgetExceeded as exc:
        timings["totalMs"] = done_ms(t_start)
        return _error([_diag("equiv", str(exc))], timings)

    response = {
        "status": verdict.status,
        "method": verdict.method,
        "counterexample": None,
        "findings": findings,
        "diagnostics": [],
        "timings": timings,
    }
    if verdict.bound is not None:
        response["bound"] = verdict.bound
    if cx is not None:
        response["counterexample"] = {
            "word": cx.word,
            "inReference": cx.in_left,
            "inCandidate": cx.in_right,
        }
    timings["totalMs"] = done_ms(t_start)
    return response
