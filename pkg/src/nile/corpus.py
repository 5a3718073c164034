"""Built-in exercise corpus: six regular and five context-free languages,
with expressions in the concrete syntax and a self-check harness.

The regular entries carry an equivalent regex; the self-check proves the
pair equivalent through the automata route.  The context-free entries are
checked by comparing the evaluator against brute-force set definitions on
all short words.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

from .automata import (compile_regular, determinize, minimize, parse_regex,
                       shortest_in_sym_diff)
from .evaluator import Evaluator
from .parser import parse, render
from .syntax import Alphabet, expand_sugar, validate


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    alphabet: str
    format: str  # Set | RE | NFA | DFA | CFG | PDA
    nile_text: str
    regex_text: Optional[str]
    english: str
    german: str


def corpus_entries() -> list[CorpusEntry]:
    raw = json.loads(resources.files("nile.data").joinpath("corpus.json")
                     .read_text("utf-8"))
    return [CorpusEntry(r["id"], r["alphabet"], r["format"], r["nileText"],
                        r.get("regexText"), r["english"], r["german"])
            for r in raw]


# Brute-force set definitions used as oracles for the context-free entries.

def _c1(w: str) -> bool:
    return w.count("b") >= w.count("a")


def _c2(w: str) -> bool:
    n = w.count("a")
    return w == "a" * n + "b" * (len(w) - n) and w.count("b") == n


def _c3(w: str) -> bool:
    for m in range(len(w) + 1):
        for n in range(len(w) + 1):
            if w == "a" * m + "b" * n + "ab" * (m + n):
                return True
    return False


def _c4(w: str) -> bool:
    if "b" not in w:
        return False
    i = w.rfind("b")
    return w[:i].count("a") == len(w) - i - 1


def _c5(w: str) -> bool:
    return w.count("a") <= 2 * w.count("b")


ORACLES: dict[str, Callable[[str], bool]] = {
    "C1": _c1, "C2": _c2, "C3": _c3, "C4": _c4, "C5": _c5,
}

# Word-length bounds for the brute-force membership comparison.
CHECK_LEN = {2: 10, 3: 8}


@dataclass(frozen=True)
class CheckResult:
    id: str
    ok: bool
    detail: str


def _words(alphabet: Alphabet, max_len: int):
    from itertools import product
    yield ""
    for n in range(1, max_len + 1):
        for tup in product(alphabet.symbols, repeat=n):
            yield "".join(tup)


def corpus_selfcheck() -> list[CheckResult]:
    """Re-derive every entry's defining property; never raises."""
    results = []
    for entry in corpus_entries():
        try:
            results.append(_check_entry(entry))
        except Exception as exc:  # report, don't crash the harness
            results.append(CheckResult(entry.id, False, f"error: {exc}"))
    return results


def _check_entry(entry: CorpusEntry) -> CheckResult:
    alphabet = Alphabet.of(entry.alphabet)
    surface = parse(entry.nile_text)
    diags = validate(surface, alphabet)
    if diags:
        return CheckResult(entry.id, False, f"validate: {diags[0].message}")
    if parse(render(surface)) != surface:
        return CheckResult(entry.id, False, "render round-trip failed")
    core = expand_sugar(surface, alphabet)
    if entry.regex_text is not None:
        d_nile = minimize(determinize(compile_regular(core, alphabet)))
        d_re = minimize(determinize(parse_regex(entry.regex_text, alphabet)))
        diff = shortest_in_sym_diff(d_nile, d_re)
        if diff is not None:
            return CheckResult(entry.id, False,
                               f"regex mismatch on {diff!r}")
        return CheckResult(entry.id, True, "automata-equivalent to regex")
    oracle = ORACLES[entry.id]
    max_len = CHECK_LEN[len(alphabet.symbols)]
    ev = Evaluator(alphabet)
    checked = 0
    for w in _words(alphabet, max_len):
        got = ev.sat(core, w, 0, len(w), {}, {})
        if got != oracle(w):
            return CheckResult(entry.id, False,
                               f"membership mismatch on {w!r}: eval={got}")
        checked += 1
    return CheckResult(entry.id, True,
                       f"matches set oracle on {checked} words (len <= {max_len})")
