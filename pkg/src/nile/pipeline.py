"""Dataset scoring pipeline and the optional chat-completion bridge.

The dataset is JSONL, one labeled row per line (see ``DatasetRow``).  Rows
carry a task, a reference expression, a natural-language description, an
ambiguity category (1-5), optional model outputs (m1 yes/no, m2 regex or
grammar text, m3 expression text) and optional human annotations.  Scoring
replicates the three research-question metrics over slices of the data and
renders the result table as Markdown, CSV, and a bar-chart figure.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .automata import (compile_regular, determinize, minimize, parse_regex,
                       shortest_in_sym_diff)
from .equivalence import EquivOptions, equiv
from .errors import BudgetExceeded, EndpointError, TemplateMissing
from .parser import ParseError, SourceSpan, parse
from .syntax import Alphabet, expand_sugar, validate

CATEGORY_MIN, CATEGORY_MAX = 1, 5
EXCLUDED_CATEGORY = 5  # invalid submissions are never scored

METRICS = (
    ("rq1_m1", "RQ1 (M1) direct decision"),
    ("rq1_m2", "RQ1 (M2) via classical representation"),
    ("rq1_m3", "RQ1 (M3) via expression"),
    ("rq2_m2", "RQ2 (M2) semantic match"),
    ("rq2_m3", "RQ2 (M3) semantic match"),
    ("rq3_m2", "RQ3 (M2) syntactic match"),
    ("rq3_m3", "RQ3 (M3) syntactic match"),
)
BASE_SLICES = ("all", "regular", "contextfree")


@dataclass(frozen=True)
class DatasetRow:
    id: str
    task_id: str
    format: str
    alphabet: str
    reference_nile: str
    description: str
    category: int
    m1: Optional[str] = None
    m2: Optional[str] = None
    m3: Optional[str] = None
    semantic_correct: Optional[bool] = None
    syntactic_match: Optional[bool] = None


@dataclass(frozen=True)
class IngestDiagnostic:
    line: int
    message: str


def ingest(path: str) -> tuple[list[DatasetRow], list[IngestDiagnostic]]:
    """Read a JSONL dataset; malformed rows are reported and skipped."""
    rows: list[DatasetRow] = []
    diags: list[IngestDiagnostic] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                diags.append(IngestDiagnostic(line_no, f"invalid JSON: {exc}"))
                continue
            problem = _row_problem(data)
            if problem:
                diags.append(IngestDiagnostic(line_no, problem))
                continue
            outputs = data.get("modelOutputs") or {}
            ann = data.get("annotations") or {}
            rows.append(DatasetRow(
                id=str(data["id"]),
                task_id=data["taskId"],
                format=data.get("formatTag", ""),
                alphabet=data["alphabet"],
                reference_nile=data["referenceNile"],
                description=data.get("description", ""),
                category=data["category"],
                m1=outputs.get("m1"),
                m2=outputs.get("m2"),
                m3=outputs.get("m3"),
                semantic_correct=ann.get("semanticCorrect"),
                syntactic_match=ann.get("syntacticMatch"),
            ))
    return rows, diags


def _row_problem(data) -> Optional[str]:
    if not isinstance(data, dict):
        return "row is not a JSON object"
    for key in ("id", "taskId", "alphabet", "referenceNile", "category"):
        if key not in data:
            return f"missing field {key}"
    cat = data["category"]
    if not isinstance(cat, int) or not CATEGORY_MIN <= cat <= CATEGORY_MAX:
        return f"category out of range: {cat!r}"
    return None


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


@dataclass
class StatsTable:
    denominators: dict[str, int]
    counts: dict[str, dict[str, int]]  # metric -> slice -> count
    parse_failures: dict[str, int]
    unanswered: dict[str, int]
    excluded: int

    def percentage(self, metric: str, slice_name: str) -> float:
        denom = self.denominators.get(slice_name, 0)
        if denom == 0:
            return 0.0
        return round(100.0 * self.counts[metric].get(slice_name, 0) / denom, 2)

    def slices(self) -> list[str]:
        tasks = sorted(s for s in self.denominators if s.startswith("task:"))
        return list(BASE_SLICES) + tasks


@dataclass(frozen=True)
class ScoreOptions:
    # Modest bound keeps the per-row equivalence checks fast; differences in
    # realistic wrong answers show up on very short words.
    bound_l: int = 6


def _norm_yesno(text: Optional[str]) -> Optional[str]:
    if text is None:
        return None
    t = text.strip().lower()
    return t if t in ("yes", "no") else None


class _ReferenceCache:
    def __init__(self, bound_l: int):
        self.bound_l = bound_l
        self.core = {}
        self.dfa = {}

    def core_for(self, row: DatasetRow):
        key = (row.reference_nile, row.alphabet)
        if key not in self.core:
            alphabet = Alphabet.of(row.alphabet)
            tree = parse(row.reference_nile, alphabet)
            if validate(tree, alphabet):
                raise ValueError(f"reference for {row.task_id} does not validate")
            self.core[key] = (expand_sugar(tree, alphabet), alphabet)
        return self.core[key]

    def dfa_for(self, row: DatasetRow):
        key = (row.reference_nile, row.alphabet)
        if key not in self.dfa:
            core, alphabet = self.core_for(row)
            self.dfa[key] = minimize(determinize(compile_regular(core, alphabet)))
        return self.dfa[key]


def score(rows: list[DatasetRow], opts: ScoreOptions = ScoreOptions()) -> StatsTable:
    """Compute all metrics; pure in the rows (order-insensitive)."""
    scored = [r for r in rows if r.category != EXCLUDED_CATEGORY]
    excluded = len(rows) - len(scored)
    refs = _ReferenceCache(opts.bound_l)
    equiv_opts = EquivOptions(bound_l=opts.bound_l)

    denominators: dict[str, int] = {}
    counts = {metric: {} for metric, _ in METRICS}
    parse_failures = {"m2": 0, "m3": 0}
    unanswered = {"m1": 0, "m2": 0, "m3": 0}

    def slices_of(row: DatasetRow) -> tuple[str, ...]:
        kind = "regular" if row.task_id.startswith("R") else "contextfree"
        return ("all", kind, f"task:{row.task_id}")

    def bump(metric: str, row: DatasetRow):
        for s in slices_of(row):
            counts[metric][s] = counts[metric].get(s, 0) + 1

    for row in sorted(scored, key=lambda r: r.id):
        for s in slices_of(row):
            denominators[s] = denominators.get(s, 0) + 1
        cat = row.category

        # -- M1: direct yes/no ------------------------------------------------
        answer = _norm_yesno(row.m1)
        if answer is None:
            unanswered["m1"] += 1
        if ((cat == 2 and answer is not None)
                or (cat == 1 and answer == "yes")
                or (cat in (3, 4) and answer == "no")):
            bump("rq1_m1", row)

        # -- M3: expression route --------------------------------------------
        m3_same: Optional[bool] = None
        m3_parsed = False
        if row.m3 is None:
            unanswered["m3"] += 1
        else:
            ref_core, alphabet = refs.core_for(row)
            try:
                tree = parse(row.m3, alphabet)
                if validate(tree, alphabet):
                    raise ParseError(SourceSpan(0, len(row.m3)),
                                     "does not validate", ["valid expression"])
                cand = expand_sugar(tree, alphabet)
                m3_parsed = True
            except ParseError:
                parse_failures["m3"] += 1
            if m3_parsed:
                try:
                    verdict = equiv(ref_core, cand, alphabet, equiv_opts)
                    m3_same = verdict.status in ("equivalent", "bounded_equivalent")
                except BudgetExceeded:
                    m3_same = None
        if m3_parsed and (cat == 2 or (cat == 1 and m3_same)
                          or (cat in (3, 4) and not m3_same)):
            bump("rq1_m3", row)
        if m3_parsed and (row.semantic_correct if row.semantic_correct is not None
                          else (cat == 1 and bool(m3_same))):
            bump("rq2_m3", row)
        if row.m3 is not None and row.syntactic_match:
            bump("rq3_m3", row)

        # -- M2: classical representation route -------------------------------
        is_regex_task = row.task_id.startswith("R")
        m2_same: Optional[bool] = None
        m2_parsed = False
        if row.m2 is None:
            unanswered["m2"] += 1
        elif is_regex_task:
            alphabet = Alphabet.of(row.alphabet)
            try:
                nfa = parse_regex(row.m2, alphabet)
                m2_parsed = True
            except ParseError:
                parse_failures["m2"] += 1
            if m2_parsed:
                try:
                    dfa = minimize(determinize(nfa))
                    m2_same = shortest_in_sym_diff(refs.dfa_for(row), dfa) is None
                except BudgetExceeded:
                    m2_same = None
        if is_regex_task:
            if m2_parsed and (cat == 2 or (cat == 1 and m2_same)
                              or (cat in (3, 4) and not m2_same)):
                bump("rq1_m2", row)
            if m2_parsed and (row.semantic_correct
                              if row.semantic_correct is not None
                              else (cat == 1 and bool(m2_same))):
                bump("rq2_m2", row)
        else:
            # Grammar output: equivalence is not checked algorithmically;
            # score from the annotation.
            if row.m2 is not None and (cat == 2 or row.semantic_correct is True):
                bump("rq1_m2", row)
            if row.m2 is not None and row.semantic_correct is True:
                bump("rq2_m2", row)
        if row.m2 is not None and row.syntactic_match:
            bump("rq3_m2", row)

    return StatsTable(denominators, counts, parse_failures, unanswered, excluded)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def render_markdown(stats: StatsTable) -> str:
    cols = [s for s in BASE_SLICES if s in stats.denominators] or ["all"]
    header = "| metric |" + "".join(f" {c} # | {c} % |" for c in cols)
    sep = "|---" * (1 + 2 * len(cols)) + "|"
    lines = [header, sep]
    denoms = "| scored rows |" + "".join(
        f" {stats.denominators.get(c, 0)} | 100.00 |" for c in cols)
    lines.append(denoms)
    for metric, label in METRICS:
        cells = "".join(
            f" {stats.counts[metric].get(c, 0)} |"
            f" {stats.percentage(metric, c):.2f} |" for c in cols)
        lines.append(f"| {label} |{cells}")
    lines.append("")
    lines.append(f"Excluded (category {EXCLUDED_CATEGORY}): {stats.excluded}."
                 f"  Parse failures: m2={stats.parse_failures['m2']},"
                 f" m3={stats.parse_failures['m3']}."
                 f"  Unanswered: m1={stats.unanswered['m1']},"
                 f" m2={stats.unanswered['m2']}, m3={stats.unanswered['m3']}.")
    return "\n".join(lines) + "\n"


def render_csv(stats: StatsTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["metric", "slice", "count", "denominator", "percent"])
    for metric, _ in METRICS:
        for s in stats.slices():
            if s not in stats.denominators:
                continue
            writer.writerow([metric, s, stats.counts[metric].get(s, 0),
                             stats.denominators[s],
                             f"{stats.percentage(metric, s):.2f}"])
    return buf.getvalue()


def render_figure(stats: StatsTable, path: str):
    """Grouped bar chart of the percentage columns, written to `path`."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = [s for s in BASE_SLICES if s in stats.denominators] or ["all"]
    metrics = [m for m, _ in METRICS]
    labels = [label for _, label in METRICS]
    width = 0.8 / len(cols)
    fig, ax = plt.subplots(figsize=(11, 5))
    for k, col in enumerate(cols):
        xs = [i + k * width for i in range(len(metrics))]
        ys = [stats.percentage(m, col) for m in metrics]
        ax.bar(xs, ys, width=width, label=col)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(metrics))])
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("% correct")
    ax.set_ylim(0, 100)
    ax.legend()
    ax.set_title("Dataset scoring summary")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_reports(stats: StatsTable, out_dir: str, figure: bool = True) -> list[str]:
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    md_path = os.path.join(out_dir, "stats.md")
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write(render_markdown(stats))
    written.append(md_path)
    csv_path = os.path.join(out_dir, "stats.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(render_csv(stats))
    written.append(csv_path)
    if figure:
        png_path = os.path.join(out_dir, "stats.png")
        render_figure(stats, png_path)
        written.append(png_path)
    return written


# ---------------------------------------------------------------------------
# Chat-completion bridge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: str = ""
    model: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.5


_TEMPLATE_FILES = {"m1": "m1.md", "m2a": "m2a.md", "m2b": "m2b.md", "m3": "m3.md"}
_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


def load_template(kind: str, format_tag: Optional[str] = None) -> str:
    name = kind
    if kind == "m2":
        name = "m2b" if (format_tag or "").upper() in ("CFG", "PDA") else "m2a"
    filename = _TEMPLATE_FILES.get(name)
    if filename is None:
        raise TemplateMissing(kind)
    ref = resources.files("nile.data.prompts").joinpath(filename)
    if not ref.is_file():
        raise TemplateMissing(filename)
    return ref.read_text("utf-8")


def build_prompt(description: str, kind: str, alphabet: str,
                 format_tag: Optional[str] = None) -> str:
    template = load_template(kind, format_tag)
    alph = "{" + ", ".join(Alphabet.of(alphabet).symbols) + "}"
    return template.replace("%ALPH%", alph).replace("%DESCRIPTION%", description)


def llm_translate(description: str, prompt_kind: str, config: EndpointConfig,
                  alphabet: str = "ab", format_tag: Optional[str] = None,
                  session=None) -> str:
    """Send one chat-completion request (temperature 0) and return the raw
    model text.  Retries transient failures with exponential backoff."""
    import requests

    prompt = build_prompt(description, prompt_kind, alphabet, format_tag)
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    url = config.base_url.rstrip("/") + "/chat/completions"
    http = session or requests
    last_error = None
    for attempt in range(config.max_retries):
        try:
            resp = http.post(url, json=payload, headers=headers,
                             timeout=config.timeout)
            if resp.status_code in _TRANSIENT_STATUSES:
                last_error = f"HTTP {resp.status_code}"
            elif resp.status_code != 200:
                raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            else:
                data = resp.json()
                return data["choices"][0]["message"]["content"]
        except EndpointError:
            raise
        except Exception as exc:  # connection errors, bad JSON shape
            last_error = str(exc)
        if attempt + 1 < config.max_retries:
            time.sleep(config.backoff * (2 ** attempt))
    raise EndpointError(f"endpoint failed after {config.max_retries} attempts:"
                        f" {last_error}")
