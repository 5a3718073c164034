"""NILE: a compositional expression language for formal languages.

Library surface: parsing and rendering of expressions, desugaring to the
core language, membership evaluation, compilation of the regular fragment
to finite automata, exact/bounded equivalence checking, tree-diff based
explanations, the built-in exercise corpus, a grading facade (CLI + HTTP
service), and a dataset scoring pipeline.
"""

__version__ = "0.1.0"

from .syntax import Alphabet, expand_sugar, free_vars, is_core, validate
from .parser import ParseError, parse, render
from .evaluator import EvalBudget, evaluate

__all__ = [
    "Alphabet", "EvalBudget", "ParseError", "evaluate", "expand_sugar",
    "free_vars", "is_core", "parse", "render", "validate", "__version__",
]
