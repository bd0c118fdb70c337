"""Exact weighted model counting for two-variable logic with counting.

A sentence in C2 (two variables, counting quantifiers, equality), predicate
weights, and optional linear cardinality constraints compile down to a
first-order core whose models decompose by cell; counts come out exactly,
at any domain size, without grounding.  A brute-force oracle, a Markov
logic front-end, and a command-line interface sit on top.
"""

from .engine import CellGraph, EngineLimit
from .logic import (
    And,
    Atom,
    Bottom,
    CardinalityAtom,
    CountExists,
    Equality,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    Top,
    Vocabulary,
    WeightMap,
    free_variables,
    validate_c2,
)
from .mln import MlnError, MlnFormula, encode_mln, exp_multiplier, marginal, partition_function
from .oracle import OracleCapExceeded, brute_wfomc, brute_wmc_table
from .parser import ParseError, ProblemFile, parse_formula_text, parse_problem, print_formula
from .rationals import Rat, rat
from .transform import CompiledProblem, compile_problem
from .wmc import (
    InterpolationCheckFailed,
    LiftedCounter,
    TableError,
    WmcTable,
    count,
    count_detailed,
    dft_wmc_table,
    joint_table,
    wmc_table,
)

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "Bottom", "CardinalityAtom", "CellGraph", "CompiledProblem",
    "CountExists", "EngineLimit", "Equality", "Exists", "Forall", "Formula",
    "Iff", "Implies", "InterpolationCheckFailed", "LiftedCounter", "MlnError",
    "MlnFormula", "Not", "Or", "OracleCapExceeded", "ParseError", "Pred",
    "ProblemFile", "Rat", "TableError", "Top", "Vocabulary", "WeightMap",
    "WmcTable", "brute_wfomc", "brute_wmc_table", "compile_problem", "count",
    "count_detailed", "dft_wmc_table", "encode_mln", "exp_multiplier",
    "free_variables", "joint_table", "marginal", "parse_formula_text",
    "parse_problem", "partition_function", "print_formula", "rat",
    "validate_c2", "wmc_table",
]
