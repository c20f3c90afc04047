"""Cooking programs: a small IR for recipes, its graph view, and evaluation kernels."""

__version__ = "0.1.0"

from .dsl import ParseError, parse_program, parse_programs, print_program
from .errors import CookirError
from .graph import (CandidateSet, CookingGraph, FunctionDag, count_linear_extensions, from_graph,
                    is_valid_sequence, linear_extensions, program_candidates, to_graph)
from .ir import (Command, Entity, EntityKind, Lit, Program, SymbolTable, Var, Vocabulary,
                 detokenize, tokenize_program, validate_program)

__all__ = [
    "CandidateSet", "Command", "CookingGraph", "CookirError", "Entity", "EntityKind",
    "FunctionDag", "Lit", "ParseError", "Program", "SymbolTable", "Var", "Vocabulary",
    "count_linear_extensions", "detokenize", "from_graph", "is_valid_sequence",
    "linear_extensions", "parse_program", "parse_programs", "print_program",
    "program_candidates", "to_graph", "tokenize_program", "validate_program",
]
