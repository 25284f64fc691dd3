"""Differentiable forward-chaining reasoning over object-centric scenes."""

from .concepts import ConceptClassifier, fit_concept
from .datagen import add_noise, gen_clevr_hans, gen_concept_set, gen_kandinsky
from .estimators import FactsConverter, ForwardChainingClassifier, ForwardReasoner
from .grounding import BudgetExceeded, GroundAtomTable, build_index_tensor, enumerate_ground_atoms
from .logic import Atom, Clause, Language, parse_clause, parse_language, parse_rules, unify
from .oracle import entails, forward_chain
from .programs import load_program
from .reasoner import CompiledProgram, compile_program
from .scenes import Scene, read_scenes, scene_to_tensor, write_scenes
from .valuation import convert_facts

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "BudgetExceeded",
    "Clause",
    "CompiledProgram",
    "ConceptClassifier",
    "FactsConverter",
    "ForwardChainingClassifier",
    "ForwardReasoner",
    "GroundAtomTable",
    "Language",
    "Scene",
    "add_noise",
    "build_index_tensor",
    "compile_program",
    "convert_facts",
    "entails",
    "enumerate_ground_atoms",
    "fit_concept",
    "forward_chain",
    "gen_clevr_hans",
    "gen_concept_set",
    "gen_kandinsky",
    "load_program",
    "parse_clause",
    "parse_language",
    "parse_rules",
    "read_scenes",
    "scene_to_tensor",
    "unify",
    "write_scenes",
]
