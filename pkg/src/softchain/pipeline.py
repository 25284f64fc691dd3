"""Glue between scenes, fitted concepts and compiled programs."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .concepts import fit_concept
from .datagen import CONCEPT_LAYOUT, gen_concept_set
from .logic import Language
from .programs import Program
from .reasoner import DEFAULT_GAMMA, CompiledProgram, Prediction, compile_program
from .scenes import Scene, scene_to_tensor
from .valuation import PARAM_SIZES, AttributeEncoding, convert_facts

CONCEPT_EXAMPLES = 1000  # per class


def required_concepts(lang: Language) -> list[str]:
    return sorted({p.valuation for p in lang.neural_predicates if p.valuation in PARAM_SIZES})


def fit_concepts(names: Sequence[str], n_per_class: int = CONCEPT_EXAMPLES, seed: int = 0) -> dict[str, np.ndarray]:
    """Fit each parameterized concept on its own synthetic set (seed offset by position)."""
    params = {}
    for k, name in enumerate(sorted(names)):
        X, y = gen_concept_set(name, n_per_class, seed + k)
        params[name] = fit_concept(name, X, y, CONCEPT_LAYOUT[name], seed=seed)
    return params


def compile_bundle(program: Program, gamma: float = DEFAULT_GAMMA, steps: int | None = None,
                   scope: str = "global", targets=None, **kw) -> CompiledProgram:
    return compile_program(program.lang, program.clauses, targets or program.targets, gamma=gamma,
                           steps=steps, scope=scope, **kw)


def infer_tensor(cp: CompiledProgram, Z, program: Program, params: Mapping | None, batch: int | None = None):
    """Final valuations for ``Z`` in chunks of ``batch`` rows (all at once when None)."""
    B = Z.shape[0]
    batch = B if batch is None else batch
    if batch < 1:
        raise ValueError("batch size must be >= 1")
    enc = AttributeEncoding.from_language(program.lang, program.layout)
    out = []
    for start in range(0, B, batch):
        V0 = convert_facts(Z[start:start + batch], cp.table, program.lang, program.layout,
                           program.background, params, enc)
        out.append(np.asarray(cp.infer(V0)))
    return np.concatenate(out, axis=0) if out else np.zeros((0, len(cp.table)))


def classify_scenes(cp: CompiledProgram, scenes: Sequence[Scene], program: Program, params: Mapping | None,
                    batch: int | None = None, noise=None) -> Prediction:
    Z = scene_to_tensor(scenes, program.n_objects)
    if noise is not None:
        Z = noise(Z)
    return cp.predict(infer_tensor(cp, Z, program, params, batch))


def accuracy(pred: Prediction, scenes: Sequence[Scene]) -> float:
    y = np.array([s.label for s in scenes])
    return float((pred.labels == y).mean()) if len(y) else float("nan")
