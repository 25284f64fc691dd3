"""Scikit-learn style front ends.

``FactsConverter`` maps object tensors to initial valuations,
``ForwardReasoner`` runs the soft forward chaining on valuations, and
``ForwardChainingClassifier`` chains both with concept fitting.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_gamma, check_positive_int, check_Z, resolve_program
from .grounding import DEFAULT_BUDGET, enumerate_ground_atoms
from .pipeline import CONCEPT_EXAMPLES, fit_concepts, infer_tensor, required_concepts
from .reasoner import DEFAULT_GAMMA, compile_program
from .valuation import AttributeEncoding, convert_facts


class FactsConverter(TransformerMixin, BaseEstimator):
    """Object tensor ``B x E x D`` to initial valuation ``B x G``."""

    def __init__(self, program="twopairs", concept_params=None):
        self.program = program
        self.concept_params = concept_params

    def fit(self, X=None, y=None):
        self.program_ = resolve_program(self.program)
        self.table_ = enumerate_ground_atoms(self.program_.lang)
        self.encoding_ = AttributeEncoding.from_language(self.program_.lang, self.program_.layout)
        missing = [c for c in required_concepts(self.program_.lang) if c not in (self.concept_params or {})]
        if missing:
            raise ValueError(f"missing parameters for neural predicates {missing}")
        return self

    def transform(self, X):
        check_is_fitted(self, "table_")
        Z = check_Z(X, self.program_)
        p = self.program_
        return convert_facts(Z, self.table_, p.lang, p.layout, p.background, self.concept_params, self.encoding_)


class ForwardReasoner(TransformerMixin, BaseEstimator):
    """Initial valuation ``B x G`` to the valuation after ``steps`` soft forward-chaining steps."""

    def __init__(self, program="twopairs", gamma=DEFAULT_GAMMA, steps=None, scope="global", weights=None,
                 budget=DEFAULT_BUDGET):
        self.program = program
        self.gamma = gamma
        self.steps = steps
        self.scope = scope
        self.weights = weights
        self.budget = budget

    def fit(self, X=None, y=None):
        check_gamma(self.gamma)
        check_positive_int(self.steps, "steps", allow_none=True, minimum=0)
        p = resolve_program(self.program)
        self.program_ = p
        self.compiled_ = compile_program(p.lang, p.clauses, p.targets, weights=self.weights, gamma=self.gamma,
                                         steps=self.steps, scope=self.scope, budget=self.budget)
        return self

    def transform(self, X):
        check_is_fitted(self, "compiled_")
        V = np.asarray(X, dtype=np.float64)
        G = len(self.compiled_.table)
        if V.ndim != 2 or V.shape[1] != G:
            raise ValueError(f"valuation must be B x {G}, got shape {V.shape}")
        return self.compiled_.infer(V)


class ForwardChainingClassifier(ClassifierMixin, BaseEstimator):
    """Classify object tensors with a fixed rule program.

    ``fit`` fits every parameterized neural predicate the program uses on its
    synthetic concept set (unless ``concept_params`` supplies them) and
    compiles the program; ``y`` only fixes ``classes_``.
    """

    def __init__(self, program="twopairs", gamma=DEFAULT_GAMMA, steps=None, scope="global", weights=None,
                 concept_params=None, n_concept_examples=CONCEPT_EXAMPLES, batch_size=None, random_state=0,
                 budget=DEFAULT_BUDGET):
        self.program = program
        self.gamma = gamma
        self.steps = steps
        self.scope = scope
        self.weights = weights
        self.concept_params = concept_params
        self.n_concept_examples = n_concept_examples
        self.batch_size = batch_size
        self.random_state = random_state
        self.budget = budget

    def fit(self, X=None, y=None):
        check_gamma(self.gamma)
        check_positive_int(self.batch_size, "batch_size", allow_none=True)
        p = resolve_program(self.program)
        self.program_ = p
        params = dict(self.concept_params or {})
        todo = [c for c in required_concepts(p.lang) if c not in params]
        if todo:
            check_positive_int(self.n_concept_examples, "n_concept_examples")
            params.update(fit_concepts(todo, self.n_concept_examples, self.random_state))
        self.concept_params_ = params
        self.compiled_ = compile_program(p.lang, p.clauses, p.targets, weights=self.weights, gamma=self.gamma,
                                         steps=self.steps, scope=self.scope, budget=self.budget)
        n = len(p.targets)
        self.classes_ = np.array([0, 1]) if n == 1 else np.arange(1, n + 1)
        if X is not None:
            check_Z(X, p)
        return self

    def target_probabilities(self, X):
        check_is_fitted(self, "compiled_")
        Z = check_Z(X, self.program_)
        VT = infer_tensor(self.compiled_, Z, self.program_, self.concept_params_, self.batch_size)
        return self.compiled_.predict(VT).probabilities

    def predict_proba(self, X):
        """Class scores: ``[1-p, p]`` for a single target, else the raw target probabilities."""
        P = self.target_probabilities(X)
        return np.column_stack([1 - P[:, 0], P[:, 0]]) if P.shape[1] == 1 else P

    def predict(self, X):
        check_is_fitted(self, "compiled_")
        Z = check_Z(X, self.program_)
        VT = infer_tensor(self.compiled_, Z, self.program_, self.concept_params_, self.batch_size)
        return self.compiled_.predict(VT).labels
