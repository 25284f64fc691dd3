"""Differentiable forward chaining over valuation tensors.

One reasoning step evaluates every clause on the current valuation (gather
body atoms, multiply along the body, soft-or over substitutions), mixes the
clause outputs with softmaxed clause weights, soft-ors over weight rows and
finally soft-ors the result with the previous valuation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import dual as D
from . import kernels as K
from .grounding import (
    DEFAULT_BUDGET,
    FALSE_INDEX,
    TRUE_INDEX,
    GroundAtomTable,
    GroundProgram,
    check_budget,
    dense_index_tensor,
    enumerate_ground_atoms,
    ground_program,
)
from .logic import Atom, Clause, Language, LogicError

DEFAULT_GAMMA = 0.01
CHOSEN_WEIGHT = 100.0


class ReasonerError(ValueError):
    pass


def stratification_depth(clauses: Sequence[Clause]) -> int:
    """Longest chain of head-predicate dependencies (1 for flat programs)."""
    heads = {c.head.predicate for c in clauses}
    deps: dict = {}
    for c in clauses:
        deps.setdefault(c.head.predicate, set()).update(b.predicate for b in c.body if b.predicate in heads)
    depth: dict = {}

    def visit(p, stack):
        if p in depth:
            return depth[p]
        if p in stack:
            raise ReasonerError(f"recursive predicate {p.name}: pass the number of steps explicitly")
        stack.add(p)
        d = 1 + max((visit(q, stack) for q in deps.get(p, ())), default=0)
        stack.discard(p)
        depth[p] = d
        return d

    return max((visit(p, set()) for p in heads), default=0)


def one_hot_weights(n_clauses: int, chosen: Sequence[int] | None = None, scale: float = CHOSEN_WEIGHT) -> np.ndarray:
    """``M x C`` weights whose row softmax picks ``chosen[m]`` (default: every clause once)."""
    chosen = list(range(n_clauses)) if chosen is None else list(chosen)
    W = np.zeros((len(chosen), n_clauses))
    W[np.arange(len(chosen)), chosen] = scale
    return W


@dataclass
class Prediction:
    probabilities: np.ndarray  # B x n_targets
    labels: np.ndarray

    @property
    def single_target(self) -> bool:
        return self.probabilities.shape[1] == 1


def predict(V, table: GroundAtomTable, targets: Sequence[Atom]) -> Prediction:
    """Target columns of ``V``; label is 1/0 at 0.5 for one target, else 1-based argmax."""
    if not targets:
        raise ReasonerError("no target atoms")
    cols = [table.index_of(t) for t in targets]
    probs = np.asarray(D.value(V))[:, cols]
    if len(cols) == 1:
        labels = (probs[:, 0] >= 0.5).astype(int)
    else:
        labels = np.argmax(probs, axis=1) + 1  # first maximum wins ties
    return Prediction(probs, labels)


# ---------------------------------------------------------------------------
# dense reference path (operates directly on the C x G x S x L index tensor)
# ---------------------------------------------------------------------------

def clause_function(V, index_i: np.ndarray, gamma: float = DEFAULT_GAMMA, scope: str = "global"):
    """One-step consequences ``B x G`` of a single clause from its ``G x S x L`` index slice."""
    B, G = V.shape
    _, S, L = index_i.shape
    Vt = K.expand(D.expand_dims(D.expand_dims(V, 2), 3), (B, G, S, L))
    It = np.broadcast_to(index_i, (B, G, S, L))
    body = K.prod_d(K.gather1(Vt, It), 3)
    return K.softor(body, 2, gamma, scope)


def compose_program(Cstack, W, gamma: float = DEFAULT_GAMMA, scope: str = "global"):
    """Weighted clause mixture ``B x G`` from stacked clause outputs ``C x B x G``."""
    C, B, G = Cstack.shape
    W_shape = D.value(W).shape
    if len(W_shape) != 2 or W_shape[1] != C:
        raise ReasonerError(f"clause weights must be M x {C}, got {W_shape}")
    M = W_shape[0]
    Ws = K.softmax_d(W, 1)
    Wt = K.expand(Ws.reshape(M, C, 1, 1), (M, C, B, G))
    Ct = K.expand(Cstack.reshape(1, C, B, G), (M, C, B, G))
    H = K.sum_d(K.elementwise_mul(Wt, Ct), 1)
    return K.softor(H, 0, gamma, scope)


def _pin_special(V):
    V = D.set_columns(V, [FALSE_INDEX], 0.0)
    return D.set_columns(V, [TRUE_INDEX], 1.0)


def amalgamate(V, R, gamma: float = DEFAULT_GAMMA, scope: str = "global"):
    return _pin_special(K.softor(K.stack_d([V, R], 1), 1, gamma, scope))


def forward_dense(V0, index: np.ndarray, W, steps: int, gamma: float = DEFAULT_GAMMA, scope: str = "global"):
    V = V0
    for _ in range(steps):
        Cs = K.stack_d([clause_function(V, index[i], gamma, scope) for i in range(index.shape[0])], 0)
        V = amalgamate(V, compose_program(Cs, W, gamma, scope), gamma, scope)
    return V


# ---------------------------------------------------------------------------
# compiled program (row-sparse evaluation of the same computation)
# ---------------------------------------------------------------------------

@dataclass
class CompiledProgram:
    """Clauses grounded against a fixed atom table, with weights and inference settings."""

    lang: Language
    grounded: GroundProgram
    weights: np.ndarray
    targets: tuple[Atom, ...]
    gamma: float = DEFAULT_GAMMA
    steps: int = 1
    scope: str = "global"
    budget: int = DEFAULT_BUDGET
    _plans: list = field(default=None, repr=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ReasonerError("gamma must be positive")
        if self.steps < 0:
            raise ReasonerError("steps must be >= 0")
        if self.scope not in K.NORMALIZATION_SCOPES:
            raise ReasonerError(f"scope must be one of {K.NORMALIZATION_SCOPES}")
        W = D.value(self.weights)
        if W.ndim != 2 or W.shape[1] != len(self.clauses) or W.shape[0] < 1 or not np.isfinite(W).all():
            raise ReasonerError(f"clause weights must be finite M x {len(self.clauses)}, got shape {W.shape}")
        for t in self.targets:
            self.table.index_of(t)
        self._plans = [self._plan(g) for g in self.grounded.groundings]

    @property
    def clauses(self) -> tuple[Clause, ...]:
        return self.grounded.clauses

    @property
    def table(self) -> GroundAtomTable:
        return self.grounded.table

    @cached_property
    def index_tensor(self) -> np.ndarray:
        return dense_index_tensor(self.grounded, self.budget)

    def _plan(self, g):
        G = len(self.table)
        n_body = len(g.clause.body)
        block = g.block[:, :, :n_body]  # true-atom padding multiplies by exactly 1
        col_map = np.full(G, len(g.rows), dtype=np.int64)
        col_map[g.rows] = np.arange(len(g.rows))
        extra_dead = self.grounded.S - g.block.shape[1]
        return block, col_map, extra_dead

    def with_weights(self, W) -> "CompiledProgram":
        return CompiledProgram(self.lang, self.grounded, W, self.targets, self.gamma, self.steps,
                               self.scope, self.budget)

    def clause_raw(self, V, i: int):
        """Unnormalized soft-or over substitutions for clause ``i``, shape ``B x G``."""
        block, col_map, extra_dead = self._plans[i]
        B = V.shape[0]
        S, gamma = self.grounded.S, self.gamma
        const = gamma * np.log(S)  # every slot false: gamma * log(S * e^0)
        if block.shape[0] == 0:
            return np.full((B, len(self.table)), const)
        body = K.prod_d(D.take(V, block, axis=1), 3)  # B x R x S_i
        m = D.value(body).max(axis=2, keepdims=True)
        if extra_dead:
            m = np.maximum(m, 0.0)
        total = D.sum(D.exp((body - m) / gamma), axis=2)
        if extra_dead:
            total = total + extra_dead * np.exp(-m[..., 0] / gamma)
        raw_rows = m[..., 0] + gamma * D.log(total)
        padded = D.concatenate([raw_rows, np.full((B, 1), const)], axis=1)
        return D.take(padded, col_map, axis=1)

    def clause_outputs(self, V):
        outs = []
        for i in range(len(self.clauses)):
            raw = self.clause_raw(V, i)
            outs.append(raw / K.normalizer(raw, self.scope))
        return K.stack_d(outs, 0)

    def step(self, V, weights=None):
        W = self.weights if weights is None else weights
        R = compose_program(self.clause_outputs(V), W, self.gamma, self.scope)
        return amalgamate(V, R, self.gamma, self.scope)

    def infer(self, V0, steps: int | None = None, weights=None):
        V = _pin_special(V0)
        for _ in range(self.steps if steps is None else steps):
            V = self.step(V, weights)
        return V

    def predict(self, V_T) -> Prediction:
        return predict(V_T, self.table, self.targets)


def compile_program(
    lang: Language,
    clauses: Sequence[Clause],
    targets: Sequence[Atom],
    weights=None,
    gamma: float = DEFAULT_GAMMA,
    steps: int | None = None,
    scope: str = "global",
    budget: int = DEFAULT_BUDGET,
    table: GroundAtomTable | None = None,
) -> CompiledProgram:
    """Ground ``clauses`` over ``lang`` and bundle them with weights and settings.

    Weights default to one row per clause choosing that clause, and steps to
    the program's stratification depth.
    """
    if not clauses:
        raise ReasonerError("program has no clauses")
    table = table or enumerate_ground_atoms(lang)
    try:
        grounded = ground_program(clauses, table, lang)
    except LogicError as exc:
        raise ReasonerError(str(exc)) from exc
    check_budget(grounded, budget)
    if weights is None:
        weights = one_hot_weights(len(clauses))
    if steps is None:
        steps = stratification_depth(clauses)
    return CompiledProgram(lang, grounded, weights, tuple(targets), gamma, steps, scope, budget)
