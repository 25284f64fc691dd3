"""Exact boolean forward chaining, the reference the soft reasoner is checked against."""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np

from .logic import FALSE, TRUE, Atom, Clause, Constant, Language, Variable
from .scenes import (
    CLOSEBY_MAX,
    ONLINE_MAX,
    SIDE_SPLIT,
    ClevrObject,
    KandinskyObject,
    Scene,
    tls_residual,
)


class OracleError(RuntimeError):
    pass


class _FactIndex:
    """Facts grouped by predicate and by the values at any subset of argument positions."""

    def __init__(self, facts):
        self.by_pred: dict = {}
        for f in facts:
            self.by_pred.setdefault(f.predicate, []).append(f)
        self._cache: dict = {}

    def lookup(self, pred, positions: tuple, values: tuple):
        key = (pred, positions)
        table = self._cache.get(key)
        if table is None:
            table = {}
            for f in self.by_pred.get(pred, ()):
                table.setdefault(tuple(f.terms[k] for k in positions), []).append(f)
            self._cache[key] = table
        return table.get(values, ())


def _join_order(body):
    """Body atoms reordered so each one shares as many variables as possible with those before it."""
    remaining, order, bound = list(body), [], set()
    while remaining:
        best = min(remaining, key=lambda a: sum(isinstance(t, Variable) and t not in bound for t in a.terms))
        remaining.remove(best)
        order.append(best)
        bound.update(t for t in best.terms if isinstance(t, Variable))
    return order


def _clause_consequences(clause: Clause, index: _FactIndex, lang: Language) -> set:
    head_vars = {t for t in clause.head.terms if isinstance(t, Variable)}
    body_vars = {t for b in clause.body for t in b.terms if isinstance(t, Variable)} - head_vars
    derived = set()
    body = _join_order(clause.body)

    def emit(binding):
        # existential variables of one datatype must take pairwise distinct constants
        chosen = [binding[v] for v in body_vars]
        if len(set(chosen)) != len(chosen):
            return
        free = [v for v in head_vars if v not in binding]
        doms = []
        for v in free:
            pos = next(k for k, t in enumerate(clause.head.terms) if t == v)
            doms.append(lang.domain(clause.head.predicate.arg_datatypes[pos]))
        for combo in itertools.product(*doms):
            b = {**binding, **dict(zip(free, combo))}
            derived.add(Atom(clause.head.predicate, tuple(b.get(t, t) for t in clause.head.terms)))

    def join(k, binding, used):
        if k == len(body):
            emit(binding)
            return
        atom = body[k]
        positions, values, open_vars = [], [], []
        for pos, t in enumerate(atom.terms):
            if isinstance(t, Variable) and t not in binding:
                open_vars.append((pos, t))
            else:
                positions.append(pos)
                values.append(binding.get(t, t))
        for fact in index.lookup(atom.predicate, tuple(positions), tuple(values)):
            b, u = dict(binding), used
            for pos, v in open_vars:
                c = fact.terms[pos]
                if v in b:
                    if b[v] != c:  # variable repeated within the atom
                        break
                    continue
                if v in body_vars:
                    # constants are typed, so one pool of used constants covers every datatype
                    if c in u:
                        break
                    u = u | {c}
                b[v] = c
            else:
                join(k + 1, b, u)

    join(0, {}, frozenset())
    return derived


def forward_chain(clauses: Sequence[Clause], facts: Iterable[Atom], lang: Language,
                  max_rounds: int = 100, return_rounds: bool = False):
    """Naive bottom-up closure of ``facts`` under ``clauses``.

    Each round fires every clause on the current set. Raises
    :class:`OracleError` if no fixpoint is reached within ``max_rounds``.
    With ``return_rounds`` the number of rounds that added facts is returned too.
    """
    current = set(facts) | {TRUE}
    current.discard(FALSE)
    rounds = 0
    while True:
        index = _FactIndex(current)
        new = set()
        for clause in clauses:
            new |= _clause_consequences(clause, index, lang)
        new -= current
        if not new:
            break
        if rounds == max_rounds:
            raise OracleError(f"no fixpoint after {max_rounds} rounds")
        current |= new
        rounds += 1
    closure = frozenset(current)
    return (closure, rounds) if return_rounds else closure


def entails(clauses: Sequence[Clause], facts: Iterable[Atom], query: Atom, lang: Language,
            max_rounds: int = 100) -> bool:
    if query == TRUE:
        return True
    return query in forward_chain(clauses, facts, lang, max_rounds)


# ---------------------------------------------------------------------------
# crisp facts of symbolic scenes
# ---------------------------------------------------------------------------

def _objects(lang: Language) -> list[Constant]:
    return lang.constants_of_kind("object")


def scene_facts(scene: Scene, lang: Language) -> set[Atom]:
    """Ground facts that hold in a noise-free scene, restricted to the language's predicates.

    Objects fill the language's object constants in declaration order.
    """
    consts = _objects(lang)
    objs = scene.objects
    if len(objs) > len(consts):
        raise OracleError(f"scene has {len(objs)} objects, language only {len(consts)}")
    preds = {p.valuation: p for p in lang.neural_predicates}
    inputs = lang.constants_of_kind("input")
    facts: set[Atom] = set()
    named = {c.name: c for c in lang.constants}

    def add(valuation, *args):
        p = preds.get(valuation)
        if p is not None:
            facts.add(Atom(p, tuple(args)))

    attrs = ("shape", "color") if scene.dataset == "kandinsky" else ("shape", "color", "size", "material")
    for k, o in enumerate(objs):
        for img in inputs:
            add("in", consts[k], img)
        for a in attrs:
            if a in preds:
                add(a, consts[k], named[getattr(o, a)])

    if scene.dataset == "kandinsky":
        centers = np.array([[o.x, o.y] for o in objs]).reshape(-1, 2)
        if "closeby" in preds:
            for a, b in itertools.product(range(len(objs)), repeat=2):
                if np.hypot(*(centers[a] - centers[b])) <= CLOSEBY_MAX:
                    add("closeby", consts[a], consts[b])
        if "online" in preds and len(objs) >= 1:
            tuples = np.array(list(itertools.product(range(len(objs)), repeat=5)))
            res = tls_residual(centers[tuples])
            for tup in tuples[res <= ONLINE_MAX]:
                add("online", *(consts[t] for t in tup))
    else:
        for k, o in enumerate(objs):
            if o.x < SIDE_SPLIT:
                add("leftside", consts[k])
            if o.x > SIDE_SPLIT:
                add("rightside", consts[k])
        for a, b in itertools.permutations(range(len(objs)), 2):
            if objs[a].y < objs[b].y:
                add("front", consts[a], consts[b])
    return facts


def label_scene(scene: Scene, clauses: Sequence[Clause], lang: Language, targets: Sequence[Atom],
                background: Iterable[Atom] = ()) -> int:
    """Oracle label: 1/0 for a single target, else the 1-based index of the unique entailed target (0 if none or several)."""
    closure = forward_chain(clauses, scene_facts(scene, lang) | set(background), lang)
    hits = [i for i, t in enumerate(targets) if t in closure]
    if len(targets) == 1:
        return int(bool(hits))
    return hits[0] + 1 if len(hits) == 1 else 0


__all__ = [
    "OracleError",
    "forward_chain",
    "entails",
    "scene_facts",
    "label_scene",
    "KandinskyObject",
    "ClevrObject",
]
