"""Ground-atom universe, existential substitutions and the clause index tensor."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .logic import (
    FALSE,
    TRUE,
    Atom,
    Clause,
    Constant,
    DataType,
    Language,
    LogicError,
    Predicate,
    Substitution,
    Variable,
    apply_substitution,
    unify,
    variables_of,
)

FALSE_INDEX = 0
TRUE_INDEX = 1
DEFAULT_BUDGET = 500_000_000


class GroundingError(LogicError):
    pass


class BudgetExceeded(RuntimeError):
    """The dense index tensor would exceed the element budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(
            f"index tensor needs {required} elements (C*G*S*L), budget is {budget}; "
            "raise the budget or shrink the language"
        )
        self.required = required
        self.budget = budget


class GroundAtomTable:
    """Ordered ground-atom universe with the false atom at 0 and the true atom at 1."""

    def __init__(self, atoms: Iterable[Atom]):
        self.atoms: tuple[Atom, ...] = (FALSE, TRUE, *atoms)
        self.index: dict[Atom, int] = {}
        for i, atom in enumerate(self.atoms):
            if not atom.is_ground:
                raise GroundingError(f"non-ground atom {atom} in ground-atom table")
            if atom in self.index:
                raise GroundingError(f"duplicate ground atom {atom}")
            self.index[atom] = i
        self._by_predicate: dict[Predicate, list[int]] = {}
        for i, atom in enumerate(self.atoms[2:], start=2):
            self._by_predicate.setdefault(atom.predicate, []).append(i)

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, i: int) -> Atom:
        return self.atoms[i]

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.index

    def __iter__(self):
        return iter(self.atoms)

    def index_of(self, atom: Atom) -> int:
        try:
            return self.index[atom]
        except KeyError:
            raise GroundingError(f"ground atom {atom} is not in the ground-atom table") from None

    def indices_of_predicate(self, pred: Predicate) -> list[int]:
        return self._by_predicate.get(pred, [])

    def listing(self) -> str:
        return "".join(f"{i}\t{atom}\n" for i, atom in enumerate(self.atoms))


def enumerate_ground_atoms(lang: Language, include: Iterable[Predicate] | None = None) -> GroundAtomTable:
    """All well-typed ground instances of the included predicates.

    Order is predicate declaration order, then the lexicographic argument
    tuple over constant declaration order.
    """
    include = set(lang.predicates if include is None else include)
    atoms = []
    for pred in lang.predicates:
        if pred not in include:
            continue
        domains = []
        for dt in pred.arg_datatypes:
            dom = lang.domain(dt)
            if not dom:
                raise GroundingError(f"empty domain for datatype {dt.name} required by {pred.name}")
            domains.append(dom)
        atoms.extend(Atom(pred, args) for args in itertools.product(*domains))
    return GroundAtomTable(atoms)


def variable_datatypes(atoms: Sequence[Atom]) -> dict[Variable, DataType]:
    types: dict[Variable, DataType] = {}
    for atom in atoms:
        for term, dt in zip(atom.terms, atom.predicate.arg_datatypes):
            if isinstance(term, Variable):
                if types.setdefault(term, dt) != dt:
                    raise GroundingError(f"variable {term} used with datatypes {types[term]} and {dt}")
    return types


def enumerate_substitutions(clause: Clause, fact: Atom, lang: Language) -> list[Substitution]:
    """Existential substitutions deriving ``fact`` with ``clause``.

    The head unifier is applied first; the remaining body variables range
    over their datatype domains, and two variables of the same datatype
    never take the same constant. Order is lexicographic over domain order
    with variables in first-occurrence order.
    """
    theta_head = unify(clause.head, fact)
    if theta_head is None:
        return []
    body = [apply_substitution(b, theta_head) for b in clause.body]
    exist_vars = variables_of(*body)
    if not exist_vars:
        return [{}]
    types = variable_datatypes(body)
    domains = [lang.domain(types[v]) for v in exist_vars]

    subs: list[Substitution] = []
    chosen: list[Constant] = []

    def extend(k: int):
        if k == len(exist_vars):
            subs.append(dict(zip(exist_vars, chosen)))
            return
        for c in domains[k]:
            # c.datatype == types[exist_vars[k]], so membership encodes per-datatype injectivity
            if c in chosen:
                continue
            chosen.append(c)
            extend(k + 1)
            chosen.pop()

    extend(0)
    return subs


@dataclass(frozen=True)
class ClauseGrounding:
    """Index rows of one clause restricted to the facts its head unifies with.

    ``rows[r]`` is the ground-atom index of the derived fact, ``block[r]`` the
    ``[S_i, L]`` body indices for its substitutions (dead slots false-filled,
    short bodies true-padded) and ``n_subs[r]`` the number of live slots.
    """

    clause: Clause
    rows: np.ndarray
    block: np.ndarray
    n_subs: np.ndarray


@dataclass(frozen=True)
class GroundProgram:
    clauses: tuple[Clause, ...]
    table: GroundAtomTable
    groundings: tuple[ClauseGrounding, ...]
    S: int
    L: int

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (len(self.clauses), len(self.table), self.S, self.L)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


def ground_program(clauses: Sequence[Clause], table: GroundAtomTable, lang: Language) -> GroundProgram:
    if not clauses:
        raise GroundingError("program has no clauses")
    L = max(1, max(len(c.body) for c in clauses))
    per_clause = []
    S = 0
    for clause in clauses:
        rows, slices = [], []
        for j in table.indices_of_predicate(clause.head.predicate):
            fact = table[j]
            theta_head = unify(clause.head, fact)
            if theta_head is None:
                continue
            subs = enumerate_substitutions(clause, fact, lang)
            body = [apply_substitution(b, theta_head) for b in clause.body]
            idx = [[table.index_of(apply_substitution(b, th)) for b in body] for th in subs]
            rows.append(j)
            slices.append(idx)
            S = max(S, len(subs))
        per_clause.append((clause, rows, slices))
    S = max(S, 1)

    groundings = []
    for clause, rows, slices in per_clause:
        s_i = max([len(s) for s in slices], default=0)
        s_i = max(s_i, 1)
        block = np.zeros((len(rows), s_i, L), dtype=np.int64)
        n_subs = np.zeros(len(rows), dtype=np.int64)
        for r, idx in enumerate(slices):
            n_subs[r] = len(idx)
            if idx:
                block[r, : len(idx), :] = TRUE_INDEX
                block[r, : len(idx), : len(clause.body)] = np.asarray(idx, dtype=np.int64).reshape(len(idx), len(clause.body))
        groundings.append(ClauseGrounding(clause, np.asarray(rows, dtype=np.int64), block, n_subs))
    return GroundProgram(tuple(clauses), table, tuple(groundings), S, L)


def compute_S(clauses: Sequence[Clause], table: GroundAtomTable, lang: Language) -> int:
    """Largest substitution-set size over all (clause, fact) pairs; 0 if no head unifies."""
    best = 0
    for clause in clauses:
        for j in table.indices_of_predicate(clause.head.predicate):
            best = max(best, len(enumerate_substitutions(clause, table[j], lang)))
    return best


def dense_index_tensor(program: GroundProgram, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    C, G, S, L = program.shape
    if program.size > budget:
        raise BudgetExceeded(program.size, budget)
    index = np.zeros((C, G, S, L), dtype=np.int64)
    for i, g in enumerate(program.groundings):
        if len(g.rows):
            index[i, g.rows, : g.block.shape[1], :] = g.block
    return index


def build_index_tensor(
    clauses: Sequence[Clause],
    table: GroundAtomTable,
    lang: Language,
    budget: int = DEFAULT_BUDGET,
) -> np.ndarray:
    """Dense ``C x G x S x L`` index tensor.

    ``I[i, j, k, l]`` is the ground-atom index of body atom ``l`` of clause
    ``i`` under the head unifier for fact ``j`` and existential substitution
    ``k``; the true atom pads short bodies and the false atom fills
    non-unifiable heads and unused substitution slots.
    """
    program = ground_program(clauses, table, lang)
    return dense_index_tensor(program, budget)


def check_budget(program: GroundProgram, budget: int = DEFAULT_BUDGET) -> None:
    if program.size > budget:
        raise BudgetExceeded(program.size, budget)
