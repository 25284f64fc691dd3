"""Typed function-free first-order language: terms, atoms, clauses, parsing and unification."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

CONSTANT_KINDS = ("input", "object", "attribute")


class LogicError(ValueError):
    """Raised for ill-formed or ill-typed logical expressions."""


class LogicSyntaxError(LogicError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class DataType:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    name: str
    datatype: DataType
    kind: str = "attribute"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Constant, Variable]
Substitution = dict  # Variable -> Term; plain dicts keep call sites readable


@dataclass(frozen=True)
class Predicate:
    name: str
    arg_datatypes: tuple[DataType, ...]
    is_neural: bool = False
    valuation: str | None = None

    @property
    def arity(self) -> int:
        return len(self.arg_datatypes)

    def __str__(self) -> str:
        dts = ",".join(dt.name for dt in self.arg_datatypes)
        return f"{self.name}/{self.arity}[{dts}]"


@dataclass(frozen=True)
class Atom:
    predicate: Predicate
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        if len(self.terms) != self.predicate.arity:
            raise LogicError(
                f"{self.predicate.name} expects {self.predicate.arity} arguments, got {len(self.terms)}"
            )
        for pos, (term, dt) in enumerate(zip(self.terms, self.predicate.arg_datatypes)):
            if isinstance(term, Constant) and term.datatype != dt:
                raise LogicError(
                    f"constant {term.name} of type {term.datatype} at argument {pos} "
                    f"of {self.predicate.name} (expects {dt})"
                )

    @property
    def is_ground(self) -> bool:
        return all(isinstance(t, Constant) for t in self.terms)

    def __str__(self) -> str:
        if not self.terms:
            return self.predicate.name
        return f"{self.predicate.name}({','.join(t.name for t in self.terms)})"


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head}:-{','.join(str(b) for b in self.body)}."

    @property
    def variables(self) -> list[Variable]:
        return variables_of(self.head, *self.body)


# special atoms: index 0 (always false) and index 1 (always true) of every ground-atom table
FALSE_PREDICATE = Predicate("false", ())
TRUE_PREDICATE = Predicate("true", ())
FALSE = Atom(FALSE_PREDICATE)
TRUE = Atom(TRUE_PREDICATE)


@dataclass(frozen=True)
class Language:
    datatypes: tuple[DataType, ...] = ()
    constants: tuple[Constant, ...] = ()
    predicates: tuple[Predicate, ...] = ()
    _const_index: Mapping[str, Constant] = field(default=None, repr=False, compare=False)
    _pred_index: Mapping[str, Predicate] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        dt_names = [dt.name for dt in self.datatypes]
        if len(set(dt_names)) != len(dt_names):
            raise LogicError("duplicate datatype name")
        names = [c.name for c in self.constants]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise LogicError(f"duplicate constant name: {sorted(dupes)[0]}")
        for c in self.constants:
            if c.datatype not in self.datatypes:
                raise LogicError(f"unknown datatype {c.datatype.name!r} for constant {c.name}")
            if c.kind not in CONSTANT_KINDS:
                raise LogicError(f"constant {c.name} has unknown kind {c.kind!r}")
            if _is_variable_name(c.name):
                raise LogicError(f"constant {c.name} must not start with an uppercase letter")
        pnames = [p.name for p in self.predicates]
        dupes = {n for n in pnames if pnames.count(n) > 1}
        if dupes:
            raise LogicError(f"duplicate predicate name: {sorted(dupes)[0]}")
        for p in self.predicates:
            if p.arity < 1:
                raise LogicError(f"predicate {p.name} must have arity >= 1")
            for dt in p.arg_datatypes:
                if dt not in self.datatypes:
                    raise LogicError(f"unknown datatype {dt.name!r} in predicate {p.name}")
        object.__setattr__(self, "_const_index", {c.name: c for c in self.constants})
        object.__setattr__(self, "_pred_index", {p.name: p for p in self.predicates})

    def constant(self, name: str) -> Constant:
        try:
            return self._const_index[name]
        except KeyError:
            raise LogicError(f"unknown constant {name!r}") from None

    def predicate(self, name: str) -> Predicate:
        try:
            return self._pred_index[name]
        except KeyError:
            raise LogicError(f"unknown predicate {name!r}") from None

    def datatype(self, name: str) -> DataType:
        for dt in self.datatypes:
            if dt.name == name:
                return dt
        raise LogicError(f"unknown datatype {name!r}")

    def domain(self, datatype: DataType) -> list[Constant]:
        """Constants of ``datatype`` in declaration order."""
        return [c for c in self.constants if c.datatype == datatype]

    def constants_of_kind(self, kind: str) -> list[Constant]:
        return [c for c in self.constants if c.kind == kind]

    @property
    def neural_predicates(self) -> list[Predicate]:
        return [p for p in self.predicates if p.is_neural]


def _is_variable_name(name: str) -> bool:
    return name[:1].isupper() or name[:1] == "_"


# ---------------------------------------------------------------------------
# substitution and unification
# ---------------------------------------------------------------------------

def variables_of(*atoms: Atom) -> list[Variable]:
    """Variables of ``atoms`` in first-occurrence order, without repeats."""
    seen: dict[Variable, None] = {}
    for atom in atoms:
        for t in atom.terms:
            if isinstance(t, Variable):
                seen.setdefault(t, None)
    return list(seen)


def apply_substitution(atom: Atom, theta: Mapping[Variable, Term]) -> Atom:
    if atom.is_ground or not theta:
        return atom
    # Atom.__post_init__ rejects a binding whose datatype does not fit its position
    return Atom(atom.predicate, tuple(theta.get(t, t) if isinstance(t, Variable) else t
                                      for t in atom.terms))


def _walk(term: Term, theta: Mapping[Variable, Term]) -> Term:
    while isinstance(term, Variable) and term in theta:
        term = theta[term]
    return term


def unify(a: Atom, b: Atom) -> Substitution | None:
    """Most general unifier of two function-free atoms, or ``None``.

    Variable-to-variable bindings are resolved so every variable in the
    result maps directly to its final term.
    """
    if a.predicate != b.predicate:
        return None
    theta: Substitution = {}
    for s, t in zip(a.terms, b.terms):
        s, t = _walk(s, theta), _walk(t, theta)
        if s == t:
            continue
        if isinstance(s, Variable):
            theta[s] = t
        elif isinstance(t, Variable):
            theta[t] = s
        else:
            return None
    return {v: _walk(v, theta) for v in theta}


def is_unifiable(a: Atom, b: Atom) -> bool:
    return unify(a, b) is not None


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z0-9_]+)|(?P<neck>:-)|(?P<punct>[(),.]))")


def _strip_comment(line: str) -> str:
    return line.split("%", 1)[0]


class _AtomReader:
    """Tokenizes one clause/atom string and reads atoms with position info."""

    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if not m or m.end() == pos:
                col = pos + 1 + (len(stripped[pos:]) - len(stripped[pos:].lstrip()))
                raise LogicSyntaxError(f"unexpected character {stripped[col - 1]!r}", line, col)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text) + 1)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.next()
        if val != value:
            raise LogicSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", self.line, col)

    def read_atom(self):
        kind, name, col = self.next()
        if kind != "name" or _is_variable_name(name):
            raise LogicSyntaxError(f"expected predicate name, found {name or 'end of input'!r}", self.line, col)
        args = []
        if self.peek()[1] == "(":
            self.next()
            while True:
                k, tname, tcol = self.next()
                if k != "name":
                    raise LogicSyntaxError(f"expected term, found {tname or 'end of input'!r}", self.line, tcol)
                args.append((tname, tcol))
                sep = self.next()
                if sep[1] == ")":
                    break
                if sep[1] != ",":
                    raise LogicSyntaxError(f"expected ',' or ')', found {sep[1] or 'end of input'!r}", self.line, sep[2])
        return name, args, col


def _build_atom(raw, lang: Language, var_types: dict[str, DataType], line: int) -> Atom:
    name, args, col = raw
    try:
        pred = lang.predicate(name)
    except LogicError as exc:
        raise LogicSyntaxError(str(exc), line, col) from None
    if len(args) != pred.arity:
        raise LogicSyntaxError(
            f"arity mismatch: {name} expects {pred.arity} arguments, got {len(args)}", line, col
        )
    terms: list[Term] = []
    for (tname, tcol), dt in zip(args, pred.arg_datatypes):
        if _is_variable_name(tname):
            prev = var_types.setdefault(tname, dt)
            if prev != dt:
                raise LogicSyntaxError(
                    f"type error: variable {tname} used as {prev.name} and {dt.name}", line, tcol
                )
            terms.append(Variable(tname))
        else:
            try:
                const = lang.constant(tname)
            except LogicError as exc:
                raise LogicSyntaxError(str(exc), line, tcol) from None
            if const.datatype != dt:
                raise LogicSyntaxError(
                    f"type error: {tname} is {const.datatype.name}, {name} expects {dt.name}", line, tcol
                )
            terms.append(const)
    return Atom(pred, tuple(terms))


def parse_atom(text: str, lang: Language, line: int = 1) -> Atom:
    reader = _AtomReader(_strip_comment(text), line)
    atom = _build_atom(reader.read_atom(), lang, {}, line)
    if reader.peek()[1] == ".":
        reader.next()
    kind, val, col = reader.peek()
    if kind != "eof":
        raise LogicSyntaxError(f"trailing input {val!r}", line, col)
    return atom


def parse_clause(text: str, lang: Language, line: int = 1) -> Clause:
    """Parse one Prolog-style definite clause terminated by ``.``."""
    reader = _AtomReader(_strip_comment(text), line)
    var_types: dict[str, DataType] = {}
    head = _build_atom(reader.read_atom(), lang, var_types, line)
    body = []
    kind, val, col = reader.next()
    if val == ":-":
        while True:
            body.append(_build_atom(reader.read_atom(), lang, var_types, line))
            kind, val, col = reader.next()
            if val == ".":
                break
            if val != ",":
                raise LogicSyntaxError(f"expected ',' or '.', found {val or 'end of input'!r}", line, col)
    elif val != ".":
        raise LogicSyntaxError(f"expected ':-' or '.', found {val or 'end of input'!r}", line, col)
    kind, val, col = reader.peek()
    if kind != "eof":
        raise LogicSyntaxError(f"trailing input {val!r}", line, col)
    return Clause(head, tuple(body))


def _logical_lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if line:
            yield lineno, line


def parse_rules(text: str, lang: Language) -> list[Clause]:
    """Parse a rules file; a clause may span lines and ends at ``.``."""
    clauses, buf, start = [], [], None
    for lineno, line in _logical_lines(text):
        if start is None:
            start = lineno
        buf.append(line)
        if line.endswith("."):
            clauses.append(parse_clause(" ".join(buf), lang, start))
            buf, start = [], None
    if buf:
        raise LogicSyntaxError("clause not terminated by '.'", start, 1)
    return clauses


def parse_facts(text: str, lang: Language) -> list[Atom]:
    facts = []
    for lineno, line in _logical_lines(text):
        atom = parse_atom(line, lang, lineno)
        if not atom.is_ground:
            raise LogicSyntaxError(f"background atom {atom} is not ground", lineno, 1)
        facts.append(atom)
    return facts


# name/arity[dt,..] | name/(arity,[dt,..]) | name(arity/[dt,..])
_PRED_FORMS = (
    re.compile(r"^(?P<name>[a-z][A-Za-z0-9_]*)\s*/\s*(?P<arity>\d+)\s*\[(?P<dts>[^\]]*)\]$"),
    re.compile(r"^(?P<name>[a-z][A-Za-z0-9_]*)\s*/\s*\(\s*(?P<arity>\d+)\s*,\s*\[(?P<dts>[^\]]*)\]\s*\)$"),
    re.compile(r"^(?P<name>[a-z][A-Za-z0-9_]*)\s*\(\s*(?P<arity>\d+)\s*/\s*\[(?P<dts>[^\]]*)\]\s*\)$"),
)
_IDENT = re.compile(r"^[A-Za-z0-9_]+$")


def _parse_pred_spec(spec: str, lineno: int, col: int):
    for form in _PRED_FORMS:
        m = form.match(spec.strip())
        if m:
            dts = [d.strip() for d in m["dts"].split(",") if d.strip()]
            if int(m["arity"]) != len(dts):
                raise LogicSyntaxError(
                    f"predicate {m['name']} declares arity {m['arity']} but {len(dts)} datatypes", lineno, col
                )
            return m["name"], dts
    raise LogicSyntaxError(f"malformed predicate declaration {spec.strip()!r}", lineno, col)


def parse_language(text: str) -> Language:
    """Parse a language file into a validated :class:`Language`.

    Recognised lines::

        datatype <name>
        constant <name> : <datatype> <input|object|attribute>
        pred <name>/<arity>[<dt1>,...]
        neural_pred <name>/<arity>[<dt1>,...] = <valuation-id>
    """
    datatypes: dict[str, DataType] = {}
    constants: list[Constant] = []
    predicates: list[Predicate] = []
    seen_names: set[str] = set()

    def dt_ref(name, lineno, col):
        if name not in datatypes:
            raise LogicSyntaxError(f"unknown datatype {name!r}", lineno, col)
        return datatypes[name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        keyword, _, rest = line.strip().partition(" ")
        col = indent + len(keyword) + 2
        if keyword == "datatype":
            name = rest.strip()
            if not _IDENT.match(name):
                raise LogicSyntaxError(f"malformed datatype name {name!r}", lineno, col)
            if name in datatypes:
                raise LogicSyntaxError(f"duplicate datatype {name!r}", lineno, col)
            datatypes[name] = DataType(name)
        elif keyword == "constant":
            m = re.match(r"^\s*([A-Za-z0-9_]+)\s*:\s*([A-Za-z0-9_]+)\s+([a-z]+)\s*$", rest)
            if not m:
                raise LogicSyntaxError("expected 'constant <name> : <datatype> <kind>'", lineno, col)
            name, dt_name, kind = m.groups()
            if kind not in CONSTANT_KINDS:
                raise LogicSyntaxError(f"unknown constant kind {kind!r}", lineno, col + m.start(3))
            if _is_variable_name(name):
                raise LogicSyntaxError(f"constant {name} must start with a lowercase letter", lineno, col)
            if name in seen_names:
                raise LogicSyntaxError(f"duplicate name {name!r}", lineno, col)
            seen_names.add(name)
            constants.append(Constant(name, dt_ref(dt_name, lineno, col + m.start(2)), kind))
        elif keyword in ("pred", "neural_pred"):
            spec, valuation = rest, None
            if keyword == "neural_pred":
                spec, eq, valuation = rest.partition("=")
                valuation = valuation.strip()
                if not eq or not _IDENT.match(valuation):
                    raise LogicSyntaxError("neural_pred needs '= <valuation-id>'", lineno, col)
            name, dts = _parse_pred_spec(spec, lineno, col)
            if name in seen_names:
                raise LogicSyntaxError(f"duplicate name {name!r}", lineno, col)
            seen_names.add(name)
            arg_dts = tuple(dt_ref(d, lineno, col) for d in dts)
            if not arg_dts:
                raise LogicSyntaxError(f"predicate {name} must have arity >= 1", lineno, col)
            predicates.append(Predicate(name, arg_dts, keyword == "neural_pred", valuation))
        else:
            raise LogicSyntaxError(f"unknown declaration {keyword!r}", lineno, indent + 1)
    return Language(tuple(datatypes.values()), tuple(constants), tuple(predicates))


def format_language(lang: Language) -> str:
    lines = [f"datatype {dt.name}" for dt in lang.datatypes]
    lines += [f"constant {c.name} : {c.datatype.name} {c.kind}" for c in lang.constants]
    for p in lang.predicates:
        if p.is_neural:
            lines.append(f"neural_pred {p} = {p.valuation}")
        else:
            lines.append(f"pred {p}")
    return "\n".join(lines) + "\n"
