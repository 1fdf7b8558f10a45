"""Abstract syntax, surface grammar and printing for formulas and labelled sequents.

Surface syntax (ASCII)::

    formula  ::= bot | top | ident | formula /\\ formula | formula \\/ formula
               | box formula | dia formula | rhd formula | ( formula )
    item     ::= a : formula            object label
               | x :: formula           feature label
               | u REL v                relational atom, REL a symbol or (R;S)
               | (u REL v => w I v')    implication term, bound label shared
    sequent  ::= item, ... |- item, ...

Unary connectives bind tighter than ``/\\``, which binds tighter than ``\\/``.
Labels starting with a-h are objects, labels starting with u-z are features.
The names ``_o1, _o2, ...`` and ``_u1, ...`` are reserved for generated labels.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping, Union


class Sort(Enum):
    OBJ = "object"
    FEAT = "feature"

    @property
    def other(self) -> "Sort":
        return Sort.FEAT if self is Sort.OBJ else Sort.OBJ


class ParseError(ValueError):
    """Raised on malformed input; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


class SortError(ParseError):
    pass


_RESERVED = re.compile(r"_([ou])\d+$")


def label_sort(name: str) -> Sort:
    m = _RESERVED.match(name)
    if m:
        return Sort.OBJ if m.group(1) == "o" else Sort.FEAT
    head = name[:1]
    if "a" <= head <= "h":
        return Sort.OBJ
    if "u" <= head <= "z":
        return Sort.FEAT
    raise SortError(f"label {name!r} must start with a-h (object) or u-z (feature)")


@dataclass(frozen=True, order=True)
class Label:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


def lab(name: str) -> Label:
    """Build a label, inferring its sort from the leading letter."""
    return Label(name, label_sort(name))


# --------------------------------------------------------------------------
# Formulas


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Box(Formula):
    arg: Formula


@dataclass(frozen=True)
class Dia(Formula):
    arg: Formula


@dataclass(frozen=True)
class Rhd(Formula):
    arg: Formula


@dataclass(frozen=True)
class Meta(Formula):
    """Formula metavariable; only produced when parsing rule schemas."""

    name: str


def props(f: Formula) -> set[str]:
    if isinstance(f, Prop):
        return {f.name}
    if isinstance(f, (And, Or)):
        return props(f.left) | props(f.right)
    if isinstance(f, (Box, Dia, Rhd)):
        return props(f.arg)
    return set()


def depth(f: Formula) -> int:
    if isinstance(f, (And, Or)):
        return 1 + max(depth(f.left), depth(f.right))
    if isinstance(f, (Box, Dia, Rhd)):
        return 1 + depth(f.arg)
    return 0


_UNARY = {Box: "box", Dia: "dia", Rhd: "rhd"}


def format_formula(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, ctx: int) -> str:
    # ctx: 0 = top / or-operand, 1 = and-operand, 2 = unary operand
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Meta):
        return f.name
    if isinstance(f, Top):
        return "top"
    if isinstance(f, Bot):
        return "bot"
    if type(f) in _UNARY:
        return f"{_UNARY[type(f)]} {_fmt(f.arg, 2)}"
    if isinstance(f, And):
        s = f"{_fmt(f.left, 1)} /\\ {_fmt(f.right, 2)}"
        return f"({s})" if ctx >= 2 else s
    if isinstance(f, Or):
        s = f"{_fmt(f.left, 0)} \\/ {_fmt(f.right, 1)}"
        return f"({s})" if ctx >= 1 else s
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# Relations


class RelSym(Enum):
    I = ("I", Sort.OBJ, Sort.FEAT)
    J = ("J", Sort.FEAT, Sort.OBJ)
    RBOX = ("Rbox", Sort.OBJ, Sort.FEAT)
    RDIA = ("Rdia", Sort.FEAT, Sort.OBJ)
    RRHD = ("Rrhd", Sort.OBJ, Sort.OBJ)
    RBBOX = ("RBbox", Sort.OBJ, Sort.FEAT)
    RBDIA = ("RBdia", Sort.FEAT, Sort.OBJ)
    RBRHD = ("RBrhd", Sort.OBJ, Sort.OBJ)
    E = ("E", Sort.OBJ, Sort.OBJ)
    SBOX = ("Sbox", Sort.OBJ, Sort.FEAT)
    SDIA = ("Sdia", Sort.FEAT, Sort.OBJ)

    @property
    def text(self) -> str:
        return self.value[0]

    @property
    def dom(self) -> Sort:
        return self.value[1]

    @property
    def cod(self) -> Sort:
        return self.value[2]

    def __str__(self) -> str:
        return self.text


REL_BY_NAME = {r.text: r for r in RelSym}


@dataclass(frozen=True)
class Comp:
    """Composition ``(left;right)``: u (R;S) v abbreviates (w S v => u R w)."""

    left: "RelExpr"
    right: "RelExpr"

    def __post_init__(self):
        if rel_cod(self.left) is not rel_dom(self.right):
            raise SortError(
                f"composition ({format_rel(self.left)};{format_rel(self.right)}) does not chain"
            )

    def __str__(self) -> str:
        return format_rel(self)


RelExpr = Union[RelSym, Comp]


def rel_dom(r: RelExpr) -> Sort:
    return r.dom if isinstance(r, RelSym) else rel_dom(r.left)


def rel_cod(r: RelExpr) -> Sort:
    return r.cod if isinstance(r, RelSym) else rel_cod(r.right)


def format_rel(r: RelExpr) -> str:
    if isinstance(r, RelSym):
        return r.text
    return f"({format_rel(r.left)};{format_rel(r.right)})"


def map_rel(r: RelExpr, table: Mapping[RelSym, RelSym]) -> RelExpr:
    if isinstance(r, RelSym):
        return table.get(r, r)
    return Comp(map_rel(r.left, table), map_rel(r.right, table))


# --------------------------------------------------------------------------
# Sequent items


@dataclass(frozen=True)
class Labelled:
    label: Label
    formula: Formula

    def __str__(self) -> str:
        sep = ":" if self.label.sort is Sort.OBJ else "::"
        return f"{self.label} {sep} {format_formula(self.formula)}"


@dataclass(frozen=True)
class RelAtom:
    """``lhs rel rhs``.  ``x J a`` is stored as the identical fact ``a I x``."""

    lhs: Label
    rel: RelExpr
    rhs: Label

    def __post_init__(self):
        if self.lhs.sort is not rel_dom(self.rel) or self.rhs.sort is not rel_cod(self.rel):
            raise SortError(
                f"relation {format_rel(self.rel)} expects "
                f"{rel_dom(self.rel).value} x {rel_cod(self.rel).value}, "
                f"got {self.lhs} and {self.rhs}"
            )
        if self.rel is RelSym.J:
            lhs, rhs = self.lhs, self.rhs
            object.__setattr__(self, "lhs", rhs)
            object.__setattr__(self, "rhs", lhs)
            object.__setattr__(self, "rel", RelSym.I)

    @property
    def labels(self) -> tuple[Label, Label]:
        return (self.lhs, self.rhs)

    def __str__(self) -> str:
        return f"{self.lhs} {format_rel(self.rel)} {self.rhs}"


@dataclass(frozen=True, eq=False)
class ImplTerm:
    """``(ante => cons)`` read as: for every value of ``bound``, ante implies cons.

    Equality and hashing ignore the name of the bound label.
    """

    ante: RelAtom
    cons: RelAtom
    bound: Label

    def __post_init__(self):
        if self.bound not in self.ante.labels or self.bound not in self.cons.labels:
            raise ParseError(f"bound label {self.bound} must occur on both sides of =>")
        if self.cons.rel is not RelSym.I:
            raise ParseError("the consequent of an implication term must be an I atom")

    def _key(self):
        hole = Label("#", self.bound.sort)
        m = {self.bound: hole}
        return (_subst_atom(self.ante, m), _subst_atom(self.cons, m))

    def __eq__(self, other):
        return isinstance(other, ImplTerm) and self._key() == other._key()

    def __hash__(self):
        return hash(("impl",) + self._key())

    def __str__(self) -> str:
        shared = set(self.ante.labels) & set(self.cons.labels)
        if shared == {self.bound}:
            return f"({self.ante} => {self.cons})"
        return f"(forall {self.bound}. {self.ante} => {self.cons})"


Item = Union[Labelled, RelAtom, ImplTerm]


def _subst_atom(a: RelAtom, m: Mapping[Label, Label]) -> RelAtom:
    return RelAtom(m.get(a.lhs, a.lhs), a.rel, m.get(a.rhs, a.rhs))


def free_labels(item: Item) -> set[Label]:
    if isinstance(item, Labelled):
        return {item.label}
    if isinstance(item, RelAtom):
        return set(item.labels)
    return (set(item.ante.labels) | set(item.cons.labels)) - {item.bound}


_POOL = {
    Sort.OBJ: "bcdefgha",
    Sort.FEAT: "yzwvux",
}


def fresh_label(sort: Sort, avoid: Iterable[Label]) -> Label:
    """First label of the given sort in a fixed order that is not in ``avoid``."""
    taken = {l.name for l in avoid}
    n = 0
    while True:
        for ch in _POOL[sort]:
            name = ch if n == 0 else f"{ch}{n}"
            if name not in taken:
                return Label(name, sort)
        n += 1


def subst_item(item: Item, m: Mapping[Label, Label]) -> Item:
    """Simultaneous capture-avoiding substitution of free labels."""
    if isinstance(item, Labelled):
        return Labelled(m.get(item.label, item.label), item.formula)
    if isinstance(item, RelAtom):
        return _subst_atom(item, m)
    inner = {k: v for k, v in m.items() if k != item.bound}
    images = {inner.get(l, l) for l in free_labels(item)}
    bound = item.bound
    if bound in images:
        bound = fresh_label(bound.sort, images | free_labels(item) | {item.bound})
    inner[item.bound] = bound
    return ImplTerm(_subst_atom(item.ante, inner), _subst_atom(item.cons, inner), bound)


def rename_label(item: Item, old: Label, new: Label) -> Item:
    if old.sort is not new.sort:
        raise SortError(f"cannot rename {old} ({old.sort.value}) to {new} ({new.sort.value})")
    return subst_item(item, {old: new})


def desugar_composition(atom: RelAtom, avoid: Iterable[Label] = ()) -> ImplTerm:
    """Rewrite ``u (R;S) v`` as ``(w S v => u R w)`` with ``w`` fresh."""
    if not isinstance(atom, RelAtom) or not isinstance(atom.rel, Comp):
        raise ValueError(f"not a composition atom: {atom}")
    r, s = atom.rel.left, atom.rel.right
    w = fresh_label(rel_cod(r), set(avoid) | set(atom.labels))
    return ImplTerm(RelAtom(w, s, atom.rhs), RelAtom(atom.lhs, r, w), w)


def normalize_item(item: Item) -> Item:
    """Desugar a top-level composition atom; every other item is returned as is."""
    if isinstance(item, RelAtom) and isinstance(item.rel, Comp):
        return desugar_composition(item)
    return item


# --------------------------------------------------------------------------
# Sequents


@dataclass(frozen=True, eq=False)
class Sequent:
    left: tuple
    right: tuple

    def __eq__(self, other):
        return (
            isinstance(other, Sequent)
            and Counter(self.left) == Counter(other.left)
            and Counter(self.right) == Counter(other.right)
        )

    def __hash__(self):
        return hash((frozenset(Counter(self.left).items()), frozenset(Counter(self.right).items())))

    def labels(self) -> set[Label]:
        out: set[Label] = set()
        for it in self.left + self.right:
            out |= free_labels(it)
        return out

    def items(self) -> Iterator[Item]:
        yield from self.left
        yield from self.right

    def normalized(self) -> "Sequent":
        return Sequent(
            tuple(normalize_item(i) for i in self.left),
            tuple(normalize_item(i) for i in self.right),
        )

    def __str__(self) -> str:
        return format_sequent(self)


def format_sequent(s: Sequent) -> str:
    lhs = ", ".join(str(i) for i in s.left)
    rhs = ", ".join(str(i) for i in s.right)
    return f"{lhs} |- {rhs}".strip()


def sequent_props(s: Sequent) -> set[str]:
    out: set[str] = set()
    for it in s.items():
        if isinstance(it, Labelled):
            out |= props(it.formula)
    return out


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>#[^\n]*)|(?P<sym>\|-|=>|/\\|\\/|::|[:();,.])"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)"
)
_KEYWORDS = {"bot", "top", "box", "dia", "rhd", "forall"}
_META = re.compile(r"[A-Z][0-9']*$")


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _position(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _tokenize(text: str) -> list[_Tok]:
    toks, i = [], 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", *_position(text, i))
        kind = m.lastgroup
        if kind == "sym":
            toks.append(_Tok(m.group(), m.group(), i))
        elif kind == "ident":
            toks.append(_Tok("ident", m.group(), i))
        i = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, meta: bool = False):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.meta = meta

    # helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None, cls=ParseError) -> ParseError:
        tok = tok or self.tok
        return cls(msg, *_position(self.text, tok.pos))

    def take(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {kind!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def done(self):
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r}")

    # formulas
    def formula(self) -> Formula:
        f = self.conj()
        while self.at("\\/"):
            self.i += 1
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.at("/\\"):
            self.i += 1
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        t = self.tok
        if t.kind == "ident" and t.text in ("box", "dia", "rhd"):
            self.i += 1
            arg = self.unary()
            return {"box": Box, "dia": Dia, "rhd": Rhd}[t.text](arg)
        if t.kind == "(":
            self.i += 1
            f = self.formula()
            self.take(")")
            return f
        if t.kind == "ident":
            self.i += 1
            if t.text == "top":
                return Top()
            if t.text == "bot":
                return Bot()
            if t.text in _KEYWORDS:
                raise self.error(f"unexpected keyword {t.text!r}", t)
            if self.meta and _META.match(t.text):
                return Meta(t.text)
            return Prop(t.text)
        found = t.text or "end of input"
        raise self.error(f"expected a formula, found {found!r}", t)

    # labels and relations
    def label(self) -> Label:
        t = self.take("ident")
        try:
            return lab(t.text)
        except SortError as e:
            raise self.error(e.message, t, SortError) from None

    def relexpr(self) -> RelExpr:
        t = self.tok
        if t.kind == "ident":
            if t.text not in REL_BY_NAME:
                raise self.error(f"unknown relation {t.text!r}", t)
            self.i += 1
            return REL_BY_NAME[t.text]
        self.take("(")
        left = self.relexpr()
        self.take(";")
        right = self.relexpr()
        self.take(")")
        try:
            return Comp(left, right)
        except SortError as e:
            raise self.error(e.message, t, SortError) from None

    def relatom(self) -> RelAtom:
        start = self.tok
        lhs = self.label()
        rel = self.relexpr()
        rhs = self.label()
        try:
            return RelAtom(lhs, rel, rhs)
        except SortError as e:
            raise self.error(e.message, start, SortError) from None

    def item(self) -> Item:
        start = self.tok
        if self.at("("):
            self.i += 1
            bound = None
            if self.at("ident", "forall"):
                self.i += 1
                bound = self.label()
                self.take(".")
            ante = self.relatom()
            self.take("=>")
            cons = self.relatom()
            self.take(")")
            if bound is None:
                shared = set(ante.labels) & set(cons.labels)
                if len(shared) != 1:
                    raise self.error(
                        "implication term must share exactly one label (use 'forall')", start
                    )
                (bound,) = shared
            try:
                return ImplTerm(ante, cons, bound)
            except ParseError as e:
                raise self.error(e.message, start) from None
        lbl = self.label()
        if self.at(":") or self.at("::"):
            sep = self.tok
            self.i += 1
            want = Sort.OBJ if sep.kind == ":" else Sort.FEAT
            if lbl.sort is not want:
                raise self.error(
                    f"{sep.kind!r} needs a{'n object' if want is Sort.OBJ else ' feature'} "
                    f"label, got {lbl}",
                    start,
                    SortError,
                )
            return Labelled(lbl, self.formula())
        rel = self.relexpr()
        rhs = self.label()
        try:
            return RelAtom(lbl, rel, rhs)
        except SortError as e:
            raise self.error(e.message, start, SortError) from None

    def items(self, stop: str) -> list[Item]:
        out: list[Item] = []
        if self.at(stop):
            return out
        out.append(self.item())
        while self.at(","):
            self.i += 1
            out.append(self.item())
        return out

    def sequent(self) -> Sequent:
        left = self.items("|-")
        self.take("|-")
        right = self.items("eof")
        return Sequent(tuple(left), tuple(right))


def parse_formula(text: str, meta: bool = False) -> Formula:
    p = _Parser(text, meta)
    f = p.formula()
    p.done()
    return f


def parse_sequent(text: str, meta: bool = False) -> Sequent:
    p = _Parser(text, meta)
    s = p.sequent()
    p.done()
    return s


def parse_item(text: str) -> Item:
    p = _Parser(text)
    it = p.item()
    p.done()
    return it


def parse_relexpr(text: str) -> RelExpr:
    """Parse ``Rbox`` or ``(J;Rbox)``; outer parentheses may be omitted."""
    t = text.strip()
    if ";" in t and not t.startswith("("):
        t = f"({t})"
    p = _Parser(t)
    r = p.relexpr()
    p.done()
    return r


def parse_formula_sequent(text: str) -> tuple[Formula, Formula]:
    """Parse an unlabelled consequence ``f |- g``."""
    p = _Parser(text)
    f = p.formula()
    p.take("|-")
    g = p.formula()
    p.done()
    return f, g
