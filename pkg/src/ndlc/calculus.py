"""Rule catalogue, schema matching and proof checking for the labelled calculi.

Every rule is a schema over a shared context: the conclusion and premises list
only their principal items, and the remaining items (Gamma on the left, Delta on
the right) must be identical in the conclusion and in every premise.  The
exceptions are the context-splitting cuts, the weakenings and the Fold/Unfold
steps, which are checked by dedicated code.

Schemas are written in the sequent syntax with formula metavariables ``A`` and
``B``; their labels act as label metavariables.  All items are desugared
(composition atoms become implication terms) before matching.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

from .syntax import (
    And,
    Box,
    Comp,
    Dia,
    Formula,
    ImplTerm,
    Item,
    Label,
    Labelled,
    Meta,
    Or,
    ParseError,
    RelAtom,
    RelExpr,
    RelSym,
    Rhd,
    Sequent,
    Sort,
    format_rel,
    format_sequent,
    free_labels,
    map_rel,
    normalize_item,
    parse_formula,
    parse_relexpr,
    parse_sequent,
    rel_cod,
    subst_item,
)

# --------------------------------------------------------------------------
# Rule identifiers

_RULE_NAMES = [
    # initial, cut and structural
    "Id_obj", "Id_feat", "BotInit", "TopInit", "Cut_obj", "Cut_feat", "WeakL", "WeakR", "Fold", "Unfold",
    # switch
    "S-xa", "S-ax",
    *[
        f"S-{name}"
        for rel in ("dia", "bdia")
        for name in (f"a-{rel}-x", f"x-{rel}-a", f"a-{rel}-x2", f"x-{rel}-a2")
    ],
    *[
        f"S-{name}"
        for rel in ("box", "bbox", "rhd", "brhd")
        for name in (f"x-{rel}-a", f"a-{rel}-x", f"x-{rel}-a2", f"a-{rel}-x2")
    ],
    # approximation
    "Approx_x", "Approx_a",
    # pure structure
    "S-IS", "S-IS-inv", "S-JT", "S-JT-inv", "Id-IJ-R", "Id-JI-R", "Id-IJ-L", "Id-JI-L",
    # adjunction
    "Adj-dia-bbox", "Adj-bbox-dia", "Adj-box-bdia", "Adj-bdia-box", "Adj-rhd-brhd", "Adj-brhd-rhd",
    # logical
    "AndL", "AndR", "OrL", "OrR", "BoxL", "BoxR", "DiaL", "DiaR", "RhdL", "RhdR",
    # modal axioms
    "T-box-refl", "T-dia-refl", "T-box-dense", "T-dia-dense", "T-B1", "T-B2", "T-sym-rhd",
    # rough
    "swSf", "swSfi", "swSdf", "swSdfi", "swES", "swESi", "curryS", "uncurryS", "refl", "sym", "trans",
]

RuleId = Enum("RuleId", {n.replace("-", "_"): n for n in _RULE_NAMES}, type=str)
RuleId.__str__ = lambda self: self.value  # type: ignore[method-assign]

# axiom name -> (formula consequence, first-order condition id, rule)
AXIOMS = {
    "box-refl": ("box p |- p", "1", "T-box-refl"),
    "dia-refl": ("p |- dia p", "2", "T-dia-refl"),
    "box-dense": ("box p |- box box p", "3", "T-box-dense"),
    "sym-rhd": ("p |- rhd rhd p", "4", "T-sym-rhd"),
    "dia-dense": ("dia dia p |- dia p", "5", "T-dia-dense"),
    "b1": ("p |- box dia p", "6", "T-B1"),
    "b2": ("dia box p |- p", "7", "T-B2"),
}

ROUGH_TABLE = {
    RelSym.RBOX: RelSym.SBOX,
    RelSym.RBBOX: RelSym.SBOX,
    RelSym.RDIA: RelSym.SDIA,
    RelSym.RBDIA: RelSym.SDIA,
    RelSym.RRHD: RelSym.E,
    RelSym.RBRHD: RelSym.E,
}


@dataclass(frozen=True)
class CalculusConfig:
    sigma: frozenset = frozenset()
    rough: bool = False
    allow_cut: bool = False

    def __post_init__(self):
        unknown = set(self.sigma) - set(AXIOMS)
        if unknown:
            raise ValueError(f"unknown axiom(s): {', '.join(sorted(unknown))}")
        object.__setattr__(self, "sigma", frozenset(self.sigma))

    def flags(self) -> list[str]:
        out = [f"--axiom {a}" for a in sorted(self.sigma)]
        if self.rough:
            out.append("--rough")
        if self.allow_cut:
            out.append("--allow-cut")
        return out


# --------------------------------------------------------------------------
# Schemas


@dataclass(frozen=True)
class Schema:
    rule: str
    conclusion: Sequent
    premises: tuple[Sequent, ...]
    eigen: tuple[str, ...] = ()
    params: tuple[tuple[str, RelExpr], ...] = ()
    group: str = ""

    @property
    def arity(self) -> int:
        return len(self.premises)


def _seq(text: str) -> Sequent:
    return parse_sequent(text, meta=True).normalized()


def _map_item(item: Item, table) -> Item:
    if isinstance(item, RelAtom):
        return RelAtom(item.lhs, map_rel(item.rel, table), item.rhs)
    if isinstance(item, ImplTerm):
        return ImplTerm(_map_item(item.ante, table), _map_item(item.cons, table), item.bound)
    return item


def _map_seq(s: Sequent, table) -> Sequent:
    return Sequent(
        tuple(normalize_item(_map_item(i, table)) for i in s.left),
        tuple(normalize_item(_map_item(i, table)) for i in s.right),
    )


def _rule(rule, premises, conclusion, eigen="", group="", params=()) -> Schema:
    return Schema(
        rule,
        _seq(conclusion),
        tuple(_seq(p) for p in premises),
        tuple(eigen.split()),
        tuple(params),
        group,
    )


_SWITCH_DIA = [
    ("a-{n}-x", "(y {R} a => b I y) |- b : A", "x :: A |- x {R} a", "b"),
    ("x-{n}-a", "x :: A |- x {R} a", "(y {R} a => b I y) |- b : A", "x"),
    ("a-{n}-x2", "b : A |- (y {R} a => b I y)", "x {R} a |- x :: A", "b"),
    ("x-{n}-a2", "x {R} a |- x :: A", "b : A |- (y {R} a => b I y)", "x"),
]
_SWITCH_BOX = [
    ("x-{n}-a", "(b {R} x => b I y) |- y :: A", "a : A |- a {R} x", "y"),
    ("a-{n}-x", "a : A |- a {R} x", "(b {R} x => b I y) |- y :: A", "a"),
    ("x-{n}-a2", "y :: A |- (b {R} x => b I y)", "a {R} x |- a : A", "y"),
    ("a-{n}-x2", "a {R} x |- a : A", "y :: A |- (b {R} x => b I y)", "a"),
]
_SWITCH_RHD = [
    ("x-{n}-a", "(b {R} a => b I y) |- y :: A", "c : A |- c {R} a", "y"),
    ("a-{n}-x", "c : A |- c {R} a", "(b {R} a => b I y) |- y :: A", "c"),
    ("x-{n}-a2", "y :: A |- (b {R} a => b I y)", "c {R} a |- c : A", "y"),
    ("a-{n}-x2", "c {R} a |- c : A", "y :: A |- (b {R} a => b I y)", "c"),
]

T_FAMILY = ("Rdia", "J", "J;I", "J;Rbox", "J;Rrhd", "RBdia", "J;RBbox", "J;RBrhd")
S_FAMILY = ("Rbox", "I", "I;J", "I;Rdia", "I;RBdia", "RBbox")


def _family(names) -> list[RelExpr]:
    return [parse_relexpr(n) for n in names]


def _pl(r: RelExpr, first: bool) -> str:
    """Label metavariable name for the codomain sort of ``r``."""
    if rel_cod(r) is Sort.OBJ:
        return "c" if first else "d"
    return "u" if first else "v"


def _pure_structure() -> list[Schema]:
    out: list[Schema] = []
    tf, sf = _family(T_FAMILY), _family(S_FAMILY)
    for t, t2 in itertools.product(tf, tf):
        ft, ft2, u, v = format_rel(t), format_rel(t2), _pl(t, True), _pl(t2, False)
        params = (("T", t), ("T2", t2))
        a = f"a (I;{ft2}) {v} |- a (I;{ft}) {u}"
        x = f"x {ft} {u} |- x {ft2} {v}"
        out.append(_rule("S-IS", [x], a, "x", "pure", params))
        out.append(_rule("S-IS-inv", [a], x, "a", "pure", params))
    for s, s2 in itertools.product(sf, sf):
        fs, fs2, u, v = format_rel(s), format_rel(s2), _pl(s, True), _pl(s2, False)
        params = (("S", s), ("S2", s2))
        a = f"a {fs} {u} |- a {fs2} {v}"
        x = f"x (J;{fs2}) {v} |- x (J;{fs}) {u}"
        out.append(_rule("S-JT", [a], x, "a", "pure", params))
        out.append(_rule("S-JT-inv", [x], a, "x", "pure", params))
    for s in sf:
        fs, u = format_rel(s), _pl(s, True)
        params = (("S", s),)
        out.append(_rule("Id-IJ-R", [f"|- a {fs} {u}"], f"|- a (I;(J;{fs})) {u}", "", "pure", params))
        out.append(_rule("Id-IJ-L", [f"a {fs} {u} |-"], f"a (I;(J;{fs})) {u} |-", "", "pure", params))
    for t in tf:
        ft, u = format_rel(t), _pl(t, True)
        params = (("T", t),)
        out.append(_rule("Id-JI-R", [f"|- x {ft} {u}"], f"|- x (J;(I;{ft})) {u}", "", "pure", params))
        out.append(_rule("Id-JI-L", [f"x {ft} {u} |-"], f"x (J;(I;{ft})) {u} |-", "", "pure", params))
    return out


@lru_cache(maxsize=None)
def _base_schemas() -> tuple[Schema, ...]:
    out = [
        _rule("Id_obj", [], "a : A |- a : A", group="initial"),
        _rule("Id_feat", [], "x :: A |- x :: A", group="initial"),
        _rule("BotInit", [], "|- x :: bot", group="initial"),
        _rule("TopInit", [], "|- a : top", group="initial"),
        _rule("S-xa", ["x :: B |- x :: A"], "a : A |- a : B", "x", "switch"),
        _rule("S-ax", ["a : A |- a : B"], "x :: B |- x :: A", "a", "switch"),
    ]
    for table, rels in (
        (_SWITCH_DIA, (("dia", "Rdia"), ("bdia", "RBdia"))),
        (_SWITCH_BOX, (("box", "Rbox"), ("bbox", "RBbox"))),
        (_SWITCH_RHD, (("rhd", "Rrhd"), ("brhd", "RBrhd"))),
    ):
        for n, r in rels:
            for name, prem, concl, eig in table:
                out.append(
                    _rule(
                        "S-" + name.format(n=n),
                        [prem.format(R=r)],
                        concl.format(R=r),
                        eig,
                        "switch",
                    )
                )
    out += [
        _rule("Approx_x", ["x :: A |- a I x"], "|- a : A", "x", "approx"),
        _rule("Approx_a", ["a : A |- a I x"], "|- x :: A", "a", "approx"),
    ]
    out += _pure_structure()
    out += [
        _rule("Adj-dia-bbox", ["|- x Rdia a"], "|- a RBbox x", group="adjunction"),
        _rule("Adj-bbox-dia", ["|- a RBbox x"], "|- x Rdia a", group="adjunction"),
        _rule("Adj-box-bdia", ["|- a Rbox x"], "|- x RBdia a", group="adjunction"),
        _rule("Adj-bdia-box", ["|- x RBdia a"], "|- a Rbox x", group="adjunction"),
        _rule("Adj-rhd-brhd", ["|- a Rrhd b"], "|- b RBrhd a", group="adjunction"),
        _rule("Adj-brhd-rhd", ["|- a RBrhd b"], "|- b Rrhd a", group="adjunction"),
        _rule("AndL", ["a : A, a : B |-"], "a : A /\\ B |-", group="logical"),
        _rule("AndR", ["|- a : A", "|- a : B"], "|- a : A /\\ B", group="logical"),
        _rule("OrL", ["|- x :: A", "|- x :: B"], "|- x :: A \\/ B", group="logical"),
        _rule("OrR", ["x :: A, x :: B |-"], "x :: A \\/ B |-", group="logical"),
        _rule("BoxL", ["a : box A |- x :: A, a Rbox x"], "a : box A |- a Rbox x", group="logical"),
        _rule("BoxR", ["x :: A |- a Rbox x"], "|- a : box A", "x", "logical"),
        _rule("DiaL", ["a : A |- x Rdia a"], "|- x :: dia A", "a", "logical"),
        _rule("DiaR", ["x :: dia A |- a : A, x Rdia a"], "x :: dia A |- x Rdia a", group="logical"),
        _rule("RhdL", ["a : rhd A |- b : A, a Rrhd b"], "a : rhd A |- a Rrhd b", group="logical"),
        _rule("RhdR", ["b : A |- a Rrhd b"], "|- a : rhd A", "b", "logical"),
    ]
    return tuple(out)


@lru_cache(maxsize=None)
def _frame_rules() -> dict[str, Schema]:
    rules = [
        _rule("T-box-refl", ["|- a Rbox x"], "|- a I x"),
        _rule("T-dia-refl", ["|- x Rdia a"], "|- a I x"),
        _rule("T-box-dense", ["|- a Rbox x"], "(b Rbox x => y J b) |- a Rbox y"),
        _rule("T-dia-dense", ["|- x Rdia a"], "(y Rdia a => b I y) |- x Rdia b"),
        _rule("T-B1", ["|- x Rdia a"], "|- x RBdia a"),
        _rule("T-B2", ["|- x RBdia a"], "|- x Rdia a"),
        _rule("T-sym-rhd", ["|- a Rrhd b"], "|- b Rrhd a"),
    ]
    return {s.rule: Schema(s.rule, s.conclusion, s.premises, s.eigen, s.params, "frame") for s in rules}


@lru_cache(maxsize=None)
def _rough_rules() -> tuple[Schema, ...]:
    return (
        _rule("swSf", ["(b Sbox x => b I y) |- y :: A"], "a : A |- a Sbox x", "y", "rough"),
        _rule("swSfi", ["a : A |- a Sbox x"], "(b Sbox x => b I y) |- y :: A", "a", "rough"),
        _rule("swSdf", ["x :: A |- x Sdia a"], "b E a |- b : A", "x", "rough"),
        _rule("swSdfi", ["b E a |- b : A"], "x :: A |- x Sdia a", "b", "rough"),
        _rule("swES", ["a E c |- a Sbox x"], "(b Sbox x => b I y) |- y Sdia a", "c", "rough"),
        _rule("swESi", ["(b Sbox x => b I y) |- y Sdia a"], "a E c |- a Sbox x", "y", "rough"),
        _rule("curryS", ["|- a Sbox x"], "b E a |- b I x", "", "rough"),
        _rule("uncurryS", ["b E a |- b I x"], "|- a Sbox x", "b", "rough"),
        _rule("refl", ["a E a |-"], "|-", "", "rough"),
        _rule("sym", ["|- a E b"], "|- b E a", "", "rough"),
        _rule("trans", ["a E c |-"], "a E b, b E c |-", "", "rough"),
    )


def _roughen(s: Schema) -> Schema:
    return Schema(
        s.rule,
        _map_seq(s.conclusion, ROUGH_TABLE),
        tuple(_map_seq(p, ROUGH_TABLE) for p in s.premises),
        s.eigen,
        tuple((k, map_rel(r, ROUGH_TABLE)) for k, r in s.params),
        s.group,
    )


SPECIAL = {"Cut_obj": "structural", "Cut_feat": "structural", "WeakL": "structural",
           "WeakR": "structural", "Fold": "structural", "Unfold": "structural"}


@lru_cache(maxsize=None)
def _schemas_for(config: CalculusConfig) -> tuple[Schema, ...]:
    base = list(_base_schemas())
    t1 = _frame_rules()
    base += [t1[AXIOMS[a][2]] for a in sorted(config.sigma, key=lambda a: list(AXIOMS).index(a))]
    if config.rough:
        base = [_roughen(s) for s in base] + list(_rough_rules())
    out, seen = [], set()
    for s in base:
        if s.arity == 1 and s.premises[0] == s.conclusion:
            continue  # collapsed to an identity step
        key = (s.rule, s.conclusion, s.premises, s.eigen)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return tuple(out)


def rule_schemas(config: CalculusConfig) -> list[tuple[str, int, Schema | None]]:
    """Enabled rules in a fixed order: (rule id, arity, schema); special rules carry None."""
    out: list[tuple[str, int, Schema | None]] = []
    for s in _schemas_for(config):
        out.append((s.rule, s.arity, s))
    for r in ("WeakL", "WeakR", "Fold", "Unfold"):
        out.append((r, 1, None))
    if config.allow_cut:
        out += [("Cut_obj", 2, None), ("Cut_feat", 2, None)]
    return out


def rule_group(rule: str) -> str:
    if rule in SPECIAL:
        return SPECIAL[rule]
    if rule in _frame_rules():
        return "frame"
    if rule in {s.rule for s in _rough_rules()}:
        return "rough"
    for s in _base_schemas():
        if s.rule == rule:
            return s.group
    raise KeyError(rule)


def rule_enabled(config: CalculusConfig, rule: str) -> bool:
    if rule in ("Cut_obj", "Cut_feat"):
        return config.allow_cut
    if rule in SPECIAL:
        return True
    return any(s.rule == rule for s in _schemas_for(config))


# --------------------------------------------------------------------------
# Matching

Theta = Mapping[str, object]
_HOLE = "#"


def _match_label(p: Label, c: Label, th: dict) -> bool:
    if p.sort is not c.sort:
        return False
    if p.name == _HOLE or c.name == _HOLE:
        return p.name == c.name
    got = th.get(p.name)
    if got is None:
        th[p.name] = c
        return True
    return got == c


def match_formula(p: Formula, c: Formula, th: dict) -> bool:
    if isinstance(p, Meta):
        got = th.get(p.name)
        if got is None:
            th[p.name] = c
            return True
        return got == c
    if type(p) is not type(c):
        return False
    if isinstance(p, (And, Or)):
        return match_formula(p.left, c.left, th) and match_formula(p.right, c.right, th)
    if isinstance(p, (Box, Dia, Rhd)):
        return match_formula(p.arg, c.arg, th)
    return p == c


def _match_atom(p: RelAtom, c: RelAtom, th: dict) -> bool:
    return p.rel == c.rel and _match_label(p.lhs, c.lhs, th) and _match_label(p.rhs, c.rhs, th)


def match_item(p: Item, c: Item, th: Theta) -> dict | None:
    out = dict(th)
    if isinstance(p, Labelled):
        ok = (
            isinstance(c, Labelled)
            and _match_label(p.label, c.label, out)
            and match_formula(p.formula, c.formula, out)
        )
    elif isinstance(p, RelAtom):
        ok = isinstance(c, RelAtom) and _match_atom(p, c, out)
    else:
        if not isinstance(c, ImplTerm) or p.bound.sort is not c.bound.sort:
            return None
        (pa, pc), (ca, cc) = p._key(), c._key()
        ok = _match_atom(pa, ca, out) and _match_atom(pc, cc, out)
    return out if ok else None


def match_items(patterns, items, th: Theta) -> Iterator[tuple[dict, tuple]]:
    """All ways to match ``patterns`` against a sub-multiset of ``items``."""
    if not patterns:
        yield dict(th), tuple(items)
        return
    p, rest = patterns[0], patterns[1:]
    tried = []
    for i, it in enumerate(items):
        if it in tried:
            continue
        tried.append(it)
        th2 = match_item(p, it, th)
        if th2 is not None:
            yield from match_items(rest, items[:i] + items[i + 1 :], th2)


def instantiate(s: Sequent, th: Theta) -> Sequent:
    """Substitute label and formula metavariables; unbound ones are an error."""

    def form(f: Formula) -> Formula:
        if isinstance(f, Meta):
            return th[f.name]
        if isinstance(f, (And, Or)):
            return type(f)(form(f.left), form(f.right))
        if isinstance(f, (Box, Dia, Rhd)):
            return type(f)(form(f.arg))
        return f

    def item(it: Item) -> Item:
        labels = {l: th[l.name] for l in free_labels(it)}
        it = subst_item(it, labels)
        if isinstance(it, Labelled):
            return Labelled(it.label, form(it.formula))
        return it

    return Sequent(tuple(item(i) for i in s.left), tuple(item(i) for i in s.right))


def schema_labels(s: Schema) -> set[str]:
    out: set[str] = set()
    for seq in (s.conclusion,) + s.premises:
        for it in seq.items():
            out |= {l.name for l in free_labels(it)}
    return out


def conclusion_labels(s: Schema) -> set[str]:
    out: set[str] = set()
    for it in s.conclusion.items():
        out |= {l.name for l in free_labels(it)}
    return out


# --------------------------------------------------------------------------
# Proof objects


@dataclass(frozen=True)
class ProofNode:
    rule: str
    conclusion: Sequent
    premises: tuple["ProofNode", ...] = ()
    bindings: tuple[tuple[str, object], ...] = ()

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def walk(self, path: str = "root") -> Iterator[tuple[str, "ProofNode"]]:
        yield path, self
        for i, p in enumerate(self.premises):
            yield from p.walk(f"{path}.{i}")


@dataclass(frozen=True)
class Instantiation:
    theta: dict
    gamma: tuple
    delta: tuple
    params: tuple = ()


@dataclass(frozen=True)
class RuleError:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    path: str | None = None
    error: RuleError | None = None
    inst: Instantiation | None = None
    trace: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def line(self) -> str:
        return "ok" if self.ok else f"{self.path}: {self.error}"


def _split_bindings(bindings) -> tuple[dict, dict]:
    labels_forms, rels = {}, {}
    for k, v in bindings:
        (rels if isinstance(v, (RelSym, Comp)) else labels_forms)[k] = v
    return labels_forms, rels


def _diff(a: Iterable, b: Iterable) -> tuple[Counter, Counter]:
    ca, cb = Counter(a), Counter(b)
    return ca - cb, cb - ca


def _check_special(config: CalculusConfig, node: ProofNode) -> RuleError | None:
    r, c, ps = node.rule, node.conclusion, [p.conclusion for p in node.premises]
    if r in ("WeakL", "WeakR", "Fold", "Unfold") and len(ps) != 1:
        return RuleError("PremiseMismatch", f"{r} takes one premise, got {len(ps)}")
    if r in ("WeakL", "WeakR"):
        side, other = ("left", "right") if r == "WeakL" else ("right", "left")
        extra, missing = _diff(getattr(c, side), getattr(ps[0], side))
        if Counter(getattr(c, other)) != Counter(getattr(ps[0], other)):
            return RuleError("PremiseMismatch", f"{r} may only change the {side} side")
        if missing or sum(extra.values()) != 1:
            return RuleError("PremiseMismatch", f"{r} must add exactly one item on the {side}")
        return None
    if r in ("Fold", "Unfold"):
        p = ps[0]
        if c.normalized() != p.normalized():
            return RuleError("PremiseMismatch", f"{r} premise and conclusion differ beyond desugaring")
        extra = Counter()
        gone = Counter()
        for side in ("left", "right"):
            e, g = _diff(getattr(c, side), getattr(p, side))
            extra += e
            gone += g
        if sum(extra.values()) != 1 or sum(gone.values()) != 1:
            return RuleError("NoMatch", f"{r} rewrites exactly one item")
        (new,), (old,) = list(extra), list(gone)
        sugar, plain = (new, old) if r == "Fold" else (old, new)
        if not (isinstance(sugar, RelAtom) and isinstance(sugar.rel, Comp) and isinstance(plain, ImplTerm)):
            want = "composition atom in the conclusion" if r == "Fold" else "composition atom in the premise"
            return RuleError("NoMatch", f"{r} needs a {want}")
        return None
    # cuts
    if len(ps) != 2:
        return RuleError("PremiseMismatch", f"{r} takes two premises, got {len(ps)}")
    want = Sort.OBJ if r == "Cut_obj" else Sort.FEAT
    lf, _ = _split_bindings(node.bindings)
    p1, p2 = ps
    for it in set(p1.right) & set(p2.left):
        if not isinstance(it, Labelled) or it.label.sort is not want:
            continue
        if "A" in lf and lf["A"] != it.formula:
            continue
        if Counter(p1.left) + Counter(p2.left) - Counter([it]) == Counter(c.left) and (
            Counter(p1.right) - Counter([it]) + Counter(p2.right) == Counter(c.right)
        ):
            return None
    return RuleError("PremiseMismatch", "no cut formula splits the conclusion")


def _check_schema(s: Schema, concl: Sequent, prems: list[Sequent], th0: dict):
    """Return (status, payload): ok / eigen / premise / nomatch."""
    status: tuple = ("nomatch", None)
    if len(prems) != s.arity:
        return status
    for th1, gl in match_items(s.conclusion.left, concl.left, th0):
        for th2, gr in match_items(s.conclusion.right, concl.right, th1):
            if status[0] == "nomatch":
                status = ("premise", None)
            for th3 in _match_premises(s.premises, prems, th2, Counter(gl), Counter(gr)):
                bad = [e for e in s.eigen if th3[e] in concl.labels()]
                if not bad:
                    return ("ok", Instantiation(th3, gl, gr, s.params))
                status = ("eigen", th3[bad[0]])
    return status


def _match_premises(pats, prems, th, gl: Counter, gr: Counter) -> Iterator[dict]:
    if not pats:
        yield th
        return
    pat, prem = pats[0], prems[0]
    for th1, rl in match_items(pat.left, prem.left, th):
        if Counter(rl) != gl:
            continue
        for th2, rr in match_items(pat.right, prem.right, th1):
            if Counter(rr) == gr:
                yield from _match_premises(pats[1:], prems[1:], th2, gl, gr)


def check_node(config: CalculusConfig, node: ProofNode, eigen_checks: bool = True) -> CheckResult:
    """Check one inference: the node's conclusion against its premises' conclusions."""
    rule = node.rule
    if rule not in _RULE_NAMES:
        return CheckResult(False, error=RuleError("NoMatch", f"unknown rule {rule!r}"))
    if not rule_enabled(config, rule):
        return CheckResult(False, error=RuleError("RuleDisabled", f"{rule} is not enabled"))
    if rule in SPECIAL:
        err = _check_special(config, node)
        return CheckResult(err is None, error=err)
    concl = node.conclusion.normalized()
    prems = [p.conclusion.normalized() for p in node.premises]
    lf, rels = _split_bindings(node.bindings)
    best = ("nomatch", None)
    rank = {"nomatch": 0, "premise": 1, "eigen": 2}
    for s in _schemas_for(config):
        if s.rule != rule:
            continue
        params = dict(s.params)
        if any(k not in params or params[k] != v for k, v in rels.items()):
            continue
        if s.arity != len(prems):
            best = max(best, ("premise", None), key=lambda t: rank[t[0]])
            continue
        if not eigen_checks:
            s = Schema(s.rule, s.conclusion, s.premises, (), s.params, s.group)
        status, payload = _check_schema(s, concl, prems, dict(lf))
        if status == "ok":
            return CheckResult(True, inst=payload)
        if rank[status] > rank[best[0]]:
            best = (status, payload)
    kind, payload = best
    if kind == "eigen":
        err = RuleError("EigenvariableViolation", f"label {payload} occurs in the conclusion of {rule}")
    elif kind == "premise":
        err = RuleError("PremiseMismatch", f"premises do not fit {rule}")
    else:
        err = RuleError("NoMatch", f"conclusion does not match {rule}")
    return CheckResult(False, error=err)


def rename_equivalent(s1: Sequent, s2: Sequent) -> dict | None:
    """An injective sort-preserving renaming taking s1 to s2, if one exists."""
    l1 = sorted(s1.labels(), key=lambda l: (l.sort.value, l.name))
    l2 = s2.labels()
    if len(l1) != len(l2):
        return None
    pools = {srt: sorted(l for l in l2 if l.sort is srt) for srt in Sort}
    by_sort = {srt: [l for l in l1 if l.sort is srt] for srt in Sort}
    if any(len(by_sort[srt]) != len(pools[srt]) for srt in Sort):
        return None
    for po in itertools.permutations(pools[Sort.OBJ]):
        for pf in itertools.permutations(pools[Sort.FEAT]):
            m = dict(zip(by_sort[Sort.OBJ], po)) | dict(zip(by_sort[Sort.FEAT], pf))
            moved = Sequent(
                tuple(subst_item(i, m) for i in s1.left), tuple(subst_item(i, m) for i in s1.right)
            )
            if moved.normalized() == s2.normalized():
                return m
    return None


def check_proof(config: CalculusConfig, tree: ProofNode, goal: Sequent | None = None) -> CheckResult:
    trace: list[str] = []
    if goal is not None and rename_equivalent(tree.conclusion, goal) is None:
        err = RuleError("GoalMismatch", f"proof concludes {tree.conclusion}, not {goal}")
        return CheckResult(False, "root", err, trace=(f"root: {err}",))
    for path, node in tree.walk():
        res = check_node(config, node)
        trace.append(f"{path}: {node.rule} {'ok' if res.ok else res.error}")
        if not res.ok:
            return CheckResult(False, path, res.error, trace=tuple(trace))
    return CheckResult(True, trace=tuple(trace))


# --------------------------------------------------------------------------
# Proof scripts

_SX = re.compile(r'\s+|#[^\n]*|(?P<p>[()])|"(?P<s>(?:[^"\\]|\\.)*)"|(?P<a>[^\s()"]+)')


@dataclass
class ProofScript:
    tree: ProofNode
    flags: list[str] = field(default_factory=list)
    goal: Sequent | None = None


def _sx_tokens(text: str):
    pos = 0
    while pos < len(text):
        m = _SX.match(text, pos)
        if not m:
            raise _sx_error(text, pos, "unterminated string or stray character")
        if m.group("p"):
            yield ("p", m.group("p"), pos)
        elif m.group("s") is not None:
            yield ("s", re.sub(r'\\([\\"])', r"\1", m.group("s")), pos)
        elif m.group("a"):
            yield ("a", m.group("a"), pos)
        pos = m.end()


def _sx_error(text: str, pos: int, msg: str) -> ParseError:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return ParseError(msg, line, col)


def _parse_binding(name: str, value: str):
    if name in ("T", "T2", "S", "S2"):
        return parse_relexpr(value)
    if re.fullmatch(r"[A-Z][0-9']*", name):
        return parse_formula(value)
    from .syntax import lab

    return lab(value)


def parse_proof(text: str) -> ProofScript:
    toks = list(_sx_tokens(text))
    i = 0

    def expect(kind, what):
        nonlocal i
        if i >= len(toks):
            raise _sx_error(text, len(text), f"expected {what}, found end of input")
        t = toks[i]
        if t[0] != kind:
            raise _sx_error(text, t[2], f"expected {what}, found {t[1]!r}")
        i += 1
        return t

    def node() -> ProofNode:
        nonlocal i
        t = expect("p", "'('")
        if t[1] != "(":
            raise _sx_error(text, t[2], "expected '('")
        rule = expect("a", "a rule name")
        concl_tok = expect("s", "a quoted conclusion")
        try:
            concl = parse_sequent(concl_tok[1])
        except ParseError as e:
            raise _sx_error(text, concl_tok[2] + 1 + 0, f"in conclusion: {e.message}") from None
        binds, prems = [], []
        while i < len(toks) and toks[i][1] == "(":
            if i + 1 < len(toks) and toks[i + 1][1] == "bind":
                i += 2
                name = expect("a", "a metavariable")
                val = toks[i]
                if val[0] not in ("a", "s"):
                    raise _sx_error(text, val[2], "expected a binding value")
                i += 1
                try:
                    binds.append((name[1], _parse_binding(name[1], val[1])))
                except ParseError as e:
                    raise _sx_error(text, val[2], f"in binding: {e.message}") from None
                expect("p", "')'")
            else:
                prems.append(node())
        t = expect("p", "')'")
        if t[1] != ")":
            raise _sx_error(text, t[2], "expected ')'")
        return ProofNode(rule[1], concl, tuple(prems), tuple(binds))

    if not toks:
        raise ParseError("empty proof script", 1, 1)
    tree = node()
    if i != len(toks):
        raise _sx_error(text, toks[i][2], "trailing input after proof")
    flags: list[str] = []
    goal = None
    for line in text.splitlines():
        m = re.match(r"\s*#\s*(flags|goal):(.*)$", line)
        if m and m.group(1) == "flags":
            flags += m.group(2).split()
        elif m:
            goal = parse_sequent(m.group(2))
    return ProofScript(tree, flags, goal)


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def _fmt_value(v) -> str:
    if isinstance(v, Label):
        return v.name
    if isinstance(v, (RelSym, Comp)):
        return _quote(format_rel(v))
    return _quote(str(v))


def format_proof(node: ProofNode, indent: int = 0) -> str:
    pad = "  " * indent
    head = f"{pad}({node.rule} {_quote(format_sequent(node.conclusion))}"
    parts = [head]
    for k, v in node.bindings:
        parts.append(f"{pad}  (bind {k} {_fmt_value(v)})")
    for p in node.premises:
        parts.append(format_proof(p, indent + 1))
    return "\n".join(parts) + ")"


def config_from_flags(flags: Iterable[str]) -> CalculusConfig:
    flags = list(flags)
    sigma, rough, cut = set(), False, False
    i = 0
    while i < len(flags):
        f = flags[i]
        if f == "--axiom" and i + 1 < len(flags):
            sigma.add(flags[i + 1])
            i += 1
        elif f == "--rough":
            rough = True
        elif f == "--allow-cut":
            cut = True
        else:
            raise ValueError(f"unknown flag {f!r}")
        i += 1
    return CalculusConfig(frozenset(sigma), rough, cut)
