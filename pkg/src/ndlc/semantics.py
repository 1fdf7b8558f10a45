"""Finite relational semantics over polarities.

Relations are stored as bitmask rows: ``rows[i]`` has bit ``j`` set when the
i-th element of the domain is related to the j-th element of the codomain.
Public functions take and return frozensets of element names; the ``*_mask``
variants are the fast paths used by the enumerators.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .syntax import (
    And,
    Bot,
    Box,
    Dia,
    Formula,
    ImplTerm,
    Label,
    Labelled,
    Or,
    Prop,
    RelAtom,
    RelExpr,
    RelSym,
    Rhd,
    Sequent,
    Sort,
    Top,
    normalize_item,
    props,
    sequent_props,
)

MAX_CARRIER = 16


class MissingRelation(ValueError):
    pass


class ModelError(ValueError):
    pass


def bits(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def full(n: int) -> int:
    return (1 << n) - 1


# --------------------------------------------------------------------------
# Relations


@dataclass(frozen=True)
class Relation:
    dom: tuple[str, ...]
    cod: tuple[str, ...]
    rows: tuple[int, ...]

    @classmethod
    def from_pairs(cls, dom: Sequence[str], cod: Sequence[str], pairs: Iterable[tuple[str, str]]):
        dom, cod = tuple(dom), tuple(cod)
        di = {n: i for i, n in enumerate(dom)}
        ci = {n: i for i, n in enumerate(cod)}
        rows = [0] * len(dom)
        for u, v in pairs:
            if u not in di or v not in ci:
                raise ModelError(f"pair ({u}, {v}) outside carrier")
            rows[di[u]] |= 1 << ci[v]
        return cls(dom, cod, tuple(rows))

    @classmethod
    def from_cols(cls, dom: Sequence[str], cod: Sequence[str], cols: Sequence[int]):
        rows = [0] * len(dom)
        for j, c in enumerate(cols):
            for i in bits(c):
                rows[i] |= 1 << j
        return cls(tuple(dom), tuple(cod), tuple(rows))

    @cached_property
    def cols(self) -> tuple[int, ...]:
        cols = [0] * len(self.cod)
        for i, r in enumerate(self.rows):
            for j in bits(r):
                cols[j] |= 1 << i
        return tuple(cols)

    @cached_property
    def pairs(self) -> frozenset:
        return frozenset((self.dom[i], self.cod[j]) for i, r in enumerate(self.rows) for j in bits(r))

    def converse(self) -> "Relation":
        return Relation(self.cod, self.dom, self.cols)

    def complement(self) -> "Relation":
        n = full(len(self.cod))
        return Relation(self.dom, self.cod, tuple(n & ~r for r in self.rows))

    def holds(self, u: str, v: str) -> bool:
        return bool(self.rows[self.dom.index(u)] >> self.cod.index(v) & 1)

    def issubset(self, other: "Relation") -> bool:
        return all(r & ~s == 0 for r, s in zip(self.rows, other.rows))

    def __le__(self, other: "Relation") -> bool:
        return self.issubset(other)


def polar_right_mask(t: Relation, umask: int) -> int:
    v = full(len(t.cod))
    rows = t.rows
    for i in bits(umask):
        v &= rows[i]
    return v


def polar_left_mask(t: Relation, vmask: int) -> int:
    u = 0
    for i, r in enumerate(t.rows):
        if r & vmask == vmask:
            u |= 1 << i
    return u


def _to_mask(carrier: Sequence[str], subset: Iterable[str]) -> int:
    m = 0
    for s in subset:
        try:
            m |= 1 << carrier.index(s)
        except ValueError:
            raise ModelError(f"element {s!r} outside carrier") from None
    return m


def _to_set(carrier: Sequence[str], mask: int) -> frozenset:
    return frozenset(carrier[i] for i in bits(mask))


def polar_right(t: Relation, subset: Iterable[str]) -> frozenset:
    """T^(1)[U'] = {v | u T v for all u in U'}."""
    return _to_set(t.cod, polar_right_mask(t, _to_mask(t.dom, subset)))


def polar_left(t: Relation, subset: Iterable[str]) -> frozenset:
    """T^(0)[V'] = {u | u T v for all v in V'}."""
    return _to_set(t.dom, polar_left_mask(t, _to_mask(t.cod, subset)))


# --------------------------------------------------------------------------
# Polarities and concepts


@dataclass(frozen=True)
class Concept:
    extent: frozenset
    intent: frozenset


@dataclass(frozen=True)
class Polarity:
    objects: tuple[str, ...]
    features: tuple[str, ...]
    incidence: Relation

    @classmethod
    def make(cls, objects: Sequence[str], features: Sequence[str], pairs: Iterable[tuple[str, str]]):
        objects, features = tuple(objects), tuple(features)
        if len(set(objects)) != len(objects) or len(set(features)) != len(features):
            raise ModelError("duplicate carrier element")
        return cls(objects, features, Relation.from_pairs(objects, features, pairs))

    @cached_property
    def converse(self) -> Relation:
        return self.incidence.converse()

    @property
    def top_obj(self) -> int:
        return full(len(self.objects))

    @property
    def top_feat(self) -> int:
        return full(len(self.features))

    def up(self, omask: int) -> int:
        return polar_right_mask(self.incidence, omask)

    def down(self, fmask: int) -> int:
        return polar_left_mask(self.incidence, fmask)

    def close(self, sort: Sort, mask: int) -> int:
        if sort is Sort.OBJ:
            return self.down(self.up(mask))
        return self.up(self.down(mask))

    def carrier(self, sort: Sort) -> tuple[str, ...]:
        return self.objects if sort is Sort.OBJ else self.features

    @cached_property
    def extents(self) -> tuple[int, ...]:
        """All Galois-stable object sets, ordered by size then mask."""
        if max(len(self.objects), len(self.features)) > MAX_CARRIER:
            raise ModelError(f"carrier larger than {MAX_CARRIER}")
        exts = {self.top_obj}
        for c in self.incidence.cols:
            exts |= {e & c for e in exts}
        return tuple(sorted(exts, key=lambda m: (bin(m).count("1"), m)))

    @cached_property
    def concept_masks(self) -> tuple[tuple[int, int], ...]:
        return tuple((e, self.up(e)) for e in self.extents)

    @cached_property
    def stable_objs(self) -> frozenset:
        return frozenset(self.extents)

    @cached_property
    def stable_feats(self) -> frozenset:
        return frozenset(i for _, i in self.concept_masks)

    def is_stable(self, sort: Sort, mask: int) -> bool:
        return mask in (self.stable_objs if sort is Sort.OBJ else self.stable_feats)


def closure(polarity: Polarity, side: str, subset: Iterable[str]) -> frozenset:
    sort = Sort.OBJ if side == "obj" else Sort.FEAT
    carrier = polarity.carrier(sort)
    return _to_set(carrier, polarity.close(sort, _to_mask(carrier, subset)))


@dataclass(frozen=True)
class ConceptLattice:
    polarity: Polarity
    concepts: tuple[Concept, ...]

    def leq(self, c1: Concept, c2: Concept) -> bool:
        return c1.extent <= c2.extent

    @property
    def top(self) -> Concept:
        return max(self.concepts, key=lambda c: len(c.extent))

    @property
    def bottom(self) -> Concept:
        return max(self.concepts, key=lambda c: len(c.intent))

    def __len__(self) -> int:
        return len(self.concepts)


def enumerate_concepts(polarity: Polarity) -> ConceptLattice:
    cs = tuple(
        Concept(_to_set(polarity.objects, e), _to_set(polarity.features, i))
        for e, i in polarity.concept_masks
    )
    return ConceptLattice(polarity, cs)


def is_i_compatible(polarity: Polarity, rel: Relation, signature: tuple[Sort, Sort]) -> bool:
    """Every row and column section of ``rel`` is Galois-stable."""
    dom_sort, cod_sort = signature
    return all(polarity.is_stable(cod_sort, r) for r in rel.rows) and all(
        polarity.is_stable(dom_sort, c) for c in rel.cols
    )


# --------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class EnrichedContext:
    polarity: Polarity
    rbox: Relation | None = None
    rdia: Relation | None = None
    rrhd: Relation | None = None

    @cached_property
    def rbdia(self) -> Relation | None:
        return self.rbox.converse() if self.rbox is not None else None

    @cached_property
    def rbbox(self) -> Relation | None:
        return self.rdia.converse() if self.rdia is not None else None

    @cached_property
    def rbrhd(self) -> Relation | None:
        return self.rrhd.converse() if self.rrhd is not None else None

    def modal(self) -> tuple[Relation | None, Relation | None, Relation | None]:
        return self.rbox, self.rdia, self.rrhd

    def compatible(self) -> bool:
        p = self.polarity
        return all(
            r is None or is_i_compatible(p, r, sig)
            for r, sig in (
                (self.rbox, (Sort.OBJ, Sort.FEAT)),
                (self.rdia, (Sort.FEAT, Sort.OBJ)),
                (self.rrhd, (Sort.OBJ, Sort.OBJ)),
            )
        )


def is_equivalence(e: Relation) -> bool:
    n = len(e.dom)
    refl = all(e.rows[i] >> i & 1 for i in range(n))
    sym = e.rows == e.cols
    trans = all((e.rows[j] & ~e.rows[i]) == 0 for i in range(n) for j in bits(e.rows[i]))
    return refl and sym and trans


def derive_approximations(polarity: Polarity, e: Relation) -> tuple[Relation, Relation, Relation]:
    """Lax and strict approximations of I induced by ``e`` (any relation on A)."""
    inc = polarity.incidence
    lax, strict = [], []
    for row in e.rows:
        acc = 0
        for b in bits(row):
            acc |= inc.rows[b]
        lax.append(acc)
        strict.append(polar_right_mask(inc, row))
    objs, feats = polarity.objects, polarity.features
    sbox = Relation(objs, feats, tuple(strict))
    return Relation(objs, feats, tuple(lax)), sbox, sbox.converse()


@dataclass(frozen=True)
class RoughContext:
    polarity: Polarity
    e: Relation

    def __post_init__(self):
        if not is_equivalence(self.e):
            raise ModelError("E must be reflexive, symmetric and transitive")

    @cached_property
    def derived(self) -> tuple[Relation, Relation, Relation]:
        return derive_approximations(self.polarity, self.e)

    @property
    def rbox(self) -> Relation:
        return self.derived[0]

    @property
    def sbox(self) -> Relation:
        return self.derived[1]

    @property
    def sdia(self) -> Relation:
        return self.derived[2]

    def modal(self) -> tuple[Relation, Relation, Relation]:
        return self.sbox, self.sdia, self.e

    def compatible(self) -> bool:
        p = self.polarity
        return is_i_compatible(p, self.e, (Sort.OBJ, Sort.OBJ)) and is_i_compatible(
            p, self.sbox, (Sort.OBJ, Sort.FEAT)
        )


Context = Union[EnrichedContext, RoughContext]


def rough_derive(rough: RoughContext) -> tuple[Relation, Relation, Relation]:
    """(lax R-box, strict S-box, its converse S-dia)."""
    return rough.derived


def relation(ctx: Context, sym: RelSym) -> Relation:
    if sym is RelSym.I:
        return ctx.polarity.incidence
    if sym is RelSym.J:
        return ctx.polarity.converse
    if isinstance(ctx, RoughContext):
        table = {
            RelSym.RBOX: ctx.rbox,
            RelSym.SBOX: ctx.sbox,
            RelSym.SDIA: ctx.sdia,
            RelSym.E: ctx.e,
            RelSym.RRHD: ctx.e,
            RelSym.RBRHD: ctx.e.converse(),
        }
    else:
        table = {
            RelSym.RBOX: ctx.rbox,
            RelSym.RDIA: ctx.rdia,
            RelSym.RRHD: ctx.rrhd,
            RelSym.RBDIA: ctx.rbdia,
            RelSym.RBBOX: ctx.rbbox,
            RelSym.RBRHD: ctx.rbrhd,
        }
    r = table.get(sym)
    if r is None:
        raise MissingRelation(f"context has no relation {sym.text}")
    return r


def compose_outer(r: Relation, s: Relation) -> Relation:
    """u (R;S) w iff u is in R^(0)[S^(0)[w]]."""
    if r.cod != s.dom:
        raise ValueError("composition signature mismatch")
    return Relation.from_cols(r.dom, s.cod, [polar_left_mask(r, c) for c in s.cols])


def compose(kind: str, r: Relation, s: Relation, polarity: Polarity) -> Relation:
    if kind == "outer":
        return compose_outer(r, s)
    objs, feats = polarity.objects, polarity.features
    if kind == "ax":
        for t in (r, s):
            if (t.dom, t.cod) != (objs, feats):
                raise ValueError("ax composition needs relations on A x X")
        cols = [polar_left_mask(r, polarity.up(c)) for c in s.cols]
    elif kind == "xa":
        for t in (r, s):
            if (t.dom, t.cod) != (feats, objs):
                raise ValueError("xa composition needs relations on X x A")
        cols = [polar_left_mask(r, polarity.down(c)) for c in s.cols]
    else:
        raise ValueError(f"unknown composition kind {kind!r}")
    return Relation.from_cols(r.dom, s.cod, cols)


def rel_eval(ctx: Context, expr: RelExpr) -> Relation:
    if isinstance(expr, RelSym):
        return relation(ctx, expr)
    return compose_outer(rel_eval(ctx, expr.left), rel_eval(ctx, expr.right))


# --------------------------------------------------------------------------
# Formulas


Masks = tuple[int, int]


def denote(ctx: Context, f: Formula, val: Mapping[str, Masks], memo: dict | None = None) -> Masks:
    """(extent mask, intent mask) of ``f`` under a valuation given as masks."""
    if memo is not None and f in memo:
        return memo[f]
    p = ctx.polarity
    if isinstance(f, Prop):
        if f.name not in val:
            raise KeyError(f"valuation has no entry for {f.name}")
        out = val[f.name]
    elif isinstance(f, Top):
        out = (p.top_obj, p.up(p.top_obj))
    elif isinstance(f, Bot):
        out = (p.down(p.top_feat), p.top_feat)
    elif isinstance(f, And):
        e = denote(ctx, f.left, val, memo)[0] & denote(ctx, f.right, val, memo)[0]
        out = (e, p.up(e))
    elif isinstance(f, Or):
        i = denote(ctx, f.left, val, memo)[1] & denote(ctx, f.right, val, memo)[1]
        out = (p.down(i), i)
    else:
        box, dia, rhd = ctx.modal()
        if isinstance(f, Box):
            if box is None:
                raise MissingRelation("box needs a box relation")
            e = polar_left_mask(box, denote(ctx, f.arg, val, memo)[1])
            out = (e, p.up(e))
        elif isinstance(f, Dia):
            if dia is None:
                raise MissingRelation("dia needs a diamond relation")
            i = polar_left_mask(dia, denote(ctx, f.arg, val, memo)[0])
            out = (p.down(i), i)
        elif isinstance(f, Rhd):
            if rhd is None:
                raise MissingRelation("rhd needs a triangle relation")
            e = polar_left_mask(rhd, denote(ctx, f.arg, val, memo)[0])
            out = (e, p.up(e))
        else:
            raise TypeError(f"not a formula: {f!r}")
    if memo is not None:
        memo[f] = out
    return out


def _val_masks(ctx: Context, valuation: Mapping[str, Concept]) -> dict[str, Masks]:
    p = ctx.polarity
    return {
        k: (_to_mask(p.objects, c.extent), _to_mask(p.features, c.intent))
        for k, c in valuation.items()
    }


def extension(model: tuple[Context, Mapping[str, Concept]], f: Formula) -> frozenset:
    ctx, v = model
    return _to_set(ctx.polarity.objects, denote(ctx, f, _val_masks(ctx, v))[0])


def intension(model: tuple[Context, Mapping[str, Concept]], f: Formula) -> frozenset:
    ctx, v = model
    return _to_set(ctx.polarity.features, denote(ctx, f, _val_masks(ctx, v))[1])


def valuations(ctx: Context, names: Iterable[str]) -> Iterator[dict[str, Masks]]:
    names = sorted(names)
    for combo in itertools.product(ctx.polarity.concept_masks, repeat=len(names)):
        yield dict(zip(names, combo))


def to_valuation(ctx: Context, val: Mapping[str, Masks]) -> dict[str, Concept]:
    p = ctx.polarity
    return {k: Concept(_to_set(p.objects, e), _to_set(p.features, i)) for k, (e, i) in val.items()}


def consequence_counterexample(ctx: Context, f: Formula, g: Formula) -> dict[str, Concept] | None:
    """A valuation with extension(f) not inside extension(g), if any."""
    for val in valuations(ctx, props(f) | props(g)):
        memo: dict = {}
        if denote(ctx, f, val, memo)[0] & ~denote(ctx, g, val, memo)[0]:
            return to_valuation(ctx, val)
    return None


def sequent_valid_context(ctx: Context, f: Formula, g: Formula) -> bool:
    return consequence_counterexample(ctx, f, g) is None


# --------------------------------------------------------------------------
# First-order conditions


FO_IDS = ("1", "2", "3", "4", "5", "6", "7", "cas", "sym", "refl", "trans")


def fo_condition(ctx: Context, ident: str | int) -> bool:
    ident = str(ident)
    box, dia, rhd = ctx.modal()
    p = ctx.polarity

    def need(r, what):
        if r is None:
            raise MissingRelation(f"condition {ident} needs {what}")
        return r

    if ident in ("1", "refl"):
        if ident == "refl" and not isinstance(ctx, RoughContext):
            raise MissingRelation("refl is a condition on rough contexts")
        return need(box, "a box relation") <= p.incidence
    if ident == "2":
        return need(dia, "a diamond relation") <= p.converse
    if ident in ("3", "trans"):
        if ident == "trans" and not isinstance(ctx, RoughContext):
            raise MissingRelation("trans is a condition on rough contexts")
        b = need(box, "a box relation")
        return b <= compose("ax", b, b, p)
    if ident == "4":
        r = need(rhd, "a triangle relation")
        return r.rows == r.cols
    if ident == "5":
        d = need(dia, "a diamond relation")
        return d <= compose("xa", d, d, p)
    if ident == "6":
        return need(dia, "a diamond relation") <= need(box, "a box relation").converse()
    if ident == "7":
        return need(box, "a box relation").converse() <= need(dia, "a diamond relation")
    if ident == "cas":
        b, d = need(box, "a box relation"), need(dia, "a diamond relation")
        return compose("ax", b, d.converse(), p) <= p.incidence
    if ident == "sym":
        return need(dia, "a diamond relation") == need(box, "a box relation").converse()
    raise ValueError(f"unknown condition {ident!r}")


# --------------------------------------------------------------------------
# Labelled sequents


@dataclass
class LabelledCounterexample:
    valuation: dict[str, Concept]
    assignment: dict[str, str]


def _compile_item(ctx: Context, item, index: dict[Label, int]):
    item = normalize_item(item)
    if isinstance(item, Labelled):
        k = index[item.label]
        pos = 0 if item.label.sort is Sort.OBJ else 1
        f = item.formula
        return lambda asg, den: den[f][pos] >> asg[k] & 1
    if isinstance(item, RelAtom):
        rows = rel_eval(ctx, item.rel).rows
        i, j = index[item.lhs], index[item.rhs]
        return lambda asg, den: rows[asg[i]] >> asg[j] & 1
    if isinstance(item, ImplTerm):
        w = item.bound
        n = len(ctx.polarity.carrier(w.sort))

        def section(atom: RelAtom):
            r = rel_eval(ctx, atom.rel)
            if atom.lhs == w and atom.rhs == w:
                diag = sum(1 << t for t in range(n) if r.rows[t] >> t & 1)
                return lambda asg: diag
            if atom.lhs == w:
                cols, k = r.cols, index[atom.rhs]
                return lambda asg: cols[asg[k]]
            rows, k = r.rows, index[atom.lhs]
            return lambda asg: rows[asg[k]]

        ante, cons = section(item.ante), section(item.cons)
        return lambda asg, den: (ante(asg) & ~cons(asg)) == 0
    raise TypeError(f"not a sequent item: {item!r}")


def labelled_counterexample(ctx: Context, seq: Sequent) -> LabelledCounterexample | None:
    """Valuation and label assignment making every left item true and every right item false."""
    labels = sorted(seq.labels(), key=lambda l: (l.sort.value, l.name))
    index = {l: k for k, l in enumerate(labels)}
    p = ctx.polarity
    ranges = [range(len(p.carrier(l.sort))) for l in labels]
    formulas = {it.formula for it in seq.items() if isinstance(it, Labelled)}
    left = [_compile_item(ctx, it, index) for it in seq.left]
    right = [_compile_item(ctx, it, index) for it in seq.right]
    for val in valuations(ctx, sequent_props(seq)):
        memo: dict = {}
        den = {f: denote(ctx, f, val, memo) for f in formulas}
        for asg in itertools.product(*ranges):
            if all(t(asg, den) for t in left) and not any(t(asg, den) for t in right):
                return LabelledCounterexample(
                    to_valuation(ctx, val),
                    {l.name: p.carrier(l.sort)[asg[index[l]]] for l in labels},
                )
    return None


def labelled_sequent_valid(ctx: Context, seq: Sequent) -> bool:
    return labelled_counterexample(ctx, seq) is None


# --------------------------------------------------------------------------
# Model files

_SECTION = re.compile(r"\s*([A-Za-z]+)\b(.*)", re.S)
_REL_SECTIONS = {"I", "Rbox", "Rdia", "Rrhd", "E"}


def parse_model(text: str, check_compat: bool = True) -> Context:
    """Read the ``objects ...; features ...; I a x, ...;`` format."""
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    sections: dict[str, str] = {}
    for chunk in body.split(";"):
        if not chunk.strip():
            continue
        m = _SECTION.match(chunk)
        if not m:
            raise ModelError(f"malformed section {chunk.strip()!r}")
        key, rest = m.group(1), m.group(2)
        if key not in {"objects", "features"} | _REL_SECTIONS:
            raise ModelError(f"unknown section {key!r}")
        if key in sections:
            raise ModelError(f"duplicate section {key!r}")
        sections[key] = rest
    for key in ("objects", "features"):
        if key not in sections:
            raise ModelError(f"missing section {key!r}")
    objects = tuple(sections["objects"].split())
    features = tuple(sections["features"].split())

    def pairs(key):
        out = []
        for part in sections.get(key, "").split(","):
            if not part.strip():
                continue
            xs = part.split()
            if len(xs) != 2:
                raise ModelError(f"{key}: expected a pair, got {part.strip()!r}")
            out.append(tuple(xs))
        return out

    pol = Polarity.make(objects, features, pairs("I"))
    sig = {
        "Rbox": (objects, features),
        "Rdia": (features, objects),
        "Rrhd": (objects, objects),
        "E": (objects, objects),
    }
    rels = {k: Relation.from_pairs(*sig[k], pairs(k)) for k in sig if k in sections}
    if "E" in rels:
        if set(rels) - {"E"}:
            raise ModelError("E cannot be combined with Rbox, Rdia or Rrhd")
        ctx: Context = RoughContext(pol, rels["E"])
    else:
        ctx = EnrichedContext(pol, rels.get("Rbox"), rels.get("Rdia"), rels.get("Rrhd"))
    if check_compat and not ctx.compatible():
        raise ModelError("relations are not I-compatible")
    return ctx


def _fmt_pairs(r: Relation) -> str:
    return ", ".join(f"{r.dom[i]} {r.cod[j]}" for i, row in enumerate(r.rows) for j in bits(row))


def format_model(ctx: Context) -> str:
    p = ctx.polarity
    lines = [
        f"objects {' '.join(p.objects)};",
        f"features {' '.join(p.features)};",
        f"I {_fmt_pairs(p.incidence)};",
    ]
    if isinstance(ctx, RoughContext):
        lines.append(f"E {_fmt_pairs(ctx.e)};")
    else:
        for key, r in (("Rbox", ctx.rbox), ("Rdia", ctx.rdia), ("Rrhd", ctx.rrhd)):
            if r is not None:
                lines.append(f"{key} {_fmt_pairs(r)};")
    return "\n".join(lines)


def format_concept(c: Concept) -> str:
    return "{" + ", ".join(sorted(c.extent)) + "} / {" + ", ".join(sorted(c.intent)) + "}"
