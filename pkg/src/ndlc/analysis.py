"""Finite-model enumeration and the checks built on it.

Contexts are enumerated without quotienting by isomorphism, in a fixed order:
carrier sizes by total size, then the incidence relation by bitmask, then the
extra relations lexicographically.  Every enumerator is deterministic; the
sampling variants take an explicit seed.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .calculus import (
    AXIOMS,
    CalculusConfig,
    ProofNode,
    Schema,
    _schemas_for,
    check_node,
    instantiate,
    rule_schemas,
)
from .semantics import (
    Concept,
    Context,
    EnrichedContext,
    MissingRelation,
    Polarity,
    Relation,
    RoughContext,
    bits,
    closure,
    compose,
    compose_outer,
    consequence_counterexample,
    denote,
    derive_approximations,
    fo_condition,
    format_concept,
    format_model,
    full,
    is_i_compatible,
    labelled_counterexample,
    polar_left_mask,
    polar_right_mask,
    valuations,
)
from .syntax import (
    And,
    Bot,
    Box,
    Comp,
    Dia,
    Formula,
    Label,
    Labelled,
    Or,
    Prop,
    RelAtom,
    RelSym,
    Rhd,
    Sequent,
    Sort,
    Top,
    parse_formula_sequent,
    rel_cod,
    rel_dom,
)

OBJECT_NAMES = ("a", "b", "c", "d")
FEATURE_NAMES = ("x", "y", "z", "w")
MAX_ENUM = 4

# signature name -> (domain sort, codomain sort)
SIGNATURE = {
    "rbox": (Sort.OBJ, Sort.FEAT),
    "rdia": (Sort.FEAT, Sort.OBJ),
    "rrhd": (Sort.OBJ, Sort.OBJ),
}
FULL_SIGNATURE = ("rbox", "rdia", "rrhd")


class EnumerationBudgetExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Enumeration


def carrier_sizes(max_a: int, max_x: int) -> list[tuple[int, int]]:
    if max_a > MAX_ENUM or max_x > MAX_ENUM:
        raise ValueError(f"carrier bounds are limited to {MAX_ENUM}")
    sizes = [(na, nx) for na in range(1, max_a + 1) for nx in range(1, max_x + 1)]
    return sorted(sizes, key=lambda s: (s[0] + s[1], s))


def polarity_from_mask(n_a: int, n_x: int, mask: int) -> Polarity:
    objs, feats = OBJECT_NAMES[:n_a], FEATURE_NAMES[:n_x]
    rows = tuple((mask >> (i * n_x)) & full(n_x) for i in range(n_a))
    return Polarity(objs, feats, Relation(objs, feats, rows))


def polarities(n_a: int, n_x: int) -> Iterator[Polarity]:
    for mask in range(1 << (n_a * n_x)):
        yield polarity_from_mask(n_a, n_x, mask)


def _carrier(p: Polarity, sort: Sort) -> tuple[str, ...]:
    return p.objects if sort is Sort.OBJ else p.features


@lru_cache(maxsize=4096)
def compatible_relations(p: Polarity, name: str) -> tuple[Relation, ...]:
    """Every I-compatible relation of the given signature entry, in mask order."""
    dom_sort, cod_sort = SIGNATURE[name]
    dom, cod = _carrier(p, dom_sort), _carrier(p, cod_sort)
    rows_from = sorted(p.stable_objs if cod_sort is Sort.OBJ else p.stable_feats)
    out = []
    for rows in itertools.product(rows_from, repeat=len(dom)):
        r = Relation(dom, cod, tuple(rows))
        if all(p.is_stable(dom_sort, c) for c in r.cols):
            out.append(r)
    return tuple(out)


def set_partitions(n: int) -> Iterator[list[int]]:
    """Restricted growth strings of length n."""

    def go(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for k in range(top + 2):
            yield from go(prefix + [k], max(top, k))

    if n == 0:
        yield []
    else:
        yield from go([0], 0)


def equivalences(objs: Sequence[str]) -> Iterator[Relation]:
    n = len(objs)
    for blocks in set_partitions(n):
        rows = tuple(sum(1 << j for j in range(n) if blocks[j] == blocks[i]) for i in range(n))
        yield Relation(tuple(objs), tuple(objs), rows)


def _passes(ctx: Context, frame_class: Iterable[str]) -> bool:
    return all(fo_condition(ctx, c) for c in frame_class)


def enumerate_contexts(
    max_a: int,
    max_x: int,
    signature: Sequence[str] = FULL_SIGNATURE,
    frame_class: Iterable[str] = (),
    rough: bool = False,
    require_compat: bool = True,
    budget: int | None = None,
    exact: tuple[int, int] | None = None,
) -> Iterator[Context]:
    """Every context up to the bounds with I-compatible relations of ``signature``.

    With ``rough`` the stream holds rough contexts over every equivalence E,
    keeping only those with E and the derived strict box I-compatible unless
    ``require_compat`` is false.  ``exact`` restricts to one carrier size.
    """
    frame_class = tuple(frame_class)
    for name in signature:
        if name not in SIGNATURE:
            raise ValueError(f"unknown relation {name!r}")
    sizes = [exact] if exact else carrier_sizes(max_a, max_x)
    count = 0
    for na, nx in sizes:
        for p in polarities(na, nx):
            if rough:
                stream: Iterable[Context] = (RoughContext(p, e) for e in equivalences(p.objects))
            else:
                lists = [compatible_relations(p, n) for n in signature]
                stream = (
                    EnrichedContext(p, **dict(zip(signature, combo)))
                    for combo in itertools.product(*lists)
                )
            for ctx in stream:
                if rough and require_compat and not ctx.compatible():
                    continue
                if not _passes(ctx, frame_class):
                    continue
                count += 1
                if budget is not None and count > budget:
                    raise EnumerationBudgetExceeded(f"more than {budget} contexts")
                yield ctx


def sample_contexts(
    n_a: int,
    n_x: int,
    count: int,
    seed: int = 0,
    signature: Sequence[str] = FULL_SIGNATURE,
    frame_class: Iterable[str] = (),
    rough: bool = False,
) -> Iterator[Context]:
    """``count`` contexts of exactly the given size, drawn with a seeded generator."""
    rng = random.Random(seed)
    frame_class = tuple(frame_class)
    produced, attempts = 0, 0
    while produced < count:
        attempts += 1
        if attempts > 200 * count + 1000:
            raise EnumerationBudgetExceeded("frame class too sparse for sampling")
        p = polarity_from_mask(n_a, n_x, rng.getrandbits(n_a * n_x))
        if rough:
            eqs = list(equivalences(p.objects))
            ctx: Context = RoughContext(p, rng.choice(eqs))
            if not ctx.compatible():
                continue
        else:
            rels = {n: rng.choice(compatible_relations(p, n)) for n in signature}
            ctx = EnrichedContext(p, **rels)
        if _passes(ctx, frame_class):
            produced += 1
            yield ctx


# --------------------------------------------------------------------------
# Correspondence

CORRESPONDENCE_ITEMS = {
    1: ("box-refl", ("rbox",)),
    2: ("dia-refl", ("rdia",)),
    3: ("box-dense", ("rbox",)),
    4: ("sym-rhd", ("rrhd",)),
    5: ("dia-dense", ("rdia",)),
    6: ("b1", ("rbox", "rdia")),
    7: ("b2", ("rbox", "rdia")),
}


@dataclass
class CorrespondenceRow:
    item: int
    mode: str
    context: Context
    axiom_valid: bool
    fo_holds: bool
    witness: dict | None = None

    @property
    def agrees(self) -> bool:
        return self.axiom_valid == self.fo_holds


@dataclass
class CorrespondenceReport:
    rows: list[CorrespondenceRow] = field(default_factory=list)

    def summary(self) -> dict[int, dict[str, int]]:
        out = {i: {"contexts": 0, "agree": 0, "disagree": 0} for i in CORRESPONDENCE_ITEMS}
        for r in self.rows:
            s = out[r.item]
            s["contexts"] += 1
            s["agree" if r.agrees else "disagree"] += 1
        return out

    @property
    def disagreements(self) -> list[CorrespondenceRow]:
        return [r for r in self.rows if not r.agrees]

    def to_text(self) -> str:
        lines = []
        for i, s in self.summary().items():
            name = CORRESPONDENCE_ITEMS[i][0]
            lines.append(
                f"item {i} ({AXIOMS[name][0]}): {s['contexts']} contexts, "
                f"{s['agree']} agree, {s['disagree']} disagree"
            )
        for r in self.disagreements:
            lines.append(f"disagreement on item {r.item}:\n{format_model(r.context)}")
        return "\n".join(lines)

    def to_json(self) -> str:
        doc = {
            "summary": {str(k): v for k, v in self.summary().items()},
            "disagreements": [
                {
                    "item": r.item,
                    "mode": r.mode,
                    "axiom_valid": r.axiom_valid,
                    "fo_holds": r.fo_holds,
                    "model": format_model(r.context),
                }
                for r in self.disagreements
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def correspondence_row(item: int, ctx: Context, mode: str = "exhaustive") -> CorrespondenceRow:
    name, _ = CORRESPONDENCE_ITEMS[item]
    f, g = parse_formula_sequent(AXIOMS[name][0])
    cex = consequence_counterexample(ctx, f, g)
    witness = None
    if cex is not None:
        witness = {k: format_concept(c) for k, c in cex.items()}
    return CorrespondenceRow(item, mode, ctx, cex is None, fo_condition(ctx, item), witness)


def correspondence_suite(
    max_a: int = 2,
    max_x: int = 2,
    samples: int = 0,
    sample_size: int = 3,
    seed: int = 0,
    items: Iterable[int] = tuple(CORRESPONDENCE_ITEMS),
) -> CorrespondenceReport:
    """Compare axiom validity with its first-order condition on every context.

    Exhaustive up to ``max_a`` x ``max_x``; ``samples`` extra contexts of size
    ``sample_size`` are drawn per item with the given seed.
    """
    report = CorrespondenceReport()
    for item in items:
        sig = CORRESPONDENCE_ITEMS[item][1]
        for ctx in enumerate_contexts(max_a, max_x, sig):
            report.rows.append(correspondence_row(item, ctx))
        if samples:
            for ctx in sample_contexts(sample_size, sample_size, samples, seed + item, sig):
                report.rows.append(correspondence_row(item, ctx, "sampled"))
    return report


# --------------------------------------------------------------------------
# Rough contexts


def example_polarity() -> Polarity:
    return Polarity.make(("a", "b"), ("x", "y"), [("a", "x"), ("a", "y"), ("b", "y")])


def rough_example_report() -> dict:
    """The two-object structure whose strict box is not I-compatible."""
    p = example_polarity()
    e = Relation.from_pairs(p.objects, p.objects, itertools.product(p.objects, repeat=2))
    _, sbox, _ = derive_approximations(p, e)
    col_x = frozenset(p.objects[i] for i in bits(sbox.cols[p.features.index("x")]))
    return {
        "e_compatible": is_i_compatible(p, e, (Sort.OBJ, Sort.OBJ)),
        "sbox": sorted(sbox.pairs),
        "sbox_compatible": is_i_compatible(p, sbox, (Sort.OBJ, Sort.FEAT)),
        "sbox_section_x": sorted(col_x),
        "closure_of_section": sorted(closure(p, "obj", col_x)),
    }


def _relation_from_mask(objs: Sequence[str], mask: int) -> Relation:
    n = len(objs)
    return Relation(tuple(objs), tuple(objs), tuple((mask >> (i * n)) & full(n) for i in range(n)))


def _is_reflexive(e: Relation) -> bool:
    return all(e.rows[i] >> i & 1 for i in range(len(e.dom)))


def _is_transitive(e: Relation) -> bool:
    return all((e.rows[j] & ~e.rows[i]) == 0 for i in range(len(e.dom)) for j in bits(e.rows[i]))


@dataclass
class RoughLemmaReport:
    sdia_checked: int = 0
    sdia_exceptions: list = field(default_factory=list)
    structures: int = 0
    refl_exceptions: list = field(default_factory=list)
    trans_exceptions: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.sdia_exceptions or self.refl_exceptions or self.trans_exceptions)

    def to_text(self) -> str:
        return (
            f"S-dia = J;E on {self.sdia_checked} rough contexts, {len(self.sdia_exceptions)} exceptions\n"
            f"reflexivity/transitivity rewriting on {self.structures} structures: "
            f"{len(self.refl_exceptions)} + {len(self.trans_exceptions)} exceptions"
        )


def rough_lemma_report(max_a: int = 3, max_x: int = 3, require_e_compat: bool = True) -> RoughLemmaReport:
    """Check the rough-context lemmas on every structure up to the bounds.

    The first check ranges over rough contexts (E an equivalence).  The
    rewriting check ranges over every relation E on the objects whose derived
    strict box is I-compatible, and also E itself when ``require_e_compat``.
    """
    rep = RoughLemmaReport()
    for na, nx in carrier_sizes(max_a, max_x):
        for p in polarities(na, nx):
            for e in equivalences(p.objects):
                _, _, sdia = derive_approximations(p, e)
                rep.sdia_checked += 1
                if sdia != compose_outer(p.converse, e):
                    rep.sdia_exceptions.append((p, e))
            for mask in range(1 << (na * na)):
                e = _relation_from_mask(p.objects, mask)
                if require_e_compat and not is_i_compatible(p, e, (Sort.OBJ, Sort.OBJ)):
                    continue
                _, sbox, _ = derive_approximations(p, e)
                if not is_i_compatible(p, sbox, (Sort.OBJ, Sort.FEAT)):
                    continue
                rep.structures += 1
                if _is_reflexive(e) != (sbox <= p.incidence):
                    rep.refl_exceptions.append((p, e))
                if _is_transitive(e) != (sbox <= compose("ax", sbox, sbox, p)):
                    rep.trans_exceptions.append((p, e))
    return rep


# --------------------------------------------------------------------------
# Polar-map properties and stability


def polar_law_check(trials: int = 1000, max_carrier: int = 5, seed: int = 0) -> dict[str, int]:
    """Violations per clause on random relations T between carriers of size <= max_carrier."""
    rng = random.Random(seed)
    bad = {"antitone": 0, "galois": 0, "extensive": 0, "triple": 0, "union": 0}
    for _ in range(trials):
        nu, nv = rng.randint(1, max_carrier), rng.randint(1, max_carrier)
        dom = tuple(f"u{i}" for i in range(nu))
        cod = tuple(f"v{i}" for i in range(nv))
        t = Relation(dom, cod, tuple(rng.getrandbits(nv) for _ in range(nu)))
        up = lambda m: polar_right_mask(t, m)  # noqa: E731
        down = lambda m: polar_left_mask(t, m)  # noqa: E731
        u1, u2, v1 = rng.getrandbits(nu), rng.getrandbits(nu), rng.getrandbits(nv)
        v2 = rng.getrandbits(nv)
        lo_u, lo_v = u1 & u2, v1 & v2
        if up(u1) & ~up(lo_u) or down(v1) & ~down(lo_v):
            bad["antitone"] += 1
        if ((u1 & ~down(v1)) == 0) != ((v1 & ~up(u1)) == 0):
            bad["galois"] += 1
        if u1 & ~down(up(u1)) or v1 & ~up(down(v1)):
            bad["extensive"] += 1
        if up(u1) != up(down(up(u1))) or down(v1) != down(up(down(v1))):
            bad["triple"] += 1
        family = [rng.getrandbits(nu) for _ in range(rng.randint(0, 3))]
        union, meet = 0, full(nv)
        for m in family:
            union |= m
            meet &= up(m)
        if up(union) != meet:
            bad["union"] += 1
    return bad


_UNARY = (Box, Dia, Rhd)
_BINARY = (And, Or)


def _apply(ctx: Context, op, args: tuple) -> tuple[int, int]:
    names = [f"_{i}" for i in range(len(args))]
    f = op(*[Prop(n) for n in names])
    return denote(ctx, f, dict(zip(names, args)))


def _ops(ctx: Context) -> list:
    box, dia, rhd = ctx.modal()
    return [op for op, r in zip(_UNARY, (box, dia, rhd)) if r is not None]


def reachable_denotations(ctx: Context, val: dict, depth: int) -> set[tuple[int, int]]:
    """Denotations of every formula of depth <= ``depth`` over the valuation's atoms."""
    level = {v for v in val.values()}
    level |= {denote(ctx, Top(), {}), denote(ctx, Bot(), {})}
    unary = _ops(ctx)
    for _ in range(depth):
        nxt = set(level)
        for d in level:
            nxt |= {_apply(ctx, op, (d,)) for op in unary}
        for d1, d2 in itertools.product(level, repeat=2):
            nxt |= {_apply(ctx, op, (d1, d2)) for op in _BINARY}
        level = nxt
    return level


def formulas_up_to(depth: int, atoms: Sequence[str], unary=_UNARY) -> list[Formula]:
    """Explicit enumeration, used to cross-check the reachable-set computation."""
    level: list[Formula] = [Prop(a) for a in atoms] + [Top(), Bot()]
    seen = set(level)
    for _ in range(depth):
        new = []
        for f in level:
            new += [op(f) for op in unary]
        for f, g in itertools.product(level, repeat=2):
            new += [op(f, g) for op in _BINARY]
        for f in new:
            if f not in seen:
                seen.add(f)
                level.append(f)
    return level


def stability_violations(ctx: Context, depth: int = 3, atoms: Sequence[str] = ("p", "q")) -> list:
    """Denotations at depth <= ``depth`` that are not concepts, over every valuation."""
    p = ctx.polarity
    out = []
    for val in valuations(ctx, atoms):
        for e, i in reachable_denotations(ctx, val, depth):
            if p.up(e) != i or p.down(i) != e:
                out.append((val, (e, i)))
    return out


# --------------------------------------------------------------------------
# Kripke frames


@dataclass(frozen=True)
class KripkeFrame:
    worlds: tuple[str, ...]
    rel: frozenset

    def __post_init__(self):
        w = set(self.worlds)
        if len(w) != len(self.worlds):
            raise ValueError("duplicate world")
        bad = [pr for pr in self.rel if pr[0] not in w or pr[1] not in w]
        if bad:
            raise ValueError(f"pair {bad[0]} leaves the set of worlds")

    @classmethod
    def make(cls, worlds: Iterable[str], pairs: Iterable[tuple[str, str]]):
        return cls(tuple(worlds), frozenset(pairs))

    def complement(self) -> frozenset:
        return frozenset(itertools.product(self.worlds, repeat=2)) - self.rel


def lift_kripke(frame: KripkeFrame) -> EnrichedContext:
    """Objects and features are both W, incidence is inequality, rhd is the complement of R."""
    w = frame.worlds
    pol = Polarity.make(w, w, [(a, x) for a in w for x in w if a != x])
    rrhd = Relation.from_pairs(w, w, frame.complement())
    return EnrichedContext(pol, rrhd=rrhd)


def disjoint_union(f1: KripkeFrame, f2: KripkeFrame) -> KripkeFrame:
    """Union of two frames; world names are tagged only when they clash."""
    if set(f1.worlds) & set(f2.worlds):
        t1 = {w: f"{w}.1" for w in f1.worlds}
        t2 = {w: f"{w}.2" for w in f2.worlds}
    else:
        t1 = {w: w for w in f1.worlds}
        t2 = {w: w for w in f2.worlds}
    rel = {(t1[u], t1[v]) for u, v in f1.rel} | {(t2[u], t2[v]) for u, v in f2.rel}
    return KripkeFrame(tuple(t1.values()) + tuple(t2.values()), frozenset(rel))


def transitivity_failures(pairs: frozenset) -> list[tuple[str, str, str]]:
    """Triples (u, v, w) with uRv and vRw but not uRw."""
    succ: dict[str, set] = {}
    for u, v in pairs:
        succ.setdefault(u, set()).add(v)
    out = []
    for u, v in sorted(pairs):
        for w in sorted(succ.get(v, ())):
            if (u, w) not in pairs:
                out.append((u, v, w))
    return out


# --------------------------------------------------------------------------
# Countermodels


@dataclass
class Countermodel:
    context: Context
    valuation: dict[str, Concept]
    assignment: dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [format_model(self.context)]
        for k in sorted(self.valuation):
            lines.append(f"# {k} = {format_concept(self.valuation[k])}")
        for k in sorted(self.assignment):
            lines.append(f"# {k} -> {self.assignment[k]}")
        return "\n".join(lines)


def _needed_signature(formulas: Iterable[Formula], rels: Iterable) -> tuple[str, ...]:
    need = set()

    def walk(f):
        if isinstance(f, Box):
            need.add("rbox")
        elif isinstance(f, Dia):
            need.add("rdia")
        elif isinstance(f, Rhd):
            need.add("rrhd")
        for sub in ("arg", "left", "right"):
            if hasattr(f, sub):
                walk(getattr(f, sub))

    for f in formulas:
        walk(f)
    by_sym = {
        RelSym.RBOX: "rbox", RelSym.RBDIA: "rbox", RelSym.RDIA: "rdia",
        RelSym.RBBOX: "rdia", RelSym.RRHD: "rrhd", RelSym.RBRHD: "rrhd",
    }

    def walk_rel(r):
        if isinstance(r, Comp):
            walk_rel(r.left)
            walk_rel(r.right)
        elif r in by_sym:
            need.add(by_sym[r])

    for r in rels:
        walk_rel(r)
    return tuple(n for n in FULL_SIGNATURE if n in need)


def _sequent_parts(seq: Sequent):
    forms, rels = [], []
    for it in seq.items():
        if isinstance(it, Labelled):
            forms.append(it.formula)
        elif isinstance(it, RelAtom):
            rels.append(it.rel)
        else:
            rels += [it.ante.rel, it.cons.rel]
    return forms, rels


def countermodel(
    target,
    frame_class: Iterable[str] = (),
    max_a: int = 2,
    max_x: int = 2,
    rough: bool = False,
    budget: int | None = None,
) -> Countermodel | None:
    """First enumerated context falsifying ``target``.

    ``target`` is a labelled Sequent, a (formula, formula) pair, an axiom name
    or a formula-sequent string.
    """
    if max_a > 3 or max_x > 3:
        raise ValueError("countermodel bounds are limited to 3")
    if isinstance(target, str):
        target = parse_formula_sequent(AXIOMS[target][0] if target in AXIOMS else target)
    if isinstance(target, Sequent):
        forms, rels = _sequent_parts(target)
    else:
        forms, rels = list(target), []
    sig = FULL_SIGNATURE if rough else _needed_signature(forms, rels)
    for ctx in enumerate_contexts(max_a, max_x, sig, frame_class, rough=rough, budget=budget):
        if isinstance(target, Sequent):
            cex = labelled_counterexample(ctx, target)
            if cex is not None:
                return Countermodel(ctx, cex.valuation, cex.assignment)
        else:
            val = consequence_counterexample(ctx, *target)
            if val is not None:
                return Countermodel(ctx, val)
    return None


# --------------------------------------------------------------------------
# Soundness fuzzing


@dataclass
class FuzzViolation:
    rule: str
    premises: tuple[Sequent, ...]
    conclusion: Sequent
    context: Context


@dataclass
class FuzzReport:
    instances: dict[str, int] = field(default_factory=dict)
    evaluations: int = 0
    violations: list[FuzzViolation] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"{g}: {n} instances" for g, n in sorted(self.instances.items())]
        lines.append(f"{self.evaluations} premise/conclusion evaluations, {len(self.violations)} violations")
        for v in self.violations[:5]:
            prem = "; ".join(str(p) for p in v.premises)
            lines.append(f"  {v.rule}: [{prem}] / {v.conclusion}")
        return "\n".join(lines)


FUZZ_OBJECTS = (Label("a", Sort.OBJ), Label("b", Sort.OBJ))
FUZZ_FEATURES = (Label("x", Sort.FEAT), Label("y", Sort.FEAT))


def random_formula(rng: random.Random, depth: int, unary=_UNARY, atoms=("p", "q")) -> Formula:
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.1:
            return Top()
        if r < 0.2:
            return Bot()
        return Prop(rng.choice(atoms))
    if rng.random() < 0.5:
        return rng.choice(unary)(random_formula(rng, depth - 1, unary, atoms))
    return rng.choice(_BINARY)(
        random_formula(rng, depth - 1, unary, atoms), random_formula(rng, depth - 1, unary, atoms)
    )


def _label_pool(sort: Sort) -> tuple[Label, ...]:
    return FUZZ_OBJECTS if sort is Sort.OBJ else FUZZ_FEATURES


def _random_atom(rng: random.Random, rels: Sequence[RelSym]) -> RelAtom:
    r = rng.choice(rels)
    return RelAtom(rng.choice(_label_pool(r.dom)), r, rng.choice(_label_pool(r.cod)))


def _random_item(rng: random.Random, rels, unary):
    if rng.random() < 0.6:
        sort = rng.choice((Sort.OBJ, Sort.FEAT))
        return Labelled(rng.choice(_label_pool(sort)), random_formula(rng, 1, unary))
    return _random_atom(rng, rels)


def _context_relations(config: CalculusConfig) -> list[RelSym]:
    if config.rough:
        return [RelSym.I, RelSym.SBOX, RelSym.SDIA, RelSym.E]
    return [RelSym.I, RelSym.RBOX, RelSym.RDIA, RelSym.RRHD]


def _metas(s: Schema) -> set[str]:
    out: set[str] = set()

    def walk(f):
        from .syntax import Meta

        if isinstance(f, Meta):
            out.add(f.name)
        for sub in ("arg", "left", "right"):
            if hasattr(f, sub):
                walk(getattr(f, sub))

    for seq in (s.conclusion,) + s.premises:
        for it in seq.items():
            if isinstance(it, Labelled):
                walk(it.formula)
    return out


def _schema_label_sorts(s: Schema) -> dict[str, Sort]:
    out = {}
    for seq in (s.conclusion,) + s.premises:
        for it in seq.items():
            from .syntax import free_labels

            for l in free_labels(it):
                out[l.name] = l.sort
    return out


def _random_instance(rng, config: CalculusConfig, rule: str, schema: Schema | None):
    """A candidate (premises, conclusion) for the rule, or None."""
    rels = _context_relations(config)
    unary = _UNARY
    gamma = tuple(_random_item(rng, rels, unary) for _ in range(rng.randint(0, 2)))
    delta = tuple(_random_item(rng, rels, unary) for _ in range(rng.randint(0, 1)))
    if schema is not None:
        th: dict = {}
        for name, sort in _schema_label_sorts(schema).items():
            th[name] = rng.choice(_label_pool(sort))
        for m in _metas(schema):
            th[m] = random_formula(rng, 2, unary)
        concl = instantiate(schema.conclusion, th)
        prems = tuple(instantiate(p, th) for p in schema.premises)
        concl = Sequent(gamma + concl.left, concl.right + delta)
        prems = tuple(Sequent(gamma + p.left, p.right + delta) for p in prems)
        return prems, concl
    if rule in ("WeakL", "WeakR"):
        prem = Sequent(gamma, delta)
        extra = _random_item(rng, rels, unary)
        concl = Sequent(gamma + (extra,), delta) if rule == "WeakL" else Sequent(gamma, delta + (extra,))
        return (prem,), concl
    if rule in ("Cut_obj", "Cut_feat"):
        sort = Sort.OBJ if rule == "Cut_obj" else Sort.FEAT
        cut = Labelled(rng.choice(_label_pool(sort)), random_formula(rng, 1, unary))
        g2 = tuple(_random_item(rng, rels, unary) for _ in range(rng.randint(0, 1)))
        p1 = Sequent(gamma, (cut,) + delta)
        p2 = Sequent(g2 + (cut,), ())
        return (p1, p2), Sequent(gamma + g2, delta)
    # Fold / Unfold over a random composition in the relation families
    from .calculus import S_FAMILY, T_FAMILY, _family

    fam = [Comp(RelSym.I, t) for t in _family(T_FAMILY)] + [Comp(RelSym.J, s) for s in _family(S_FAMILY)]
    if config.rough:
        from .calculus import ROUGH_TABLE
        from .syntax import map_rel

        fam = [map_rel(r, ROUGH_TABLE) for r in fam]
    fam = [r for r in fam if isinstance(r, Comp)]
    r = rng.choice(fam)
    atom = RelAtom(rng.choice(_label_pool(rel_dom(r))), r, rng.choice(_label_pool(rel_cod(r))))
    from .syntax import normalize_item

    plain = normalize_item(atom)
    side = rng.random() < 0.5
    sugar_seq = Sequent(gamma + (atom,), delta) if side else Sequent(gamma, delta + (atom,))
    plain_seq = Sequent(gamma + (plain,), delta) if side else Sequent(gamma, delta + (plain,))
    if rule == "Fold":
        return (plain_seq,), sugar_seq
    return (sugar_seq,), plain_seq


def fuzz_class(config: CalculusConfig, group: str, rule: str, n: int = 2) -> list[Context]:
    """Contexts on which instances of ``rule`` are evaluated."""
    return list(_fuzz_class_cached(config, group, rule, n))


@lru_cache(maxsize=None)
def _fuzz_class_cached(config: CalculusConfig, group: str, rule: str, n: int) -> tuple:
    if config.rough:
        return tuple(enumerate_contexts(n, n, rough=True))
    frame = ()
    if group == "frame":
        frame = tuple(AXIOMS[a][1] for a in AXIOMS if AXIOMS[a][2] == rule)
    elif config.sigma:
        frame = ()
    return tuple(enumerate_contexts(n, n, FULL_SIGNATURE, frame, exact=(n, n)))


def _invalid_on(ctx: Context, seq: Sequent) -> bool:
    try:
        return labelled_counterexample(ctx, seq) is not None
    except MissingRelation:
        return False


def soundness_fuzz(
    config: CalculusConfig,
    trials: int = 500,
    seed: int = 0,
    groups: Iterable[str] | None = None,
    mutate: bool = False,
    contexts_per_instance: int = 12,
    size: int = 2,
) -> FuzzReport:
    """Sample rule instances per group and look for valid premises with an invalid conclusion.

    Candidates are kept only when ``check_node`` accepts them, so every kept
    instance is a legal rule application.  ``mutate`` disables the
    eigenvariable side conditions as a self-test of the harness.
    """
    from .calculus import rule_group

    rng = random.Random(seed)
    by_group: dict[str, list] = {}
    for rule, _, schema in rule_schemas(config):
        by_group.setdefault(rule_group(rule), []).append((rule, schema))
    wanted = sorted(by_group) if groups is None else list(groups)
    report = FuzzReport()
    for group in wanted:
        entries = by_group.get(group, [])
        if mutate:
            entries = [(r, s) for r, s in entries if s is not None and s.eigen]
        if not entries:
            report.instances[group] = 0
            continue
        kept, attempts = 0, 0
        while kept < trials and attempts < trials * 200:
            attempts += 1
            rule, schema = rng.choice(entries)
            cand = _random_instance(rng, config, rule, schema)
            if cand is None:
                continue
            prems, concl = cand
            node = ProofNode(rule, concl, tuple(ProofNode("Id_obj", p) for p in prems))
            if not check_node(config, node, eigen_checks=not mutate).ok:
                continue
            if mutate and schema is not None:
                res = check_node(config, node)
                if res.ok:
                    continue  # only keep instances that break the side condition
            kept += 1
            pool = fuzz_class(config, group, rule, size)
            ctxs = pool if len(pool) <= contexts_per_instance else rng.sample(pool, contexts_per_instance)
            for ctx in ctxs:
                report.evaluations += 1
                if not _invalid_on(ctx, concl):
                    continue
                if all(not _invalid_on(ctx, p) for p in prems):
                    report.violations.append(FuzzViolation(rule, prems, concl, ctx))
                    break
        report.instances[group] = kept
    return report


def i_compat_witness() -> FuzzViolation | None:
    """A switch-rule instance that is unsound once the box relation is not I-compatible.

    Uses the two-by-two example polarity with the box relation set to its strict box.
    """
    p = example_polarity()
    e = Relation.from_pairs(p.objects, p.objects, itertools.product(p.objects, repeat=2))
    _, sbox, _ = derive_approximations(p, e)
    ctx = EnrichedContext(p, rbox=sbox)
    schema = next(s for s in _schemas_for(CalculusConfig()) if s.rule == "S-x-box-a")
    for labels in itertools.product(p.objects, p.features, p.features):
        th = {
            "a": Label(labels[0], Sort.OBJ),
            "x": Label(labels[1], Sort.FEAT),
            "y": Label(labels[2], Sort.FEAT),
            "A": Bot(),
        }
        if th["y"] == th["x"]:
            continue
        concl = instantiate(schema.conclusion, th)
        prem = instantiate(schema.premises[0], th)
        if _invalid_on(ctx, concl) and not _invalid_on(ctx, prem):
            return FuzzViolation("S-x-box-a", (prem,), concl, ctx)
    return None
