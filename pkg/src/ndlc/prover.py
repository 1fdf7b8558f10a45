"""Depth-bounded backward proof search.

At every sequent the search tries, in order: the initial rules, the first
applicable invertible logical rule (committed, no backtracking), and then every
remaining enabled rule.  Cut, weakening and Fold/Unfold are never used; goals
are desugared up front so compositions only appear as implication terms.

Subgoals can be discarded by semantic pruning: a sequent falsified on some
context of the configuration's frame class is not derivable, because every
rule is sound on that class.  Pruning never discards a derivable sequent; it
only changes how quickly an underivable branch is abandoned.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .calculus import (
    AXIOMS,
    CalculusConfig,
    ProofNode,
    Schema,
    _schemas_for,
    instantiate,
    match_items,
)
from .semantics import Context, MissingRelation, labelled_counterexample
from .syntax import ImplTerm, Label, Sequent, Sort, free_labels, subst_item

INVERTIBLE = ("AndL", "OrR", "AndR", "OrL", "BoxR", "DiaL", "RhdR")
_RESERVED = re.compile(r"_[ou](\d+)$")


@dataclass(frozen=True)
class SearchLimits:
    max_depth: int = 20
    max_fresh_labels: int = 4
    node_budget: int = 100_000

    def __post_init__(self):
        for k in ("max_depth", "max_fresh_labels", "node_budget"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be positive")


@dataclass
class Proved:
    tree: ProofNode
    nodes: int


@dataclass
class Exhausted:
    nodes: int
    refuted: bool = False
    countermodel: object = None


@dataclass
class BudgetExceeded:
    nodes: int


class _OutOfBudget(Exception):
    pass


def _fresh(sort: Sort, avoid) -> Label:
    prefix = "_o" if sort is Sort.OBJ else "_u"
    taken = {l.name for l in avoid}
    n = 1
    while f"{prefix}{n}" in taken:
        n += 1
    return Label(f"{prefix}{n}", sort)


def _reserved_count(seq: Sequent) -> int:
    return sum(1 for l in seq.labels() if _RESERVED.match(l.name))


def _text(item) -> str:
    """Item text that ignores the name of an implication term's bound label."""
    return repr(item._key()) if isinstance(item, ImplTerm) else str(item)


def _mask(item, label: Label | None = None) -> str:
    """Item text with every label hidden except ``label``."""
    names = sorted(free_labels(item), key=lambda l: l.name)
    m = {l: Label("?" if l != label else "!", l.sort) for l in names}
    return _text(subst_item(item, m))


def canonical(seq: Sequent) -> tuple:
    """Label-renaming-insensitive key (exact up to rare ties between labels)."""
    labels = sorted(seq.labels(), key=lambda l: (l.sort.value, l.name))

    def sig(l):
        return (
            l.sort.value,
            tuple(sorted(_mask(i, l) for i in seq.left if l in free_labels(i))),
            tuple(sorted(_mask(i, l) for i in seq.right if l in free_labels(i))),
        )

    order = sorted(labels, key=lambda l: (sig(l), l.name))
    ren = {l: Label(f"#{k}", l.sort) for k, l in enumerate(order)}
    left = tuple(sorted(_text(subst_item(i, ren)) for i in seq.left))
    right = tuple(sorted(_text(subst_item(i, ren)) for i in seq.right))
    return left, right


@dataclass
class _Pruner:
    contexts: list
    cache: dict = field(default_factory=dict)

    def refutes(self, seq: Sequent) -> bool:
        key = canonical(seq)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        out = False
        for k, ctx in enumerate(self.contexts):
            try:
                cex = labelled_counterexample(ctx, seq)
            except MissingRelation:
                continue
            if cex is not None:
                # move refuting contexts forward; they tend to refute again
                self.contexts.insert(0, self.contexts.pop(k))
                out = True
                break
        self.cache[key] = out
        return out


def pruning_contexts(config: CalculusConfig, count: int = 48, seed: int = 0) -> list[Context]:
    """Small deterministic sample of the configuration's frame class."""
    from .analysis import FULL_SIGNATURE, enumerate_contexts

    frame = tuple(AXIOMS[a][1] for a in sorted(config.sigma))
    if config.rough:
        pool = list(enumerate_contexts(2, 2, rough=True))
    else:
        pool = list(enumerate_contexts(2, 2, FULL_SIGNATURE, frame))
    if len(pool) <= count:
        return pool
    small = [c for c in pool if len(c.polarity.objects) + len(c.polarity.features) == 2]
    rest = [c for c in pool if c not in small]
    picked = random.Random(seed).sample(rest, max(0, count - len(small)))
    return small + picked


class _Search:
    def __init__(self, config: CalculusConfig, limits: SearchLimits, prune: bool):
        self.config = CalculusConfig(config.sigma, config.rough, False)
        self.limits = limits
        schemas = [s for s in _schemas_for(self.config)]
        self.initial = [s for s in schemas if s.arity == 0]
        self.invertible = [s for r in INVERTIBLE for s in schemas if s.rule == r]
        self.others = [s for s in schemas if s.arity > 0 and s.rule not in INVERTIBLE]
        self.extra = {id(s): _premise_only(s) for s in schemas}
        self.nodes = 0
        self.failed: dict = {}
        self.pruner = _Pruner(pruning_contexts(self.config)) if prune else None

    # -- rule application ------------------------------------------------

    def instances(self, s: Schema, seq: Sequent):
        """Backward applications of ``s``: (bindings, premises)."""
        labels = sorted(seq.labels(), key=lambda l: (l.sort.value, l.name))
        eig, free = self.extra[id(s)]
        seen = set()
        for th1, gl in match_items(s.conclusion.left, seq.left, {}):
            for th, gr in match_items(s.conclusion.right, seq.right, th1):
                if any(th[e] in seq.labels() for e in s.eigen if e in th):
                    continue
                th = dict(th)
                if eig:
                    if _reserved_count(seq) + len(eig) > self.limits.max_fresh_labels:
                        continue
                    avoid = set(seq.labels())
                    for name, sort in eig:
                        th[name] = _fresh(sort, avoid)
                        avoid.add(th[name])
                choices = [[l for l in labels if l.sort is sort] for _, sort in free]
                for combo in _product(choices):
                    t = dict(th)
                    t.update({name: l for (name, _), l in zip(free, combo)})
                    prems = tuple(
                        Sequent(gl + instantiate(p, t).left, instantiate(p, t).right + gr)
                        for p in s.premises
                    )
                    if any(p == seq for p in prems):
                        continue
                    key = tuple(canonical(p) for p in prems)
                    if key in seen:
                        continue
                    seen.add(key)
                    yield t, prems

    # -- search ----------------------------------------------------------

    def tick(self):
        self.nodes += 1
        if self.nodes > self.limits.node_budget:
            raise _OutOfBudget()

    def closes(self, seq: Sequent) -> ProofNode | None:
        for s in self.initial:
            for th1, _ in match_items(s.conclusion.left, seq.left, {}):
                for _ in match_items(s.conclusion.right, seq.right, th1):
                    return ProofNode(s.rule, seq)
        return None

    def prove(self, seq: Sequent, depth: int, branch: frozenset) -> ProofNode | None:
        self.tick()
        leaf = self.closes(seq)
        if leaf is not None:
            return leaf
        if depth == 0:
            return None
        key = canonical(seq)
        if key in branch or self.failed.get(key, -1) >= depth:
            return None
        branch = branch | {key}
        for s in self.invertible:
            for _, prems in self.instances(s, seq):
                if self.pruner and any(self.pruner.refutes(p) for p in prems):
                    self.failed[key] = max(self.failed.get(key, -1), depth)
                    return None
                node = self.children(s.rule, seq, prems, depth, branch)
                if node is None:
                    self.failed[key] = max(self.failed.get(key, -1), depth)
                return node
        for s in self.others:
            for _, prems in self.instances(s, seq):
                if self.pruner and any(self.pruner.refutes(p) for p in prems):
                    continue
                node = self.children(s.rule, seq, prems, depth, branch)
                if node is not None:
                    return node
        self.failed[key] = max(self.failed.get(key, -1), depth)
        return None

    def children(self, rule, seq, prems, depth, branch) -> ProofNode | None:
        kids = []
        for p in prems:
            k = self.prove(p, depth - 1, branch)
            if k is None:
                return None
            kids.append(k)
        return ProofNode(rule, seq, tuple(kids))


def _premise_only(s: Schema) -> tuple[list, list]:
    """Labels occurring only in the premises: (eigenvariables, others), with sorts."""
    concl = set()
    for it in s.conclusion.items():
        concl |= {l.name for l in free_labels(it)}
    extra: dict[str, Sort] = {}
    for p in s.premises:
        for it in p.items():
            for l in free_labels(it):
                if l.name not in concl:
                    extra[l.name] = l.sort
    eig = [(n, extra[n]) for n in sorted(extra) if n in s.eigen]
    free = [(n, extra[n]) for n in sorted(extra) if n not in s.eigen]
    return eig, free


def _product(choices):
    if not choices:
        yield ()
        return
    head, *rest = choices
    for h in head:
        for t in _product(rest):
            yield (h,) + t


def prove(
    config: CalculusConfig,
    goal: Sequent,
    limits: SearchLimits = SearchLimits(),
    prune: bool = True,
    countermodel: bool = True,
):
    """Search for a cut-free derivation of ``goal`` by iterative deepening."""
    goal = goal.normalized()
    search = _Search(config, limits, prune)
    if any(_RESERVED.match(l.name) for l in goal.labels()):
        raise ValueError("goal uses reserved labels (_o1, _u1, ...)")
    try:
        if search.pruner and search.pruner.refutes(goal):
            return _exhausted(config, goal, search.nodes, True, countermodel)
        for depth in range(1, limits.max_depth + 1):
            tree = search.prove(goal, depth, frozenset())
            if tree is not None:
                return Proved(tree, search.nodes)
    except _OutOfBudget:
        return BudgetExceeded(search.nodes)
    return _exhausted(config, goal, search.nodes, False, countermodel)


def _exhausted(config, goal, nodes, refuted, want_model) -> Exhausted:
    model = None
    if want_model:
        from .analysis import countermodel

        frame = tuple(AXIOMS[a][1] for a in sorted(config.sigma))
        model = countermodel(goal, frame, rough=config.rough)
    return Exhausted(nodes, refuted, model)
