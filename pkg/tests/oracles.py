"""Brute-force reference implementations over plain Python sets.

Nothing here touches the bitmask code paths of the package; the tests compare
the two.
"""

import itertools

from ndlc.syntax import And, Bot, Box, Dia, ImplTerm, Labelled, Or, Prop, RelAtom, Rhd, Sort, Top


def subsets(xs):
    xs = list(xs)
    for r in range(len(xs) + 1):
        yield from (frozenset(c) for c in itertools.combinations(xs, r))


def up(rel, us, cod):
    """{v | every u in us is related to v}"""
    return frozenset(v for v in cod if all((u, v) in rel for u in us))


def down(rel, vs, dom):
    """{u | u is related to every v in vs}"""
    return frozenset(u for u in dom if all((u, v) in rel for v in vs))


def concepts(objs, feats, inc):
    out = set()
    for s in subsets(objs):
        if down(inc, up(inc, s, feats), objs) == s:
            out.add((s, up(inc, s, feats)))
    return out


def stable_objs(objs, feats, inc):
    return {e for e, _ in concepts(objs, feats, inc)}


def stable_feats(objs, feats, inc):
    return {i for _, i in concepts(objs, feats, inc)}


def compatible(objs, feats, inc, rel, dom, cod):
    """Every row section and column section of rel is Galois-stable."""
    stable = {
        "obj": stable_objs(objs, feats, inc),
        "feat": stable_feats(objs, feats, inc),
    }
    dsort = "obj" if dom is objs else "feat"
    csort = "obj" if cod is objs else "feat"
    rows_ok = all(frozenset(v for v in cod if (u, v) in rel) in stable[csort] for u in dom)
    cols_ok = all(frozenset(u for u in dom if (u, v) in rel) in stable[dsort] for v in cod)
    return rows_ok and cols_ok


def all_relations(dom, cod):
    pairs = [(u, v) for u in dom for v in cod]
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        yield frozenset(p for p, b in zip(pairs, bits) if b)


def converse(rel):
    return frozenset((v, u) for u, v in rel)


def compose_outer(r, s, dom, mid, cod):
    """u (R;S) w iff u in R^(0)[S^(0)[w]]"""
    out = set()
    for w in cod:
        col = frozenset(v for v in mid if (v, w) in s)
        for u in down(r, col, dom):
            out.add((u, w))
    return frozenset(out)


class Model:
    """Set-based context: objs, feats, inc and optional box/dia/rhd relations."""

    def __init__(self, objs, feats, inc, box=None, dia=None, rhd=None):
        self.objs, self.feats, self.inc = tuple(objs), tuple(feats), frozenset(inc)
        self.box, self.dia, self.rhd = box, dia, rhd

    def rel(self, name):
        table = {
            "I": self.inc,
            "J": converse(self.inc),
            "Rbox": self.box,
            "Rdia": self.dia,
            "Rrhd": self.rhd,
            "RBdia": converse(self.box) if self.box is not None else None,
            "RBbox": converse(self.dia) if self.dia is not None else None,
            "RBrhd": converse(self.rhd) if self.rhd is not None else None,
        }
        return table[name]

    def ext_int(self, f, v):
        o, x, i = self.objs, self.feats, self.inc
        if isinstance(f, Prop):
            return v[f.name]
        if isinstance(f, Top):
            return frozenset(o), up(i, o, x)
        if isinstance(f, Bot):
            return down(i, x, o), frozenset(x)
        if isinstance(f, And):
            e = self.ext_int(f.left, v)[0] & self.ext_int(f.right, v)[0]
            return e, up(i, e, x)
        if isinstance(f, Or):
            n = self.ext_int(f.left, v)[1] & self.ext_int(f.right, v)[1]
            return down(i, n, o), n
        if isinstance(f, Box):
            e = down(self.box, self.ext_int(f.arg, v)[1], o)
            return e, up(i, e, x)
        if isinstance(f, Dia):
            n = down(self.dia, self.ext_int(f.arg, v)[0], x)
            return down(i, n, o), n
        if isinstance(f, Rhd):
            e = down(self.rhd, self.ext_int(f.arg, v)[0], o)
            return e, up(i, e, x)
        raise TypeError(f)

    def valuations(self, names):
        cs = sorted(concepts(self.objs, self.feats, self.inc), key=lambda c: sorted(c[0]))
        for combo in itertools.product(cs, repeat=len(names)):
            yield dict(zip(names, combo))

    def consequence_valid(self, f, g, names=("p",)):
        return all(
            self.ext_int(f, v)[0] <= self.ext_int(g, v)[0] for v in self.valuations(list(names))
        )

    # labelled sequents
    def _holds(self, item, v, asg):
        if isinstance(item, Labelled):
            e, n = self.ext_int(item.formula, v)
            val = asg[item.label.name]
            return val in (e if item.label.sort is Sort.OBJ else n)
        if isinstance(item, RelAtom):
            return (asg[item.lhs.name], asg[item.rhs.name]) in self.rel(item.rel.text)
        if isinstance(item, ImplTerm):
            w = item.bound
            carrier = self.objs if w.sort is Sort.OBJ else self.feats
            for c in carrier:
                a2 = dict(asg)
                a2[w.name] = c
                if self._holds(item.ante, v, a2) and not self._holds(item.cons, v, a2):
                    return False
            return True
        raise TypeError(item)

    def labelled_valid(self, seq, names=("p", "q")):
        labels = sorted(seq.labels(), key=lambda l: l.name)
        ranges = [self.objs if l.sort is Sort.OBJ else self.feats for l in labels]
        for v in self.valuations(list(names)):
            for combo in itertools.product(*ranges):
                asg = {l.name: c for l, c in zip(labels, combo)}
                if all(self._holds(i, v, asg) for i in seq.left) and not any(
                    self._holds(i, v, asg) for i in seq.right
                ):
                    return False
        return True


def model_of(ctx):
    """Set-based copy of a package context."""
    p = ctx.polarity
    def pairs(r):
        return None if r is None else frozenset(r.pairs)
    return Model(p.objects, p.features, p.incidence.pairs, pairs(ctx.rbox), pairs(ctx.rdia), pairs(ctx.rrhd))
