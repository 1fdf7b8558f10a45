import pytest
from hypothesis import given
from hypothesis import strategies as st

from ndlc.syntax import (
    And,
    Box,
    Bot,
    Comp,
    Dia,
    ImplTerm,
    Label,
    Labelled,
    Or,
    ParseError,
    Prop,
    REL_BY_NAME,
    RelAtom,
    Rhd,
    Sort,
    SortError,
    Top,
    depth,
    desugar_composition,
    format_formula,
    format_sequent,
    free_labels,
    lab,
    label_sort,
    parse_formula,
    parse_formula_sequent,
    parse_item,
    parse_relexpr,
    parse_sequent,
    props,
    rename_label,
)

p, q = Prop("p"), Prop("q")


# -- formulas ---------------------------------------------------------------


@pytest.mark.parametrize(
    "text, expected",
    [
        ("box (p /\\ q)", Box(And(p, q))),
        ("bot \\/ top", Or(Bot(), Top())),
        ("rhd rhd p", Rhd(Rhd(p))),
        ("p /\\ q \\/ p", Or(And(p, q), p)),
        ("p \\/ q /\\ p", Or(p, And(q, p))),
        ("dia p /\\ q", And(Dia(p), q)),
        ("((p))", p),
        ("p /\\ q /\\ p", And(And(p, q), p)),
    ],
)
def test_parse_formula(text, expected):
    assert parse_formula(text) == expected


@pytest.mark.parametrize("text", ["", "p /\\", "(p", "p)", "box", "p q", "p & q", "Box p"])
def test_parse_formula_errors(text):
    with pytest.raises(ParseError):
        parse_formula(text)


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse_formula("p /\\ ")
    assert (err.value.line, err.value.col) == (1, 6)
    with pytest.raises(ParseError) as err:
        parse_formula("p \\/\n  (q")
    assert err.value.line == 2


formulas = st.recursive(
    st.sampled_from([Prop("p"), Prop("q"), Prop("r1"), Bot(), Top()]),
    lambda sub: st.one_of(
        st.builds(And, sub, sub),
        st.builds(Or, sub, sub),
        st.builds(Box, sub),
        st.builds(Dia, sub),
        st.builds(Rhd, sub),
    ),
    max_leaves=8,
)


@given(formulas)
def test_formula_round_trip(f):
    assert parse_formula(format_formula(f)) == f


def test_props_and_depth():
    f = parse_formula("box (p /\\ dia q) \\/ top")
    assert props(f) == {"p", "q"}
    assert depth(f) == 4
    assert depth(p) == 0


# -- labels and items -------------------------------------------------------


@pytest.mark.parametrize("name, sort", [("a", Sort.OBJ), ("h2", Sort.OBJ), ("u", Sort.FEAT), ("z0", Sort.FEAT)])
def test_label_sort(name, sort):
    assert label_sort(name) is sort


@pytest.mark.parametrize("name", ["i", "p", "t1", "A"])
def test_label_sort_rejects(name):
    with pytest.raises(ParseError):
        label_sort(name)


def test_labelled_rendering():
    assert str(Labelled(lab("a"), Box(p))) == "a : box p"
    assert str(Labelled(lab("x"), Box(p))) == "x :: box p"


def test_parse_sequent_basic():
    s = parse_sequent("a : box p |- a Rbox x")
    assert s.left == (Labelled(lab("a"), Box(p)),)
    assert s.right == (RelAtom(lab("a"), REL_BY_NAME["Rbox"], lab("x")),)


def test_parse_impl_term():
    s = parse_sequent("(b Rbox x => b I y) |- y :: p")
    (t,) = s.left
    assert isinstance(t, ImplTerm)
    assert t.bound == lab("b")
    assert s.right == (Labelled(lab("y"), p),)


@pytest.mark.parametrize(
    "text",
    [
        "x : p |- a : p",
        "a :: p |- a : p",
        "a Rbox b |- a : p",
        "x Rbox a |- a : p",
        "a E x |- a : p",
        "x Sdia x |- a : p",
    ],
)
def test_sort_errors(text):
    with pytest.raises(SortError):
        parse_sequent(text)


@pytest.mark.parametrize(
    "item",
    [
        "a Rbox x", "x Rdia a", "a Rrhd b", "a I x", "x J a", "a E b", "a Sbox x",
        "x Sdia a", "a RBbox x", "x RBdia a", "a RBrhd b",
    ],
)
def test_every_relation_symbol_parses(item):
    assert str(parse_item(item)) in {item, item.replace("x J a", "a I x")}


def test_relexpr_sorts():
    r = parse_relexpr("J;(I;RBdia)")
    assert isinstance(r, Comp)
    with pytest.raises(SortError):
        parse_relexpr("Rbox;Rbox")


def test_formula_sequent():
    assert parse_formula_sequent("dia dia p |- dia p") == (Dia(Dia(p)), Dia(p))


def test_multiset_equality():
    s1 = parse_sequent("a : p, b : q |- x :: p")
    s2 = parse_sequent("b : q, a : p |- x :: p")
    s3 = parse_sequent("a : p, a : p, b : q |- x :: p")
    assert s1 == s2
    assert s1 != s3
    assert hash(s1) == hash(s2)


_items = [
    "a : p", "b : box q", "x :: dia p", "a Rbox x", "x Rdia b", "a I y",
    "(b Rbox x => b I y)", "a (I;RBdia) b", "a E b",
]


@given(st.lists(st.sampled_from(_items), max_size=4), st.lists(st.sampled_from(_items), max_size=4))
def test_sequent_round_trip(left, right):
    s = parse_sequent(", ".join(left) + " |- " + ", ".join(right))
    assert parse_sequent(format_sequent(s)) == s


@given(st.permutations(_items[:6]))
def test_sequent_permutation_invariance(items):
    assert parse_sequent(", ".join(items) + " |-") == parse_sequent(", ".join(_items[:6]) + " |-")


def test_comments_ignored():
    assert parse_sequent("a : p |- a : p  # identity") == parse_sequent("a : p |- a : p")


# -- desugaring -------------------------------------------------------------


def test_desugar_example_j_rbox():
    atom = parse_item("z (J;Rbox) x")
    out = desugar_composition(atom, {lab("z"), lab("x"), lab("a")})
    assert out == parse_item("(b Rbox x => z J b)")
    assert out.bound == lab("b")


def test_desugar_nested_outermost_first():
    atom = parse_item("a (I;(J;Rbox)) u")
    out = desugar_composition(atom, {lab("a"), lab("u")})
    assert out == parse_item("(v (J;Rbox) u => a I v)")
    assert out.bound.sort is Sort.FEAT
    assert isinstance(out.ante.rel, Comp)


def test_desugar_needs_composition():
    with pytest.raises(ValueError):
        desugar_composition(parse_item("a Rbox x"))


@given(st.sets(st.sampled_from(["a", "b", "c", "d", "e", "x", "y", "z", "w"])))
def test_desugar_fresh_label(avoid):
    avoid_labels = {lab(n) for n in avoid} | {lab("a"), lab("c")}
    out = desugar_composition(parse_item("a (I;RBdia) c"), avoid_labels)
    new = (free_labels(out.ante) | free_labels(out.cons)) - {lab("a"), lab("c")}
    assert new == {out.bound}
    assert out.bound not in avoid_labels
    assert out.bound.sort is Sort.FEAT


# -- renaming ---------------------------------------------------------------


def test_rename_free():
    assert rename_label(parse_item("a : box p"), lab("a"), lab("c")) == parse_item("c : box p")


def test_rename_bound_is_noop():
    t = parse_item("(b Rbox x => b I y)")
    assert rename_label(t, lab("b"), lab("c")) == t


def test_rename_sort_mismatch():
    with pytest.raises(SortError):
        rename_label(parse_item("y :: p"), lab("y"), lab("c"))


def test_rename_avoids_capture():
    t = parse_item("(v (J;Rbox) u => a I v)")
    out = rename_label(t, lab("u"), lab("v"))
    assert free_labels(out) == {lab("a"), lab("v")}
    assert out.bound != lab("v")


@given(st.sampled_from(_items), st.sampled_from(["c", "d", "g"]))
def test_rename_absent_is_identity(text, new):
    item = parse_item(text)
    old = Label("h", Sort.OBJ)
    assert rename_label(item, old, Label(new, Sort.OBJ)) == item


def test_sequent_items_are_immutable():
    s = parse_sequent("a : p |- a : p")
    with pytest.raises(Exception):
        s.left = ()
