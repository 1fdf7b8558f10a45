import time
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndlc.calculus import (
    AXIOMS,
    CalculusConfig,
    ProofNode,
    RuleId,
    check_node,
    check_proof,
    config_from_flags,
    format_proof,
    parse_proof,
    rule_group,
    rule_schemas,
)
from ndlc.cli import corpus_files
from ndlc.syntax import Label, ParseError, Sequent, Sort, parse_sequent, subst_item

BASE = CalculusConfig()
CUT = CalculusConfig(allow_cut=True)
ALL_SIGMA = CalculusConfig(frozenset(AXIOMS))
ROUGH = CalculusConfig(rough=True)


def node(rule, text, *premises):
    return ProofNode(rule, parse_sequent(text), tuple(premises))


def leaf(text):
    return node("Id_obj", text)


def names(config):
    return [r for r, _, _ in rule_schemas(config)]


# -- catalogue --------------------------------------------------------------


def test_base_catalogue():
    rules = set(names(BASE))
    logical = {"AndL", "AndR", "OrL", "OrR", "BoxL", "BoxR", "DiaL", "DiaR", "RhdL", "RhdR"}
    assert logical <= rules
    assert sum(rule_group(r) == "logical" for r in rules) == 10
    assert sum(rule_group(r) == "adjunction" for r in rules) == 6
    assert "Cut_obj" not in rules
    assert {"Cut_obj", "Cut_feat"} <= set(names(CUT))
    assert not rules & {"T-box-refl", "refl", "swSf"}


def test_frame_rule_gating():
    rules = set(names(CalculusConfig(frozenset({"sym-rhd"}))))
    assert "T-sym-rhd" in rules
    frame = {r for r in rules if rule_group(r) == "frame"}
    assert frame == {"T-sym-rhd"}
    assert {r for r in names(ALL_SIGMA) if rule_group(r) == "frame"} == {
        "T-box-refl", "T-dia-refl", "T-box-dense", "T-dia-dense", "T-B1", "T-B2", "T-sym-rhd",
    }


def test_rough_catalogue():
    rules = set(names(ROUGH))
    assert {"refl", "sym", "trans"} <= rules
    interdef = {"swSf", "swSfi", "swSdf", "swSdfi", "swES", "swESi", "curryS", "uncurryS"}
    assert interdef <= rules
    box_l = [s for r, _, s in rule_schemas(ROUGH) if r == "BoxL"]
    assert box_l and all("Sbox" in str(s.conclusion) + str(s.premises) for s in box_l)
    assert not any("Rbox" in str(s.conclusion) for r, _, s in rule_schemas(ROUGH) if s is not None)


def test_every_rule_id_is_reachable():
    every = set(names(CalculusConfig(frozenset(AXIOMS), False, True))) | set(names(ROUGH))
    assert every == {r.value for r in RuleId}


def test_black_relation_analogues_generated():
    rules = set(names(BASE))
    for white in ("S-x-box-a", "S-a-dia-x", "S-x-rhd-a"):
        assert white in rules
    for black in ("S-x-bbox-a", "S-a-bdia-x", "S-x-brhd-a"):
        assert black in rules


def test_catalogue_is_deterministic():
    # frozen from the implementation; a change here means the catalogue changed
    assert len(rule_schemas(BASE)) == 280
    assert len(rule_schemas(CUT)) == 282
    assert len(rule_schemas(ROUGH)) == 163
    assert [(r, a) for r, a, _ in rule_schemas(BASE)] == [(r, a) for r, a, _ in rule_schemas(BASE)]


def test_arity_matches_schema():
    for rule, arity, schema in rule_schemas(ALL_SIGMA):
        if schema is not None:
            assert arity == len(schema.premises), rule


def test_pure_structure_instances():
    pure = Counter(r for r in names(BASE) if rule_group(r) == "pure")
    assert set(pure) == {"S-IS", "S-IS-inv", "S-JT", "S-JT-inv", "Id-IJ-R", "Id-JI-R", "Id-IJ-L", "Id-JI-L"}


# -- check_node -------------------------------------------------------------


def test_box_right_ok():
    n = node("BoxR", "|- a : box p", leaf("x :: p |- a Rbox x"))
    res = check_node(BASE, n)
    assert res.ok
    assert res.inst.theta["x"] == Label("x", Sort.FEAT)


def test_box_right_eigenvariable_in_context():
    n = node("BoxR", "x :: q |- a : box p", leaf("x :: q, x :: p |- a Rbox x"))
    res = check_node(BASE, n)
    assert res.error.kind == "EigenvariableViolation"
    assert "x" in res.error.message


def test_switch_eigenvariable_in_context():
    ok = node("S-x-box-a", "a : bot, x :: bot |- a Rbox x", leaf("(b Rbox x => b I y), x :: bot |- y :: bot"))
    assert check_node(BASE, ok).ok
    bad = node(
        "S-x-box-a",
        "a : bot, x :: bot, y :: p |- a Rbox x",
        leaf("(b Rbox x => b I y), x :: bot, y :: p |- y :: bot"),
    )
    assert check_node(BASE, bad).error.kind == "EigenvariableViolation"


def test_frame_rule_gated_by_sigma():
    n = node("T-box-refl", "a : box p, x :: p |- a I x", leaf("a : box p, x :: p |- a Rbox x"))
    assert check_node(CalculusConfig(frozenset({"box-refl"})), n).ok
    assert check_node(BASE, n).error.kind == "RuleDisabled"


def test_premise_mismatch():
    n = node("BoxR", "|- a : box p", leaf("x :: q |- a Rbox x"))
    assert check_node(BASE, n).error.kind == "PremiseMismatch"


def test_no_match():
    n = node("BoxR", "|- a : dia p", leaf("x :: p |- a Rbox x"))
    assert check_node(BASE, n).error.kind == "NoMatch"
    assert check_node(BASE, node("NoSuchRule", "|- a : p")).error.kind == "NoMatch"


def test_arity_mismatch_is_rejected():
    n = node("BoxR", "|- a : box p")
    assert not check_node(BASE, n).ok


def test_initial_rules_carry_context():
    assert check_node(BASE, node("Id_obj", "b : q, a : p |- a : p, x :: q")).ok
    assert check_node(BASE, node("Id_obj", "a : box (p /\\ q) |- a : box (p /\\ q)")).ok
    assert check_node(BASE, node("TopInit", "b : q |- a : top")).ok
    assert check_node(BASE, node("BotInit", "|- x :: bot")).ok
    assert not check_node(BASE, node("Id_obj", "a : p |- b : p")).ok


def test_weakening():
    n = node("WeakL", "b : q, a : p |- a : p", leaf("a : p |- a : p"))
    assert check_node(BASE, n).ok
    n = node("WeakR", "a : p |- a : p, x :: q", leaf("a : p |- a : p"))
    assert check_node(BASE, n).ok


def test_cut_gated():
    tree = node(
        "Cut_obj", "a : p |- a : p",
        leaf("a : p |- a : p"),
        leaf("a : p |- a : p"),
    )
    assert check_proof(CUT, tree).ok
    res = check_proof(BASE, tree)
    assert res.error.kind == "RuleDisabled"
    assert res.path == "root"
    assert res.line().startswith("root: RuleDisabled")

    # the context splits multiplicatively between the premises
    split = node("Cut_obj", "b : q, a : p |- a : p, b : q", leaf("b : q |- b : q, a : p"), leaf("a : p |- a : p"))
    assert not check_proof(CUT, split).ok
    weak = node("WeakL", "b : q, a : p |- b : q", leaf("b : q |- b : q"))
    split = node("Cut_obj", "a : p, b : q |- b : q", leaf("a : p |- a : p"), weak)
    assert check_proof(CUT, split).ok


def test_cut_nested_path():
    cut = node("Cut_obj", "a : p |- a : p", leaf("a : p |- a : p"), leaf("a : p |- a : p"))
    tree = node("WeakL", "b : q, a : p |- a : p", cut)
    res = check_proof(BASE, tree)
    assert (res.path, res.error.kind) == ("root.0", "RuleDisabled")


# -- check_proof and the corpus ---------------------------------------------

CORPUS = corpus_files()


def load(name):
    script = parse_proof(next(p for p in CORPUS if p.stem == name).read_text())
    return script, config_from_flags(script.flags)


def test_corpus_complete():
    assert {p.stem for p in CORPUS} == {
        "rough_refl", "rough_sym", "rough_trans", "dia_normal", "dia_bot", "dia_mono",
        "or_proj", "dia_refl", "box_trans", "box_refl",
    }


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_checks(path):
    script = parse_proof(path.read_text())
    res = check_proof(config_from_flags(script.flags), script.tree, script.goal)
    assert res.ok, res.line()


def test_corpus_is_fast():
    start = time.perf_counter()
    for path in CORPUS:
        s = parse_proof(path.read_text())
        assert check_proof(config_from_flags(s.flags), s.tree, s.goal).ok
    assert time.perf_counter() - start < 1.0


def test_rough_refl_shape():
    script, config = load("rough_refl")
    rules = [n.rule for _, n in script.tree.walk()]
    assert rules == ["Approx_x", "refl", "curryS", "BoxL", "Id_feat"]
    assert script.goal == parse_sequent("b : box p |- b : p")
    assert not check_proof(BASE, script.tree, script.goal).ok


def test_rough_sym_shape():
    script, config = load("rough_sym")
    assert [n.rule for _, n in script.tree.walk()] == ["RhdR", "sym", "RhdL", "Id_obj"]
    assert check_proof(config, script.tree, parse_sequent("a : p |- a : rhd rhd p")).ok


def test_goal_up_to_renaming():
    script, config = load("rough_refl")
    assert check_proof(config, script.tree, parse_sequent("c : box p |- c : p")).ok
    res = check_proof(config, script.tree, parse_sequent("c : box q |- c : q"))
    assert res.error.kind == "GoalMismatch"


def _rename_tree(tree, m):
    seq = tree.conclusion
    renamed = Sequent(tuple(subst_item(i, m) for i in seq.left), tuple(subst_item(i, m) for i in seq.right))
    return ProofNode(tree.rule, renamed, tuple(_rename_tree(p, m) for p in tree.premises), tree.bindings)


def _labels(tree):
    out = set(tree.conclusion.labels())
    for p in tree.premises:
        out |= _labels(p)
    return out


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
@settings(max_examples=10, deadline=None)
@given(seed=st.randoms(use_true_random=False))
def test_checking_invariant_under_renaming(path, seed):
    script = parse_proof(path.read_text())
    config = config_from_flags(script.flags)
    labels = sorted(_labels(script.tree), key=lambda l: l.name)
    m = {}
    for sort, pool in ((Sort.OBJ, [f"c{i}" for i in range(20)]), (Sort.FEAT, [f"w{i}" for i in range(20)])):
        mine = [l for l in labels if l.sort is sort]
        new = seed.sample(pool, len(mine))
        m.update({l: Label(n, sort) for l, n in zip(mine, new)})
    assert check_proof(config, _rename_tree(script.tree, m)).ok


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_proof_script_round_trip(path):
    script = parse_proof(path.read_text())
    again = parse_proof(format_proof(script.tree))
    assert again.tree == script.tree


def test_proof_script_errors():
    for text in ['(BoxR "a : p |- a : p"', '(BoxR a : p)', "", '(BoxR "a : p |-" (bind))']:
        with pytest.raises(ParseError):
            parse_proof(text)


def test_eigen_check_never_accepts_context_occurrence():
    # the eigenvariable of every right-introduction, placed in the context
    cases = [
        ("BoxR", "x :: q |- a : box p", "x :: q, x :: p |- a Rbox x"),
        ("RhdR", "b : q |- a : rhd p", "b : q, b : p |- a Rrhd b"),
        ("DiaL", "a : q |- x :: dia p", "a : q, a : p |- x Rdia a"),
    ]
    for rule, concl, prem in cases:
        assert check_node(BASE, node(rule, concl, leaf(prem))).error.kind == "EigenvariableViolation"
        fresh_concl = concl.replace("x :: q", "y :: q").replace("b : q", "c : q").replace("a : q", "c : q")
        fresh_prem = prem.replace("x :: q", "y :: q").replace("b : q", "c : q").replace("a : q", "c : q")
        assert check_node(BASE, node(rule, fresh_concl, leaf(fresh_prem))).ok


def test_trace_lists_every_node():
    script, config = load("box_trans")
    res = check_proof(config, script.tree, script.goal)
    assert len(res.trace) == script.tree.size()
    assert all(line.endswith(" ok") for line in res.trace)


def test_fold_unfold_bindings():
    script, config = load("box_trans")
    rules = {n.rule for _, n in script.tree.walk()}
    assert {"Fold", "Unfold"} <= rules
