"""Acceptance suite: one test and one PASS/FAIL line per criterion."""

import itertools
import time

import oracles
from ndlc.analysis import (
    CORRESPONDENCE_ITEMS,
    FULL_SIGNATURE,
    KripkeFrame,
    correspondence_suite,
    disjoint_union,
    enumerate_contexts,
    rough_example_report,
    formulas_up_to,
    polar_law_check,
    lift_kripke,
    rough_lemma_report,
    sample_contexts,
    soundness_fuzz,
    stability_violations,
    transitivity_failures,
)
from ndlc.calculus import AXIOMS, CalculusConfig, check_proof, config_from_flags, parse_proof
from ndlc.cli import corpus_files
from ndlc.prover import Exhausted, Proved, SearchLimits, prove
from ndlc.semantics import enumerate_concepts, is_i_compatible, labelled_counterexample
from ndlc.syntax import Sort, parse_sequent

SAMPLES = 10_000
FUZZ_TRIALS = 500


def _scripts():
    return [(p.stem, parse_proof(p.read_text())) for p in corpus_files()]


def test_golden_corpus(criterion):
    scripts = _scripts()
    start = time.perf_counter()
    failures = []
    for name, s in scripts:
        res = check_proof(config_from_flags(s.flags), s.tree, s.goal)
        if not res.ok:
            failures.append(f"{name}: {res.line()}")
    elapsed = time.perf_counter() - start
    ok = len(scripts) >= 9 and not failures and elapsed < 1.0
    criterion(1, ok, f"{len(scripts) - len(failures)}/{len(scripts)} scripts check in {elapsed:.2f}s")
    assert ok, failures


def test_correspondence(criterion):
    start = time.perf_counter()
    rep = correspondence_suite(2, 2, samples=SAMPLES, sample_size=3, seed=0)
    elapsed = time.perf_counter() - start
    summary = rep.summary()
    sampled = {i: sum(1 for r in rep.rows if r.item == i and r.mode == "sampled") for i in CORRESPONDENCE_ITEMS}
    ok = not rep.disagreements and all(n >= SAMPLES for n in sampled.values()) and elapsed < 300
    total = sum(s["contexts"] for s in summary.values())
    criterion(
        2, ok,
        f"{total} context checks over items 1-7 (exhaustive 2x2, {SAMPLES} sampled 3x3 each), "
        f"{len(rep.disagreements)} disagreements, {elapsed:.0f}s",
    )
    assert ok, rep.to_text()


def test_rough_lemmas(criterion):
    rep = rough_lemma_report(3, 3)
    criterion(3, rep.ok, rep.to_text().replace("\n", "; "))
    assert rep.ok


def test_rough_example(criterion):
    got = rough_example_report()
    want = {
        "e_compatible": True,
        "sbox": [("a", "y"), ("b", "y")],
        "sbox_compatible": False,
        "sbox_section_x": [],
        "closure_of_section": ["a"],
    }
    ok = got == want
    criterion(4, ok, f"E compatible, S-box {got['sbox']}, section at x {got['sbox_section_x']} closes to {got['closure_of_section']}")
    assert ok, got


def test_non_definability(criterion):
    counts_ok = True
    frames = 0
    for n in (1, 2, 3):
        worlds = [f"w{i}" for i in range(n)]
        pairs = list(itertools.product(worlds, repeat=2))
        for bits in itertools.product((0, 1), repeat=len(pairs)):
            ctx = lift_kripke(KripkeFrame.make(worlds, [pr for pr, b in zip(pairs, bits) if b]))
            frames += 1
            counts_ok &= len(enumerate_concepts(ctx.polarity)) == 2**n
            counts_ok &= is_i_compatible(ctx.polarity, ctx.rrhd, (Sort.OBJ, Sort.OBJ))
    f1 = KripkeFrame.make(["a1", "b1"], [("a1", "b1")])
    f2 = KripkeFrame.make(["a2", "b2"], [("a2", "b2")])
    comp = disjoint_union(f1, f2).complement()
    union_ok = (
        {("a1", "a2"), ("a2", "b1")} <= comp
        and ("a1", "b1") not in comp
        and not transitivity_failures(f1.complement())
        and not transitivity_failures(f2.complement())
    )
    ok = counts_ok and union_ok
    criterion(5, ok, f"2^|W| concepts on all {frames} frames with |W| <= 3; union failure pair reproduced: {union_ok}")
    assert ok


def test_soundness_fuzz(criterion):
    configs = {
        "base+cut": CalculusConfig(allow_cut=True),
        "all axioms": CalculusConfig(frozenset(AXIOMS)),
        "rough": CalculusConfig(rough=True),
    }
    lines, violations, short = [], 0, []
    for label, config in configs.items():
        rep = soundness_fuzz(config, trials=FUZZ_TRIALS, seed=0)
        violations += len(rep.violations)
        short += [f"{label}/{g}" for g, n in rep.instances.items() if n < FUZZ_TRIALS]
        lines.append(f"{label}: {len(rep.instances)} groups, {len(rep.violations)} violations")
    mutant = soundness_fuzz(CalculusConfig(), trials=100, seed=0, groups=["switch", "logical"], mutate=True)
    ok = violations == 0 and not short and bool(mutant.violations)
    criterion(
        6, ok,
        f"{FUZZ_TRIALS} instances per group; " + "; ".join(lines)
        + f"; mutation self-test found {len(mutant.violations)} violations",
    )
    assert ok, (short, violations)


def test_polar_laws_and_stability(criterion):
    clauses = polar_law_check(1000, 5, seed=0)
    unstable = 0
    contexts = 0
    for ctx in enumerate_contexts(2, 2, FULL_SIGNATURE):
        contexts += 1
        unstable += len(stability_violations(ctx, 3))
    for ctx in sample_contexts(3, 3, 300, seed=0):
        contexts += 1
        unstable += len(stability_violations(ctx, 3))
    # depth-2 formulas evaluated by the set-based reference on a slice of contexts
    formulas = formulas_up_to(2, ("p",))
    explicit = 0
    for ctx in itertools.islice(enumerate_contexts(2, 2, FULL_SIGNATURE), 0, None, 97):
        m = oracles.model_of(ctx)
        stable = oracles.concepts(m.objs, m.feats, m.inc)
        for v in m.valuations(["p"]):
            for f in formulas:
                explicit += m.ext_int(f, v) not in stable
    ok = not any(clauses.values()) and unstable == 0 and explicit == 0
    criterion(
        7, ok,
        f"1000 random relations: {sum(clauses.values())} clause violations; "
        f"{contexts} I-compatible contexts at depth 3: {unstable} unstable denotations; "
        f"{len(formulas)} depth-2 formulas cross-checked: {explicit} unstable",
    )
    assert ok, clauses


def test_prover_round_trip(criterion):
    limits = SearchLimits(max_depth=20, node_budget=100_000)
    bad = []
    for name, s in _scripts():
        config = config_from_flags(s.flags)
        out = prove(config, s.goal, limits)
        if not isinstance(out, Proved):
            bad.append(f"{name}: {type(out).__name__}")
        elif not check_proof(CalculusConfig(config.sigma, config.rough, False), out.tree, s.goal).ok:
            bad.append(f"{name}: emitted tree rejected")
    goal = parse_sequent("a : p |- a : box p")
    out = prove(CalculusConfig(), goal, limits)
    refuted = (
        isinstance(out, Exhausted)
        and out.countermodel is not None
        and labelled_counterexample(out.countermodel.context, goal) is not None
    )
    ok = not bad and refuted
    criterion(8, ok, f"{len(_scripts()) - len(bad)}/{len(_scripts())} corpus goals re-derived and checked; "
              f"'a : p |- a : box p' exhausted with countermodel: {refuted}")
    assert ok, bad
