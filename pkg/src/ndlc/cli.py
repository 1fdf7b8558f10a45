"""Command-line entry point: ``ndlc <command> ...``.

Exit codes: 0 success, 1 a definite negative answer, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .analysis import correspondence_suite, countermodel
from .calculus import (
    AXIOMS,
    CalculusConfig,
    check_proof,
    config_from_flags,
    format_proof,
    parse_proof,
)
from .prover import BudgetExceeded, Proved, SearchLimits, prove
from .semantics import (
    ModelError,
    consequence_counterexample,
    enumerate_concepts,
    format_concept,
    labelled_counterexample,
    parse_model,
)
from .syntax import (
    Labelled,
    ParseError,
    Sequent,
    lab,
    parse_formula_sequent,
    parse_sequent,
)


class UsageError(Exception):
    pass


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--axiom", action="append", default=[], choices=sorted(AXIOMS), help="enable a modal axiom rule")
    p.add_argument("--rough", action="store_true", help="use the rough-context calculus")
    p.add_argument("--allow-cut", action="store_true", help="accept cut rules")


def _config(args, extra_flags=()) -> CalculusConfig:
    base = config_from_flags(extra_flags)
    return CalculusConfig(
        base.sigma | frozenset(args.axiom),
        base.rough or args.rough,
        base.allow_cut or args.allow_cut,
    )


def read_goal(text: str) -> Sequent:
    """A labelled sequent, or a formula sequent ``A |- B`` read as ``a : A |- a : B``."""
    try:
        return parse_sequent(text)
    except ParseError as first:
        try:
            f, g = parse_formula_sequent(text)
        except ParseError:
            raise first from None
        a = lab("a")
        return Sequent((Labelled(a, f),), (Labelled(a, g),))


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


# --------------------------------------------------------------------------
# Commands


def cmd_check(args) -> int:
    script = parse_proof(_read(args.proof))
    config = _config(args, script.flags)
    goal = read_goal(args.goal) if args.goal else script.goal
    res = check_proof(config, script.tree, goal)
    print(res.line())
    if args.trace:
        print("\n".join(res.trace))
    return 0 if res.ok else 1


def cmd_prove(args) -> int:
    config = _config(args)
    goal = read_goal(args.sequent)
    limits = SearchLimits(args.depth, args.fresh, args.budget)
    out = prove(config, goal, limits, prune=not args.no_prune)
    if isinstance(out, Proved):
        text = format_proof(out.tree)
        print(f"Proved ({out.nodes} nodes, {out.tree.size()} steps)")
        print(text)
        if args.emit:
            flags = " ".join(config.flags())
            header = f"# flags: {flags}\n# goal: {goal}\n".replace("flags: \n", "flags:\n")
            Path(args.emit).write_text(header + text + "\n")
        return 0
    if isinstance(out, BudgetExceeded):
        print(f"BudgetExceeded after {out.nodes} nodes")
        return 1
    print(f"Exhausted after {out.nodes} nodes")
    flags = "".join(f" {f}" for f in config.flags() if f != "--allow-cut")
    if out.countermodel is not None:
        print("countermodel:")
        print(out.countermodel.to_text())
        print(f'reproduce with: ndlc countermodel "{args.sequent}"{flags}')
    else:
        print(f'no countermodel up to 2x2; try: ndlc countermodel "{args.sequent}"{flags} --max-a 3 --max-x 3')
    return 1


def cmd_validate(args) -> int:
    ctx = parse_model(_read(args.model), check_compat=not args.no_compat_check)
    try:
        f, g = parse_formula_sequent(args.sequent)
    except ParseError:
        seq = parse_sequent(args.sequent)
        cex = labelled_counterexample(ctx, seq)
        if cex is None:
            print("valid")
            return 0
        print("invalid")
        for k in sorted(cex.valuation):
            print(f"{k} = {format_concept(cex.valuation[k])}")
        for k in sorted(cex.assignment):
            print(f"{k} -> {cex.assignment[k]}")
        return 1
    val = consequence_counterexample(ctx, f, g)
    if val is None:
        print("valid")
        return 0
    print("invalid")
    for k in sorted(val):
        print(f"{k} = {format_concept(val[k])}")
    return 1


def cmd_lattice(args) -> int:
    ctx = parse_model(_read(args.model), check_compat=False)
    lat = enumerate_concepts(ctx.polarity)
    print(f"{len(lat)} concepts")
    for c in lat.concepts:
        print(format_concept(c))
    return 0


def cmd_correspond(args) -> int:
    rep = correspondence_suite(args.max_a, args.max_x, args.samples, args.sample_size, args.seed)
    print(rep.to_json() if args.json else rep.to_text())
    return 0 if not rep.disagreements else 1


def corpus_files(directory: str | None = None) -> list[Path]:
    if directory:
        return sorted(Path(directory).glob("*.proof"))
    root = resources.files("ndlc") / "corpus"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".proof"))


def cmd_corpus(args) -> int:
    files = corpus_files(args.dir)
    if not files:
        print("no proof files found")
        return 1
    bad = 0
    for path in files:
        script = parse_proof(path.read_text())
        res = check_proof(_config(args, script.flags), script.tree, script.goal)
        print(f"{path.name}: {res.line()}")
        bad += not res.ok
    print(f"{len(files) - bad}/{len(files)} passed")
    return 0 if bad == 0 else 1


def cmd_countermodel(args) -> int:
    config = _config(args)
    try:
        target = parse_formula_sequent(args.sequent)
    except ParseError:
        target = parse_sequent(args.sequent)
    frame = tuple(AXIOMS[a][1] for a in sorted(config.sigma))
    model = countermodel(target, frame, args.max_a, args.max_x, rough=config.rough)
    if model is None:
        print(f"no countermodel up to {args.max_a}x{args.max_x}")
        return 1
    print(model.to_text())
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ndlc", description="Labelled calculi for non-distributive modal logic.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check a proof script")
    p.add_argument("proof")
    p.add_argument("--goal", help="sequent the proof must conclude")
    p.add_argument("--trace", action="store_true", help="print the per-node trace")
    _config_args(p)
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("prove", help="search for a proof")
    p.add_argument("sequent")
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--fresh", type=int, default=4, help="maximum number of fresh labels")
    p.add_argument("--emit", help="write the proof script here")
    p.add_argument("--no-prune", action="store_true", help="disable semantic pruning")
    _config_args(p)
    p.set_defaults(run=cmd_prove)

    p = sub.add_parser("validate", help="evaluate a sequent on a model file")
    p.add_argument("model")
    p.add_argument("sequent")
    p.add_argument("--no-compat-check", action="store_true", help="accept relations that are not I-compatible")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("lattice", help="list the concepts of a model's polarity")
    p.add_argument("model")
    p.set_defaults(run=cmd_lattice)

    p = sub.add_parser("correspond", help="compare axioms with their first-order conditions")
    p.add_argument("--max-a", type=int, default=2)
    p.add_argument("--max-x", type=int, default=2)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--sample-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_correspond)

    p = sub.add_parser("corpus", help="check every proof in the corpus")
    p.add_argument("--dir", help="directory of .proof files (default: the bundled corpus)")
    _config_args(p)
    p.set_defaults(run=cmd_corpus)

    p = sub.add_parser("countermodel", help="search small contexts for a falsifying model")
    p.add_argument("sequent")
    p.add_argument("--max-a", type=int, default=2)
    p.add_argument("--max-x", type=int, default=2)
    _config_args(p)
    p.set_defaults(run=cmd_countermodel)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.run(args)
    except (ParseError, ModelError, UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
