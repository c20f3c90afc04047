"""``cookir`` command line.

Every subcommand writes one machine-readable document to stdout (JSON, or
program text for ``fmt``/``assemble``/``canonicalize --program``); warnings
and errors go to stderr. Exit status: 0 success, 1 domain error, 2 usage or
I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from . import __version__
from .annotation import (TaggedRecipe, build_program, canonicalize, canonicalize_program,
                         uncanonicalized)
from .dsl import ParseError, parse_programs, print_program, print_programs
from .errors import CookirError
from .graph import (DEFAULT_CAP, CookingGraph, candidate_token_sequences, count_linear_extensions,
                    function_dag, is_valid_sequence, permute_program, program_candidates,
                    program_dag, to_graph)
from .ir import Entity, EntityKind, Program, SymbolTable, Vocabulary, validate_program
from .losses import (LossWeights, cross_entropy, min_ce_over_candidates, total_loss,
                     triplet_bidirectional_loss)
from .matrixio import read_matrix
from .metrics import (F1_KINDS, EditCostModel, graph_edit_distance, node_set_f1,
                      retrieval_metrics)
from .taxonomy import build_vocabulary, iterative_merge, kmeans, read_features

log = logging.getLogger("cookir")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("COOKIR_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"COOKIR_SEED must be an integer, got {raw!r}") from None


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as f:
        return f.read()


def _programs(path: str) -> list[Program]:
    return parse_programs(_read_text(path))


def _program(path: str) -> Program:
    progs = _programs(path)
    if len(progs) != 1:
        raise UsageError(f"{path}: expected one program, found {len(progs)}")
    return progs[0]


def _int_list(s: str) -> list[int]:
    try:
        return [int(t) for t in s.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _emit(args, doc, pretty: str | None = None) -> None:
    if args.pretty and pretty is not None:
        print(pretty)
    else:
        print(json.dumps(doc, indent=2 if args.pretty else None, ensure_ascii=False))


# --------------------------------------------------------------------------
# subcommands


def cmd_parse(args) -> int:
    status = EXIT_OK
    docs = []
    for p in _programs(args.file):
        report = validate_program(p)
        if not report.ok:
            status = EXIT_DOMAIN
        docs.append({"valid": report.ok, "commands": len(p.commands),
                     "diagnostics": [d.to_dict() for d in report.diagnostics],
                     "program": p.to_dict()})
    pretty = "\n".join(
        f"program {i}: {'valid' if d['valid'] else 'INVALID'} ({d['commands']} commands)"
        + "".join(f"\n  {x['kind']} at command {x['command']}: {x['message']}" for x in d["diagnostics"])
        for i, d in enumerate(docs))
    _emit(args, {"programs": docs}, pretty)
    return status


def cmd_fmt(args) -> int:
    print(print_programs(_programs(args.file)))
    return EXIT_OK


def cmd_graph(args) -> int:
    g = to_graph(_program(args.file))
    fmt = "dot" if args.dot else args.format
    if fmt == "dot":
        sys.stdout.write(g.to_dot(merge_entities=args.merge_entities))
    else:
        print(json.dumps(g.to_dict(), indent=2 if args.pretty else None, ensure_ascii=False))
    return EXIT_OK


def cmd_perms(args) -> int:
    p = _program(args.file)
    rep = validate_program(p)
    if not rep.ok:
        raise CookirError("; ".join(str(d) for d in rep.diagnostics))
    if args.count:
        n = count_linear_extensions(program_dag(p))
        _emit(args, {"count": n}, str(n))
        return EXIT_OK
    cands = program_candidates(p, args.cap)
    doc = {"count": len(cands), "permutations": [list(o) for o in cands]}
    if args.programs:
        doc["programs"] = [print_program(permute_program(p, o)) for o in cands]
    pretty = "\n".join(" ".join(map(str, o)) for o in cands)
    _emit(args, doc, pretty)
    return EXIT_OK


def cmd_validate_seq(args) -> int:
    p = _program(args.file)
    dag = program_dag(p) if args.pin_out else function_dag(p)
    ok = is_valid_sequence(dag, args.order)
    _emit(args, {"valid": ok}, "valid" if ok else "invalid")
    return EXIT_OK


def _vocab(path: str | None) -> Vocabulary:
    return Vocabulary.load(path) if path else Vocabulary()


def cmd_assemble(args) -> int:
    recipe = TaggedRecipe.load(args.file)
    v = _vocab(args.vocab)
    p = build_program(recipe, v)
    for e in uncanonicalized(p):
        log.warning("uncanonicalized %s: %r", e.kind.value, e.value)
    print(print_program(p))
    return EXIT_OK


def cmd_canonicalize(args) -> int:
    v = _vocab(args.vocab)
    if args.program:
        p = canonicalize_program(_program(args.program), v)
        for e in uncanonicalized(p):
            log.warning("uncanonicalized %s: %r", e.kind.value, e.value)
        print(print_program(p))
        return EXIT_OK
    if not args.terms:
        raise UsageError("give terms to canonicalize or --program FILE")
    kind = EntityKind.parse(args.kind)
    rows = []
    for t in args.terms:
        e = canonicalize(Entity(kind, t), v)
        rows.append({"raw": t, "value": e.value, "canonical": bool(e.canonical)})
    pretty = "\n".join(r["raw"] + "\t" + r["value"] + ("" if r["canonical"] else "\t(uncanonicalized)")
                       for r in rows)
    _emit(args, rows, pretty)
    return EXIT_OK


def _ask(a: str, b: str, d: float) -> bool:
    sys.stderr.write(f"merge {a!r} and {b!r} (distance {d:.4f})? [y/N] ")
    sys.stderr.flush()
    return sys.stdin.readline().strip().lower() in ("y", "yes")


def cmd_cluster(args) -> int:
    f = read_features(args.file)
    c = kmeans(f, args.k, seed=args.seed)
    if args.merge_threshold is not None:
        c = iterative_merge(c, args.merge_threshold, confirm=_ask if args.confirm else None)
    v = build_vocabulary(c, EntityKind.parse(args.kind))
    docs = v.to_documents()
    pretty = "\n".join(f"{c.names[cid]}: {', '.join(c.members(cid))}" for cid in sorted(c.names))
    _emit(args, docs, pretty)
    return EXIT_OK


def _graph_or_program(path: str) -> CookingGraph:
    text = _read_text(path)
    if text.lstrip().startswith("{"):
        return CookingGraph.from_dict(json.loads(text))
    progs = parse_programs(text)
    if len(progs) != 1:
        raise UsageError(f"{path}: expected one program, found {len(progs)}")
    return to_graph(progs[0])


def cmd_ged(args) -> int:
    costs = EditCostModel.load(args.costs) if args.costs else EditCostModel()
    g1, g2 = _graph_or_program(args.a), _graph_or_program(args.b)
    mode = "beam" if args.beam is not None else "exact"
    d = graph_edit_distance(g1, g2, costs, mode=mode, beam_width=args.beam or 1,
                            functions_only=args.functions_only)
    _emit(args, {"ged": d, "mode": mode}, f"{d:g}")
    return EXIT_OK


def cmd_f1(args) -> int:
    pred, gt = _program(args.pred), _program(args.gt)
    v = _vocab(args.vocab) if args.vocab else None
    if v is not None:
        pred, gt = canonicalize_program(pred, v), canonicalize_program(gt, v)
    kinds = F1_KINDS if args.kind == "all" else (EntityKind.parse(args.kind),)
    doc = {}
    for kind in kinds:
        r = node_set_f1(pred, gt, kind)
        doc[kind.value] = {"precision": r.precision, "recall": r.recall, "f1": r.f1}
    pretty = "\n".join(f"{k:<11} P={r['precision']:.4f} R={r['recall']:.4f} F1={r['f1']:.4f}"
                       for k, r in doc.items())
    _emit(args, doc if args.kind == "all" else next(iter(doc.values())), pretty)
    return EXIT_OK


def cmd_retrieval(args) -> int:
    sim = read_matrix(args.file)
    r = retrieval_metrics(sim, trials=args.trials, pool=args.pool, seed=args.seed,
                          ks=args.k, direction=args.direction)
    _emit(args, r.to_dict(), r.table())
    return EXIT_OK


def cmd_loss(args) -> int:
    kind = args.loss
    if kind == "triplet":
        value = triplet_bidirectional_loss(read_matrix(args.image), read_matrix(args.text),
                                           margin=args.margin, variant=args.variant)
        doc = {"loss": "triplet", "value": value}
    elif kind == "ce":
        value = cross_entropy(read_matrix(args.pred), args.target)
        doc = {"loss": "ce", "value": value}
    elif kind == "mince":
        pred = read_matrix(args.pred)
        if args.candidates:
            with open(args.candidates, encoding="utf-8") as f:
                cands = json.load(f)
        elif args.program and args.vocab:
            table = SymbolTable(_vocab(args.vocab))
            cands = candidate_token_sequences(_program(args.program), table, args.cap)
        else:
            raise UsageError("mince needs --candidates FILE or --program FILE --vocab FILE")
        value, best = min_ce_over_candidates(pred, cands)
        doc = {"loss": "mince", "value": value, "argmin": best, "candidates": len(cands)}
    else:
        w = LossWeights(args.lambda_ss, args.lambda_pv, args.lambda_pt, args.margin)
        value = total_loss(args.l_ss, args.l_pv, args.l_pt, w)
        doc = {"loss": "total", "value": value}
    _emit(args, doc, repr(value))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS,
                        help="human-readable output")

    ap = argparse.ArgumentParser(prog="cookir", description="Cooking program toolkit.")
    ap.add_argument("--pretty", action="store_true", help="human-readable output")
    ap.add_argument("--version", action="version", version=f"cookir {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=func)
        return p

    p = add("parse", cmd_parse, "parse and validate program files")
    p.add_argument("file")

    p = add("fmt", cmd_fmt, "print programs in canonical form")
    p.add_argument("file")

    p = add("graph", cmd_graph, "lower a program to its cooking graph")
    p.add_argument("file")
    p.add_argument("--dot", action="store_true", help="Graphviz output")
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--merge-entities", action="store_true",
                   help="draw identical entities once (DOT only)")

    p = add("perms", cmd_perms, "count or enumerate valid command orderings")
    p.add_argument("file")
    p.add_argument("--count", action="store_true")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--programs", action="store_true", help="also print every permuted program")

    p = add("validate-seq", cmd_validate_seq, "check a command ordering against a program")
    p.add_argument("file")
    p.add_argument("order", type=_int_list, help="comma-separated command indices")
    p.add_argument("--pin-out", action="store_true", help="also require the out command last")

    p = add("assemble", cmd_assemble, "build a program from a tagged recipe")
    p.add_argument("file")
    p.add_argument("--vocab")

    p = add("canonicalize", cmd_canonicalize, "map terms or a program onto the vocabulary")
    p.add_argument("terms", nargs="*")
    p.add_argument("--vocab", required=True)
    p.add_argument("--kind", default="ingredient")
    p.add_argument("--program")

    p = add("cluster", cmd_cluster, "cluster term vectors into a vocabulary category")
    p.add_argument("file")
    p.add_argument("-k", "--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--merge-threshold", type=float)
    p.add_argument("--confirm", action="store_true", help="ask before every merge")
    p.add_argument("--kind", default="ingredient")

    p = add("ged", cmd_ged, "graph edit distance between two programs or graph files")
    p.add_argument("a")
    p.add_argument("b")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact search (default)")
    mode.add_argument("--beam", type=int, metavar="W")
    p.add_argument("--costs")
    p.add_argument("--functions-only", action="store_true")

    p = add("f1", cmd_f1, "node-set precision / recall / F1")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--kind", default="ingredient", choices=("ingredient", "action", "tool", "all"))
    p.add_argument("--vocab")

    p = add("retrieval", cmd_retrieval, "medR and R@K from a similarity matrix")
    p.add_argument("file")
    p.add_argument("--pool", type=int, default=1000)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--k", type=_int_list, default=[1, 5, 10])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--direction", choices=("image2recipe", "recipe2image"), default="image2recipe")

    p = add("loss", cmd_loss, "evaluate a loss kernel")
    p.add_argument("loss", choices=("triplet", "ce", "mince", "total"))
    p.add_argument("--image")
    p.add_argument("--text")
    p.add_argument("--margin", type=float, default=0.3)
    p.add_argument("--variant", choices=("verbatim", "own-anchor"), default="verbatim")
    p.add_argument("--pred")
    p.add_argument("--target", type=_int_list)
    p.add_argument("--candidates")
    p.add_argument("--program")
    p.add_argument("--vocab")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--l-ss", type=float)
    p.add_argument("--l-pv", type=float)
    p.add_argument("--l-pt", type=float)
    p.add_argument("--lambda-ss", type=float, default=1.0)
    p.add_argument("--lambda-pv", type=float, default=0.1)
    p.add_argument("--lambda-pt", type=float, default=0.1)
    return ap


_REQUIRED = {
    "triplet": ("image", "text"),
    "ce": ("pred", "target"),
    "mince": ("pred",),
    "total": ("l_ss", "l_pv", "l_pt"),
}


class _StderrHandler(logging.StreamHandler):
    # look up sys.stderr at emit time so redirection after setup still works
    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


def _setup_logging() -> None:
    pkg = logging.getLogger("cookir")
    if not any(isinstance(h, _StderrHandler) for h in pkg.handlers):
        h = _StderrHandler()
        h.setFormatter(logging.Formatter("cookir: %(levelname)s: %(message)s"))
        pkg.addHandler(h)
        pkg.setLevel(logging.WARNING)
        pkg.propagate = False


def run(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.command == "loss":
            missing = [f"--{a.replace('_', '-')}" for a in _REQUIRED[args.loss]
                       if getattr(args, a) is None]
            if missing:
                raise UsageError(f"loss {args.loss} requires {', '.join(missing)}")
        return args.func(args)
    except ParseError as e:
        print(f"{getattr(args, 'file', '<input>')}:{e}", file=sys.stderr)
        return EXIT_DOMAIN
    except CookirError as e:
        print(f"cookir: error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except (UsageError, ValueError, json.JSONDecodeError) as e:
        ap.print_usage(sys.stderr)
        print(f"cookir: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"cookir: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
