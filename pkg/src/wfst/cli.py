"""Command-line tool suite: fst, rule, lm and decode entry points.

Exit codes: 0 success, 1 domain error (an operation's contract was
violated), 2 usage error (bad flags, missing files, malformed input).
'-' means stdin/stdout wherever a path is expected.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import decode as dec
from . import ngram, ops, optimize, rewrite
from .errors import FsmError, ParseError, SymbolError
from .machine import Machine, SymbolTable, connect, read_text, write_text
from .semiring import Semiring

_SEMIRINGS = {"boolean": Semiring.BOOLEAN, "tropical": Semiring.TROPICAL,
              "real": Semiring.REAL}


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _load_syms(path):
    return SymbolTable.read(_read(path)) if path else None


def _machine_flags(parser, output=True):
    parser.add_argument("--isyms", help="input symbol table file")
    parser.add_argument("--osyms", help="output symbol table file")
    parser.add_argument("--semiring", choices=sorted(_SEMIRINGS),
                        default="tropical")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--acceptor", action="store_true",
                      help="force acceptor text format")
    mode.add_argument("--transducer", action="store_true",
                      help="force transducer text format")
    if output:
        parser.add_argument("-o", "--output", default="-")


def _load(path, args):
    acceptor = True if args.acceptor else (False if args.transducer else None)
    return read_text(_read(path), isymbols=_load_syms(args.isyms),
                     osymbols=_load_syms(args.osyms),
                     kind=_SEMIRINGS[args.semiring], acceptor=acceptor)


def _emit(args, m):
    _write(args.output, write_text(m))


def _labels_text(m, labels, table):
    if table is None:
        return " ".join(str(x) for x in labels)
    return " ".join(table.find(x) for x in labels)


# -- fst -----------------------------------------------------------------


def _fst_parser():
    top = argparse.ArgumentParser(prog="fst", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def unary(name, **extra):
        p = sub.add_parser(name)
        p.add_argument("machine", help="machine text file, or -")
        _machine_flags(p)
        for flag, kwargs in extra.items():
            p.add_argument(flag, **kwargs)
        return p

    def binary(name, output=True):
        p = sub.add_parser(name)
        p.add_argument("machines", nargs=2, help="two machine files")
        _machine_flags(p, output=output)
        return p

    unary("compile")
    unary("print", **{"--dot": {"action": "store_true",
                                "help": "graphviz-style dump"}})
    binary("compose")
    binary("intersect")
    binary("union")
    binary("concat")
    unary("closure")
    unary("reverse")
    unary("project", **{"--side": {"choices": ["input", "output"],
                                   "default": "input"}})
    unary("complement")
    binary("difference")
    unary("determinize")
    unary("localdet", **{"--k": {"type": int, "default": 4}})
    unary("push", **{"--mode": {"choices": ["weights", "strings"],
                                "default": "weights"}})
    unary("minimize")
    binary("equivalent", output=False)
    unary("connect")
    unary("shortest", **{"--algo": {"choices": ["acyclic", "dijkstra",
                                                "bellman_ford"],
                                    "default": "dijkstra"}})
    unary("bestpath")
    return top


def _fst_run(args):
    binary_ops = {"compose": ops.compose, "intersect": ops.intersect,
                  "union": ops.union, "concat": ops.concat,
                  "difference": ops.difference}
    if args.command in binary_ops:
        a, b = (_load(p, args) for p in args.machines)
        _emit(args, binary_ops[args.command](a, b))
        return 0
    if args.command == "equivalent":
        a, b = (_load(p, args) for p in args.machines)
        if optimize.equivalent(a, b):
            print("equivalent")
            return 0
        print("not equivalent")
        return 1
    m = _load(args.machine, args)
    if args.command in ("compile", "print"):
        if args.command == "print" and args.dot:
            _write(args.output, _dot_text(m))
        else:
            _emit(args, m)
    elif args.command == "closure":
        _emit(args, ops.closure(m))
    elif args.command == "reverse":
        _emit(args, ops.reverse(m))
    elif args.command == "project":
        _emit(args, ops.project(m, args.side))
    elif args.command == "complement":
        _emit(args, ops.complement(m))
    elif args.command == "determinize":
        _emit(args, optimize.determinize(m))
    elif args.command == "localdet":
        _emit(args, optimize.local_determinize(m, args.k))
    elif args.command == "push":
        _emit(args, optimize.push(m, args.mode))
    elif args.command == "minimize":
        _emit(args, optimize.minimize(m))
    elif args.command == "connect":
        _emit(args, connect(m))
    elif args.command == "shortest":
        d = dec.shortest_distance(m, args.algo)
        lines = [f"{q}\t{m.kind.format(d[q])}" for q in sorted(d)
                 if d[q] != m.kind.zero]
        _write(args.output, "\n".join(lines) + "\n")
    elif args.command == "bestpath":
        (inp, out), cost = dec.best_path(m)
        _write(args.output,
               f"{_labels_text(m, inp, m.isymbols)}\t"
               f"{_labels_text(m, out, m.osymbols)}\t{m.kind.format(cost)}\n")
    return 0


def _dot_text(m):
    lines = ["digraph fst {", "rankdir = LR;"]
    for q in m.states():
        shape = "doublecircle" if q in m.finals else "circle"
        lines.append(f'{q} [shape={shape}];')
        for arc in m.arcs(q):
            il = _labels_text(m, [arc.ilabel], m.isymbols)
            ol = _labels_text(m, [arc.olabel], m.osymbols)
            lines.append(f'{q} -> {arc.nextstate} '
                         f'[label="{il}:{ol}/{m.kind.format(arc.weight)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- rule ----------------------------------------------------------------


def _rule_parser():
    top = argparse.ArgumentParser(prog="rule")
    sub = top.add_subparsers(dest="command", required=True)
    c = sub.add_parser("compile", help="compile a rule file to a transducer")
    c.add_argument("rulefile")
    c.add_argument("-o", "--output", default="-")
    c.add_argument("--save-syms", help="symbol table output "
                   "(default: <output>.syms)")
    a = sub.add_parser("apply", help="run a string through a compiled rule")
    a.add_argument("fst")
    a.add_argument("input", help="space-separated symbols")
    a.add_argument("--syms", help="symbol table (default: <fst>.syms)")
    a.add_argument("--mode", choices=["all", "best"], default="all")
    t = sub.add_parser("tree", help="compile a decision-tree file")
    t.add_argument("treefile")
    t.add_argument("-o", "--output", default="-")
    t.add_argument("--save-syms")
    return top


def _save_machine_with_syms(args, m):
    _write(args.output, write_text(m))
    syms_path = args.save_syms
    if syms_path is None and args.output not in (None, "-"):
        syms_path = args.output + ".syms"
    if syms_path:
        _write(syms_path, m.isymbols.write())


def _rule_run(args):
    if args.command == "compile":
        rules = rewrite.parse_rule_file(_read(args.rulefile))
        if not rules:
            raise ParseError("rule file contains no rules")
        symtab = SymbolTable()
        machines = [rewrite.compile_weighted_rule(r, symtab) for r in rules]
        m = machines[0]
        for nxt in machines[1:]:
            m = connect(ops.compose(m, nxt))
            m.isymbols = m.osymbols = symtab
        _save_machine_with_syms(args, m)
        return 0
    if args.command == "tree":
        spec = rewrite.parse_tree(_read(args.treefile))
        m = rewrite.compile_tree(spec)
        _save_machine_with_syms(args, m)
        return 0
    syms_path = args.syms or (args.fst + ".syms" if args.fst != "-" else None)
    table = _load_syms(syms_path)
    if table is None:
        raise ParseError("rule apply needs a symbol table (--syms)")
    m = read_text(_read(args.fst), isymbols=table, osymbols=table,
                  kind=Semiring.TROPICAL, acceptor=False)
    results = rewrite.apply_rewrite(m, args.input.split(), mode=args.mode)
    lines = []
    for out, weight in results:
        text = " ".join(table.find(x) for x in out)
        lines.append(text if weight == m.kind.one
                     else f"{text}\t{m.kind.format(weight)}")
    _write("-", "\n".join(lines) + ("\n" if lines else ""))
    return 0


# -- lm ------------------------------------------------------------------


def _lm_parser():
    top = argparse.ArgumentParser(prog="lm")
    sub = top.add_subparsers(dest="command", required=True)
    c = sub.add_parser("count", help="k-gram counts from a tokenized corpus")
    c.add_argument("corpus")
    c.add_argument("-n", "--order", type=int, default=2)
    c.add_argument("-o", "--output", default="-")
    b = sub.add_parser("build", help="counts to a back-off model dump")
    b.add_argument("counts")
    b.add_argument("--k-threshold", type=int, default=ngram.DEFAULT_K_THRESHOLD)
    b.add_argument("-o", "--output", default="-")
    f = sub.add_parser("fsa", help="model dump to a weighted acceptor")
    f.add_argument("model")
    f.add_argument("-o", "--output", default="-")
    f.add_argument("--save-syms")
    s = sub.add_parser("score", help="sentence log-probability (natural log)")
    s.add_argument("model")
    s.add_argument("sentence", help="space-separated words")
    return top


def _lm_run(args):
    if args.command == "count":
        corpus = [line.split() for line in _read(args.corpus).splitlines()
                  if line.strip()]
        _write(args.output, ngram.write_counts(
            ngram.count_ngrams(corpus, args.order)))
    elif args.command == "build":
        ct = ngram.read_counts(_read(args.counts))
        _write(args.output, ngram.write_arpa(
            ngram.katz_model(ct, args.k_threshold)))
    elif args.command == "fsa":
        model = ngram.read_arpa(_read(args.model))
        m = ngram.build_lm_fsa(model)
        _write(args.output, write_text(m))
        syms_path = args.save_syms
        if syms_path is None and args.output not in (None, "-"):
            syms_path = args.output + ".syms"
        if syms_path:
            _write(syms_path, model.symbols.write())
    else:
        model = ngram.read_arpa(_read(args.model))
        words = args.sentence.split()
        for w in words:
            if w not in model.symbols:
                raise SymbolError(f"unknown word {w!r}")
        logp = model.sentence_logprob(words)
        print("-inf" if logp == -math.inf else f"{logp:.6f}")
    return 0


# -- decode --------------------------------------------------------------


def _decode_parser():
    top = argparse.ArgumentParser(
        prog="decode", description="beam decoding over a cascade of "
        "TROPICAL machines; stage files listed one per line in the manifest "
        "as '<fst> [<syms>]'")
    top.add_argument("--cascade", required=True, help="manifest file")
    top.add_argument("--beam", type=float, default=math.inf)
    top.add_argument("observations", help="space-separated input symbols")
    return top


def _decode_run(args):
    stages = []
    tables = []
    for raw in _read(args.cascade).splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        table = _load_syms(parts[1]) if len(parts) > 1 else None
        stages.append(read_text(_read(parts[0]), isymbols=table,
                                osymbols=table, kind=Semiring.TROPICAL,
                                acceptor=None if table is None else False))
        tables.append(table)
    if not stages:
        raise ParseError("cascade manifest lists no machines")
    first = tables[0]
    obs = [first.find(t) if first is not None else int(t)
           for t in args.observations.split()]
    outputs, cost, stats = dec.beam_decode(dec.CascadeSpec(stages), obs,
                                           beam=args.beam)
    out_table = tables[-1]
    text = (" ".join(out_table.find(x) for x in outputs)
            if out_table is not None else " ".join(str(x) for x in outputs))
    print(f"{text}\t{Semiring.TROPICAL.format(cost)}")
    print(f"# expanded {stats.expanded_states} states over {stats.frames} "
          f"frames, pruned {stats.pruned}", file=sys.stderr)
    return 0


# -- entry points --------------------------------------------------------


def _dispatch(parser, runner, argv):
    args = parser.parse_args(argv)
    try:
        return runner(args)
    except (ParseError, SymbolError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def fst_main(argv=None):
    return _dispatch(_fst_parser(), _fst_run, argv)


def rule_main(argv=None):
    return _dispatch(_rule_parser(), _rule_run, argv)


def lm_main(argv=None):
    return _dispatch(_lm_parser(), _lm_run, argv)


def decode_main(argv=None):
    return _dispatch(_decode_parser(), _decode_run, argv)


if __name__ == "__main__":
    sys.exit(fst_main())
