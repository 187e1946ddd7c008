"""Compiler from context-dependent (optionally weighted) rewrite rules and
decision trees to transducers.

A rule phi -> psi / lambda _ rho rewrites every occurrence of phi whose
left context matches lambda (on the already-rewritten output side) and
whose right context matches rho (on the original input side).  Compilation
is the five-transducer factorization r o f o replace o l1 o l2 built from
marker machines; the marker symbols are allocated above the user alphabet
and never escape the pipeline.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import reduce

from .errors import ContractError, ParseError
from .machine import (ANY, EPSILON, Machine, SymbolTable, accepted_pairs,
                      connect, weight_of)
from .ops import closure, complement, compose, concat, intersect, reverse, union
from .optimize import determinize
from .semiring import Semiring, require_same_kind

_METACHARS = set("()|*+?[].~&")


# -- regular expressions -------------------------------------------------


def _tokenize(pattern, symtab, classes):
    """Token stream: ('lit', label), ('set', labels), ('meta', char).

    Single characters are literals; ``{name}`` names a multi-character
    symbol or a declared class; bare declared class names also match
    (longest first).  Whitespace separates tokens and is otherwise ignored.
    """
    tokens = []
    names = sorted(classes, key=len, reverse=True)
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "{":
            j = pattern.find("}", i)
            if j < 0:
                raise ParseError(f"unclosed '{{' in pattern {pattern!r}")
            name = pattern[i + 1:j].strip()
            i = j + 1
            if name in classes:
                tokens.append(("set", tuple(symtab.add(s) for s in classes[name])))
            else:
                tokens.append(("lit", symtab.add(name)))
            continue
        hit = next((n for n in names if pattern.startswith(n, i)), None)
        if hit is not None:
            tokens.append(("set", tuple(symtab.add(s) for s in classes[hit])))
            i += len(hit)
            continue
        if ch in _METACHARS:
            tokens.append(("meta", ch))
        else:
            tokens.append(("lit", symtab.add(ch)))
        i += 1
    return tokens


def _labels_machine(labels):
    m = Machine(Semiring.BOOLEAN)
    s, e = m.add_state(), m.add_state()
    for label in labels:
        m.add_arc(s, label, label, 1.0, e)
    m.set_start(s)
    m.set_final(e)
    return m.freeze()


def _eps_machine():
    m = Machine(Semiring.BOOLEAN)
    s = m.add_state()
    m.set_start(s)
    m.set_final(s)
    return m.freeze()


def _sigma_star(labels, kind=Semiring.BOOLEAN):
    m = Machine(kind)
    s = m.add_state()
    m.set_start(s)
    m.set_final(s)
    for label in labels:
        m.add_arc(s, label, label, kind.one, s)
    return m.freeze()


class _RegexParser:
    """Grammar, loosest to tightest: '|', '&', concatenation, postfix
    * + ?, atoms.  '~' complements the following atom."""

    def __init__(self, tokens, sigma):
        self.tokens = tokens
        self.sigma = sigma
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _take(self):
        tok = self._peek()
        self.i += 1
        return tok

    def parse(self):
        m = self._alternation()
        if self.i != len(self.tokens):
            raise ParseError(f"trailing tokens at position {self.i}")
        return m

    def _alternation(self):
        m = self._intersection()
        while self._peek() == ("meta", "|"):
            self._take()
            m = union(m, self._intersection())
        return m

    def _intersection(self):
        m = self._concat()
        while self._peek() == ("meta", "&"):
            self._take()
            m = intersect(m, self._concat())
        return m

    def _concat(self):
        parts = []
        while True:
            tok = self._peek()
            if tok is None or tok in (("meta", "|"), ("meta", "&"), ("meta", ")")):
                break
            parts.append(self._postfix())
        if not parts:
            return _eps_machine()
        return reduce(concat, parts)

    def _postfix(self):
        m = self._atom()
        while True:
            tok = self._peek()
            if tok == ("meta", "*"):
                self._take()
                m = closure(m)
            elif tok == ("meta", "+"):
                self._take()
                m = concat(m, closure(m))
            elif tok == ("meta", "?"):
                self._take()
                m = union(m, _eps_machine())
            else:
                return m

    def _atom(self):
        tok = self._take()
        if tok is None:
            raise ParseError("pattern ended where an atom was expected")
        kind, value = tok
        if kind == "lit":
            return _labels_machine([value])
        if kind == "set":
            return _labels_machine(value)
        if value == "(":
            if self._peek() == ("meta", ")"):
                self._take()
                return _eps_machine()
            m = self._alternation()
            if self._take() != ("meta", ")"):
                raise ParseError("unbalanced '('")
            return m
        if value == "[":
            labels = []
            while self._peek() not in (("meta", "]"), None):
                k, v = self._take()
                if k == "lit":
                    labels.append(v)
                elif k == "set":
                    labels.extend(v)
                else:
                    raise ParseError(f"operator {v!r} inside character class")
            if self._take() != ("meta", "]"):
                raise ParseError("unbalanced '['")
            return _labels_machine(labels)
        if value == ".":
            return _labels_machine(self.sigma)
        if value == "~":
            return complement(self._atom(), alphabet=self.sigma)
        raise ParseError(f"unexpected operator {value!r}")


def compile_regex(pattern, symtab, classes=None, alphabet=None) -> Machine:
    """BOOLEAN acceptor of the pattern's language.

    Literals are added to ``symtab`` on first use.  ``alphabet`` (labels)
    is the universe for '.' and '~'; it defaults to the table's labels
    after the pattern's own literals are registered.
    """
    tokens = _tokenize(pattern, symtab, classes or {})
    sigma = sorted(set(alphabet)) if alphabet is not None else symtab.labels()
    return _RegexParser(tokens, sigma).parse()


def _accepts_empty(m):
    seen = {m.start}
    queue = deque(seen)
    while queue:
        q = queue.popleft()
        if m.final(q) != m.kind.zero:
            return True
        for arc in m.arcs(q):
            if arc.ilabel == EPSILON and arc.nextstate not in seen:
                seen.add(arc.nextstate)
                queue.append(arc.nextstate)
    return False


# -- marker machines -----------------------------------------------------


def _complete_table(alpha, sigma):
    """(transitions, finals, start) with a total transition function.

    ``alpha`` must be a deterministic acceptor; a dead state is appended
    when some transition is missing.
    """
    if not alpha.is_acceptor():
        raise ContractError("marker pattern must be an acceptor")
    if not alpha.is_deterministic():
        raise ContractError("marker pattern must be deterministic")
    trans = [{a.ilabel: a.nextstate for a in alpha.arcs(q)} for q in alpha.states()]
    finals = set(alpha.finals)
    if any(x not in row for row in trans for x in sigma):
        dead = len(trans)
        trans.append({})
        for row in trans:
            for x in sigma:
                row.setdefault(x, dead)
    return trans, finals, alpha.start


def marker(alpha: Machine, mtype: int, insert=(), delete=(), *,
           alphabet=None, passthrough=()) -> Machine:
    """Marker transducer over the deterministic pattern acceptor ``alpha``.

    type 1 inserts one symbol of ``insert`` (a nondeterministic choice)
    after every input prefix accepted by alpha; type 2 deletes symbols of
    ``delete`` occurring after accepted prefixes and rejects them
    elsewhere; type 3 deletes them after non-accepted prefixes and rejects
    them after accepted ones.  ``passthrough`` symbols are copied anywhere.
    The result is a TROPICAL transducer accepting every base string.
    """
    sigma = sorted(set(alphabet or ()) | set(alpha.input_labels()))
    trans, finals, start = _complete_table(alpha, sigma)
    out = Machine(Semiring.TROPICAL)
    if mtype == 1:
        if not insert:
            raise ContractError("type 1 marker needs a nonempty insert set")
        entry, leave = {}, {}
        for q in range(len(trans)):
            if q in finals:
                pre, post = out.add_state(), out.add_state()
                for sym in sorted(insert):
                    out.add_arc(pre, EPSILON, sym, 0.0, post)
                out.set_final(post, 0.0)
                entry[q], leave[q] = pre, post
            else:
                s = out.add_state()
                out.set_final(s, 0.0)
                entry[q] = leave[q] = s
        for q, row in enumerate(trans):
            for x in sigma:
                out.add_arc(leave[q], x, x, 0.0, entry[row[x]])
            for sym in sorted(passthrough):
                out.add_arc(leave[q], sym, sym, 0.0, leave[q])
        out.set_start(entry[start])
    elif mtype in (2, 3):
        states = [out.add_state() for _ in trans]
        for q, row in enumerate(trans):
            out.set_final(states[q], 0.0)
            for x in sigma:
                out.add_arc(states[q], x, x, 0.0, states[row[x]])
            if (q in finals) == (mtype == 2):
                for sym in sorted(delete):
                    out.add_arc(states[q], sym, EPSILON, 0.0, states[q])
            for sym in sorted(passthrough):
                out.add_arc(states[q], sym, sym, 0.0, states[q])
        out.set_start(states[start])
    else:
        raise ContractError(f"marker type must be 1, 2 or 3, got {mtype}")
    return out.freeze()


# -- rules ---------------------------------------------------------------


@dataclass
class Rule:
    """phi -> psi / lam _ rho with regex fields; psi is a '|'-alternation
    whose alternatives may carry a `<cost>` prefix."""

    phi: str
    psi: str
    lam: str = ""
    rho: str = ""
    classes: dict = field(default_factory=dict)


def _split_alternation(text):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "|" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_psi(psi):
    """[(cost, pattern)] from a weighted alternation like '<0.9>c|<0.1>t'."""
    alts = []
    for part in _split_alternation(psi):
        part = part.strip()
        hit = re.match(r"<([^<>]*)>\s*", part)
        cost = 0.0
        if hit:
            try:
                cost = float(hit.group(1))
            except ValueError:
                raise ParseError(f"bad weight prefix in {part!r}") from None
            part = part[hit.end():]
        alts.append((cost, part))
    return alts


def _add_loops(m, labels):
    """Copy of a BOOLEAN acceptor with extra self-loops at every state."""
    out = Machine(m.kind)
    out.add_states(m.num_states)
    out.set_start(m.start, m.start_weight)
    for q, arc in m.all_arcs():
        out.add_arc(q, arc.ilabel, arc.olabel, arc.weight, arc.nextstate)
    for q in m.states():
        for label in labels:
            out.add_arc(q, label, label, m.kind.one, q)
    for q, w in m.finals.items():
        out.set_final(q, w)
    return out.freeze()


def _replace_machine(phi_m, psi_alts, sigma, rb, b1, b2):
    """Rewrites <1 phi > to <1 psi; copies everything else, deleting > and
    passing <2 through.  Markers embedded in a consumed phi region are
    deleted with it."""
    rep = Machine(Semiring.TROPICAL)
    out_s = rep.add_state()
    rep.set_start(out_s)
    rep.set_final(out_s, 0.0)
    for x in sigma:
        rep.add_arc(out_s, x, x, 0.0, out_s)
    rep.add_arc(out_s, rb, EPSILON, 0.0, out_s)
    rep.add_arc(out_s, b2, b2, 0.0, out_s)
    walk = {q: rep.add_state() for q in phi_m.states()}
    rep.add_arc(out_s, b1, b1, 0.0, walk[phi_m.start])
    for q, arc in phi_m.all_arcs():
        rep.add_arc(walk[q], arc.ilabel, EPSILON, 0.0, walk[arc.nextstate])
    for q in phi_m.states():
        for sym in (rb, b1, b2):
            rep.add_arc(walk[q], sym, EPSILON, 0.0, walk[q])
    need_close = rep.add_state()
    rep.add_arc(need_close, rb, EPSILON, 0.0, out_s)
    for cost, pm in psi_alts:
        emb = {s: rep.add_state() for s in pm.states()}
        for s, arc in pm.all_arcs():
            rep.add_arc(emb[s], EPSILON, arc.olabel, 0.0, emb[arc.nextstate])
        for fq in pm.finals:
            rep.add_arc(emb[fq], EPSILON, EPSILON, 0.0, need_close)
        for q in phi_m.finals:
            rep.add_arc(walk[q], EPSILON, EPSILON, cost, emb[pm.start])
    return rep.freeze()


def compile_weighted_rule(rule: Rule, symtab: SymbolTable | None = None, *,
                          alphabet=None) -> Machine:
    """Obligatory left-to-right rewriting transducer (TROPICAL).

    Left context is matched on the output side, right context on the input
    side; each rewrite site accumulates its psi alternative's cost.
    """
    symtab = symtab if symtab is not None else SymbolTable()
    classes = rule.classes or {}
    psi_alts = _parse_psi(rule.psi)
    # register every literal first so '.' and '~' see the full alphabet;
    # declared classes contribute their members even when unreferenced,
    # which is how a rule file widens its alphabet
    for members in classes.values():
        for sym in members:
            symtab.add(sym)
    for pat in (rule.phi, rule.lam, rule.rho, *(p for _, p in psi_alts)):
        _tokenize(pat, symtab, classes)
    sigma = sorted(set(alphabet or ()) | set(symtab.labels()))
    phi = connect(compile_regex(rule.phi, symtab, classes, alphabet=sigma))
    lam = compile_regex(rule.lam, symtab, classes, alphabet=sigma)
    rho = compile_regex(rule.rho, symtab, classes, alphabet=sigma)
    alts = [(cost, compile_regex(p, symtab, classes, alphabet=sigma))
            for cost, p in psi_alts]
    if _accepts_empty(phi):
        raise ContractError("rule pattern must not accept the empty string")

    base = max(sigma, default=0) + 1
    rb, b1, b2 = base, base + 1, base + 2  # >, <1, <2
    sigma_rb = sigma + [rb]

    alpha_r = determinize(concat(_sigma_star(sigma), reverse(rho)))
    r = reverse(marker(alpha_r, 1, insert=(rb,), alphabet=sigma))

    # phi lifted to tolerate > anywhere inside the match
    lifted = _add_loops(phi, [rb])
    alpha_f = determinize(concat(concat(_sigma_star(sigma_rb),
                                        _labels_machine([rb])),
                                 reverse(lifted)))
    f = reverse(marker(alpha_f, 1, insert=(b1, b2), alphabet=sigma_rb))

    rep = _replace_machine(phi, alts, sigma, rb, b1, b2)

    alpha_l = determinize(concat(_sigma_star(sigma), lam))
    l1 = marker(alpha_l, 2, delete=(b1,), alphabet=sigma, passthrough=(b2,))
    l2 = marker(alpha_l, 3, delete=(b2,), alphabet=sigma)

    t = connect(compose(compose(compose(compose(r, f), rep), l1), l2))
    t.isymbols = symtab
    t.osymbols = symtab
    return t


def compile_rule(rule: Rule, symtab: SymbolTable | None = None, *,
                 alphabet=None) -> Machine:
    """Unweighted rule compilation; all rewrite paths cost zero."""
    return compile_weighted_rule(rule, symtab, alphabet=alphabet)


def apply_rewrite(rule_fst: Machine, inp, mode: str = "all"):
    """Run a string through a compiled rule.

    Returns a sorted list of (output labels, weight) pairs; mode 'best'
    keeps only the optimal one.  An empty list means the rule machine
    rejects the input (no output, not an error).
    """
    table = rule_fst.isymbols
    labels = [table.find(t) if isinstance(t, str) else int(t) for t in inp]
    chain = Machine(rule_fst.kind, table, table)
    prev = chain.add_state()
    chain.set_start(prev)
    for label in labels:
        nxt = chain.add_state()
        chain.add_arc(prev, label, label, rule_fst.kind.one, nxt)
        prev = nxt
    chain.set_final(prev)
    comp = connect(compose(chain.freeze(), rule_fst))
    if not comp.finals:
        return []
    if mode == "best":
        from .decode import best_path

        (_, out), cost = best_path(comp)
        return [(tuple(out), cost)]
    if mode != "all":
        raise ContractError(f"mode must be 'all' or 'best', got {mode!r}")
    if not comp.is_acyclic():
        raise ContractError("infinitely many rewritings; use mode='best'")
    pairs = accepted_pairs(comp, max_path_len=comp.num_states)
    return sorted((out, w) for (_, out), w in pairs.items())


def parse_rule_file(text):
    """Rules from ';'-terminated statements.

    ``Class NAME = [sym sym ...]`` declares a class usable in later rules;
    lines whose first non-blank character is '#' are comments (inline '#'
    stays available as an ordinary symbol).
    """
    kept = [line for line in text.splitlines()
            if not line.lstrip().startswith("#")]
    classes = {}
    rules = []
    for lineno, stmt in enumerate("\n".join(kept).split(";"), 1):
        stmt = stmt.strip()
        if not stmt:
            continue
        decl = re.match(r"Class\s+(\w+)\s*=\s*\[(.*)\]\s*$", stmt, re.S)
        if decl:
            classes[decl.group(1)] = tuple(decl.group(2).split())
            continue
        if "->" not in stmt:
            raise ParseError(f"statement is neither a rule nor a class: {stmt!r}",
                             lineno)
        phi, rest = stmt.split("->", 1)
        if "/" in rest:
            psi, ctx = rest.split("/", 1)
            if "_" not in ctx:
                raise ParseError(f"context of {stmt!r} lacks '_'", lineno)
            lam, rho = ctx.split("_", 1)
        else:
            psi, lam, rho = rest, "", ""
        rules.append(Rule(phi.strip(), psi.strip(), lam.strip(), rho.strip(),
                          dict(classes)))
    return rules


# -- same-length intersection and tree compilation -----------------------


def intersect_samelength(t1: Machine, t2: Machine) -> Machine:
    """Transducer relating (u, v) with weight t1(u,v) (x) t2(u,v).

    Both transducers must be epsilon-free (same-length relations); label
    pairs are packed into single symbols and intersected as acceptors.
    """
    require_same_kind(t1, t2)
    for m in (t1, t2):
        for _, arc in m.all_arcs():
            if EPSILON in (arc.ilabel, arc.olabel):
                raise ContractError(
                    "same-length intersection requires epsilon-free transducers")
    pairs = sorted({(a.ilabel, a.olabel) for m in (t1, t2)
                    for _, a in m.all_arcs()})
    code = {p: i + 1 for i, p in enumerate(pairs)}

    def encode(m):
        enc = Machine(m.kind)
        enc.add_states(m.num_states)
        enc.set_start(m.start, m.start_weight)
        for q, arc in m.all_arcs():
            packed = code[(arc.ilabel, arc.olabel)]
            enc.add_arc(q, packed, packed, arc.weight, arc.nextstate)
        for q, w in m.finals.items():
            enc.set_final(q, w)
        return enc.freeze()

    meet = intersect(encode(t1), encode(t2))
    out = Machine(t1.kind, t1.isymbols, t1.osymbols)
    out.add_states(meet.num_states)
    out.set_start(meet.start, meet.start_weight)
    for q, arc in meet.all_arcs():
        il, ol = pairs[arc.ilabel - 1]
        out.add_arc(q, il, ol, arc.weight, arc.nextstate)
    for q, w in meet.finals.items():
        out.set_final(q, w)
    return connect(out.freeze())


@dataclass
class TreeLeaf:
    insym: str
    outputs: tuple        # (cost, output symbol) alternatives
    constraints: tuple    # (side, regex) conjuncts over the full context


@dataclass
class DecisionTreeSpec:
    leaves: list
    classes: dict = field(default_factory=dict)


def parse_tree(text) -> DecisionTreeSpec:
    """Indentation-nested tree format.

    ``split <side> <regex>`` has two child blocks: the first where the
    constraint holds, the second (its complement) where it does not.
    ``leaf <insym> -> <w1> out1 | <w2> out2 ...`` ends a branch.  ``Class``
    declarations may precede the tree.
    """
    classes = {}
    lines = []
    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        stripped = raw.strip()
        decl = re.match(r"Class\s+(\w+)\s*=\s*\[(.*)\]\s*;?\s*$", stripped)
        if decl:
            classes[decl.group(1)] = tuple(decl.group(2).split())
            continue
        lines.append((len(raw) - len(raw.lstrip()), stripped))

    def parse_node(i, constraints):
        if i >= len(lines):
            raise ParseError("tree ended where a node was expected")
        indent, content = lines[i]
        if content.startswith("leaf"):
            head, _, tail = content[4:].partition("->")
            insym = head.strip()
            if not insym or not tail.strip():
                raise ParseError(f"malformed leaf line {content!r}")
            outs = []
            for alt in tail.split("|"):
                parts = alt.split()
                if len(parts) == 2:
                    outs.append((float(parts[0]), parts[1]))
                elif len(parts) == 1:
                    outs.append((0.0, parts[0]))
                else:
                    raise ParseError(f"malformed leaf alternative {alt!r}")
            return [TreeLeaf(insym, tuple(outs), tuple(constraints))], i + 1
        if not content.startswith("split"):
            raise ParseError(f"expected 'split' or 'leaf', got {content!r}")
        parts = content.split(None, 2)
        if len(parts) != 3 or parts[1] not in ("left", "right"):
            raise ParseError(f"malformed split line {content!r}")
        side, rx = parts[1], parts[2]
        yes, j = parse_node(i + 1, constraints + [(side, rx)])
        if j >= len(lines) or lines[j][0] <= indent:
            raise ParseError(f"split {content!r} lacks its second branch")
        no, k = parse_node(j, constraints + [(side, f"~({rx})")])
        return yes + no, k

    leaves, end = parse_node(0, [])
    if end != len(lines):
        raise ParseError("trailing lines after the tree root")
    return DecisionTreeSpec(leaves, classes)


def _profiles(tables, sigma):
    """Reachable acceptance profiles of a product of complete DFAs."""
    start = tuple(t[2] for t in tables)
    seen = {start}
    queue = deque([start])
    found = set()
    while queue:
        tup = queue.popleft()
        found.add(frozenset(i for i, (trans, finals, _) in enumerate(tables)
                            if tup[i] in finals))
        for x in sigma:
            nxt = tuple(tables[i][0][tup[i]][x] for i in range(len(tables)))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return found


def _leaf_machine(left, right, phi, pairs, costs, sigma):
    """Coercion transducer for one leaf over the pair alphabet.

    States track the left-context DFA forward and guess the right-context
    DFA's backward run; at in-context positions the input symbol must map
    to one of the leaf's weighted outputs, elsewhere any alphabet pair
    passes freely.  The backward run makes the machine unambiguous.
    """
    ltrans, lfinals, lstart = left
    rtrans, rfinals, rstart = right
    m = Machine(Semiring.TROPICAL)
    s0 = m.add_state()
    m.set_start(s0)
    m.set_final(s0, 0.0)
    idx = {(ql, s): m.add_state()
           for ql in range(len(ltrans)) for s in range(len(rtrans))}
    for ql in range(len(ltrans)):
        m.set_final(idx[(ql, rstart)], 0.0)
    pre = {x: {} for x in sigma}
    for s_prev in range(len(rtrans)):
        for x in sigma:
            pre[x].setdefault(rtrans[s_prev][x], []).append(s_prev)

    def emit(src, ql, in_l, s, x):
        for s_next in pre[x].get(s, []) if s is not None else range(len(rtrans)):
            in_ctx = in_l and x == phi and s_next in rfinals
            dst = idx[(ltrans[ql][x], s_next)]
            for px, z in pairs:
                if px != x:
                    continue
                if in_ctx:
                    if z in costs:
                        m.add_arc(src, x, z, costs[z], dst)
                else:
                    m.add_arc(src, x, z, 0.0, dst)

    for x in sigma:
        emit(s0, lstart, lstart in lfinals, None, x)
    for (ql, s), src in idx.items():
        for x in sigma:
            emit(src, ql, ql in lfinals, s, x)
    return connect(m.freeze())


def compile_tree(spec: DecisionTreeSpec, symtab: SymbolTable | None = None, *,
                 alphabet=None) -> Machine:
    """Simultaneous weighted coercion rules for one input symbol.

    Each occurrence of the symbol is rewritten per the unique leaf whose
    full left/right context matches; the result is the same-length
    intersection of the per-leaf transducers.
    """
    if not spec.leaves:
        raise ContractError("tree has no leaves")
    insyms = {leaf.insym for leaf in spec.leaves}
    if len(insyms) != 1:
        raise ContractError(f"one tree rewrites one symbol, got {sorted(insyms)}")
    symtab = symtab if symtab is not None else SymbolTable()
    classes = spec.classes or {}
    phi = symtab.add(next(iter(insyms)))
    for leaf in spec.leaves:
        for _, out in leaf.outputs:
            symtab.add(out)
        for _, rx in leaf.constraints:
            _tokenize(rx, symtab, classes)
    sigma = sorted(set(alphabet or ()) | set(symtab.labels()))

    lefts, rights = [], []
    for leaf in spec.leaves:
        sides = {"left": [], "right": []}
        for side, rx in leaf.constraints:
            sides[side].append(compile_regex(rx, symtab, classes, alphabet=sigma))
        lmach = reduce(intersect, sides["left"]) if sides["left"] \
            else _sigma_star(sigma)
        rmach = reduce(intersect, sides["right"]) if sides["right"] \
            else _sigma_star(sigma)
        lefts.append(_complete_table(determinize(lmach), sigma))
        rights.append(_complete_table(determinize(reverse(rmach)), sigma))

    for lp in _profiles(lefts, sigma):
        for rp in _profiles(rights, sigma):
            live = lp & rp
            if not live:
                raise ContractError("leaf contexts are not exhaustive")
            if len(live) > 1:
                raise ContractError(
                    f"leaf contexts overlap (leaves {sorted(live)})")

    pairs = sorted({(x, x) for x in sigma if x != phi} |
                   {(phi, symtab.find(out))
                    for leaf in spec.leaves for _, out in leaf.outputs})
    machines = [
        _leaf_machine(lefts[i], rights[i], phi, pairs,
                      {symtab.find(out): cost for cost, out in leaf.outputs},
                      sigma)
        for i, leaf in enumerate(spec.leaves)]
    result = reduce(intersect_samelength, machines)
    result.isymbols = symtab
    result.osymbols = symtab
    return result
