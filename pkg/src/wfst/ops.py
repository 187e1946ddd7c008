"""Rational operations: composition, intersection, union, concatenation,
closure, reversal, projection, complement and difference.

Composition synchronizes epsilon moves through the standard three-state
filter so that each compatible pair of paths is counted exactly once:

* filter 0: after a match (or at the start) -- anything may move
* filter 1: inside a run of A-only epsilon moves
* filter 2: inside a run of B-only epsilon moves

A real epsilon-output arc of A may pair with a real epsilon-input arc of B
("both move") only at filter 0; once one side moves alone, the other side
may not move alone until the next match.
"""

from __future__ import annotations

from collections import deque

from .errors import ContractError, KindMismatchError, SemiringError, SymbolError
from .machine import EPSILON, Machine, connect
from .semiring import Semiring, require_same_kind

FILTER_INITIAL = 0
_A_ALONE = 1
_B_ALONE = 2


def merge_arcs(kind, arcs_a, arcs_b, f, filtered=True):
    """Composite moves from a pair state with filter state ``f``.

    Yields (ilabel, olabel, weight, (next_a, next_b, next_f)) tuples, where
    ``next_a``/``next_b`` of ``None`` mean "that side stays put".
    """
    by_ilabel = {}
    eps_b = []
    for arc in arcs_b:
        if arc.ilabel == EPSILON:
            eps_b.append(arc)
        else:
            by_ilabel.setdefault(arc.ilabel, []).append(arc)
    for arc_a in arcs_a:
        if arc_a.olabel != EPSILON:
            for arc_b in by_ilabel.get(arc_a.olabel, ()):
                yield (arc_a.ilabel, arc_b.olabel,
                       kind.extend(arc_a.weight, arc_b.weight),
                       (arc_a.nextstate, arc_b.nextstate, FILTER_INITIAL))
        else:
            if not filtered or f == FILTER_INITIAL:
                for arc_b in eps_b:
                    yield (arc_a.ilabel, arc_b.olabel,
                           kind.extend(arc_a.weight, arc_b.weight),
                           (arc_a.nextstate, arc_b.nextstate, FILTER_INITIAL))
            if not filtered or f in (FILTER_INITIAL, _A_ALONE):
                yield (arc_a.ilabel, EPSILON, arc_a.weight,
                       (arc_a.nextstate, None, _A_ALONE))
    for arc_b in eps_b:
        if not filtered or f in (FILTER_INITIAL, _B_ALONE):
            yield (EPSILON, arc_b.olabel, arc_b.weight,
                   (None, arc_b.nextstate, _B_ALONE))


def check_composable(a, b):
    kind = require_same_kind(a, b)
    if a.osymbols is not None and b.isymbols is not None:
        if a.osymbols is not b.isymbols and a.osymbols.items() != b.isymbols.items():
            raise SymbolError("output symbols of A do not match input symbols of B")
    return kind


def compose(a: Machine, b: Machine, *, _filtered=True) -> Machine:
    """Static composition: (u, w) -> sum_v A(u, v) (x) B(v, w), trimmed.

    ``_filtered=False`` disables the epsilon filter (test-only; overcounts
    redundant epsilon interleavings under non-idempotent semirings).
    """
    kind = check_composable(a, b)
    out = Machine(kind, a.isymbols, b.osymbols)
    start = (a.start, b.start, FILTER_INITIAL)
    ids = {start: out.add_state()}
    out.set_start(ids[start], kind.extend(a.start_weight, b.start_weight))
    queue = deque([start])
    while queue:
        s1, s2, f = queue.popleft()
        q = ids[(s1, s2, f)]
        fw = kind.extend(a.final(s1), b.final(s2))
        if fw != kind.zero:
            out.set_final(q, fw)
        for il, ol, w, (n1, n2, nf) in merge_arcs(
                kind, a.arcs(s1), b.arcs(s2), f, filtered=_filtered):
            target = (n1 if n1 is not None else s1,
                      n2 if n2 is not None else s2, nf)
            if target not in ids:
                ids[target] = out.add_state()
                queue.append(target)
            out.add_arc(q, il, ol, w, ids[target])
    return connect(out.freeze())


def intersect(a: Machine, b: Machine) -> Machine:
    """Acceptor intersection: weight(w) = A(w) (x) B(w)."""
    if not a.is_acceptor() or not b.is_acceptor():
        raise ContractError("intersect requires acceptors")
    return compose(a, b)


def _copy_into(dst: Machine, src: Machine) -> dict[int, int]:
    remap = {q: dst.add_state() for q in src.states()}
    for q, arc in src.all_arcs():
        dst.add_arc(remap[q], arc.ilabel, arc.olabel, arc.weight,
                    remap[arc.nextstate])
    return remap


def union(a: Machine, b: Machine) -> Machine:
    """weight(x) = A(x) (+) B(x), via a fresh super-start."""
    kind = require_same_kind(a, b)
    out = Machine(kind, a.isymbols or b.isymbols, a.osymbols or b.osymbols)
    s0 = out.add_state()
    out.set_start(s0)
    for src in (a, b):
        remap = _copy_into(out, src)
        out.add_arc(s0, EPSILON, EPSILON, src.start_weight, remap[src.start])
        for q, w in src.finals.items():
            out.set_final(remap[q], w)
    return out.freeze()


def concat(a: Machine, b: Machine) -> Machine:
    """weight(w) = (+) over splits w = uv of A(u) (x) B(v)."""
    kind = require_same_kind(a, b)
    out = Machine(kind, a.isymbols, b.osymbols or a.osymbols)
    ra = _copy_into(out, a)
    rb = _copy_into(out, b)
    out.set_start(ra[a.start], a.start_weight)
    for q, w in a.finals.items():
        out.add_arc(ra[q], EPSILON, EPSILON, kind.extend(w, b.start_weight),
                    rb[b.start])
    for q, w in b.finals.items():
        out.set_final(rb[q], w)
    return out.freeze()


def closure(a: Machine) -> Machine:
    """Kleene star; epsilon accepted with weight one.

    REAL is rejected: the sum over unboundedly many repetitions need not
    converge.
    """
    if a.kind is Semiring.REAL:
        raise SemiringError("closure is not supported over the REAL semiring")
    out = Machine(a.kind, a.isymbols, a.osymbols)
    s0 = out.add_state()
    out.set_start(s0)
    out.set_final(s0, a.kind.one)
    remap = _copy_into(out, a)
    out.add_arc(s0, EPSILON, EPSILON, a.start_weight, remap[a.start])
    for q, w in a.finals.items():
        out.add_arc(remap[q], EPSILON, EPSILON, w, s0)
    return out.freeze()


def reverse(a: Machine) -> Machine:
    """weight(w) = A(reverse(w)); arcs flipped, start/finals swapped."""
    out = Machine(a.kind, a.isymbols, a.osymbols)
    s0 = out.add_state()
    out.set_start(s0)
    remap = {q: out.add_state() for q in a.states()}
    for q, arc in a.all_arcs():
        out.add_arc(remap[arc.nextstate], arc.ilabel, arc.olabel, arc.weight,
                    remap[q])
    for q, w in a.finals.items():
        out.add_arc(s0, EPSILON, EPSILON, w, remap[q])
    out.set_final(remap[a.start], a.start_weight)
    return out.freeze()


def project(a: Machine, side: str) -> Machine:
    """Acceptor over the chosen tape; path weights preserved."""
    if side not in ("input", "output"):
        raise ContractError(f"side must be 'input' or 'output', got {side!r}")
    table = a.isymbols if side == "input" else a.osymbols
    out = Machine(a.kind, table, table)
    for q in a.states():
        out.add_state()
    out.set_start(a.start, a.start_weight)
    for q, arc in a.all_arcs():
        label = arc.ilabel if side == "input" else arc.olabel
        out.add_arc(q, label, label, arc.weight, arc.nextstate)
    for q, w in a.finals.items():
        out.set_final(q, w)
    return out.freeze()


def _alphabet_of(*machines, alphabet=None):
    if alphabet is not None:
        return sorted(set(alphabet))
    labels = set()
    for m in machines:
        labels.update(m.input_labels())
        if m.isymbols is not None:
            labels.update(m.isymbols.labels())
    return sorted(labels)


def complement(a: Machine, alphabet=None) -> Machine:
    """Boolean acceptor for Sigma* minus L(A).

    ``alphabet`` defaults to A's symbol table if attached, else the labels
    occurring in A.
    """
    from .optimize import determinize

    if a.kind is not Semiring.BOOLEAN or not a.is_acceptor():
        raise SemiringError("complement is defined for BOOLEAN acceptors only")
    sigma = _alphabet_of(a, alphabet=alphabet)
    det = determinize(a)
    out = Machine(Semiring.BOOLEAN, a.isymbols, a.osymbols)
    for q in det.states():
        out.add_state()
    dead = out.add_state()
    out.set_start(det.start)
    for q in det.states():
        targets = {arc.ilabel: arc.nextstate for arc in det.arcs(q)}
        for label in sigma:
            out.add_arc(q, label, label, 1.0, targets.get(label, dead))
        if q not in det.finals:
            out.set_final(q, 1.0)
    for label in sigma:
        out.add_arc(dead, label, label, 1.0, dead)
    out.set_final(dead, 1.0)
    return out.freeze()


def difference(a: Machine, b: Machine, alphabet=None) -> Machine:
    """L(A) minus L(B) for boolean acceptors."""
    if a.kind is not Semiring.BOOLEAN or b.kind is not Semiring.BOOLEAN:
        raise SemiringError("difference is defined for BOOLEAN acceptors only")
    sigma = _alphabet_of(a, b, alphabet=alphabet)
    return connect(intersect(a, complement(b, alphabet=sigma)))
