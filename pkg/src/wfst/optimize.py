"""Weighted determinization, the twin-property test, local determinization,
weight/string pushing, minimization, and equivalence testing.

Determinization is the weighted powerset construction: subset elements are
(state, leftover-output-string, leftover-weight) triples, normalized so the
best leftover weight is the semiring one and the leftover strings share no
common nonempty prefix.  Minimization pushes weights (and output strings)
toward the start state and then runs Hopcroft partition refinement treating
(input label, output residue, pushed weight) as one opaque label.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import CapExceededError, ContractError, SemiringError
from .machine import EPSILON, Machine, connect
from .semiring import Semiring

DEFAULT_EXPANSION_CAP = 10_000
_RESIDUAL_STRING_CAP = 64


def _require_divisible(kind):
    if kind is Semiring.REAL:
        raise SemiringError("operation unsupported over the REAL semiring")


def _lcp(strings):
    if not strings:
        return ()
    first = min(strings, key=len)
    for i, sym in enumerate(first):
        if any(s[i] != sym for s in strings):
            return first[:i]
    return tuple(first)


# -- determinization ----------------------------------------------------


def _close_epsilon(m, elements):
    """Extend subset elements along input-epsilon arcs (tropical/boolean)."""
    kind = m.kind
    best = {}
    for q, s, r in elements:
        key = (q, s)
        if key not in best or kind.compare(r, best[key]) < 0:
            best[key] = r
    queue = deque(best)
    while queue:
        q, s = queue.popleft()
        r = best[(q, s)]
        for arc in m.arcs(q):
            if arc.ilabel != EPSILON:
                continue
            ns = s if arc.olabel == EPSILON else s + (arc.olabel,)
            if len(ns) > _RESIDUAL_STRING_CAP:
                raise CapExceededError("leftover output string grew without bound")
            nr = kind.extend(r, arc.weight)
            key = (arc.nextstate, ns)
            if key not in best or kind.compare(nr, best[key]) < 0:
                best[key] = nr
                queue.append(key)
    return [(q, s, r) for (q, s), r in best.items()]


def _normalize(kind, elements):
    """Factor total weight and common output prefix out of a subset."""
    total = kind.zero
    for _, _, r in elements:
        total = kind.combine(total, r)
    prefix = _lcp([s for _, s, _ in elements])
    normalized = {}
    for q, s, r in elements:
        if kind is Semiring.TROPICAL:
            nr = r - total
        else:  # boolean: weights are 1 for every live element
            nr = kind.one
        key = (q, s[len(prefix):])
        if key not in normalized or kind.compare(nr, normalized[key]) < 0:
            normalized[key] = nr
    subset = tuple(sorted((q, s, normalized[(q, s)]) for q, s in normalized))
    return total, prefix, subset


def _emit_string(out, src, ilabel, symbols, weight, dst):
    """Arc chain spelling ``symbols`` on the output tape."""
    kind = out.kind
    if not symbols:
        out.add_arc(src, ilabel, EPSILON, weight, dst)
        return
    cur = src
    il, w = ilabel, weight
    for i, sym in enumerate(symbols):
        target = dst if i == len(symbols) - 1 else out.add_state()
        out.add_arc(cur, il, sym, w, target)
        cur, il, w = target, EPSILON, kind.one
    return


def determinize(m: Machine, expansion_cap: int = DEFAULT_EXPANSION_CAP) -> Machine:
    """Weighted subset determinization (TROPICAL/BOOLEAN).

    The result is deterministic on input; transducer subsets carry leftover
    output strings, materialized as epsilon-input emission chains when a
    leftover longer than one symbol must be flushed.  Exceeding
    ``expansion_cap`` subset states raises (suggesting ``twins_test``).
    """
    _require_divisible(m.kind)
    kind = m.kind
    out = Machine(kind, m.isymbols, m.osymbols)
    start_elems = _close_epsilon(m, [(m.start, (), kind.one)])
    total, prefix, start_subset = _normalize(kind, start_elems)
    # weight and output prefix that cannot be emitted before the first arc
    # stay inside the start subset
    start_subset = tuple(sorted(
        (q, prefix + s, (kind.extend(total, r) if kind is Semiring.TROPICAL else r))
        for q, s, r in start_subset))
    ids = {start_subset: out.add_state()}
    out.set_start(ids[start_subset], m.start_weight)
    queue = deque([start_subset])
    while queue:
        subset = queue.popleft()
        q = ids[subset]
        # finality: flush leftovers of final member states
        final_groups = {}
        for state, s, r in subset:
            fw = m.final(state)
            if fw == kind.zero:
                continue
            w = kind.extend(r, fw)
            if s in final_groups:
                w = kind.combine(final_groups[s], w)
            final_groups[s] = w
        for s, w in sorted(final_groups.items()):
            if not s:
                out.set_final(q, kind.combine(out.final(q), w))
            else:
                tail = out.add_state()
                out.set_final(tail, kind.one)
                _emit_string(out, q, EPSILON, s, w, tail)
        by_label = {}
        for state, s, r in subset:
            for arc in m.arcs(state):
                if arc.ilabel == EPSILON:
                    continue
                ns = s if arc.olabel == EPSILON else s + (arc.olabel,)
                by_label.setdefault(arc.ilabel, []).append(
                    (arc.nextstate, ns, kind.extend(r, arc.weight)))
        for label in sorted(by_label):
            elems = _close_epsilon(m, by_label[label])
            total, prefix, target = _normalize(kind, elems)
            if target not in ids:
                if len(ids) >= expansion_cap:
                    raise CapExceededError(
                        f"determinization exceeded {expansion_cap} subset states; "
                        "the input is likely not subsequentiable (try twins_test)")
                ids[target] = out.add_state()
                queue.append(target)
            if len(prefix) <= 1:
                out.add_arc(q, label, prefix[0] if prefix else EPSILON,
                            total, ids[target])
            else:
                _emit_string(out, q, label, prefix, total, ids[target])
    return out.freeze()


# -- twin property ------------------------------------------------------


@dataclass
class TwinReport:
    has_twin_property: bool
    witness: tuple | None = None


def _square_machine(m):
    """Pairs of states co-reachable by a common input string.

    Epsilon is treated as an ordinary input label here; arcs carry the
    weight pair and the output label pair.
    """
    start = (m.start, m.start)
    seen = {start}
    order = [start]
    arcs = {start: []}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        q1, q2 = pair
        for a1 in m.arcs(q1):
            for a2 in m.arcs(q2):
                if a1.ilabel != a2.ilabel:
                    continue
                target = (a1.nextstate, a2.nextstate)
                arcs[pair].append((a1.ilabel, a1.weight, a2.weight,
                                   a1.olabel, a2.olabel, target))
                if target not in seen:
                    seen.add(target)
                    order.append(target)
                    arcs.setdefault(target, [])
                    queue.append(target)
    return order, arcs


def _sccs(nodes, edges):
    """Kosaraju strongly connected components."""
    fwd = {n: [] for n in nodes}
    rev = {n: [] for n in nodes}
    for u in nodes:
        for v in edges[u]:
            fwd[u].append(v)
            rev[v].append(u)
    finish, seen = [], set()
    for root in nodes:
        if root in seen:
            continue
        stack = [(root, iter(fwd[root]))]
        seen.add(root)
        while stack:
            u, it = stack[-1]
            v = next(it, None)
            if v is None:
                finish.append(u)
                stack.pop()
            elif v not in seen:
                seen.add(v)
                stack.append((v, iter(fwd[v])))
    comp = {}
    for root in reversed(finish):
        if root in comp:
            continue
        stack = [root]
        comp[root] = root
        while stack:
            u = stack.pop()
            for v in rev[u]:
                if v not in comp:
                    comp[v] = root
                    stack.append(v)
    return comp


def _append_residue(res, o1, o2):
    """Track the pair of cycle outputs reduced by their common prefix."""
    r1, r2 = res
    if o1 != EPSILON:
        r1 = r1 + (o1,)
    if o2 != EPSILON:
        r2 = r2 + (o2,)
    k = len(_lcp([r1, r2])) if r1 and r2 else 0
    return (r1[k:], r2[k:])


def twins_test(m: Machine) -> TwinReport:
    """Cycle-consistency check over co-reachable state pairs.

    The twin property holds iff within every strongly connected component
    of the square machine, weight differentials (and output residues, for
    transducers) admit a consistent potential labeling; an inconsistent
    edge exhibits a common input cycle with unequal weight or output.
    """
    if m.kind not in (Semiring.TROPICAL, Semiring.BOOLEAN):
        raise ContractError("twins_test expects a TROPICAL or BOOLEAN machine")
    nodes, sq_arcs = _square_machine(m)
    edges = {n: [a[-1] for a in sq_arcs[n]] for n in nodes}
    comp = _sccs(nodes, edges)

    # access strings for witnesses
    reach = {nodes[0]: ()}
    queue = deque([nodes[0]])
    while queue:
        u = queue.popleft()
        for label, *_rest, v in [(a[0], a[5]) for a in sq_arcs[u]]:
            if v not in reach:
                reach[v] = reach[u] + ((label,) if label != EPSILON else ())
                queue.append(v)

    for root in set(comp.values()):
        members = [n for n in nodes if comp[n] == root]
        internal = {u: [a for a in sq_arcs[u] if comp[a[-1]] == root]
                    for u in members}
        if not any(internal.values()):
            continue  # trivial component, no cycles
        pot = {members[0]: (0.0, ((), ()))}
        queue = deque([members[0]])
        while queue:
            u = queue.popleft()
            dw, res = pot[u]
            for label, w1, w2, o1, o2, v in internal[u]:
                ndw = dw + (w1 - w2)
                nres = _append_residue(res, o1, o2)
                if max(len(nres[0]), len(nres[1])) > _RESIDUAL_STRING_CAP:
                    return TwinReport(False, (v, reach.get(v, ()),
                                              "diverging cycle outputs"))
                if v not in pot:
                    pot[v] = (ndw, nres)
                    queue.append(v)
                elif pot[v] != (ndw, nres):
                    detail = (f"weight differential {pot[v][0]} vs {ndw}"
                              if pot[v][0] != ndw else
                              f"output residue {pot[v][1]} vs {nres}")
                    return TwinReport(False, (v, reach.get(v, ()), detail))
    return TwinReport(True)


# -- local determinization ----------------------------------------------


def local_determinize(m: Machine, k: int) -> Machine:
    """Merge same-(ilabel, olabel) arcs, but only at states with more than
    ``k`` outgoing arcs; equivalent machine, bounded work per state."""
    if k < 1:
        raise ContractError("k must be >= 1")
    _require_divisible(m.kind)
    kind = m.kind
    out = Machine(kind, m.isymbols, m.osymbols)

    ids = {}

    def state_id(subset):
        if subset not in ids:
            ids[subset] = out.add_state()
            queue.append(subset)
        return ids[subset]

    start = ((m.start, kind.one),)
    queue = deque()
    start_id = state_id(start)
    out.set_start(start_id, m.start_weight)
    while queue:
        subset = queue.popleft()
        q = ids[subset]
        arcs = []
        final = kind.zero
        for state, r in subset:
            final = kind.combine(final, kind.extend(r, m.final(state)))
            for arc in m.arcs(state):
                arcs.append((arc.ilabel, arc.olabel,
                             kind.extend(r, arc.weight), arc.nextstate))
        if final != kind.zero:
            out.set_final(q, final)
        if len(arcs) <= k:
            for il, ol, w, t in arcs:
                out.add_arc(q, il, ol, w, state_id(((t, kind.one),)))
            continue
        groups = {}
        for il, ol, w, t in arcs:
            groups.setdefault((il, ol), []).append((t, w))
        for (il, ol), members in sorted(groups.items()):
            total = kind.zero
            for _, w in members:
                total = kind.combine(total, w)
            merged = {}
            for t, w in members:
                r = (w - total) if kind is Semiring.TROPICAL else kind.one
                if t not in merged or kind.compare(r, merged[t]) < 0:
                    merged[t] = r
            target = tuple(sorted(merged.items()))
            out.add_arc(q, il, ol, total, state_id(target))
    return out.freeze()


# -- pushing ------------------------------------------------------------


def _backward_distances(m):
    """Tropical shortest distance from each state to the finals."""
    d = {q: m.kind.zero for q in m.states()}
    for q, w in m.finals.items():
        d[q] = w
    changed = True
    while changed:
        changed = False
        for q, arc in m.all_arcs():
            cand = arc.weight + d[arc.nextstate]
            if cand < d[q]:
                d[q] = cand
                changed = True
    return d


def _string_potentials(m):
    """Per-state longest common prefix of all output strings to a final."""
    bottom = object()
    p = {q: bottom for q in m.states()}
    changed = True
    while changed:
        changed = False
        for q in m.states():
            candidates = []
            if q in m.finals:
                candidates.append(())
            for arc in m.arcs(q):
                nxt = p[arc.nextstate]
                if nxt is bottom:
                    continue
                o = (arc.olabel,) if arc.olabel != EPSILON else ()
                candidates.append(o + nxt)
            if not candidates:
                continue
            new = _lcp(candidates)
            if p[q] is bottom or new != p[q]:
                if p[q] is not bottom and len(new) > len(p[q]):
                    continue  # values only shrink
                p[q] = new
                changed = True
    return {q: (v if v is not bottom else ()) for q, v in p.items()}


def push(m: Machine, mode: str) -> Machine:
    """Move weights or output strings toward the start state.

    weights-mode (TROPICAL): reweight by shortest-distance potentials so
    the best completion from every state costs zero.  strings-mode
    (functional transducer): hoist each state's common output prefix.
    """
    if mode == "weights":
        if m.kind is not Semiring.TROPICAL:
            raise SemiringError("weight pushing requires the TROPICAL semiring")
        d = _backward_distances(m)
        dead = [q for q in m.states() if d[q] == m.kind.zero]
        if dead:
            raise ContractError(
                f"state(s) {dead} cannot reach a final state; connect() first")
        out = Machine(m.kind, m.isymbols, m.osymbols)
        out.add_states(m.num_states)
        out.set_start(m.start, m.start_weight + d[m.start])
        for q, arc in m.all_arcs():
            out.add_arc(q, arc.ilabel, arc.olabel,
                        arc.weight + d[arc.nextstate] - d[q], arc.nextstate)
        for q, w in m.finals.items():
            out.set_final(q, w - d[q])
        return out.freeze()
    if mode == "strings":
        p = _string_potentials(m)
        out = Machine(m.kind, m.isymbols, m.osymbols)
        out.add_states(m.num_states)
        for q, arc in m.all_arcs():
            o = (arc.olabel,) if arc.olabel != EPSILON else ()
            full = o + p[arc.nextstate]
            if full[:len(p[q])] != p[q]:
                raise ContractError("not a functional transducer: "
                                    f"prefix mismatch at state {q}")
            residue = full[len(p[q]):]
            if len(residue) <= 1:
                out.add_arc(q, arc.ilabel,
                            residue[0] if residue else EPSILON,
                            arc.weight, arc.nextstate)
            else:
                _emit_string(out, q, arc.ilabel, residue, arc.weight,
                             arc.nextstate)
        for q, w in m.finals.items():
            out.set_final(q, w)
        if p[m.start]:
            chain_start = out.add_state()
            tail_targets = m.start
            # emit the hoisted start prefix before entering the old start
            cur = chain_start
            for i, sym in enumerate(p[m.start]):
                nxt = tail_targets if i == len(p[m.start]) - 1 else out.add_state()
                out.add_arc(cur, EPSILON, sym, m.kind.one, nxt)
                cur = nxt
            out.set_start(chain_start, m.start_weight)
        else:
            out.set_start(m.start, m.start_weight)
        return out.freeze()
    raise ContractError(f"mode must be 'weights' or 'strings', got {mode!r}")


# -- minimization -------------------------------------------------------


def _encoded_dfa(m):
    """Deterministic machine as (label -> target) maps over opaque labels.

    Labels are (ilabel, output-residue, pushed-weight) triples after weight
    (and, for transducers, string) pushing.
    """
    work = m
    if work.kind is Semiring.TROPICAL:
        work = push(work, "weights")
    prefix = ()
    if not work.is_acceptor():
        p = _string_potentials(work)
        prefix = p[work.start]
        enc = {}
        for q in work.states():
            row = {}
            for arc in work.arcs(q):
                o = (arc.olabel,) if arc.olabel != EPSILON else ()
                full = o + p[arc.nextstate]
                if full[:len(p[q])] != p[q]:
                    raise ContractError("not a functional transducer")
                row[(arc.ilabel, full[len(p[q]):], arc.weight)] = arc.nextstate
            enc[q] = row
    else:
        enc = {q: {(arc.ilabel, (), arc.weight): arc.nextstate
                   for arc in work.arcs(q)}
               for q in work.states()}
    finals = {q: work.final(q) for q in work.states()}
    return work, enc, finals, prefix


def _hopcroft(states, enc, finals):
    """Partition refinement; returns state -> class id."""
    by_final = {}
    for q in states:
        by_final.setdefault(finals[q], set()).add(q)
    partition = [set(block) for block in by_final.values()]
    labels = sorted({label for q in states for label in enc[q]})
    inverse = {label: {} for label in labels}
    for q in states:
        for label, t in enc[q].items():
            inverse[label].setdefault(t, set()).add(q)
    index = {}
    for i, block in enumerate(partition):
        for q in block:
            index[q] = i
    work = deque((i, label) for i in range(len(partition)) for label in labels)
    while work:
        i, label = work.popleft()
        pre = set()
        inv = inverse[label]
        for q in partition[i]:
            pre |= inv.get(q, set())
        if not pre:
            continue
        touched = {}
        for q in pre:
            touched.setdefault(index[q], set()).add(q)
        for j, hit in touched.items():
            block = partition[j]
            if len(hit) == len(block):
                continue
            rest = block - hit
            smaller, larger = (hit, rest) if len(hit) <= len(rest) else (rest, hit)
            partition[j] = larger
            partition.append(smaller)
            nj = len(partition) - 1
            for q in smaller:
                index[q] = nj
            for lbl in labels:
                work.append((nj, lbl))
    return index


def minimize(m: Machine) -> Machine:
    """Equivalent deterministic machine with the minimum number of states."""
    if not m.is_deterministic():
        raise ContractError("minimize requires a deterministic machine "
                            "(determinize first)")
    _require_divisible(m.kind)
    m = connect(m)
    if not m.finals:
        return m
    work, enc, finals, prefix = _encoded_dfa(m)
    index = _hopcroft(list(work.states()), enc, finals)
    out = Machine(m.kind, m.isymbols, m.osymbols)
    n_classes = len(set(index.values()))
    out.add_states(n_classes)
    reps = {}
    for q in work.states():
        reps.setdefault(index[q], q)
    for cls, rep in sorted(reps.items()):
        for label, t in sorted(enc[rep].items()):
            il, residue, w = label
            if len(residue) <= 1:
                out.add_arc(cls, il, residue[0] if residue else (
                    il if work.is_acceptor() else EPSILON), w, index[t])
            else:
                _emit_string(out, cls, il, residue, w, index[t])
        if finals[rep] != m.kind.zero:
            out.set_final(cls, finals[rep])
    if prefix:
        chain = out.add_state()
        cur = chain
        for i, sym in enumerate(prefix):
            nxt = index[work.start] if i == len(prefix) - 1 else out.add_state()
            out.add_arc(cur, EPSILON, sym, m.kind.one, nxt)
            cur = nxt
        out.set_start(chain, work.start_weight)
    else:
        out.set_start(index[work.start], work.start_weight)
    return out.freeze()


# -- equivalence --------------------------------------------------------


def _canonical(m):
    """BFS-canonical structure of a deterministic machine."""
    order = {m.start: 0}
    queue = deque([m.start])
    arcs = []
    while queue:
        q = queue.popleft()
        for arc in sorted(m.arcs(q), key=lambda a: (a.ilabel, a.olabel, a.weight)):
            if arc.nextstate not in order:
                order[arc.nextstate] = len(order)
                queue.append(arc.nextstate)
            arcs.append((order[q], arc.ilabel, arc.olabel, arc.weight,
                         order[arc.nextstate]))
    finals = sorted((order[q], w) for q, w in m.finals.items() if q in order)
    return (m.start_weight, tuple(arcs), tuple(finals))


def equivalent(a: Machine, b: Machine) -> bool:
    """True iff the machines assign the same weight to every string."""
    ca = _canonical(minimize(determinize(a)))
    cb = _canonical(minimize(determinize(b)))
    return ca == cb
