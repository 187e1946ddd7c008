"""Shared generators and independent oracles for the test suite.

Oracles here deliberately avoid the library's traversal code where the
point is to cross-check it: path enumeration is a plain bounded DFS,
rewriting is a recursive left-to-right scan over plain tuples, and state
equivalence is computed from explicitly enumerated futures.
"""

import itertools
import random

from wfst import Machine, Semiring, connect


# -- quick machine construction ------------------------------------------


def build(kind, arcs, finals, start=0, num_states=None, isymbols=None,
          osymbols=None, start_weight=None):
    """Machine from (src, ilabel, olabel, weight, dst) tuples.

    ``finals`` maps state -> weight (or is an iterable of states with
    weight one).
    """
    m = Machine(kind, isymbols, osymbols)
    top = max([start]
              + [max(a[0], a[4]) for a in arcs]
              + list(finals if not isinstance(finals, dict) else finals.keys()))
    m.add_states(max(top + 1, num_states or 0))
    for src, il, ol, w, dst in arcs:
        m.add_arc(src, il, ol, w, dst)
    if isinstance(finals, dict):
        for q, w in finals.items():
            m.set_final(q, w)
    else:
        for q in finals:
            m.set_final(q, kind.one)
    m.set_start(start, start_weight)
    return m.freeze()


def acceptor(kind, arcs, finals, **kw):
    """Like build but arcs are (src, label, weight, dst)."""
    return build(kind, [(s, l, l, w, d) for s, l, w, d in arcs], finals, **kw)


# -- independent path enumeration ----------------------------------------


def enum_paths(m, max_arcs):
    """(input, output) tuple pair -> combined weight over all accepting
    paths of at most ``max_arcs`` arcs.  Plain DFS; exponential, tiny
    machines only."""
    kind = m.kind
    result = {}

    def visit(q, inp, out, w, depth):
        if q in m.finals:
            key = (inp, out)
            total = kind.extend(w, m.finals[q])
            result[key] = kind.combine(result[key], total) if key in result \
                else total
        if depth == max_arcs:
            return
        for arc in m.arcs(q):
            ninp = inp if arc.ilabel == 0 else inp + (arc.ilabel,)
            nout = out if arc.olabel == 0 else out + (arc.olabel,)
            visit(arc.nextstate, ninp, nout, kind.extend(w, arc.weight),
                  depth + 1)

    visit(m.start, (), (), m.start_weight, 0)
    return result


def bounded_pairs(m, max_in, max_out, max_arcs):
    """(input, output) -> weight over accepting paths, pruning any prefix
    longer than the string bounds; layered like a product construction."""
    kind = m.kind
    result = {}
    layer = {(m.start, (), ()): m.start_weight}
    for depth in range(max_arcs + 1):
        for (q, inp, out), w in layer.items():
            if q in m.finals:
                key = (inp, out)
                total = kind.extend(w, m.finals[q])
                result[key] = kind.combine(result[key], total) \
                    if key in result else total
        if depth == max_arcs:
            break
        nxt = {}
        for (q, inp, out), w in layer.items():
            for arc in m.arcs(q):
                ninp = inp if arc.ilabel == 0 else inp + (arc.ilabel,)
                nout = out if arc.olabel == 0 else out + (arc.olabel,)
                if len(ninp) > max_in or len(nout) > max_out:
                    continue
                key = (arc.nextstate, ninp, nout)
                nw = kind.extend(w, arc.weight)
                nxt[key] = kind.combine(nxt[key], nw) if key in nxt else nw
        if not nxt:
            break
        layer = nxt
    return result


def strings_up_to(alphabet, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


# -- random machines -----------------------------------------------------


def random_machine(rng, kind, max_states=5, alphabet=(1, 2, 3), eps=True,
                   acceptor=False, acyclic=False, max_arcs=8,
                   weights=(0.0, 0.5, 1.0, 2.0), eps_in=None):
    """Random trim nonempty machine; returns None when the draw is empty.

    ``eps_in=False`` keeps epsilon off the input tape (epsilon-emitting
    input-epsilon cycles make subset determinization diverge)."""
    n = rng.randint(2, max_states)
    m = Machine(kind)
    m.add_states(n)
    labels = list(alphabet) + ([0] if eps else [])
    in_labels = list(alphabet) + ([0] if (eps if eps_in is None else eps_in)
                                  else [])
    for _ in range(rng.randint(n, max_arcs)):
        src = rng.randrange(n)
        dst = rng.randrange(src + 1, n) if acyclic and src < n - 1 else \
            rng.randrange(n)
        if acyclic and dst <= src:
            continue
        il = rng.choice(in_labels)
        ol = il if acceptor else rng.choice(labels)
        if kind is Semiring.BOOLEAN:
            w = 1.0
        elif kind is Semiring.REAL:
            w = rng.choice((0.25, 0.5, 0.75))
        else:
            w = rng.choice(weights)
        m.add_arc(src, il, ol, w, dst)
    for q in rng.sample(range(n), rng.randint(1, n)):
        m.set_final(q, kind.one if kind is not Semiring.TROPICAL
                    else rng.choice(weights))
    m.set_start(0)
    t = connect(m.freeze())
    return t if t.finals else None


def random_det_acceptor(rng, max_states=8, alphabet=(1, 2),
                        weights=(0.0, 0.5, 1.0, 2.0), kind=Semiring.TROPICAL):
    """Random trim deterministic weighted acceptor (no epsilon), or None."""
    n = rng.randint(2, max_states)
    m = Machine(kind)
    m.add_states(n)
    for q in range(n):
        for label in alphabet:
            if rng.random() < 0.75:
                w = 1.0 if kind is Semiring.BOOLEAN else rng.choice(weights)
                m.add_arc(q, label, label, w, rng.randrange(n))
    for q in rng.sample(range(n), rng.randint(1, max(1, n // 2))):
        m.set_final(q, kind.one if kind is Semiring.BOOLEAN
                    else rng.choice(weights))
    m.set_start(0)
    t = connect(m.freeze())
    return t if t.finals and t.is_deterministic() else None


def sample_machines(seed, count, **kw):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        m = random_machine(rng, **kw)
        if m is not None:
            out.append(m)
    return out


# -- state equivalence oracles -------------------------------------------


def futures(m, max_len, alphabet=None):
    """Per-state map string -> total weight to acceptance (deterministic
    weighted acceptors, no epsilon)."""
    sigma = sorted(alphabet or m.input_labels())
    step = {q: {a.ilabel: (a.nextstate, a.weight) for a in m.arcs(q)}
            for q in m.states()}
    result = {}
    for q0 in m.states():
        f = {}
        for s in strings_up_to(sigma, max_len):
            q, w = q0, 0.0
            ok = True
            for x in s:
                if x not in step[q]:
                    ok = False
                    break
                q, w = step[q][x][0], w + step[q][x][1]
            if ok and q in m.finals:
                f[s] = w + m.finals[q]
        result[q0] = f
    return result


def nerode_class_count(m, max_len=10):
    """Number of state classes under future equality up to an additive
    constant (tropical Myhill-Nerode for deterministic machines)."""
    t = connect(m)
    fut = futures(t, max_len)
    classes = set()
    for q, f in fut.items():
        if not f:
            classes.add(frozenset())
            continue
        base = f[min(f)]
        classes.add(frozenset((s, round(w - base, 9)) for s, w in f.items()))
    return len(classes)


def table_filling_class_count(dfa, alphabet):
    """Classic pairwise-marking equivalence classes of a complete-enough
    boolean DFA (missing transitions act as a shared dead state)."""
    states = list(dfa.states()) + [-1]  # -1 = implicit dead state
    step = {q: {a.ilabel: a.nextstate for a in dfa.arcs(q)}
            for q in dfa.states()}
    step[-1] = {}
    final = set(dfa.finals)
    marked = set()
    for p, q in itertools.combinations(states, 2):
        if (p in final) != (q in final):
            marked.add(frozenset((p, q)))
    changed = True
    while changed:
        changed = False
        for p, q in itertools.combinations(states, 2):
            if frozenset((p, q)) in marked:
                continue
            for x in alphabet:
                np, nq = step[p].get(x, -1), step[q].get(x, -1)
                if np != nq and frozenset((np, nq)) in marked:
                    marked.add(frozenset((p, q)))
                    changed = True
                    break
    classes = []
    for q in states:
        for cls in classes:
            if frozenset((q, cls[0])) not in marked and q != cls[0]:
                cls.append(q)
                break
        else:
            classes.append([q])
    return len(classes), any(-1 in c and len(c) == 1 for c in classes)


# -- left-to-right rewriting oracle --------------------------------------


def scan_rewrite(inp, phi, psi, lam, rho):
    """Obligatory left-to-right rewriting by direct scanning.

    phi: set of symbol tuples; psi: list of (cost, replacement tuple);
    lam/rho: sets of tuples, the empty tuple matching anywhere.  The left
    context is checked against the output emitted so far, the right
    context against the untouched input ahead of the match.  Returns
    output tuple -> minimal cost.
    """
    inp = tuple(inp)
    n = len(inp)
    lengths = sorted({len(p) for p in phi})
    results = {}

    def lam_ok(out):
        return any(s == () or out[len(out) - len(s):] == s for s in lam)

    def rho_ok(j):
        return any(inp[j:j + len(t)] == t for t in rho)

    def go(i, out, cost):
        if i == n:
            if out not in results or cost < results[out]:
                results[out] = cost
            return
        valid = []
        if lam_ok(out):
            valid = [l for l in lengths
                     if i + l <= n and inp[i:i + l] in phi
                     and rho_ok(i + l)]
        if not valid:
            go(i + 1, out + (inp[i],), cost)
        else:
            for l in valid:
                for c, rep in psi:
                    go(i + l, out + rep, cost + c)

    go(0, (), 0.0)
    return results


def random_rule_spec(rng, syms=("a", "b", "c")):
    """(phi, psi, lam, rho) in oracle form plus the equivalent rule text
    fields; psi alternatives never coincide with phi alternatives."""
    def lit(lo, hi):
        return tuple(rng.choice(syms) for _ in range(rng.randint(lo, hi)))

    phi = set()
    while not phi:
        phi = {lit(1, 3) for _ in range(rng.randint(1, 2))}
    psi, seen = [], set(phi)
    for _ in range(rng.randint(1, 2)):
        rep = lit(1, 2)
        tries = 0
        while rep in seen and tries < 20:
            rep = lit(1, 2)
            tries += 1
        if rep in seen:
            continue
        seen.add(rep)
        psi.append((rng.choice((0.0, 0.25, 0.5, 1.0)), rep))
    if not psi:
        psi.append((0.0, ("a", "a", "a", "b")))
    lam = {lit(1, 2)} if rng.random() < 0.6 else {()}
    rho = {lit(1, 2)} if rng.random() < 0.6 else {()}

    def pat(alts):
        return "|".join("".join(s) if s else "()" for s in sorted(alts))

    psi_text = "|".join(f"<{c}>" + "".join(s) for c, s in psi)
    lam_text = "" if lam == {()} else pat(lam)
    rho_text = "" if rho == {()} else pat(rho)
    return phi, psi, lam, rho, pat(phi), psi_text, lam_text, rho_text
