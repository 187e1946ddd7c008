"""Shortest paths, Viterbi beam search over lazy cascades, lattice pruning
and multipass rescoring.  TROPICAL weights throughout: cost = -log P, best
path = minimum total cost.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .errors import ContractError, NoPathError
from .machine import EPSILON, Machine, connect
from .lazy import cached, lazy_compose
from .ops import compose
from .semiring import Semiring

INF = math.inf


def _require_tropical(m):
    if m.kind is not Semiring.TROPICAL:
        raise ContractError("decoding requires TROPICAL weights")


def _topological_order(m):
    indeg = [0] * m.num_states
    for _, arc in m.all_arcs():
        indeg[arc.nextstate] += 1
    queue = deque(q for q in m.states() if indeg[q] == 0)
    order = []
    while queue:
        q = queue.popleft()
        order.append(q)
        for arc in m.arcs(q):
            indeg[arc.nextstate] -= 1
            if indeg[arc.nextstate] == 0:
                queue.append(arc.nextstate)
    if len(order) != m.num_states:
        raise ContractError("machine has a cycle; acyclic algorithm inapplicable")
    return order


def shortest_distance(m: Machine, algo: str = "dijkstra") -> dict[int, float]:
    """Single-source shortest distances from the start state.

    algo 'acyclic' relaxes in topological order (O(V+E), rejects cycles);
    'dijkstra' is best-first (O(E log V), rejects negative weights);
    'bellman_ford' uses a FIFO queue (O(V*E), allows negative weights).
    """
    _require_tropical(m)
    d = {q: INF for q in m.states()}
    d[m.start] = m.start_weight
    if algo == "acyclic":
        for q in _topological_order(m):
            if d[q] == INF:
                continue
            for arc in m.arcs(q):
                cand = d[q] + arc.weight
                if cand < d[arc.nextstate]:
                    d[arc.nextstate] = cand
    elif algo == "dijkstra":
        if any(arc.weight < 0 for _, arc in m.all_arcs()):
            raise ContractError("negative weight given to dijkstra")
        heap = [(d[m.start], m.start)]
        done = set()
        while heap:
            dist, q = heapq.heappop(heap)
            if q in done:
                continue
            done.add(q)
            for arc in m.arcs(q):
                cand = dist + arc.weight
                if cand < d[arc.nextstate]:
                    d[arc.nextstate] = cand
                    heapq.heappush(heap, (cand, arc.nextstate))
    elif algo == "bellman_ford":
        queue = deque([m.start])
        queued = {m.start}
        rounds = 0
        limit = m.num_states * max(1, m.num_arcs) + 1
        while queue:
            rounds += 1
            if rounds > limit:
                raise ContractError("negative-weight cycle detected")
            q = queue.popleft()
            queued.discard(q)
            for arc in m.arcs(q):
                cand = d[q] + arc.weight
                if cand < d[arc.nextstate]:
                    d[arc.nextstate] = cand
                    if arc.nextstate not in queued:
                        queue.append(arc.nextstate)
                        queued.add(arc.nextstate)
    else:
        raise ContractError(f"unknown algorithm {algo!r}")
    return d


def backward_distances(m: Machine) -> dict[int, float]:
    """Shortest distance from each state to a final (final weight included)."""
    _require_tropical(m)
    d = {q: INF for q in m.states()}
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


def best_path(m: Machine):
    """One optimal accepting path: ((input, output), cost).

    Ties are broken by smallest next-state id, then smallest labels, making
    the result reproducible.
    """
    _require_tropical(m)
    d = backward_distances(m)
    if d.get(m.start, INF) == INF:
        raise NoPathError("machine accepts nothing")
    # hop counts to an optimal stopping state along weight-optimal arcs
    # only, so extraction cannot orbit a zero-weight cycle
    h = {q: (0 if m.final(q) == d[q] else INF) for q in m.states()}
    changed = True
    while changed:
        changed = False
        for q, arc in m.all_arcs():
            if arc.weight + d[arc.nextstate] == d[q] and h[arc.nextstate] + 1 < h[q]:
                h[q] = h[arc.nextstate] + 1
                changed = True
    inp, out = [], []
    q = m.start
    cost = m.start_weight
    while h[q] > 0:
        best = None
        for arc in m.arcs(q):
            if arc.weight + d[arc.nextstate] != d[q] or h[arc.nextstate] >= h[q]:
                continue
            key = (arc.nextstate, arc.ilabel, arc.olabel)
            if best is None or key < best[0]:
                best = (key, arc)
        arc = best[1]
        if arc.ilabel != EPSILON:
            inp.append(arc.ilabel)
        if arc.olabel != EPSILON:
            out.append(arc.olabel)
        cost += arc.weight
        q = arc.nextstate
    cost += m.final(q)
    return (tuple(inp), tuple(out)), cost


@dataclass
class Lattice:
    """Trim acyclic tropical machine tagged with its generating stage."""

    machine: Machine
    stage: str = ""

    def __post_init__(self):
        _require_tropical(self.machine)
        if not self.machine.is_acyclic():
            raise ContractError("a lattice must be acyclic")


def lattice_prune(lattice: Lattice, threshold: float) -> Lattice:
    """Keep exactly the states/arcs on some path with cost <= best + threshold."""
    m = lattice.machine
    fwd = shortest_distance(m, "acyclic")
    bwd = backward_distances(m)
    best = min((fwd[q] + m.finals[q] for q in m.finals), default=INF)
    if best == INF:
        raise NoPathError("empty lattice")
    bound = best + threshold
    out = Machine(m.kind, m.isymbols, m.osymbols)
    keep = [q for q in m.states()
            if fwd[q] + bwd[q] <= bound]
    remap = {}
    for q in ([m.start] if m.start in keep else []) + [q for q in keep if q != m.start]:
        remap[q] = out.add_state()
    if m.start not in remap:
        raise NoPathError("threshold pruned away every path")
    out.set_start(remap[m.start], m.start_weight)
    for q in keep:
        for arc in m.arcs(q):
            if arc.nextstate in remap and \
                    fwd[q] + arc.weight + bwd[arc.nextstate] <= bound:
                out.add_arc(remap[q], arc.ilabel, arc.olabel, arc.weight,
                            remap[arc.nextstate])
        if q in m.finals and fwd[q] + m.finals[q] <= bound:
            out.set_final(remap[q], m.finals[q])
    return Lattice(connect(out.freeze()), stage=lattice.stage)


def rescore(lattice: Lattice, full: Machine):
    """Best path through the lattice re-weighted by a full model."""
    combined = compose(lattice.machine, full)
    try:
        (inp, out), cost = best_path(combined)
    except NoPathError:
        raise NoPathError("rescoring produced an empty composition") from None
    return out, cost


@dataclass
class CascadeSpec:
    """Ordered recognition cascade; stage 0 consumes the observations."""

    stages: list
    lazy: bool = True

    def __post_init__(self):
        if not self.stages:
            raise ContractError("cascade needs at least one stage")
        for m in self.stages:
            _require_tropical(m)


@dataclass
class DecodeStats:
    expanded_states: int = 0
    frames: int = 0
    pruned: int = 0


def observation_machine(labels, kind=Semiring.TROPICAL,
                        isymbols=None) -> Machine:
    """Linear-chain acceptor for one observation string."""
    m = Machine(kind, isymbols, isymbols)
    prev = m.add_state()
    m.set_start(prev)
    for label in labels:
        nxt = m.add_state()
        m.add_arc(prev, label, label, kind.one, nxt)
        prev = nxt
    m.set_final(prev, kind.one)
    return m.freeze()


def beam_decode(cascade: CascadeSpec, observations, beam=INF):
    """Frame-synchronous Viterbi beam search over the lazy cascade.

    States are grouped by the number of observation symbols consumed
    ("comparable states"; epsilon-reached states keep the frame of their
    last non-epsilon consumption).  Within a frame, states whose cost
    exceeds best-in-frame + beam are pruned.  beam=inf is exact Viterbi.
    Returns (output labels, cost, stats).
    """
    obs = observation_machine(tuple(observations),
                              isymbols=getattr(cascade.stages[0], "isymbols", None))
    view = obs
    for stage in cascade.stages:
        view = cached(lazy_compose(view, stage))
    stats = DecodeStats()
    n_frames = len(tuple(observations))

    # frame-local relaxation including epsilon-input arcs, then advance
    frontier = {view.start: (view.start_weight, None)}  # state -> (cost, backptr)
    back = {view.start: (None, None)}
    expanded = set()
    best_final = None
    for frame in range(n_frames + 1):
        stats.frames = frame
        # epsilon-closure within the frame (Dijkstra over eps-input arcs)
        heap = [(cost, q) for q, (cost, _) in frontier.items()]
        heapq.heapify(heap)
        costs = {q: c for q, (c, _) in frontier.items()}
        while heap:
            c, q = heapq.heappop(heap)
            if c > costs.get(q, INF):
                continue
            expanded.add(q)
            for arc in view.arcs(q):
                if arc.ilabel != EPSILON:
                    continue
                cand = c + arc.weight
                if cand < costs.get(arc.nextstate, INF):
                    costs[arc.nextstate] = cand
                    back[arc.nextstate] = (q, arc.olabel)
                    heapq.heappush(heap, (cand, arc.nextstate))
        if not costs:
            break
        # beam pruning against the best comparable state
        floor = min(costs.values())
        survivors = {q: c for q, c in costs.items() if c <= floor + beam}
        stats.pruned += len(costs) - len(survivors)
        if frame == n_frames:
            for q, c in survivors.items():
                fw = view.final(q)
                if fw == INF:
                    continue
                total = c + fw
                if best_final is None or total < best_final[0]:
                    best_final = (total, q)
            break
        nxt = {}
        for q, c in survivors.items():
            expanded.add(q)
            for arc in view.arcs(q):
                if arc.ilabel == EPSILON:
                    continue
                cand = c + arc.weight
                if cand < nxt.get(arc.nextstate, (INF, None))[0]:
                    nxt[arc.nextstate] = (cand, (q, arc.olabel))
        frontier = nxt
        for q, (_, bp) in nxt.items():
            back[q] = bp
    stats.expanded_states = len(expanded)
    if best_final is None:
        raise NoPathError("no surviving path; try a larger beam")
    # reconstruct outputs
    outputs = []
    q = best_final[1]
    while back.get(q, (None, None))[0] is not None:
        prev, olabel = back[q]
        if olabel != EPSILON and olabel is not None:
            outputs.append(olabel)
        q = prev
    outputs.reverse()
    return tuple(outputs), best_final[0], stats
