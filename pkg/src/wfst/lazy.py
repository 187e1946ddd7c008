"""On-demand machine views: deferred composition and state caching.

A lazy view implements the generalized-state-machine contract (``start``,
``final(state)``, ``arcs(state)``) over integer state ids, expanding pair
states only when a traversal asks for them.  Views stack: a lazy
composition can be built over machines or over other lazy views.
"""

from __future__ import annotations

from collections import OrderedDict, deque

from .errors import ContractError
from .machine import Arc, Machine
from .ops import FILTER_INITIAL, check_composable, merge_arcs


class LazyComposition:
    """Deferred composition of two generalized state machines.

    Pair states (s1, s2, filter) are registered once and receive stable
    integer ids for the lifetime of the view.  The filter state is part of
    the state identity; dropping it is a known correctness bug.
    """

    def __init__(self, a, b):
        self.a = a
        self.b = b
        self.kind = check_composable(a, b)
        self.isymbols = a.isymbols
        self.osymbols = b.osymbols
        self.start_weight = self.kind.extend(a.start_weight, b.start_weight)
        self._ids = {}
        self._pairs = []
        self.start = self._register((a.start, b.start, FILTER_INITIAL))

    def _register(self, pair):
        if pair not in self._ids:
            self._ids[pair] = len(self._pairs)
            self._pairs.append(pair)
        return self._ids[pair]

    def pair_of(self, state):
        return self._pairs[state]

    def final(self, state):
        s1, s2, _ = self._pairs[state]
        return self.kind.extend(self.a.final(s1), self.b.final(s2))

    def arcs(self, state):
        s1, s2, f = self._pairs[state]
        result = []
        for il, ol, w, (n1, n2, nf) in merge_arcs(
                self.kind, self.a.arcs(s1), self.b.arcs(s2), f):
            target = (n1 if n1 is not None else s1,
                      n2 if n2 is not None else s2, nf)
            result.append(Arc(il, ol, w, self._register(target)))
        return tuple(result)


def lazy_compose(a, b) -> LazyComposition:
    return LazyComposition(a, b)


MEMOIZE = "memoize"
LRU = "lru"
REFCOUNT = "refcount"


class CachedMachine:
    """Caching wrapper around a generalized state machine.

    Disciplines:
      * MEMOIZE never evicts.
      * LRU(capacity) evicts the least-recently-used state beyond capacity.
      * REFCOUNT evicts a state once every client-held reference to it has
        been released (``acquire``/``release``).

    ``expansions`` counts how many times the underlying machine's ``arcs``
    was invoked; eviction never changes returned arc contents.
    """

    def __init__(self, m, mode=MEMOIZE, capacity=None):
        if mode not in (MEMOIZE, LRU, REFCOUNT):
            raise ContractError(f"unknown cache discipline {mode!r}")
        if mode == LRU:
            if capacity is None or capacity < 1:
                raise ContractError("LRU capacity must be >= 1")
        self.m = m
        self.mode = mode
        self.capacity = capacity
        self.kind = m.kind
        self.isymbols = getattr(m, "isymbols", None)
        self.osymbols = getattr(m, "osymbols", None)
        self.start = m.start
        self.start_weight = m.start_weight
        self.expansions = 0
        self._cache = OrderedDict()
        self._refs = {}

    def final(self, state):
        return self.m.final(state)

    def acquire(self, state):
        if self.mode != REFCOUNT:
            raise ContractError("acquire/release apply to REFCOUNT caches only")
        self._refs[state] = self._refs.get(state, 0) + 1

    def release(self, state):
        if self.mode != REFCOUNT:
            raise ContractError("acquire/release apply to REFCOUNT caches only")
        count = self._refs.get(state, 0) - 1
        if count <= 0:
            self._refs.pop(state, None)
            self._cache.pop(state, None)
        else:
            self._refs[state] = count

    def arcs(self, state):
        if state in self._cache:
            if self.mode == LRU:
                self._cache.move_to_end(state)
            return self._cache[state]
        arcs = tuple(self.m.arcs(state))
        self.expansions += 1
        if self.mode == REFCOUNT and state not in self._refs:
            return arcs  # nothing holds the state; do not retain it
        self._cache[state] = arcs
        if self.mode == LRU:
            while len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
        return arcs


def cached(m, mode=MEMOIZE, capacity=None) -> CachedMachine:
    return CachedMachine(m, mode, capacity)


def expand(view, trim=False) -> Machine:
    """Materialize a generalized state machine by breadth-first expansion."""
    out = Machine(view.kind, getattr(view, "isymbols", None),
                  getattr(view, "osymbols", None))
    ids = {view.start: out.add_state()}
    out.set_start(ids[view.start], view.start_weight)
    queue = deque([view.start])
    while queue:
        s = queue.popleft()
        q = ids[s]
        fw = view.final(s)
        if fw != view.kind.zero:
            out.set_final(q, fw)
        for arc in view.arcs(s):
            if arc.nextstate not in ids:
                ids[arc.nextstate] = out.add_state()
                queue.append(arc.nextstate)
            out.add_arc(q, arc.ilabel, arc.olabel, arc.weight,
                        ids[arc.nextstate])
    out.freeze()
    if trim:
        from .machine import connect

        out = connect(out)
    return out
