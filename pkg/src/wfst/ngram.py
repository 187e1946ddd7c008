"""N-gram counting, maximum-likelihood and Good-Turing--Katz estimation,
and compilation of a back-off model into a weighted acceptor.

Counting pads each sentence with the reserved boundary symbols ``<s>`` and
``</s>``.  Costs use the natural log; the ARPA-style dump uses log10 as
that format expects.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError, FsmError
from .machine import EPSILON, Machine, SymbolTable
from .semiring import Semiring

BOS = "<s>"
EOS = "</s>"
DEFAULT_K_THRESHOLD = 5


@dataclass
class CountTable:
    order: int
    counts: Counter = field(default_factory=Counter)
    total: int = 0  # unigram tokens, sentence-end included
    symbols: SymbolTable = field(default_factory=SymbolTable)

    def count(self, gram) -> int:
        return self.counts.get(tuple(gram), 0)

    def vocabulary(self):
        """Unigram labels that may be predicted (everything but <s>)."""
        bos = self.symbols.find(BOS)
        return sorted(g[0] for g in self.counts if len(g) == 1 and g[0] != bos)


def count_ngrams(corpus, n: int, symbols: SymbolTable | None = None) -> CountTable:
    """Count all k-grams (k <= n) over boundary-padded sentences.

    ``corpus`` is an iterable of sentences, each a sequence of token
    strings.  Unknown tokens are added to the symbol table.
    """
    if n < 1:
        raise ContractError("order must be >= 1")
    table = CountTable(n, symbols=symbols or SymbolTable())
    bos = table.symbols.add(BOS)
    eos = table.symbols.add(EOS)
    for sentence in corpus:
        ids = [table.symbols.add(tok) for tok in sentence]
        padded = [bos] * max(1, n - 1) + ids + [eos]
        table.total += len(ids) + 1
        for k in range(1, n + 1):
            for i in range(len(padded) - k + 1):
                gram = tuple(padded[i:i + k])
                if all(g == bos for g in gram):
                    continue
                table.counts[gram] += 1
    return table


def write_counts(ct: CountTable) -> str:
    """Count-table text: header lines then 'symbols<TAB>count' per k-gram."""
    lines = [f"order {ct.order}", f"total {ct.total}"]
    sym = ct.symbols.find
    for gram in sorted(ct.counts):
        words = " ".join(sym(g) for g in gram)
        lines.append(f"{words}\t{ct.counts[gram]}")
    return "\n".join(lines) + "\n"


def read_counts(text, symbols: SymbolTable | None = None) -> CountTable:
    table = CountTable(1, symbols=symbols or SymbolTable())
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("order "):
            table.order = int(line.split()[1])
        elif line.startswith("total "):
            table.total = int(line.split()[1])
        else:
            if "\t" not in line:
                raise ContractError(f"count line {lineno} lacks a tab: {raw!r}")
            words, count = line.rsplit("\t", 1)
            gram = tuple(table.symbols.add(w) for w in words.split())
            table.counts[gram] = int(count)
    return table


def frequency_of_frequencies(ct: CountTable, k: int) -> Counter:
    """r -> number of k-grams occurring r times."""
    ff = Counter()
    for gram, c in ct.counts.items():
        if len(gram) == k:
            ff[c] += 1
    return ff


def mle(ct: CountTable, gram, conditional=True) -> float:
    """Maximum-likelihood estimate; unseen n-grams get zero."""
    gram = tuple(gram)
    c = ct.count(gram)
    if not conditional or len(gram) == 1:
        return c / ct.total
    denom = ct.count(gram[:-1])
    if denom == 0:
        raise ContractError(f"context {gram[:-1]} never occurs; "
                            "conditional probability undefined")
    return c / denom


def good_turing(ff, c: int, k_threshold: int = DEFAULT_K_THRESHOLD) -> float:
    """Discounted count c* = (c+1) n_{c+1} / n_c.

    Counts above the threshold, or with degenerate frequency-of-frequency
    statistics, pass through undiscounted (Katz's convention).
    """
    if c < 1:
        raise ContractError("good_turing applies to observed counts (c >= 1)")
    if c > k_threshold:
        return float(c)
    n_c, n_c1 = ff.get(c, 0), ff.get(c + 1, 0)
    if n_c == 0 or n_c1 == 0:
        return float(c)
    return (c + 1) * n_c1 / n_c


@dataclass
class BackoffModel:
    """Katz back-off model: discounted conditionals and back-off weights."""

    order: int
    probs: dict       # context tuple -> {word: P*(word | context)}
    alphas: dict      # context tuple -> backoff weight
    vocabulary: list  # predictable labels (includes </s>)
    symbols: SymbolTable

    def prob(self, word: int, context=()) -> float:
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        return self._prob(word, context)

    def _prob(self, word, context):
        table = self.probs.get(context)
        if table is not None and word in table:
            return table[word]
        if not context:
            return self._floor
        shorter = context[1:]
        if table is None:
            return self._prob(word, shorter)
        return self.alphas[context] * self._prob(word, shorter)

    @property
    def _floor(self):
        return self.probs.get("__floor__", 0.0)

    def sentence_logprob(self, sentence) -> float:
        """Natural-log probability of a tokenized sentence (strings)."""
        bos = self.symbols.find(BOS)
        eos = self.symbols.find(EOS)
        ids = [self.symbols.find(t) if isinstance(t, str) else t
               for t in sentence]
        history = [bos] * max(0, self.order - 1)
        logp = 0.0
        for w in ids + [eos]:
            p = self.prob(w, tuple(history))
            if p <= 0.0:
                return -math.inf
            logp += math.log(p)
            history = (history + [w])[-(self.order - 1):] if self.order > 1 else []
        return logp


def katz_model(ct: CountTable, k_threshold: int = DEFAULT_K_THRESHOLD) -> BackoffModel:
    """Good-Turing discounting plus Katz back-off normalization.

    Every context's probabilities sum to one over the full vocabulary once
    unseen words are scored through alpha(h) * P(word | shorter context).
    """
    vocab = ct.vocabulary()
    probs = {}
    alphas = {}

    # unigrams: discounted, leftover mass spread as a uniform floor
    ff1 = frequency_of_frequencies(ct, 1)
    discounted = {y: good_turing(ff1, ct.count((y,)), k_threshold) for y in vocab}
    base = {y: discounted[y] / ct.total for y in vocab}
    leftover = 1.0 - sum(base.values())
    floor = max(leftover, 0.0) / len(vocab) if vocab else 0.0
    probs[()] = {y: base[y] + floor for y in vocab}
    probs["__floor__"] = floor

    model = BackoffModel(ct.order, probs, alphas, vocab, ct.symbols)

    for k in range(2, ct.order + 1):
        ff = frequency_of_frequencies(ct, k)
        contexts = {}
        for gram, c in ct.counts.items():
            if len(gram) == k:
                contexts.setdefault(gram[:-1], {})[gram[-1]] = c
        for h in sorted(contexts):
            seen = contexts[h]
            total = sum(seen.values())
            p_star = {y: good_turing(ff, c, k_threshold) / total
                      for y, c in seen.items()}
            num = 1.0 - sum(p_star.values())
            den = 1.0 - sum(model._prob(y, h[1:]) for y in seen)
            if den < 1e-12:
                # every vocabulary word is seen in this context (or backs
                # off to nothing): no mass can be reassigned, so keep the
                # undiscounted estimates and never back off
                probs[h] = {y: c / total for y, c in seen.items()}
                alphas[h] = 0.0
                continue
            if num < 0.0:
                raise FsmError(f"back-off degenerate for context {h}: "
                               f"discounted mass exceeds one ({num})")
            probs[h] = p_star
            alphas[h] = num / den
    return model


def build_lm_fsa(model: BackoffModel) -> Machine:
    """Back-off model as a TROPICAL acceptor.

    States are contexts; word arcs cost -ln P*(word | context), a single
    epsilon arc per state backs off to the shortened context at cost
    -ln alpha(context); sentence end is carried by final weights.
    """
    eos = model.symbols.find(EOS)
    bos = model.symbols.find(BOS)
    contexts = [h for h in model.probs if isinstance(h, tuple)]
    m = Machine(Semiring.TROPICAL, model.symbols, model.symbols)
    ids = {h: m.add_state() for h in sorted(contexts, key=lambda h: (len(h), h))}

    def target(history):
        for i in range(len(history)):
            if history[i:] in ids:
                return ids[history[i:]]
        return ids[()]

    for h in contexts:
        q = ids[h]
        for y, p in sorted(model.probs[h].items()):
            if p <= 0.0:
                continue
            if y == eos:
                m.set_final(q, -math.log(p))
            else:
                nxt = (h + (y,))[-(model.order - 1):] if model.order > 1 else ()
                m.add_arc(q, y, y, -math.log(p), target(nxt))
        if h:
            alpha = model.alphas.get(h, 0.0)
            if alpha > 0.0:
                m.add_arc(q, EPSILON, EPSILON, -math.log(alpha), ids[h[1:]])
            elif alpha == 0.0 and h in model.alphas:
                pass  # all mass seen; no useful back-off arc
    start_ctx = ((bos,) * (model.order - 1)) if model.order > 1 else ()
    m.set_start(target(start_ctx))
    return m.freeze()


def model_path_cost(model: BackoffModel, fsa: Machine, sentence) -> float:
    """Cost of walking the acceptor along the model's own back-off route.

    Mirrors the estimation recursion arc by arc; equals the negated
    sentence log-probability when the construction is faithful.
    """
    eos = model.symbols.find(EOS)
    ids = [model.symbols.find(t) if isinstance(t, str) else t for t in sentence]
    state = fsa.start
    cost = fsa.start_weight

    def step(state, label):
        # follow back-off epsilons until an explicit arc for label exists
        nonlocal cost
        guard = 0
        while True:
            guard += 1
            if guard > 100:
                raise FsmError("back-off loop")
            arcs = {a.ilabel: a for a in fsa.arcs(state)}
            if label in arcs:
                cost += arcs[label].weight
                return arcs[label].nextstate
            if EPSILON not in arcs:
                raise FsmError(f"no path for label {label}")
            cost += arcs[EPSILON].weight
            state = arcs[EPSILON].nextstate

    for w in ids:
        state = step(state, w)
    guard = 0
    while fsa.final(state) == math.inf:
        guard += 1
        arcs = {a.ilabel: a for a in fsa.arcs(state)}
        if EPSILON not in arcs or guard > 100:
            raise FsmError("no final completion")
        cost += arcs[EPSILON].weight
        state = arcs[EPSILON].nextstate
    return cost + fsa.final(state)


def write_arpa(model: BackoffModel) -> str:
    """ARPA-style text dump: per-order sections of log10 P lines with
    trailing log10 back-off weights on context grams."""
    def log10(x):
        return -99.0 if x <= 0 else math.log10(x)

    sym = model.symbols.find
    lines = ["\\data\\"]
    grams_by_order = {k: [] for k in range(1, model.order + 1)}
    for y, p in sorted(model.probs[()].items()):
        grams_by_order[1].append(((y,), p))
    for h, table in model.probs.items():
        if not isinstance(h, tuple) or not h:
            continue
        for y, p in sorted(table.items()):
            grams_by_order[len(h) + 1].append((h + (y,), p))
    # contexts that carry a back-off weight but no probability of their own
    # (the sentence-start context) still need a line
    for h in model.alphas:
        if all(g != h for g, _ in grams_by_order.get(len(h), ())):
            grams_by_order[len(h)].append((h, 0.0))
    for k in range(1, model.order + 1):
        lines.append(f"ngram {k}={len(grams_by_order[k])}")
    for k in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for gram, p in sorted(grams_by_order[k]):
            words = " ".join(sym(g) for g in gram)
            entry = f"{log10(p):.6f}\t{words}"
            if gram in model.alphas:
                entry += f"\t{log10(model.alphas[gram]):.6f}"
            lines.append(entry)
    lines += ["", "\\end\\", ""]
    return "\n".join(lines)


def read_arpa(text, symbols: SymbolTable | None = None) -> BackoffModel:
    """Inverse of write_arpa (up to the dump's 6-decimal rounding)."""
    symbols = symbols or SymbolTable()
    probs = {(): {}, "__floor__": 0.0}
    alphas = {}
    order = 1
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line == "\\data\\" or line.startswith("ngram "):
            continue
        if line == "\\end\\":
            break
        hit = re.match(r"\\(\d+)-grams:$", line)
        if hit:
            section = int(hit.group(1))
            order = max(order, section)
            continue
        if section is None:
            raise ContractError(f"line outside any section: {raw!r}")
        fields = line.split("\t") if "\t" in line else line.split()
        logp = float(fields[0])
        words = fields[1].split() if "\t" in line else fields[1:1 + section]
        if len(words) != section:
            raise ContractError(f"expected a {section}-gram: {raw!r}")
        gram = tuple(symbols.add(w) for w in words)
        backoff = None
        if "\t" in line and len(fields) > 2:
            backoff = float(fields[2])
        elif "\t" not in line and len(fields) > 1 + section:
            backoff = float(fields[1 + section])
        if logp > -98.0:
            probs.setdefault(gram[:-1], {})[gram[-1]] = 10.0 ** logp
        if backoff is not None:
            alphas[gram] = 0.0 if backoff <= -98.0 else 10.0 ** backoff
    vocab = sorted(probs[()])
    return BackoffModel(order, probs, alphas, vocab, symbols)
