"""Max-probability parses for a fixed sentence and length-conditioned
Viterbi decoding.

Both mirror the inside chart's two-region layout but track a single best
derivation per cell with backpointers.  Tie-breaking is pinned everywhere:
candidates are scanned with the parent-token position (or left-child length)
ascending in the outer loop, child pairs in child_set order inside, and a
strictly-greater comparison keeps the first maximizer; the best emission
token is the smallest-id argmax.  The oracle's canonical tie keys reproduce
exactly this preference order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import _check_tokens, inside
from .errors import UnderivableError
from .grammar import require_non_degenerate
from .parse_tree import ParseTree

NEG_INF = float("-inf")


def best_parse(grammar, table, tokens) -> ParseTree:
    """Highest-probability parse tree yielding the sentence, with token
    alignment.  Raises UnderivableError when no parse exists."""
    require_non_degenerate(grammar)
    y = [int(t) for t in _check_tokens(grammar, tokens)]
    n = len(y)
    m = grammar.node_count
    cap = grammar.tree.prefix_cap
    width_cap = max(cap - 1, 1)
    emit = table.emit_logprob
    emit_choice = table.emit_choice_logprob
    rules = table.rules_by_parent

    short_val = np.full((m, n, width_cap), NEG_INF)
    suffix_val = np.full((m, n), NEG_INF)
    short_back = {}
    suffix_back = {}

    for a in range(1, m):
        if emit_choice[a] == NEG_INF:
            continue
        for i in range(n):
            short_val[a, i, 0] = emit_choice[a] + emit[a, y[i]]

    for width in range(2, width_cap + 1):
        for i in range(n - width + 1):
            for a in range(1, m):
                if not rules[a]:
                    continue
                best = NEG_INF
                back = None
                for p_rel in range(width - 1):
                    tok_lp = emit[a, y[i + p_rel]]
                    for pidx, b, c, rule_lp in rules[a]:
                        if b == 0:
                            left = 0.0 if p_rel == 0 else NEG_INF
                        else:
                            left = short_val[b, i, p_rel - 1] if p_rel >= 1 else NEG_INF
                        right = short_val[c, i + p_rel + 1, width - p_rel - 2]
                        value = rule_lp + tok_lp + left + right
                        if value > best:
                            best = value
                            back = (p_rel, pidx, b, c)
                if back is not None:
                    short_val[a, i, width - 1] = best
                    short_back[(a, i, width)] = back

    for length in range(1, min(width_cap, n) + 1):
        suffix_val[:, n - length] = short_val[:, n - length, length - 1]

    for i in range(n - width_cap - 1, -1, -1):
        length = n - i
        for a in range(1, m):
            if not rules[a]:
                continue
            best = NEG_INF
            back = None
            for p_rel in range(min(cap - 1, length - 2) + 1):
                tok_lp = emit[a, y[i + p_rel]]
                for pidx, b, c, rule_lp in rules[a]:
                    if b == 0:
                        left = 0.0 if p_rel == 0 else NEG_INF
                    else:
                        left = short_val[b, i, p_rel - 1] if p_rel >= 1 else NEG_INF
                    right = suffix_val[c, i + p_rel + 1]
                    value = rule_lp + tok_lp + left + right
                    if value > best:
                        best = value
                        back = (p_rel, pidx, b, c)
            if back is not None:
                suffix_val[a, i] = best
                suffix_back[(a, i)] = back

    root_val = suffix_val[1, 0] if n > width_cap else short_val[1, 0, n - 1]
    if root_val == NEG_INF:
        raise UnderivableError("sentence has no parse under this grammar")

    def trace(a, i, j):
        width = j - i + 1
        back = short_back.get((a, i, width)) if width <= width_cap else suffix_back.get((a, i))
        if back is None:
            if width != 1:
                raise AssertionError("missing backpointer at V_%d over (%d, %d)" % (a, i, j))
            return (a, y[i], None, None)
        p_rel, pidx, b, c = back
        split = i + p_rel
        left = (0, None, None, None) if b == 0 else trace(b, i, split - 1)
        right = trace(c, split + 1, j)
        return (a, y[split], left, right)

    return ParseTree.from_nested(trace(1, 0, n - 1), float(root_val))


def max_tree_ratio(grammar, table, tokens) -> float:
    """exp(best-parse log-probability - sentence log-likelihood): the share
    of the sentence's probability carried by its single best tree, in (0, 1]."""
    tree = best_parse(grammar, table, tokens)
    total = inside(grammar, table, tokens).root_loglik
    return float(np.exp(tree.log_prob - total))


@dataclass
class ViterbiTables:
    """Best derivation score per (nonterminal, yield length), lengths up to
    max_len, with backpointers for reconstruction."""

    max_score: np.ndarray  # (m, max_len + 1); column 0 unused
    back: dict  # (nonterminal, length) -> (left_len, pair_pos, left, right)
    best_token: np.ndarray  # (m,) smallest-id argmax of the emission row
    best_token_logprob: np.ndarray  # (m,) the corresponding max emission
    max_len: int

    def score(self, length) -> float:
        return float(self.max_score[1, length])


def viterbi_tables(grammar, table, max_len) -> ViterbiTables:
    require_non_degenerate(grammar)
    if max_len < 1:
        raise ValueError("max_len must be >= 1, got %r" % (max_len,))
    m = grammar.node_count
    cap = grammar.tree.prefix_cap
    rules = table.rules_by_parent

    best_token = np.argmax(table.emit_logprob, axis=1)
    best_token_logprob = np.max(table.emit_logprob, axis=1)

    score = np.full((m, max_len + 1), NEG_INF)
    back = {}
    score[:, 1] = table.emit_choice_logprob + best_token_logprob

    for length in range(2, max_len + 1):
        for a in range(1, m):
            if not rules[a]:
                continue
            best = NEG_INF
            arg = None
            for left_len in range(min(cap - 1, length - 2) + 1):
                right_len = length - 1 - left_len
                for pidx, b, c, rule_lp in rules[a]:
                    if b == 0:
                        left = 0.0 if left_len == 0 else NEG_INF
                    else:
                        left = score[b, left_len] if left_len >= 1 else NEG_INF
                    value = rule_lp + best_token_logprob[a] + left + score[c, right_len]
                    if value > best:
                        best = value
                        arg = (left_len, pidx, b, c)
            if arg is not None and best > score[a, length]:
                score[a, length] = best
                back[(a, length)] = arg

    return ViterbiTables(
        max_score=score,
        back=back,
        best_token=best_token,
        best_token_logprob=best_token_logprob,
        max_len=max_len,
    )


def decode_length(tables: ViterbiTables, length) -> ParseTree:
    """Reconstruct the best tree of exactly the given yield length."""
    if not 1 <= length <= tables.max_len:
        raise ValueError("length %r outside 1..%d" % (length, tables.max_len))
    total = tables.max_score[1, length]
    if total == NEG_INF:
        raise UnderivableError("no derivation of length %d" % (length,))

    def rebuild(a, remaining):
        if remaining == 1:
            return (a, int(tables.best_token[a]), None, None)
        left_len, pidx, b, c = tables.back[(a, remaining)]
        left = (0, None, None, None) if b == 0 else rebuild(b, left_len)
        right = rebuild(c, remaining - 1 - left_len)
        return (a, int(tables.best_token[a]), left, right)

    return ParseTree.from_nested(rebuild(1, length), float(total))


@dataclass
class DecodeResult:
    tree: ParseTree
    length: int
    log_prob: float  # raw best-tree log probability
    score: float  # what was maximized (raw or per-token)
    mode: str

    @property
    def tokens(self):
        return self.tree.tokens


DECODE_MODES = ("raw", "per_token")


def decode(grammar, table, min_len, max_len, mode="per_token") -> DecodeResult:
    """Best decoded string over a length range.  mode "raw" compares total
    log-probabilities; "per_token" divides by the length first.  Ties prefer
    the shorter length."""
    if mode not in DECODE_MODES:
        raise ValueError("mode must be one of %r, got %r" % (DECODE_MODES, mode))
    if not 1 <= min_len <= max_len:
        raise ValueError("need 1 <= min_len <= max_len, got (%r, %r)" % (min_len, max_len))
    tables = viterbi_tables(grammar, table, max_len)
    best_len = None
    best_score = NEG_INF
    for length in range(min_len, max_len + 1):
        raw = float(tables.max_score[1, length])
        if raw == NEG_INF:
            continue
        value = raw / length if mode == "per_token" else raw
        if best_len is None or value > best_score:
            best_len = length
            best_score = value
    if best_len is None:
        raise UnderivableError(
            "no derivable length in %d..%d" % (min_len, max_len)
        )
    tree = decode_length(tables, best_len)
    return DecodeResult(
        tree=tree,
        length=best_len,
        log_prob=tree.log_prob,
        score=best_score,
        mode=mode,
    )
