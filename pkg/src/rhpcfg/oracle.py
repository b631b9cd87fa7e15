"""Exhaustive enumeration ground truth.

Everything here expands the grammar by direct recursion over the structural
predicates (can_emit / child_set) and composes probabilities straight off the
rule table.  It never touches the chart, decoding, or training modules, so
any quantity has two independent routes: closed-form dynamic programs over
spans on one side, a flat list of whole trees on the other.

Trees are nested tuples (nonterminal, token, left, right); the empty-yield
node appears as (0, None, None, None).  This matches ParseTree.as_nested so
structures compare across the boundary with plain ==.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EnumerationCapError, UnderivableError

NEG_INF = float("-inf")

EMPTY_LEAF = (0, None, None, None)


def count_trees(grammar) -> int:
    """Closed-form count of complete parse trees from the start symbol,
    exact integer arithmetic.  Must agree with len(enumerate_all(...).trees)."""
    tree = grammar.tree
    vocab = grammar.vocab_size
    counts = [0] * tree.node_count
    order = sorted(
        range(tree.node_count),
        key=lambda i: int(tree.subtree_hi[i] - tree.subtree_lo[i]),
    )
    for i in order:
        if i == 0:
            continue
        total = vocab if grammar.can_emit(i) else 0
        for j, k in grammar.child_set(i):
            left_ways = 1 if j == 0 else counts[j]
            total += left_ways * vocab * counts[k]
        counts[i] = total
    return counts[1]


@dataclass
class OracleTree:
    nested: tuple
    tokens: tuple
    log_prob: float


@dataclass
class Enumeration:
    """Every complete parse tree from the start symbol, with aggregates."""

    trees: list
    by_string: dict  # tokens -> log of summed tree probability
    string_tree_counts: dict  # tokens -> number of trees yielding it
    total_logprob: float  # log of the summed probability of all trees

    def __len__(self):
        return len(self.trees)


def enumerate_all(grammar, table, cap=2_000_000) -> Enumeration:
    predicted = count_trees(grammar)
    if predicted > cap:
        raise EnumerationCapError(
            "grammar admits %d trees, above the cap of %d" % (predicted, cap)
        )
    vocab = grammar.vocab_size
    memo = {}

    def derivs(i):
        if i in memo:
            return memo[i]
        out = []
        if grammar.can_emit(i):
            base = table.emit_choice_logprob[i]
            for a in range(vocab):
                lp = base + table.emit_logprob[i, a]
                out.append(OracleTree((i, a, None, None), (a,), float(lp)))
        for pidx, (j, k) in enumerate(grammar.child_set(i)):
            pair_lp = table.child_choice_logprob[i] + table.pair_logprob[i][pidx]
            if pair_lp == NEG_INF:
                continue
            left_trees = (
                [OracleTree(EMPTY_LEAF, (), 0.0)] if j == 0 else derivs(j)
            )
            right_trees = derivs(k)
            for a in range(vocab):
                emit_lp = table.emit_logprob[i, a]
                for lt in left_trees:
                    for rt in right_trees:
                        out.append(
                            OracleTree(
                                (i, a, lt.nested, rt.nested),
                                lt.tokens + (a,) + rt.tokens,
                                float(pair_lp + emit_lp + lt.log_prob + rt.log_prob),
                            )
                        )
        memo[i] = out
        return out

    trees = derivs(1)
    if len(trees) != predicted:
        raise AssertionError(
            "enumeration found %d trees but the count recurrence says %d"
            % (len(trees), predicted)
        )
    by_string = {}
    string_counts = {}
    total = NEG_INF
    for t in trees:
        prev = by_string.get(t.tokens, NEG_INF)
        by_string[t.tokens] = float(np.logaddexp(prev, t.log_prob))
        string_counts[t.tokens] = string_counts.get(t.tokens, 0) + 1
        total = float(np.logaddexp(total, t.log_prob))
    return Enumeration(trees, by_string, string_counts, total)


def brute_loglik(enumeration: Enumeration, tokens) -> float:
    return enumeration.by_string.get(tuple(tokens), NEG_INF)


def _yield_len(nested) -> int:
    nt, token, left, right = nested
    n = 0 if token is None else 1
    if left is not None:
        n += _yield_len(left)
    if right is not None:
        n += _yield_len(right)
    return n


def parse_tie_key(grammar, nested, offset=0):
    """Canonical key matching the chart extractor's tie-breaking: smallest
    absolute parent-token position, then child_set order, then the same
    recursively left-first.  Unary nodes and the empty leaf contribute ()."""
    nt, token, left, right = nested
    if left is None and right is None:
        return ()
    split = offset + _yield_len(left)
    pidx = grammar.pair_index(nt, (left[0], right[0]))
    return (
        split,
        pidx,
        parse_tie_key(grammar, left, offset),
        parse_tie_key(grammar, right, split + 1),
    )


def viterbi_tie_key(grammar, nested):
    """Canonical key matching the length decoder's tie-breaking: smallest
    left-child length, then child_set order, then smallest token id, then
    recursively left-first."""
    nt, token, left, right = nested
    if nt == 0:
        return ()
    if left is None and right is None:
        return (token,)
    pidx = grammar.pair_index(nt, (left[0], right[0]))
    return (
        _yield_len(left),
        pidx,
        token,
        viterbi_tie_key(grammar, left),
        viterbi_tie_key(grammar, right),
    )


def brute_best_parse(grammar, enumeration: Enumeration, tokens):
    """Max-probability tree yielding the given string; ties broken by
    parse_tie_key.  Returns (log_prob, OracleTree)."""
    target = tuple(tokens)
    best = None
    best_key = None
    for t in enumeration.trees:
        if t.tokens != target:
            continue
        if best is None or t.log_prob > best.log_prob:
            best = t
            best_key = None
        elif t.log_prob == best.log_prob:
            if best_key is None:
                best_key = parse_tie_key(grammar, best.nested)
            key = parse_tie_key(grammar, t.nested)
            if key < best_key:
                best = t
                best_key = key
    if best is None:
        raise UnderivableError("no tree yields %r" % (target,))
    return best.log_prob, best


def brute_viterbi(grammar, enumeration: Enumeration, length):
    """Max-probability tree among all trees of the given yield length; ties
    broken by viterbi_tie_key.  Returns (log_prob, tokens, OracleTree) or
    (-inf, None, None) when the length is not derivable."""
    best = None
    best_key = None
    for t in enumeration.trees:
        if len(t.tokens) != length:
            continue
        if best is None or t.log_prob > best.log_prob:
            best = t
            best_key = None
        elif t.log_prob == best.log_prob:
            if best_key is None:
                best_key = viterbi_tie_key(grammar, best.nested)
            key = viterbi_tie_key(grammar, t.nested)
            if key < best_key:
                best = t
                best_key = key
    if best is None:
        return NEG_INF, None, None
    return best.log_prob, best.tokens, best
