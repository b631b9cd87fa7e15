"""Inside probabilities specialized to the right-heavy skeleton.

Only two kinds of spans can carry probability under this grammar: short
spans of fewer than prefix_cap tokens (derivable inside a local prefix
subtree) and suffix spans reaching the end of the sentence (the main chain
always extends to the last token).  The chart therefore stores

  short[a, i, w]   log P(V_a =>* tokens[i : i + w + 1]),  w + 1 < prefix_cap
  suffix[a, i]     log P(V_a =>* tokens[i:])

for O(nodes * n * prefix_cap) memory instead of a dense O(nodes * n^2) table.
For depth 0 the short block keeps width 1 so single-token cells always have a
home.

A ternary expansion of V_a over [i, j] with parent token position p uses a
left factor V_b over [i, p-1] (the empty node when p == i), the parent's
emission of tokens[p], and a right factor V_c over [p+1, j].  Left factors
are always short spans; right factors of suffix spans are suffix spans again.
Accumulation is in log space with parent-token position ascending and rules
in child_set order, which pins the floating-point result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grammar import require_non_degenerate

NEG_INF = float("-inf")


def _check_tokens(grammar, tokens):
    arr = np.asarray(tokens, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a sentence is a non-empty 1d token sequence")
    if arr.min() < 0 or arr.max() >= grammar.vocab_size:
        raise ValueError(
            "token ids must lie in 0..%d, got %r" % (grammar.vocab_size - 1, tokens)
        )
    return arr


@dataclass
class InsideChart:
    short: np.ndarray  # (m, n, width_cap): token counts 1..width_cap
    suffix: np.ndarray  # (m, n): span [i, n-1]
    root_loglik: float
    width_cap: int
    n: int

    def value(self, nt, i, j) -> float:
        """Log inside probability of V_nt over the inclusive span [i, j];
        -inf for spans outside the two stored regions."""
        if not 0 <= i <= j < self.n:
            raise IndexError("span (%d, %d) outside the sentence" % (i, j))
        width = j - i + 1
        if width <= self.width_cap:
            return float(self.short[nt, i, width - 1])
        if j == self.n - 1:
            return float(self.suffix[nt, i])
        return NEG_INF


def _scatter_logaddexp(acc, table, terms):
    """Fold per-rule terms into per-parent accumulators.  terms has the flat
    rule axis first; parent groups are contiguous by construction."""
    if terms.shape[0] == 0:
        return
    grouped = np.logaddexp.reduceat(terms, table.group_starts, axis=0)
    parents = table.group_parents
    acc[parents] = np.logaddexp(acc[parents], grouped)


def inside(grammar, table, tokens) -> InsideChart:
    require_non_degenerate(grammar)
    y = _check_tokens(grammar, tokens)
    n = int(y.size)
    m = grammar.node_count
    cap = grammar.tree.prefix_cap
    width_cap = max(cap - 1, 1)

    short = np.full((m, n, width_cap), NEG_INF)
    suffix = np.full((m, n), NEG_INF)

    emit = table.emit_logprob
    r_left = table.rule_left
    r_right = table.rule_right
    r_parent = table.rule_parent
    r_lp = table.rule_logprob
    left_is_empty = np.where(r_left == 0, 0.0, NEG_INF)

    # single-token cells: the unary rule (V_0's row stays -inf)
    short[:, :, 0] = table.emit_choice_logprob[:, None] + emit[:, y]

    # wider short spans, bottom-up by width
    for width in range(2, width_cap + 1):
        n_start = n - width + 1
        if n_start <= 0:
            break
        starts = np.arange(n_start)
        acc = np.full((m, n_start), NEG_INF)
        for p_rel in range(width - 1):
            tok_lp = emit[r_parent[:, None], y[starts + p_rel][None, :]]
            if p_rel == 0:
                left = left_is_empty[:, None]
            else:
                left = short[r_left[:, None], starts[None, :], p_rel - 1]
            right = short[r_right[:, None], (starts + p_rel + 1)[None, :], width - p_rel - 2]
            _scatter_logaddexp(acc, table, r_lp[:, None] + tok_lp + left + right)
        short[:, :n_start, width - 1] = acc

    # suffix spans short enough to live in the prefix block are copies
    for length in range(1, min(width_cap, n) + 1):
        suffix[:, n - length] = short[:, n - length, length - 1]

    # longer suffix spans, right to left
    for i in range(n - width_cap - 1, -1, -1):
        length = n - i
        acc = np.full(m, NEG_INF)
        for p_rel in range(min(cap - 1, length - 2) + 1):
            tok_lp = emit[r_parent, y[i + p_rel]]
            if p_rel == 0:
                left = left_is_empty
            else:
                left = short[r_left, i, p_rel - 1]
            right = suffix[r_right, i + p_rel + 1]
            _scatter_logaddexp(acc, table, r_lp + tok_lp + left + right)
        suffix[:, i] = acc

    return InsideChart(
        short=short,
        suffix=suffix,
        root_loglik=float(suffix[1, 0]),
        width_cap=width_cap,
        n=n,
    )


def log_likelihood(grammar, table, tokens) -> float:
    return inside(grammar, table, tokens).root_loglik
