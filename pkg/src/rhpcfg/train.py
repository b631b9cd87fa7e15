"""Inside-outside training: expected rule counts, exact log-likelihood
gradients for both scorers, closed-form re-estimation for the tabular one,
and a small full-batch driver.

The outside pass mirrors the inside chart's two-region layout.  Mass starts
at the root span and flows down: suffix cells are processed left to right
(their children are short cells to the left of the split and suffix cells to
its right), then short cells by descending width.  Short suffix spans are
the same cells in both blocks; their outside mass is merged into the short
block before it is processed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import InsideChart, _check_tokens, inside
from .errors import UnderivableError
from .scorers import (
    TabularScorer,
    TrilinearScorer,
    rule_table_from_tabular,
    rule_table_from_trilinear,
)

NEG_INF = float("-inf")


@dataclass
class OutsideChart:
    short: np.ndarray  # (m, n, width_cap), same regions as InsideChart
    suffix: np.ndarray  # (m, n)


def outside(grammar, table, tokens, inside_chart: InsideChart) -> OutsideChart:
    """Log outside mass per chart cell, given the matching inside chart."""
    y = [int(t) for t in _check_tokens(grammar, tokens)]
    n = len(y)
    m = grammar.node_count
    cap = grammar.tree.prefix_cap
    width_cap = inside_chart.width_cap
    in_short = inside_chart.short
    in_suffix = inside_chart.suffix
    emit = table.emit_logprob
    rules = table.rules_by_parent

    out_short = np.full((m, n, width_cap), NEG_INF)
    out_suffix = np.full((m, n), NEG_INF)
    if n > width_cap:
        out_suffix[1, 0] = 0.0
    else:
        out_short[1, 0, n - 1] = 0.0

    # suffix cells as parents, left to right
    for i in range(0, n - width_cap):
        length = n - i
        for a in range(1, m):
            beta = out_suffix[a, i]
            if beta == NEG_INF or not rules[a]:
                continue
            for p_rel in range(min(cap - 1, length - 2) + 1):
                split = i + p_rel
                base_tok = beta + emit[a, y[split]]
                for pidx, b, c, rule_lp in rules[a]:
                    base = base_tok + rule_lp
                    right_inside = in_suffix[c, split + 1]
                    if b == 0:
                        if p_rel == 0:
                            out_suffix[c, split + 1] = np.logaddexp(
                                out_suffix[c, split + 1], base
                            )
                        continue
                    if p_rel == 0:
                        continue
                    left_inside = in_short[b, i, p_rel - 1]
                    out_short[b, i, p_rel - 1] = np.logaddexp(
                        out_short[b, i, p_rel - 1], base + right_inside
                    )
                    out_suffix[c, split + 1] = np.logaddexp(
                        out_suffix[c, split + 1], base + left_inside
                    )

    # short suffix spans are the same cells; fold their mass into the block
    for length in range(1, min(width_cap, n) + 1):
        i = n - length
        out_short[:, i, length - 1] = np.logaddexp(
            out_short[:, i, length - 1], out_suffix[:, i]
        )

    # short cells as parents, widest first
    for width in range(width_cap, 1, -1):
        for i in range(n - width + 1):
            for a in range(1, m):
                beta = out_short[a, i, width - 1]
                if beta == NEG_INF or not rules[a]:
                    continue
                for p_rel in range(width - 1):
                    split = i + p_rel
                    base_tok = beta + emit[a, y[split]]
                    right_w = width - p_rel - 2
                    for pidx, b, c, rule_lp in rules[a]:
                        base = base_tok + rule_lp
                        right_inside = in_short[c, split + 1, right_w]
                        if b == 0:
                            if p_rel == 0:
                                out_short[c, split + 1, right_w] = np.logaddexp(
                                    out_short[c, split + 1, right_w], base
                                )
                            continue
                        if p_rel == 0:
                            continue
                        left_inside = in_short[b, i, p_rel - 1]
                        out_short[b, i, p_rel - 1] = np.logaddexp(
                            out_short[b, i, p_rel - 1], base + right_inside
                        )
                        out_short[c, split + 1, right_w] = np.logaddexp(
                            out_short[c, split + 1, right_w], base + left_inside
                        )

    return OutsideChart(short=out_short, suffix=out_suffix)


@dataclass
class ExpectedCounts:
    """Posterior expected rule-usage counts for one sentence (or a running
    aggregate over several)."""

    emit: np.ndarray  # (m, vocab)
    pairs: list  # per nonterminal, aligned with child_set(i)
    unary_events: np.ndarray  # (m,) expected unary expansions
    ternary_events: np.ndarray  # (m,) expected ternary expansions
    loglik: float

    @classmethod
    def zeros(cls, grammar):
        m = grammar.node_count
        return cls(
            emit=np.zeros((m, grammar.vocab_size)),
            pairs=[np.zeros(len(grammar.child_set(i))) for i in range(m)],
            unary_events=np.zeros(m),
            ternary_events=np.zeros(m),
            loglik=0.0,
        )

    def add(self, other):
        self.emit += other.emit
        for mine, theirs in zip(self.pairs, other.pairs):
            mine += theirs
        self.unary_events += other.unary_events
        self.ternary_events += other.ternary_events
        self.loglik += other.loglik


def expected_counts(grammar, table, tokens) -> ExpectedCounts:
    y = [int(t) for t in _check_tokens(grammar, tokens)]
    n = len(y)
    m = grammar.node_count
    cap = grammar.tree.prefix_cap
    in_chart = inside(grammar, table, tokens)
    root = in_chart.root_loglik
    if root == NEG_INF:
        raise UnderivableError("sentence has no parse; expected counts undefined")
    out_chart = outside(grammar, table, tokens, in_chart)
    width_cap = in_chart.width_cap
    in_short, in_suffix = in_chart.short, in_chart.suffix
    out_short, out_suffix = out_chart.short, out_chart.suffix
    emit = table.emit_logprob
    rules = table.rules_by_parent

    counts = ExpectedCounts.zeros(grammar)
    counts.loglik = root

    # unary rule usage lives in the single-token cells
    for i in range(n):
        w = np.exp(out_short[:, i, 0] + table.emit_choice_logprob + emit[:, y[i]] - root)
        counts.emit[:, y[i]] += w
        counts.unary_events += w

    def ternary_cell(a, i, beta, width=None):
        """width None means a genuine suffix span."""
        length = n - i if width is None else width
        for p_rel in range(min(cap - 1, length - 2) + 1):
            split = i + p_rel
            base_tok = beta + emit[a, y[split]]
            for pidx, b, c, rule_lp in rules[a]:
                if b == 0:
                    if p_rel != 0:
                        continue
                    left_inside = 0.0
                elif p_rel == 0:
                    continue
                else:
                    left_inside = in_short[b, i, p_rel - 1]
                if width is None:
                    right_inside = in_suffix[c, split + 1]
                else:
                    right_inside = in_short[c, split + 1, width - p_rel - 2]
                weight = np.exp(base_tok + rule_lp + left_inside + right_inside - root)
                if weight == 0.0:
                    continue
                counts.pairs[a][pidx] += weight
                counts.emit[a, y[split]] += weight
                counts.ternary_events[a] += weight

    for i in range(0, n - width_cap):
        for a in range(1, m):
            beta = out_suffix[a, i]
            if beta != NEG_INF and rules[a]:
                ternary_cell(a, i, beta, width=None)
    for width in range(2, width_cap + 1):
        for i in range(n - width + 1):
            for a in range(1, m):
                beta = out_short[a, i, width - 1]
                if beta != NEG_INF and rules[a]:
                    ternary_cell(a, i, beta, width=width)

    return counts


def _corpus_counts(grammar, table, sentences) -> ExpectedCounts:
    total = ExpectedCounts.zeros(grammar)
    for idx, tokens in enumerate(sentences):
        try:
            total.add(expected_counts(grammar, table, tokens))
        except UnderivableError:
            raise UnderivableError("sentence %d has no parse under this grammar" % idx)
    return total


def corpus_log_likelihood(grammar, table, sentences) -> float:
    total = 0.0
    for idx, tokens in enumerate(sentences):
        value = inside(grammar, table, tokens).root_loglik
        if value == NEG_INF:
            raise UnderivableError("sentence %d has no parse under this grammar" % idx)
        total += value
    return total


def _tabular_gradient(grammar, scorer, counts) -> TabularScorer:
    """Exact gradient of the corpus log-likelihood in tabular-logit space:
    softmax groups give (count - total * prob), the family split gives the
    same with a sigmoid."""
    table = rule_table_from_tabular(grammar, scorer)
    m = grammar.node_count
    g_emit = np.zeros_like(scorer.emit_logits)
    g_child = [np.zeros_like(arr) for arr in scorer.child_logits]
    g_split = np.zeros_like(scorer.split_logits)
    for i in range(1, m):
        row_counts = counts.emit[i]
        total = row_counts.sum()
        if total > 0:
            g_emit[i - 1] = row_counts - total * np.exp(table.emit_logprob[i])
        pair_counts = counts.pairs[i]
        t_events = counts.ternary_events[i]
        if len(pair_counts) and t_events > 0:
            g_child[i] = pair_counts - t_events * np.exp(table.pair_logprob[i])
        u = counts.unary_events[i]
        t = counts.ternary_events[i]
        if table.emit_choice_logprob[i] != NEG_INF and table.child_choice_logprob[i] != NEG_INF:
            g_split[i - 1] = u - (u + t) * np.exp(table.emit_choice_logprob[i])
    return TabularScorer(g_emit, tuple(g_child), g_split)


def _trilinear_gradient(grammar, scorer, counts) -> TrilinearScorer:
    """Chain rule through the trilinear scores.  With p = w_parent h_i,
    l = w_left h_j, r = w_right h_k and score = p.l + p.r + l.r, a raw score
    gradient g contributes g*(l+r) to p, g*(p+r) to l, g*(p+l) to r."""
    table = rule_table_from_trilinear(grammar, scorer)
    m = grammar.node_count
    h = scorer.embeddings
    parent_vec = h @ scorer.w_parent.T
    left_vec = h @ scorer.w_left.T
    right_vec = h @ scorer.w_right.T

    # raw-logit-space gradients first
    g_emit_rows = np.zeros((m, grammar.vocab_size))
    for i in range(1, m):
        total = counts.emit[i].sum()
        if total > 0:
            g_emit_rows[i] = counts.emit[i] - total * np.exp(table.emit_logprob[i])
    g_split = np.zeros_like(scorer.split_logits)
    for i in range(1, m):
        u = counts.unary_events[i]
        t = counts.ternary_events[i]
        if table.emit_choice_logprob[i] != NEG_INF and table.child_choice_logprob[i] != NEG_INF:
            g_split[i - 1] = u - (u + t) * np.exp(table.emit_choice_logprob[i])

    d_parent_vec = np.zeros_like(parent_vec)
    d_left_vec = np.zeros_like(left_vec)
    d_right_vec = np.zeros_like(right_vec)
    for i in range(1, m):
        pairs = grammar.child_set(i)
        if not pairs:
            continue
        t_events = counts.ternary_events[i]
        pair_probs = np.exp(table.pair_logprob[i])
        g_pairs = counts.pairs[i] - t_events * pair_probs
        for pidx, (j, k) in enumerate(pairs):
            g = g_pairs[pidx]
            if g == 0.0:
                continue
            d_parent_vec[i] += g * (left_vec[j] + right_vec[k])
            d_left_vec[j] += g * (parent_vec[i] + right_vec[k])
            d_right_vec[k] += g * (parent_vec[i] + left_vec[j])

    d_h = g_emit_rows @ scorer.w_out
    d_h += d_parent_vec @ scorer.w_parent
    d_h += d_left_vec @ scorer.w_left
    d_h += d_right_vec @ scorer.w_right
    return TrilinearScorer(
        embeddings=d_h,
        w_out=g_emit_rows.T @ h,
        w_parent=d_parent_vec.T @ h,
        w_left=d_left_vec.T @ h,
        w_right=d_right_vec.T @ h,
        split_logits=g_split,
    )


def _gradient_and_loglik(grammar, scorer, sentences):
    if isinstance(scorer, TabularScorer):
        table = rule_table_from_tabular(grammar, scorer)
        counts = _corpus_counts(grammar, table, sentences)
        return _tabular_gradient(grammar, scorer, counts), counts.loglik
    if isinstance(scorer, TrilinearScorer):
        table = rule_table_from_trilinear(grammar, scorer)
        counts = _corpus_counts(grammar, table, sentences)
        return _trilinear_gradient(grammar, scorer, counts), counts.loglik
    raise TypeError("unknown scorer type %r" % type(scorer).__name__)


def loglik_gradient(grammar, scorer, sentences):
    """Gradient of the summed corpus log-likelihood with respect to every
    scorer parameter, returned as a scorer-shaped structure."""
    grad, _ = _gradient_and_loglik(grammar, scorer, sentences)
    return grad


def em_step(grammar, scorer: TabularScorer, sentences, smoothing=1e-6):
    """One exact expectation-maximization step for the tabular scorer.

    Returns (updated scorer, corpus log-likelihood of the *input* scorer).
    New logits are log(count + smoothing), which renormalizes to the
    smoothed count ratios."""
    if not isinstance(scorer, TabularScorer):
        raise TypeError("closed-form re-estimation needs the tabular scorer")
    table = rule_table_from_tabular(grammar, scorer)
    counts = _corpus_counts(grammar, table, sentences)
    m = grammar.node_count
    new_emit = np.log(counts.emit[1:] + smoothing)
    new_child = tuple(np.log(counts.pairs[i] + smoothing) for i in range(m))
    new_split = np.log(counts.unary_events[1:] + smoothing) - np.log(
        counts.ternary_events[1:] + smoothing
    )
    return TabularScorer(new_emit, new_child, new_split), counts.loglik


def _axpy_scorer(scorer, step, grad):
    if isinstance(scorer, TabularScorer):
        return TabularScorer(
            emit_logits=scorer.emit_logits + step * grad.emit_logits,
            child_logits=tuple(
                arr + step * g for arr, g in zip(scorer.child_logits, grad.child_logits)
            ),
            split_logits=scorer.split_logits + step * grad.split_logits,
        )
    return TrilinearScorer(
        embeddings=scorer.embeddings + step * grad.embeddings,
        w_out=scorer.w_out + step * grad.w_out,
        w_parent=scorer.w_parent + step * grad.w_parent,
        w_left=scorer.w_left + step * grad.w_left,
        w_right=scorer.w_right + step * grad.w_right,
        split_logits=scorer.split_logits + step * grad.split_logits,
    )


@dataclass
class TrainOptions:
    algo: str = "em"
    iters: int = 10
    learning_rate: float = 1e-2
    seed: int = 0


@dataclass
class TrainResult:
    scorer: object
    trace: list  # iters + 1 log-likelihoods: before each step, then final


def train(grammar, scorer, sentences, options: TrainOptions = TrainOptions()) -> TrainResult:
    """Full-batch training driver.  algo "em" needs the tabular scorer;
    "sgd" is plain gradient ascent at a fixed learning rate and works for
    both scorers.  Deterministic given its inputs."""
    if options.algo not in ("em", "sgd"):
        raise ValueError("algo must be 'em' or 'sgd', got %r" % (options.algo,))
    if options.iters < 0:
        raise ValueError("iters must be >= 0, got %r" % (options.iters,))
    if options.algo == "em" and not isinstance(scorer, TabularScorer):
        raise TypeError("algo 'em' needs the tabular scorer; use 'sgd' instead")
    trace = []
    for _ in range(options.iters):
        if options.algo == "em":
            scorer, loglik = em_step(grammar, scorer, sentences)
        else:
            grad, loglik = _gradient_and_loglik(grammar, scorer, sentences)
            scorer = _axpy_scorer(scorer, options.learning_rate, grad)
        trace.append(loglik)
    if isinstance(scorer, TabularScorer):
        final_table = rule_table_from_tabular(grammar, scorer)
    else:
        final_table = rule_table_from_trilinear(grammar, scorer)
    trace.append(corpus_log_likelihood(grammar, final_table, sentences))
    return TrainResult(scorer=scorer, trace=trace)
