"""Parameterizations that score rules, and the normalized tables they induce.

Probability model per nonterminal i >= 1, factorized so every local choice is
a proper distribution:

  family   when both the unary and ternary families are live, the unary one
           gets mass sigmoid(split_logit_i) and the ternary one the rest;
           a single live family gets all the mass
  unary    V_i -> a          emit a ~ softmax over the vocabulary
  ternary  V_i -> V_j a V_k  pick (j, k) ~ softmax over live child pairs,
                             emit a ~ the same per-nonterminal emission row

The emission row is shared by both families: a ternary expansion emits the
parent's token too, so P(a | V_i) exists for every usable i even under the
leaf-only emission policy.

"Live" applies derivability masking: a structurally legal pair whose j (!= 0)
or k cannot derive any terminal string gets probability exactly 0, and the
remaining pairs renormalize.  Without that, grammars with dead branches would
leak mass into parses that can never terminate; with it, the table is a
proper distribution over finite parse trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GrammarDegenerateError
from .grammar import Grammar, require_non_degenerate, validate_grammar
from .parse_tree import ParseTree

NEG_INF = float("-inf")


@dataclass
class TabularScorer:
    """One free logit per rule: the direct parameterization."""

    emit_logits: np.ndarray  # (m-1, vocab); row r scores nonterminal r+1
    child_logits: tuple  # len m; child_logits[i] aligns with child_set(i)
    split_logits: np.ndarray  # (m-1,); sigmoid -> unary-family share

    def copy(self):
        return TabularScorer(
            emit_logits=self.emit_logits.copy(),
            child_logits=tuple(arr.copy() for arr in self.child_logits),
            split_logits=self.split_logits.copy(),
        )


@dataclass
class TrilinearScorer:
    """Low-rank parameterization through per-nonterminal embeddings.

    Emission logits for V_i are w_out @ embeddings[i].  A child pair (j, k)
    under parent i scores p.l + p.r + l.r where p = w_parent @ h_i,
    l = w_left @ h_j, r = w_right @ h_k.
    """

    embeddings: np.ndarray  # (m, hidden)
    w_out: np.ndarray  # (vocab, hidden)
    w_parent: np.ndarray  # (hidden, hidden)
    w_left: np.ndarray  # (hidden, hidden)
    w_right: np.ndarray  # (hidden, hidden)
    split_logits: np.ndarray  # (m-1,)

    @property
    def hidden_dim(self) -> int:
        return self.embeddings.shape[1]

    def copy(self):
        return TrilinearScorer(
            embeddings=self.embeddings.copy(),
            w_out=self.w_out.copy(),
            w_parent=self.w_parent.copy(),
            w_left=self.w_left.copy(),
            w_right=self.w_right.copy(),
            split_logits=self.split_logits.copy(),
        )


def init_tabular(grammar: Grammar, seed=0, scale=1.0) -> TabularScorer:
    rng = np.random.default_rng(seed)
    m = grammar.node_count
    emit = scale * rng.standard_normal((m - 1, grammar.vocab_size))
    child = tuple(
        scale * rng.standard_normal(len(grammar.child_set(i))) for i in range(m)
    )
    return TabularScorer(emit, child, np.zeros(m - 1))


def init_trilinear(grammar: Grammar, hidden_dim=16, seed=0) -> TrilinearScorer:
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be >= 1, got %r" % (hidden_dim,))
    rng = np.random.default_rng(seed)
    m = grammar.node_count
    scale = 1.0 / np.sqrt(hidden_dim)
    return TrilinearScorer(
        embeddings=rng.standard_normal((m, hidden_dim)) * scale,
        w_out=rng.standard_normal((grammar.vocab_size, hidden_dim)),
        w_parent=rng.standard_normal((hidden_dim, hidden_dim)) * scale,
        w_left=rng.standard_normal((hidden_dim, hidden_dim)) * scale,
        w_right=rng.standard_normal((hidden_dim, hidden_dim)) * scale,
        split_logits=np.zeros(m - 1),
    )


def _log_softmax(v):
    shift = v - np.max(v)
    return shift - np.log(np.sum(np.exp(shift)))


def log_sigmoid(x) -> float:
    return -np.logaddexp(0.0, -x)


class RuleTable:
    """Normalized log-probability view of (grammar, scorer).

    Besides the per-nonterminal distributions it keeps a flat listing of the
    live ternary rules (sorted by parent, child_set order within a parent)
    that the charts reduce over; masked pairs are dropped from the flat view
    but keep their -inf slot in pair_logprob.
    """

    def __init__(self, grammar, emit_logprob, pair_logprob, emit_choice_logprob, child_choice_logprob):
        self.grammar = grammar
        self.emit_logprob = emit_logprob  # (m, vocab), row 0 all -inf
        self.pair_logprob = pair_logprob  # tuple len m, aligned with child_set(i)
        self.emit_choice_logprob = emit_choice_logprob  # (m,)
        self.child_choice_logprob = child_choice_logprob  # (m,)

        parents = []
        lefts = []
        rights = []
        logprobs = []
        pair_pos = []
        for i in range(grammar.node_count):
            choice = child_choice_logprob[i]
            for idx, (j, k) in enumerate(grammar.child_set(i)):
                lp = choice + pair_logprob[i][idx]
                if lp == NEG_INF:
                    continue
                parents.append(i)
                lefts.append(j)
                rights.append(k)
                logprobs.append(lp)
                pair_pos.append(idx)
        self.rule_parent = np.array(parents, dtype=np.int64)
        self.rule_left = np.array(lefts, dtype=np.int64)
        self.rule_right = np.array(rights, dtype=np.int64)
        self.rule_logprob = np.array(logprobs, dtype=np.float64)
        self.rule_pair_pos = np.array(pair_pos, dtype=np.int64)

        # contiguous per-parent groups for reduceat-style accumulation
        starts = []
        group_parents = []
        for pos, parent in enumerate(parents):
            if not group_parents or group_parents[-1] != parent:
                group_parents.append(parent)
                starts.append(pos)
        self.group_parents = np.array(group_parents, dtype=np.int64)
        self.group_starts = np.array(starts, dtype=np.int64)

        by_parent = [[] for _ in range(grammar.node_count)]
        for pos in range(len(parents)):
            by_parent[parents[pos]].append(
                (pair_pos[pos], lefts[pos], rights[pos], logprobs[pos])
            )
        self.rules_by_parent = tuple(tuple(rules) for rules in by_parent)

    @property
    def node_count(self) -> int:
        return self.grammar.node_count

    @property
    def vocab_size(self) -> int:
        return self.grammar.vocab_size

    @property
    def rule_count(self) -> int:
        return len(self.rule_parent)

    def rules_of(self, parent):
        """Live rules of one parent: (pair_pos, j, k, logprob) tuples where
        logprob already includes the ternary-family choice factor."""
        return self.rules_by_parent[parent]


def _normalize(grammar, raw_emit, raw_child, split_logits) -> RuleTable:
    """Shared normalization path: raw logits (any real values) in, proper
    log-distributions out, with derivability masking applied."""
    report = validate_grammar(grammar)
    m = grammar.node_count
    vocab = grammar.vocab_size
    emit_logprob = np.full((m, vocab), NEG_INF)
    emit_choice = np.full(m, NEG_INF)
    child_choice = np.full(m, NEG_INF)
    pair_logprob = []
    for i in range(m):
        pairs = grammar.child_set(i)
        if not pairs:
            pair_logprob.append(np.empty(0, dtype=np.float64))
        else:
            live = np.array([report.live_pair(grammar, i, p) for p in pairs], dtype=bool)
            out = np.full(len(pairs), NEG_INF)
            if live.any():
                out[live] = _log_softmax(np.asarray(raw_child[i], dtype=np.float64)[live])
            pair_logprob.append(out)
        if i == 0:
            continue
        has_emit = grammar.can_emit(i)
        has_child = bool(len(pairs)) and np.isfinite(pair_logprob[i]).any()
        if has_emit or has_child:
            emit_logprob[i] = _log_softmax(np.asarray(raw_emit[i], dtype=np.float64))
        if has_emit and has_child:
            s = float(split_logits[i - 1])
            emit_choice[i] = log_sigmoid(s)
            child_choice[i] = log_sigmoid(-s)
        elif has_emit:
            emit_choice[i] = 0.0
        elif has_child:
            child_choice[i] = 0.0
    return RuleTable(grammar, emit_logprob, tuple(pair_logprob), emit_choice, child_choice)


def rule_table_from_tabular(grammar: Grammar, scorer: TabularScorer) -> RuleTable:
    m = grammar.node_count
    if scorer.emit_logits.shape != (m - 1, grammar.vocab_size):
        raise ValueError(
            "emit_logits shape %r does not match grammar (%d, %d)"
            % (scorer.emit_logits.shape, m - 1, grammar.vocab_size)
        )
    raw_emit = [None] + [scorer.emit_logits[i - 1] for i in range(1, m)]
    return _normalize(grammar, raw_emit, scorer.child_logits, scorer.split_logits)


def rule_table_from_trilinear(grammar: Grammar, scorer: TrilinearScorer) -> RuleTable:
    m = grammar.node_count
    if scorer.embeddings.shape[0] != m:
        raise ValueError(
            "embeddings rows %d do not match grammar node count %d"
            % (scorer.embeddings.shape[0], m)
        )
    h = scorer.embeddings
    emit_rows = h @ scorer.w_out.T  # (m, vocab)
    parent_vec = h @ scorer.w_parent.T
    left_vec = h @ scorer.w_left.T
    right_vec = h @ scorer.w_right.T
    raw_child = []
    for i in range(m):
        pairs = grammar.child_set(i)
        if not pairs:
            raw_child.append(np.empty(0, dtype=np.float64))
            continue
        js = np.array([j for j, _ in pairs])
        ks = np.array([k for _, k in pairs])
        scores = (
            left_vec[js] @ parent_vec[i]
            + right_vec[ks] @ parent_vec[i]
            + np.einsum("ph,ph->p", left_vec[js], right_vec[ks])
        )
        raw_child.append(scores)
    raw_emit = [None] + [emit_rows[i] for i in range(1, m)]
    return _normalize(grammar, raw_emit, raw_child, scorer.split_logits)


def _draw(rng, log_weights):
    """Inverse-CDF draw over exp(log_weights); deterministic given the rng
    stream, robust to -inf entries."""
    probs = np.exp(np.asarray(log_weights, dtype=np.float64))
    total = probs.sum()
    if not total > 0:
        raise GrammarDegenerateError("no live option to sample from")
    cum = np.cumsum(probs / total)
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(idx, len(cum) - 1)


def sample(grammar: Grammar, table: RuleTable, seed=0) -> ParseTree:
    """Draw one parse tree top-down from the start symbol.

    Always terminates: masked tables only offer expansions whose children can
    reach terminal yields."""
    require_non_degenerate(grammar)
    rng = np.random.default_rng(seed)
    log_prob = 0.0

    def expand(nt):
        nonlocal log_prob
        emit_lp = table.emit_choice_logprob[nt]
        child_lp = table.child_choice_logprob[nt]
        if emit_lp == NEG_INF and child_lp == NEG_INF:
            raise GrammarDegenerateError("sampled into dead nonterminal %d" % nt)
        if child_lp == NEG_INF:
            unary = True
        elif emit_lp == NEG_INF:
            unary = False
        else:
            unary = rng.random() < np.exp(emit_lp)
        if unary:
            token = _draw(rng, table.emit_logprob[nt])
            log_prob += emit_lp + table.emit_logprob[nt, token]
            return (nt, token, None, None)
        pairs = grammar.child_set(nt)
        pidx = _draw(rng, table.pair_logprob[nt])
        j, k = pairs[pidx]
        token = _draw(rng, table.emit_logprob[nt])
        log_prob += child_lp + table.pair_logprob[nt][pidx] + table.emit_logprob[nt, token]
        left = (0, None, None, None) if j == 0 else expand(j)
        right = expand(k)
        return (nt, token, left, right)

    nested = expand(1)
    return ParseTree.from_nested(nested, log_prob)
