"""Randomized cross-checks of the chart/decode implementations against the
enumeration oracle.  This module is the only place the two routes meet; the
oracle itself never imports the chart code.

One instance = one tiny grammar (at most 10 nonterminals), one randomly
initialized scorer (tabular and trilinear alternate), and a batch of
comparisons:

  * the probabilities of all complete trees sum to 1
  * inside log-likelihood == logsumexp over enumerated trees per string,
    including -inf agreement on underivable strings
  * length-conditioned Viterbi scores == enumerated per-length maxima, and
    the reconstructed tree attains its table score
  * best_parse == enumerated argmax tree (structure and log-probability),
    and the best-tree probability share matches the enumeration; strings
    with a single derivation have a share of exactly 1
  * expected emission counts over a sentence sum to its token count

Degenerate draws (possible under leaf-only emission with closure on) are
skipped and replaced; the instance stream cycles through all four policy
combinations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .chart import inside
from .decode import best_parse, decode_length, viterbi_tables
from .grammar import make_grammar, validate_grammar
from .scorers import (
    init_tabular,
    init_trilinear,
    rule_table_from_tabular,
    rule_table_from_trilinear,
)
from .train import expected_counts

NEG_INF = float("-inf")

# (src_len, upsample, depth) with node counts <= 10
_CONFIGS = [
    (1, 1, 0),
    (2, 1, 0),
    (1, 2, 0),
    (3, 1, 0),
    (4, 1, 0),
    (8, 1, 0),
    (1, 1, 1),
    (2, 1, 1),
    (1, 2, 1),
    (3, 1, 1),
    (4, 1, 1),
    (2, 2, 1),
    (1, 1, 2),
    (2, 1, 2),
    (1, 2, 2),
    (1, 1, 3),
]
# leaf-only emission with closure on is only satisfiable without prefix trees
_CONFIGS_DEPTH0 = [c for c in _CONFIGS if c[2] == 0]

_POLICIES = [
    (False, "leaf_only"),
    (False, "all_nodes"),
    (True, "leaf_only"),
    (True, "all_nodes"),
]

_MAX_CHECK_LEN = 6


@dataclass
class SuiteReport:
    instances: int = 0
    skipped_degenerate: int = 0
    policies_seen: set = field(default_factory=set)
    max_deviation: dict = field(default_factory=dict)
    mismatches: list = field(default_factory=list)

    def _bump(self, name, value):
        self.max_deviation[name] = max(self.max_deviation.get(name, 0.0), float(value))

    def worst(self) -> float:
        return max(self.max_deviation.values(), default=0.0)

    def ok(self, tol=1e-9) -> bool:
        return not self.mismatches and self.worst() <= tol


def _abs_diff(report, name, a, b, context):
    if a == NEG_INF and b == NEG_INF:
        report._bump(name, 0.0)
        return
    if a == NEG_INF or b == NEG_INF:
        report.mismatches.append("%s: %r vs %r at %s" % (name, a, b, context))
        return
    report._bump(name, abs(a - b))


def _check_instance(report, grammar, table, rng, context):
    enum = oracle.enumerate_all(grammar, table)
    report._bump("tree_sum", abs(enum.total_logprob))

    derivable_strings = sorted(enum.by_string)
    pick = min(8, len(derivable_strings))
    chosen = [derivable_strings[i] for i in rng.choice(len(derivable_strings), size=pick, replace=False)]
    probes = list(chosen)
    for _ in range(2):
        length = int(rng.integers(1, _MAX_CHECK_LEN + 1))
        probes.append(tuple(int(t) for t in rng.integers(0, grammar.vocab_size, size=length)))

    for tokens in probes:
        got = inside(grammar, table, tokens).root_loglik
        want = oracle.brute_loglik(enum, tokens)
        _abs_diff(report, "inside_vs_enum", got, want, "%s y=%r" % (context, tokens))

    tables = viterbi_tables(grammar, table, _MAX_CHECK_LEN)
    for length in range(1, _MAX_CHECK_LEN + 1):
        want_lp, want_tokens, want_tree = oracle.brute_viterbi(grammar, enum, length)
        got_lp = tables.score(length)
        _abs_diff(report, "viterbi_vs_enum", got_lp, want_lp, "%s L=%d" % (context, length))
        if want_lp == NEG_INF or got_lp == NEG_INF:
            continue
        tree = decode_length(tables, length)
        _abs_diff(
            report,
            "viterbi_attained",
            tree.log_prob,
            got_lp,
            "%s L=%d" % (context, length),
        )
        if tree.tokens != want_tokens or tree.as_nested() != want_tree.nested:
            report.mismatches.append(
                "decode_length tree mismatch at %s L=%d" % (context, length)
            )

    for tokens in chosen[:4]:
        tree = best_parse(grammar, table, tokens)
        want_lp, want_tree = oracle.brute_best_parse(grammar, enum, tokens)
        _abs_diff(
            report, "best_parse_vs_enum", tree.log_prob, want_lp, "%s y=%r" % (context, tokens)
        )
        if tree.as_nested() != want_tree.nested:
            report.mismatches.append("best_parse tree mismatch at %s y=%r" % (context, tokens))
        total = inside(grammar, table, tokens).root_loglik
        share = np.exp(tree.log_prob - total)
        want_share = np.exp(want_lp - oracle.brute_loglik(enum, tokens))
        report._bump("tree_share_vs_enum", abs(share - want_share))
        if enum.string_tree_counts[tokens] == 1:
            report._bump("tree_share_unique", abs(share - 1.0))

    sentence = chosen[0]
    counts = expected_counts(grammar, table, sentence)
    report._bump("emit_count_conservation", abs(counts.emit.sum() - len(sentence)))


def equivalence_suite(instances=200, seed=0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    while report.instances < instances:
        closure, emission = _POLICIES[report.instances % len(_POLICIES)]
        pool = _CONFIGS_DEPTH0 if (closure and emission == "leaf_only") else _CONFIGS
        src_len, upsample, depth = pool[int(rng.integers(0, len(pool)))]
        vocab_size = int(rng.integers(2, 4))
        grammar = make_grammar(
            src_len, upsample, depth, vocab_size, closure=closure, emission=emission
        )
        if validate_grammar(grammar).degenerate:
            report.skipped_degenerate += 1
            continue
        scorer_seed = int(rng.integers(0, 2**31))
        if report.instances % 2 == 0:
            table = rule_table_from_tabular(grammar, init_tabular(grammar, seed=scorer_seed))
            kind = "tabular"
        else:
            hidden = int(rng.integers(2, 6))
            table = rule_table_from_trilinear(
                grammar, init_trilinear(grammar, hidden_dim=hidden, seed=scorer_seed)
            )
            kind = "trilinear"
        context = "cfg=(%d,%d,%d) vocab=%d closure=%s emission=%s scorer=%s seed=%d" % (
            src_len,
            upsample,
            depth,
            vocab_size,
            closure,
            emission,
            kind,
            scorer_seed,
        )
        _check_instance(report, grammar, table, rng, context)
        report.policies_seen.add((closure, emission))
        report.instances += 1
    return report
