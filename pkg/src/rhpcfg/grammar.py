"""Rule structure: which rewrites exist, independent of their probabilities.

Nonterminals are support-tree nodes.  Node 0 derives only the empty string.
For i >= 1 there are two rule families:

  unary    V_i -> a          permitted when the emission policy allows i
  ternary  V_i -> V_j a V_k  permitted when j is inside i's left subtree or
                             j == 0, and k is inside i's right subtree
                             (closure additionally restricts main-chain
                             parents to main-chain k)

Either way the parent contributes exactly one terminal between the yields of
its children, so in-order tree position equals token position.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GrammarDegenerateError
from .support_tree import NO_NODE, SupportTree, build_support_tree

EMISSION_LEAF_ONLY = "leaf_only"
EMISSION_ALL_NODES = "all_nodes"
EMISSION_POLICIES = (EMISSION_LEAF_ONLY, EMISSION_ALL_NODES)


@dataclass(frozen=True)
class GrammarPolicy:
    closure: bool = False
    emission: str = EMISSION_LEAF_ONLY

    def __post_init__(self):
        if self.emission not in EMISSION_POLICIES:
            raise ValueError(
                "emission must be one of %r, got %r" % (EMISSION_POLICIES, self.emission)
            )


class Grammar:
    """Support tree + vocabulary size + policy, with cached rule structure."""

    def __init__(self, tree: SupportTree, vocab_size: int, policy: GrammarPolicy = GrammarPolicy()):
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1, got %r" % (vocab_size,))
        self.tree = tree
        self.vocab_size = int(vocab_size)
        self.policy = policy
        self._child_sets = None
        self._pair_index = None
        self._report = None

    @property
    def node_count(self) -> int:
        return self.tree.node_count

    def can_emit(self, i) -> bool:
        """Whether the unary rule V_i -> a exists."""
        self.tree._check_index(i)
        if i == 0:
            return False
        if self.policy.emission == EMISSION_ALL_NODES:
            return True
        return self.tree.is_leaf(i)

    def _build_child_sets(self):
        tree = self.tree
        closure = self.policy.closure
        sets = []
        for i in range(tree.node_count):
            if i == 0 or tree.right_child[i] == NO_NODE:
                sets.append(())
                continue
            js = {0}
            left = tree.left_child[i]
            if left != NO_NODE:
                lo, hi = tree.subtree_interval(left)
                js.update(range(lo, hi + 1))
            rlo, rhi = tree.subtree_interval(tree.right_child[i])
            pairs = []
            for j in sorted(js):
                for k in range(rlo, rhi + 1):
                    if tree.in_right_reach(k, i, closure):
                        pairs.append((j, k))
            sets.append(tuple(pairs))
        self._child_sets = tuple(sets)
        self._pair_index = tuple(
            {pair: idx for idx, pair in enumerate(pairs)} for pairs in self._child_sets
        )

    def child_set(self, i):
        """Legal (j, k) pairs for ternary expansions of V_i, ascending j then
        ascending k.  Empty for node 0 and for nodes without a right child."""
        if self._child_sets is None:
            self._build_child_sets()
        self.tree._check_index(i)
        return self._child_sets[i]

    def pair_index(self, i, pair) -> int:
        """Position of (j, k) within child_set(i); KeyError when illegal."""
        if self._pair_index is None:
            self._build_child_sets()
        return self._pair_index[i][pair]

    def rule_space_size(self) -> int:
        if self._child_sets is None:
            self._build_child_sets()
        return sum(len(pairs) for pairs in self._child_sets)

    def __repr__(self):
        c = self.tree.config
        return "Grammar(src_len=%d, upsample=%d, depth=%d, vocab=%d, closure=%s, emission=%s)" % (
            c.src_len,
            c.upsample,
            c.depth,
            self.vocab_size,
            "on" if self.policy.closure else "off",
            self.policy.emission,
        )


def make_grammar(
    src_len,
    upsample,
    depth,
    vocab_size,
    closure=False,
    emission=EMISSION_LEAF_ONLY,
) -> Grammar:
    tree = build_support_tree(src_len, upsample, depth)
    return Grammar(tree, vocab_size, GrammarPolicy(closure=closure, emission=emission))


@dataclass
class DerivabilityReport:
    """Per-nonterminal reachability of a terminal yield.

    min_len / max_len are None exactly where derivable is False; node 0 is
    derivable with min_len == max_len == 0 (the empty string).
    """

    derivable: tuple
    min_len: tuple
    max_len: tuple

    @property
    def degenerate(self) -> bool:
        return not self.derivable[1]

    def live_pair(self, grammar, i, pair) -> bool:
        j, k = pair
        if not self.derivable[k]:
            return False
        return j == 0 or self.derivable[j]


def validate_grammar(grammar: Grammar) -> DerivabilityReport:
    """Bottom-up derivability / yield-length analysis.

    Children of any legal pair have strictly smaller subtree intervals than
    the parent, so processing nodes by ascending interval size sees children
    first.  Results are cached on the grammar.
    """
    if grammar._report is not None:
        return grammar._report
    tree = grammar.tree
    count = tree.node_count
    derivable = [False] * count
    min_len = [None] * count
    max_len = [None] * count
    derivable[0] = True
    min_len[0] = 0
    max_len[0] = 0
    order = sorted(range(count), key=lambda i: int(tree.subtree_hi[i] - tree.subtree_lo[i]))
    for i in order:
        if i == 0:
            continue
        best_min = None
        best_max = None
        if grammar.can_emit(i):
            best_min = 1
            best_max = 1
        for j, k in grammar.child_set(i):
            if not derivable[k] or (j != 0 and not derivable[j]):
                continue
            cand_min = min_len[j] + 1 + min_len[k]
            cand_max = max_len[j] + 1 + max_len[k]
            best_min = cand_min if best_min is None else min(best_min, cand_min)
            best_max = cand_max if best_max is None else max(best_max, cand_max)
        derivable[i] = best_min is not None
        min_len[i] = best_min
        max_len[i] = best_max
    report = DerivabilityReport(tuple(derivable), tuple(min_len), tuple(max_len))
    grammar._report = report
    return report


def require_non_degenerate(grammar: Grammar) -> DerivabilityReport:
    report = validate_grammar(grammar)
    if report.degenerate:
        raise GrammarDegenerateError(
            "start symbol derives no terminal string under %r" % (grammar,)
        )
    return report
